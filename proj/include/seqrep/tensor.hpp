#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <vector>

#include "seqrep/common.hpp"

namespace seqrep {

// Dense row-major tensor. The training stack instantiates S = float; the
// finite-difference verification path instantiates S = double.
template <class S>
struct tensor {
    std::vector<std::size_t> shape;
    std::vector<S> data;

    tensor() = default;

    explicit tensor(std::vector<std::size_t> shp, S fill = S(0))
        : shape(std::move(shp)),
          data(std::accumulate(shape.begin(), shape.end(), std::size_t(1),
                               std::multiplies<>()),
               fill) {}

    static tensor matrix(std::size_t rows, std::size_t cols, S fill = S(0)) {
        return tensor({rows, cols}, fill);
    }
    static tensor vector_of(std::size_t n, S fill = S(0)) { return tensor({n}, fill); }

    std::size_t size() const { return data.size(); }
    std::size_t rows() const { return shape.size() == 2 ? shape[0] : (shape.empty() ? 0 : shape[0]); }
    std::size_t cols() const { return shape.size() == 2 ? shape[1] : 1; }

    S& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
    S at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

    S& operator[](std::size_t i) { return data[i]; }
    S operator[](std::size_t i) const { return data[i]; }

    bool same_shape(const tensor& other) const { return shape == other.shape; }

    void fill(S v) { std::fill(data.begin(), data.end(), v); }

    bool all_finite() const {
        for (S v : data)
            if (!std::isfinite(double(v))) return false;
        return true;
    }
};

template <class S>
void require_same_shape(const tensor<S>& a, const tensor<S>& b, const char* what) {
    if (!a.same_shape(b)) {
        std::ostringstream os;
        os << what << ": shape mismatch (" << a.size() << " vs " << b.size() << " elements)";
        throw shape_error(os.str());
    }
}

// y += M x, with M of shape (rows x cols), x of length cols, y of length rows.
template <class S>
void matvec_accumulate(const tensor<S>& m, const S* x, S* y) {
    const std::size_t r = m.rows(), c = m.cols();
    const S* w = m.data.data();
    for (std::size_t i = 0; i < r; ++i) {
        S acc = 0;
        const S* row = w + i * c;
        for (std::size_t j = 0; j < c; ++j) acc += row[j] * x[j];
        y[i] += acc;
    }
}

// y += M^T x, with M of shape (rows x cols), x of length rows, y of length cols.
template <class S>
void matvec_transposed_accumulate(const tensor<S>& m, const S* x, S* y) {
    const std::size_t r = m.rows(), c = m.cols();
    const S* w = m.data.data();
    for (std::size_t i = 0; i < r; ++i) {
        const S xi = x[i];
        if (xi == S(0)) continue;
        const S* row = w + i * c;
        for (std::size_t j = 0; j < c; ++j) y[j] += row[j] * xi;
    }
}

// M += a b^T (outer product accumulation into a (len(a) x len(b)) matrix).
template <class S>
void outer_accumulate(tensor<S>& m, const S* a, const S* b) {
    const std::size_t r = m.rows(), c = m.cols();
    S* w = m.data.data();
    for (std::size_t i = 0; i < r; ++i) {
        const S ai = a[i];
        if (ai == S(0)) continue;
        S* row = w + i * c;
        for (std::size_t j = 0; j < c; ++j) row[j] += ai * b[j];
    }
}

template <class S>
S sigmoid(S v) {
    return v >= S(0) ? S(1) / (S(1) + std::exp(-v))
                     : std::exp(v) / (S(1) + std::exp(v));
}

// ---------------------------------------------------------------------------
// Gradient clipping and Adam. Both operate on parameter lists, i.e. a flat
// sequence of tensors whose order must be stable across calls.
// ---------------------------------------------------------------------------

template <class S>
double global_norm(const std::vector<tensor<S>*>& grads) {
    double sq = 0;
    for (const auto* g : grads)
        for (S v : g->data) sq += double(v) * double(v);
    return std::sqrt(sq);
}

// Scales all gradients by max_norm / ||g|| when the global L2 norm exceeds
// max_norm; identity otherwise.
template <class S>
double clip_gradients(const std::vector<tensor<S>*>& grads, double max_norm) {
    if (max_norm <= 0) throw invalid_argument("clip_gradients: max_norm must be positive");
    double norm = global_norm(grads);
    if (norm > max_norm && norm > 0) {
        const S scale = S(max_norm / norm);
        for (auto* g : grads)
            for (S& v : g->data) v *= scale;
    }
    return norm;
}

struct adam_config {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// First/second moment accumulators, one pair per parameter tensor.
template <class S>
struct optimizer_state {
    adam_config config;
    std::uint64_t step = 0;
    std::vector<tensor<S>> first_moment;
    std::vector<tensor<S>> second_moment;

    void reset(const std::vector<tensor<S>*>& params) {
        step = 0;
        first_moment.clear();
        second_moment.clear();
        for (const auto* p : params) {
            first_moment.emplace_back(p->shape);
            second_moment.emplace_back(p->shape);
        }
    }

    bool matches(const std::vector<tensor<S>*>& params) const {
        if (first_moment.size() != params.size()) return false;
        for (std::size_t i = 0; i < params.size(); ++i)
            if (first_moment[i].shape != params[i]->shape) return false;
        return true;
    }
};

// One Adam update with bias correction. Parameter and gradient lists must be
// index-aligned with the state accumulators.
template <class S>
void adam_step(const std::vector<tensor<S>*>& params,
               const std::vector<tensor<S>*>& grads,
               optimizer_state<S>& state) {
    if (params.size() != grads.size())
        throw shape_error("adam_step: parameter/gradient list size mismatch");
    if (!state.matches(params)) {
        if (state.step == 0 && state.first_moment.empty())
            state.reset(params);
        else
            throw shape_error("adam_step: optimizer state does not match parameter shapes");
    }
    state.step += 1;
    const double t = double(state.step);
    const adam_config& c = state.config;
    const double bc1 = 1.0 - std::pow(c.beta1, t);
    const double bc2 = 1.0 - std::pow(c.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        tensor<S>& p = *params[i];
        const tensor<S>& g = *grads[i];
        require_same_shape(p, g, "adam_step");
        tensor<S>& m = state.first_moment[i];
        tensor<S>& v = state.second_moment[i];
        for (std::size_t k = 0; k < p.size(); ++k) {
            const double gk = double(g[k]);
            const double mk = c.beta1 * double(m[k]) + (1.0 - c.beta1) * gk;
            const double vk = c.beta2 * double(v[k]) + (1.0 - c.beta2) * gk * gk;
            m[k] = S(mk);
            v[k] = S(vk);
            const double mh = mk / bc1;
            const double vh = vk / bc2;
            p[k] = S(double(p[k]) - c.learning_rate * mh / (std::sqrt(vh) + c.epsilon));
        }
    }
}

} // namespace seqrep
