#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "seqrep/common.hpp"
#include "seqrep/tensor.hpp"

namespace seqrep {

enum class cell_kind { gru, lstm };

inline const char* to_string(cell_kind k) { return k == cell_kind::gru ? "gru" : "lstm"; }

inline cell_kind cell_kind_from_string(const std::string& s) {
    if (s == "gru") return cell_kind::gru;
    if (s == "lstm") return cell_kind::lstm;
    throw invalid_argument("unknown cell kind '" + s + "' (expected gru or lstm)");
}

// Gate order within the parameter arrays.
// GRU:  0 = update (z), 1 = reset (r), 2 = candidate
// LSTM: 0 = input, 1 = forget, 2 = output, 3 = candidate
inline std::size_t gate_count(cell_kind k) { return k == cell_kind::gru ? 3 : 4; }

inline const char* gate_name(cell_kind k, std::size_t g) {
    static const char* gru_names[] = {"update", "reset", "candidate"};
    static const char* lstm_names[] = {"input", "forget", "output", "candidate"};
    return k == cell_kind::gru ? gru_names[g] : lstm_names[g];
}

// One recurrent layer (one direction): per-gate input weights w (hidden x input),
// recurrent weights u (hidden x hidden) and biases b (hidden).
template <class S>
struct rnn_cell_params {
    cell_kind kind = cell_kind::gru;
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 0;
    std::vector<tensor<S>> w;
    std::vector<tensor<S>> u;
    std::vector<tensor<S>> b;

    static rnn_cell_params zeros(cell_kind kind, std::size_t input_dim, std::size_t hidden_dim) {
        rnn_cell_params p;
        p.kind = kind;
        p.input_dim = input_dim;
        p.hidden_dim = hidden_dim;
        const std::size_t gates = gate_count(kind);
        for (std::size_t g = 0; g < gates; ++g) {
            p.w.push_back(tensor<S>::matrix(hidden_dim, input_dim));
            p.u.push_back(tensor<S>::matrix(hidden_dim, hidden_dim));
            p.b.push_back(tensor<S>::vector_of(hidden_dim));
        }
        return p;
    }

    void check_consistent() const {
        const std::size_t gates = gate_count(kind);
        if (w.size() != gates || u.size() != gates || b.size() != gates)
            throw shape_error("rnn cell: wrong gate tensor count");
        for (std::size_t g = 0; g < gates; ++g) {
            if (w[g].rows() != hidden_dim || w[g].cols() != input_dim ||
                u[g].rows() != hidden_dim || u[g].cols() != hidden_dim ||
                b[g].size() != hidden_dim)
                throw shape_error("rnn cell: gate tensor shape inconsistent with dims");
        }
    }
};

// uniform(-r, r) with r = sqrt(6 / (fan_in + fan_out)); biases zero except the
// LSTM forget gate bias, which starts at 1.
template <class S>
rnn_cell_params<S> init_cell_params(cell_kind kind, std::size_t input_dim,
                                    std::size_t hidden_dim, rng& gen) {
    auto p = rnn_cell_params<S>::zeros(kind, input_dim, hidden_dim);
    auto fill_uniform = [&gen](tensor<S>& t, std::size_t fan_in, std::size_t fan_out) {
        const double r = std::sqrt(6.0 / double(fan_in + fan_out));
        for (S& v : t.data) v = S(gen.uniform(-r, r));
    };
    for (std::size_t g = 0; g < gate_count(kind); ++g) {
        fill_uniform(p.w[g], input_dim, hidden_dim);
        fill_uniform(p.u[g], hidden_dim, hidden_dim);
    }
    if (kind == cell_kind::lstm) p.b[1].fill(S(1));
    return p;
}

// ---------------------------------------------------------------------------
// Single-step forward with optional tape recording for the backward pass.
// ---------------------------------------------------------------------------

template <class S>
struct cell_step_tape {
    std::vector<S> x;
    std::vector<S> h_prev;
    // GRU: g0 = z, g1 = r, g2 = candidate, aux = r (.) h_prev
    // LSTM: g0 = i, g1 = f, g2 = o, g3 = g, aux = tanh(c_new), c_prev, c_new
    std::vector<S> g0, g1, g2, g3;
    std::vector<S> aux;
    std::vector<S> c_prev;
    std::vector<S> c_new;
};

template <class S>
void gate_preactivation(const rnn_cell_params<S>& p, std::size_t g, const S* x,
                        const S* h, std::vector<S>& out) {
    out.assign(p.b[g].data.begin(), p.b[g].data.end());
    matvec_accumulate(p.w[g], x, out.data());
    matvec_accumulate(p.u[g], h, out.data());
}

// h' = (1-z) (.) h + z (.) tanh(W x + U (r (.) h) + b)
template <class S>
void gru_step(const rnn_cell_params<S>& p, const S* x, const S* h, S* h_out,
              cell_step_tape<S>* tape) {
    const std::size_t n = p.hidden_dim;
    std::vector<S> z, r, cand, rh(n);
    gate_preactivation(p, 0, x, h, z);
    gate_preactivation(p, 1, x, h, r);
    for (std::size_t i = 0; i < n; ++i) {
        z[i] = sigmoid(z[i]);
        r[i] = sigmoid(r[i]);
        rh[i] = r[i] * h[i];
    }
    gate_preactivation(p, 2, x, rh.data(), cand);
    for (std::size_t i = 0; i < n; ++i) cand[i] = std::tanh(cand[i]);
    for (std::size_t i = 0; i < n; ++i)
        h_out[i] = (S(1) - z[i]) * h[i] + z[i] * cand[i];
    if (tape) {
        tape->x.assign(x, x + p.input_dim);
        tape->h_prev.assign(h, h + n);
        tape->g0 = std::move(z);
        tape->g1 = std::move(r);
        tape->g2 = std::move(cand);
        tape->aux = std::move(rh);
    }
}

// c' = f (.) c + i (.) g ; h' = o (.) tanh(c')
template <class S>
void lstm_step(const rnn_cell_params<S>& p, const S* x, const S* h, const S* c,
               S* h_out, S* c_out, cell_step_tape<S>* tape) {
    const std::size_t n = p.hidden_dim;
    std::vector<S> gi, gf, go, gg;
    gate_preactivation(p, 0, x, h, gi);
    gate_preactivation(p, 1, x, h, gf);
    gate_preactivation(p, 2, x, h, go);
    gate_preactivation(p, 3, x, h, gg);
    std::vector<S> tc(n);
    for (std::size_t i = 0; i < n; ++i) {
        gi[i] = sigmoid(gi[i]);
        gf[i] = sigmoid(gf[i]);
        go[i] = sigmoid(go[i]);
        gg[i] = std::tanh(gg[i]);
        c_out[i] = gf[i] * c[i] + gi[i] * gg[i];
        tc[i] = std::tanh(c_out[i]);
        h_out[i] = go[i] * tc[i];
    }
    if (tape) {
        tape->x.assign(x, x + p.input_dim);
        tape->h_prev.assign(h, h + n);
        tape->c_prev.assign(c, c + n);
        tape->c_new.assign(c_out, c_out + n);
        tape->g0 = std::move(gi);
        tape->g1 = std::move(gf);
        tape->g2 = std::move(go);
        tape->g3 = std::move(gg);
        tape->aux = std::move(tc);
    }
}

// Convenience single-call forms with dimension validation.
template <class S>
std::vector<S> gru_cell_forward(const std::vector<S>& x, const std::vector<S>& h,
                                const rnn_cell_params<S>& p) {
    if (p.kind != cell_kind::gru) throw shape_error("gru_cell_forward: params are not GRU");
    p.check_consistent();
    if (x.size() != p.input_dim || h.size() != p.hidden_dim)
        throw shape_error("gru_cell_forward: input/hidden dimension mismatch");
    std::vector<S> out(p.hidden_dim);
    gru_step(p, x.data(), h.data(), out.data(), static_cast<cell_step_tape<S>*>(nullptr));
    return out;
}

template <class S>
std::pair<std::vector<S>, std::vector<S>> lstm_cell_forward(const std::vector<S>& x,
                                                            const std::vector<S>& h,
                                                            const std::vector<S>& c,
                                                            const rnn_cell_params<S>& p) {
    if (p.kind != cell_kind::lstm) throw shape_error("lstm_cell_forward: params are not LSTM");
    p.check_consistent();
    if (x.size() != p.input_dim || h.size() != p.hidden_dim || c.size() != p.hidden_dim)
        throw shape_error("lstm_cell_forward: input/hidden/cell dimension mismatch");
    std::vector<S> ho(p.hidden_dim), co(p.hidden_dim);
    lstm_step(p, x.data(), h.data(), c.data(), ho.data(), co.data(),
              static_cast<cell_step_tape<S>*>(nullptr));
    return {std::move(ho), std::move(co)};
}

// ---------------------------------------------------------------------------
// Single-step backward. Gradients are accumulated into `grads`, dx and
// dh_prev (and dc_prev for LSTM).
// ---------------------------------------------------------------------------

template <class S>
void gru_step_backward(const rnn_cell_params<S>& p, const cell_step_tape<S>& t,
                       const S* dh_out, rnn_cell_params<S>& grads, S* dx, S* dh_prev) {
    const std::size_t n = p.hidden_dim;
    const std::vector<S>& z = t.g0;
    const std::vector<S>& r = t.g1;
    const std::vector<S>& cand = t.g2;
    std::vector<S> da_cand(n), da_z(n), da_r(n), drh(n);
    for (std::size_t i = 0; i < n; ++i) {
        const S dz = dh_out[i] * (cand[i] - t.h_prev[i]);
        const S dcand = dh_out[i] * z[i];
        dh_prev[i] += dh_out[i] * (S(1) - z[i]);
        da_cand[i] = dcand * (S(1) - cand[i] * cand[i]);
        da_z[i] = dz * z[i] * (S(1) - z[i]);
    }
    // candidate preactivation consumed x and r (.) h_prev
    outer_accumulate(grads.w[2], da_cand.data(), t.x.data());
    outer_accumulate(grads.u[2], da_cand.data(), t.aux.data());
    for (std::size_t i = 0; i < n; ++i) grads.b[2][i] += da_cand[i];
    matvec_transposed_accumulate(p.w[2], da_cand.data(), dx);
    std::fill(drh.begin(), drh.end(), S(0));
    matvec_transposed_accumulate(p.u[2], da_cand.data(), drh.data());
    for (std::size_t i = 0; i < n; ++i) {
        dh_prev[i] += drh[i] * r[i];
        const S dr = drh[i] * t.h_prev[i];
        da_r[i] = dr * r[i] * (S(1) - r[i]);
    }
    outer_accumulate(grads.w[1], da_r.data(), t.x.data());
    outer_accumulate(grads.u[1], da_r.data(), t.h_prev.data());
    for (std::size_t i = 0; i < n; ++i) grads.b[1][i] += da_r[i];
    matvec_transposed_accumulate(p.w[1], da_r.data(), dx);
    matvec_transposed_accumulate(p.u[1], da_r.data(), dh_prev);
    outer_accumulate(grads.w[0], da_z.data(), t.x.data());
    outer_accumulate(grads.u[0], da_z.data(), t.h_prev.data());
    for (std::size_t i = 0; i < n; ++i) grads.b[0][i] += da_z[i];
    matvec_transposed_accumulate(p.w[0], da_z.data(), dx);
    matvec_transposed_accumulate(p.u[0], da_z.data(), dh_prev);
}

template <class S>
void lstm_step_backward(const rnn_cell_params<S>& p, const cell_step_tape<S>& t,
                        const S* dh_out, const S* dc_out, rnn_cell_params<S>& grads,
                        S* dx, S* dh_prev, S* dc_prev) {
    const std::size_t n = p.hidden_dim;
    const std::vector<S>& gi = t.g0;
    const std::vector<S>& gf = t.g1;
    const std::vector<S>& go = t.g2;
    const std::vector<S>& gg = t.g3;
    const std::vector<S>& tc = t.aux;
    std::vector<S> da(4 * n);
    S* da_i = da.data();
    S* da_f = da.data() + n;
    S* da_o = da.data() + 2 * n;
    S* da_g = da.data() + 3 * n;
    for (std::size_t i = 0; i < n; ++i) {
        const S do_ = dh_out[i] * tc[i];
        const S dc = dc_out[i] + dh_out[i] * go[i] * (S(1) - tc[i] * tc[i]);
        dc_prev[i] += dc * gf[i];
        const S di = dc * gg[i];
        const S df = dc * t.c_prev[i];
        const S dg = dc * gi[i];
        da_i[i] = di * gi[i] * (S(1) - gi[i]);
        da_f[i] = df * gf[i] * (S(1) - gf[i]);
        da_o[i] = do_ * go[i] * (S(1) - go[i]);
        da_g[i] = dg * (S(1) - gg[i] * gg[i]);
    }
    const S* das[4] = {da_i, da_f, da_o, da_g};
    for (std::size_t g = 0; g < 4; ++g) {
        outer_accumulate(grads.w[g], das[g], t.x.data());
        outer_accumulate(grads.u[g], das[g], t.h_prev.data());
        for (std::size_t i = 0; i < n; ++i) grads.b[g][i] += das[g][i];
        matvec_transposed_accumulate(p.w[g], das[g], dx);
        matvec_transposed_accumulate(p.u[g], das[g], dh_prev);
    }
}

// ---------------------------------------------------------------------------
// One layer over a sequence. `reversed` runs the same cell back-to-front over
// the valid prefix (used by bidirectional encoders). Output rows beyond the
// valid prefix hold the carried state (forward) or zeros (reversed); neither
// is ever consumed by a masked consumer.
// ---------------------------------------------------------------------------

template <class S>
struct rnn_layer_run {
    tensor<S> hidden;             // T x H
    std::vector<S> final_hidden;  // state after the last processed step
    std::vector<S> final_cell;    // LSTM only
    std::vector<cell_step_tape<S>> tape;  // per processed step, processing order
    std::size_t valid_len = 0;
    bool reversed = false;
};

template <class S>
rnn_layer_run<S> run_rnn_layer(const rnn_cell_params<S>& p, const tensor<S>& inputs,
                               std::size_t valid_len, bool reversed, bool with_tape) {
    if (inputs.cols() != p.input_dim)
        throw shape_error("rnn layer: input dim " + std::to_string(inputs.cols()) +
                          " does not match cell input dim " + std::to_string(p.input_dim));
    const std::size_t T = inputs.rows(), H = p.hidden_dim;
    rnn_layer_run<S> run;
    run.hidden = tensor<S>::matrix(T, H);
    run.valid_len = valid_len;
    run.reversed = reversed;
    if (with_tape) run.tape.resize(valid_len);
    std::vector<S> h(H, S(0)), c(H, S(0)), h_next(H), c_next(H);
    for (std::size_t s = 0; s < valid_len; ++s) {
        const std::size_t t = reversed ? valid_len - 1 - s : s;
        const S* x = inputs.data.data() + t * inputs.cols();
        cell_step_tape<S>* tp = with_tape ? &run.tape[s] : nullptr;
        if (p.kind == cell_kind::gru) {
            gru_step(p, x, h.data(), h_next.data(), tp);
        } else {
            lstm_step(p, x, h.data(), c.data(), h_next.data(), c_next.data(), tp);
            c.swap(c_next);
        }
        h.swap(h_next);
        std::copy(h.begin(), h.end(), run.hidden.data.begin() + t * H);
    }
    if (!reversed) {
        for (std::size_t t = valid_len; t < T; ++t)
            std::copy(h.begin(), h.end(), run.hidden.data.begin() + t * H);
    }
    run.final_hidden = std::move(h);
    if (p.kind == cell_kind::lstm) run.final_cell = std::move(c);
    return run;
}

// Backward over one layer run. d_hidden is the gradient w.r.t. the layer's
// full T x H output; d_final (optional) is an extra gradient on the final
// state. Returns the gradient w.r.t. the layer inputs; parameter gradients
// accumulate into `grads`.
template <class S>
tensor<S> backward_rnn_layer(const rnn_cell_params<S>& p, const rnn_layer_run<S>& run,
                             const tensor<S>& d_hidden, const S* d_final,
                             rnn_cell_params<S>& grads) {
    const std::size_t T = d_hidden.rows(), H = p.hidden_dim, k = run.valid_len;
    tensor<S> d_inputs = tensor<S>::matrix(T, p.input_dim);
    std::vector<S> dh_carry(H, S(0)), dc_carry(H, S(0)), dh_total(H);
    if (d_final)
        for (std::size_t i = 0; i < H; ++i) dh_carry[i] += d_final[i];
    if (!run.reversed) {
        // rows at and beyond the valid prefix replicate the final state
        for (std::size_t t = k; t < T; ++t)
            for (std::size_t i = 0; i < H; ++i) dh_carry[i] += d_hidden.at(t, i);
    }
    for (std::size_t s = k; s-- > 0;) {
        const std::size_t t = run.reversed ? k - 1 - s : s;
        for (std::size_t i = 0; i < H; ++i) dh_total[i] = dh_carry[i] + d_hidden.at(t, i);
        std::fill(dh_carry.begin(), dh_carry.end(), S(0));
        S* dx = d_inputs.data.data() + t * p.input_dim;
        if (p.kind == cell_kind::gru) {
            gru_step_backward(p, run.tape[s], dh_total.data(), grads, dx, dh_carry.data());
        } else {
            std::vector<S> dc_prev(H, S(0));
            lstm_step_backward(p, run.tape[s], dh_total.data(), dc_carry.data(), grads, dx,
                               dh_carry.data(), dc_prev.data());
            dc_carry.swap(dc_prev);
        }
    }
    return d_inputs;
}

// ---------------------------------------------------------------------------
// Multi-layer forward over a masked sequence. The mask must be a contiguous
// true-prefix; masked steps carry the previous state unchanged.
// ---------------------------------------------------------------------------

inline std::size_t mask_prefix_length(const std::vector<bool>& mask) {
    std::size_t k = 0;
    while (k < mask.size() && mask[k]) ++k;
    for (std::size_t t = k; t < mask.size(); ++t)
        if (mask[t]) throw invalid_mask("mask is not a contiguous true-prefix");
    return k;
}

template <class S>
struct rnn_forward_result {
    std::vector<tensor<S>> hidden;             // per layer, T x H
    std::vector<std::vector<S>> final_hidden;  // per layer
    std::vector<std::vector<S>> final_cell;    // per layer (LSTM)
};

template <class S>
rnn_forward_result<S> rnn_forward(const tensor<S>& sequence,
                                  const std::vector<rnn_cell_params<S>>& layers,
                                  const std::vector<bool>& mask) {
    if (layers.empty()) throw invalid_argument("rnn_forward: no layers");
    if (mask.size() != sequence.rows())
        throw shape_error("rnn_forward: mask length does not match sequence length");
    const std::size_t k = mask_prefix_length(mask);
    std::size_t expected = sequence.cols();
    for (const auto& layer : layers) {
        layer.check_consistent();
        if (layer.input_dim != expected)
            throw shape_error("rnn_forward: layer input dim mismatch");
        expected = layer.hidden_dim;
    }
    rnn_forward_result<S> out;
    const tensor<S>* input = &sequence;
    for (const auto& layer : layers) {
        auto run = run_rnn_layer(layer, *input, k, /*reversed=*/false, /*with_tape=*/false);
        out.hidden.push_back(std::move(run.hidden));
        out.final_hidden.push_back(std::move(run.final_hidden));
        out.final_cell.push_back(std::move(run.final_cell));
        input = &out.hidden.back();
    }
    return out;
}

} // namespace seqrep
