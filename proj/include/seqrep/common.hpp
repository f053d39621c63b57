#pragma once

#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <algorithm>
#include <bit>
#include <array>
#include <functional>
#include <istream>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace seqrep {

inline constexpr const char* version_string = "1.0.0";

// ---------------------------------------------------------------------------
// Errors. One exception type per failure class so callers can react to the
// class, not to message text.
// ---------------------------------------------------------------------------

struct error : std::runtime_error {
    explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

struct shape_error : error {
    explicit shape_error(const std::string& msg) : error(msg) {}
};
struct invalid_argument : error {
    explicit invalid_argument(const std::string& msg) : error(msg) {}
};
struct invalid_configuration : error {
    explicit invalid_configuration(const std::string& msg) : error(msg) {}
};
struct invalid_mask : error {
    explicit invalid_mask(const std::string& msg) : error(msg) {}
};
struct too_short_input : error {
    explicit too_short_input(const std::string& msg) : error(msg) {}
};
struct io_error : error {
    explicit io_error(const std::string& msg) : error(msg) {}
};
struct numerical_error : error {
    explicit numerical_error(const std::string& msg) : error(msg) {}
};
struct corrupt_checkpoint : error {
    explicit corrupt_checkpoint(const std::string& msg) : error(msg) {}
};
struct corrupt_container : error {
    explicit corrupt_container(const std::string& msg) : error(msg) {}
};
struct version_mismatch : error {
    explicit version_mismatch(const std::string& msg) : error(msg) {}
};
struct incompatible_checkpoint : error {
    explicit incompatible_checkpoint(const std::string& msg) : error(msg) {}
};
struct duplicate_instance : error {
    explicit duplicate_instance(const std::string& msg) : error(msg) {}
};
struct fusion_mismatch : error {
    explicit fusion_mismatch(const std::string& msg) : error(msg) {}
};
struct metadata_conflict : error {
    explicit metadata_conflict(const std::string& msg) : error(msg) {}
};
struct missing_metadata : error {
    explicit missing_metadata(const std::string& msg) : error(msg) {}
};

// ---------------------------------------------------------------------------
// Deterministic RNG. mt19937_64 is fully specified by the standard; the
// real-valued mappings below are our own so that streams are identical on
// every platform (std::uniform_real_distribution is not portable).
// ---------------------------------------------------------------------------

class rng {
public:
    explicit rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // [0, 1)
    double uniform01() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // [0, n)
    std::size_t uniform_index(std::size_t n) {
        return n == 0 ? 0 : std::size_t(next_u64() % n);
    }

    bool bernoulli(double p) { return uniform01() < p; }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = uniform_index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

// splitmix64 finalizer; used to derive stream seeds from (seed, salt) pairs.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// ---------------------------------------------------------------------------
// CRC32 (IEEE, reflected), used by the container and checkpoint formats.
// ---------------------------------------------------------------------------

namespace detail {
inline const std::array<std::uint32_t, 256>& crc32_table() {
    static const std::array<std::uint32_t, 256> table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k)
                c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    return table;
}
} // namespace detail

struct crc32_accumulator {
    std::uint32_t state = 0xffffffffu;

    void update(const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        const auto& table = detail::crc32_table();
        for (std::size_t i = 0; i < n; ++i)
            state = table[(state ^ p[i]) & 0xffu] ^ (state >> 8);
    }

    std::uint32_t value() const { return state ^ 0xffffffffu; }
};

inline std::uint32_t crc32(const void* data, std::size_t n) {
    crc32_accumulator acc;
    acc.update(data, n);
    return acc.value();
}

// ---------------------------------------------------------------------------
// Little-endian binary stream helpers. All on-disk formats are
// little-endian regardless of host order.
// ---------------------------------------------------------------------------

namespace binio {

inline void put_bytes(std::ostream& os, const void* p, std::size_t n) {
    os.write(static_cast<const char*>(p), std::streamsize(n));
}

template <class T>
void put_scalar(std::ostream& os, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    if constexpr (sizeof(T) > 1) {
        // hosts we target are little-endian; byte-swap would go here otherwise
        static_assert(std::endian::native == std::endian::little);
    }
    put_bytes(os, buf, sizeof(T));
}

inline void put_string(std::ostream& os, const std::string& s) {
    put_scalar<std::uint32_t>(os, std::uint32_t(s.size()));
    put_bytes(os, s.data(), s.size());
}

inline void get_bytes(std::istream& is, void* p, std::size_t n, const char* what) {
    is.read(static_cast<char*>(p), std::streamsize(n));
    if (std::size_t(is.gcount()) != n)
        throw io_error(std::string("unexpected end of file while reading ") + what);
}

template <class T>
T get_scalar(std::istream& is, const char* what) {
    unsigned char buf[sizeof(T)];
    get_bytes(is, buf, sizeof(T), what);
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
}

inline std::string get_string(std::istream& is, const char* what, std::size_t max_len = 1u << 20) {
    auto n = get_scalar<std::uint32_t>(is, what);
    if (n > max_len)
        throw io_error(std::string("implausible string length while reading ") + what);
    std::string s(n, '\0');
    if (n > 0) get_bytes(is, s.data(), n, what);
    return s;
}

} // namespace binio

// ---------------------------------------------------------------------------
// parallel_for: static partition of [0, n) over worker threads. Each item is
// computed independently, so results are identical for any thread count.
// Worker count is capped by the SEQREP_THREADS environment variable.
// ---------------------------------------------------------------------------

inline unsigned max_worker_threads() {
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    if (const char* cap = std::getenv("SEQREP_THREADS")) {
        char* end = nullptr;
        long v = std::strtol(cap, &end, 10);
        if (end != cap && v >= 1) hw = std::min<unsigned>(hw, unsigned(v));
    }
    return hw;
}

inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
    unsigned workers = std::min<std::size_t>(max_worker_threads(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::vector<std::exception_ptr> errors(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < n; i += workers) body(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace seqrep
