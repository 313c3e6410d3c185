#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace uqbench {

namespace detail {

// SplitMix64 finalizer, used both as a seed scrambler and as the stream
// derivation hash.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace detail

// Splittable deterministic random stream: xoshiro256++ running on state
// expanded from a 64-bit key. A child stream's key depends only on
// (parent key, child id), never on how much of the parent has been
// consumed, so streams for (master seed, simulation j, member i) can be
// derived in any order, in any thread, with identical results.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0)
        : RngStream(make_key(detail::mix64(seed), stream_id), KeyTag{}) {}

    // Independent child stream; does not touch this stream's state.
    RngStream derive(std::uint64_t child_id) const {
        return RngStream(make_key(key_, child_id), KeyTag{});
    }

    std::uint64_t key() const { return key_; }

    std::uint64_t next_u64() {
        const std::uint64_t result = detail::rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = detail::rotl(s_[3], 45);
        return result;
    }

    // Uniform on [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Unbiased integer on [0, n) by rejection.
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("RngStream::below: n must be positive");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    bool bernoulli(double p) { return uniform01() < p; }

    // Standard normal draw, polar Box-Muller with one cached spare.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform01() - 1.0;
            v = 2.0 * uniform01() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        has_spare_ = true;
        return u * m;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
    }

private:
    struct KeyTag {};

    RngStream(std::uint64_t key, KeyTag) : key_(key) {
        // Expand the key into four nonzero state words via a SplitMix64 chain.
        std::uint64_t z = key_;
        for (auto& w : s_) w = z = detail::mix64(z);
        if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
    }

    static std::uint64_t make_key(std::uint64_t parent_key, std::uint64_t child_id) {
        return detail::mix64(parent_key ^ detail::mix64(child_id + 0x632be59bd9b4e019ULL));
    }

    std::uint64_t key_ = 0;
    std::uint64_t s_[4] = {};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

struct GaussianParams {
    double mean = 0.0;
    double sd = 1.0;
};

inline void validate(const GaussianParams& p) {
    if (!(p.sd >= 0.0) || !std::isfinite(p.sd) || !std::isfinite(p.mean))
        throw std::invalid_argument("GaussianParams: sd must be finite and >= 0");
}

inline std::vector<double> sample_gaussian(RngStream& rng, const GaussianParams& params,
                                           std::size_t n) {
    validate(params);
    std::vector<double> out(n);
    for (auto& x : out) x = params.mean + params.sd * rng.normal();
    return out;
}

}  // namespace uqbench
