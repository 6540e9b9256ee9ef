#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace volstop {

// Counter-based stream RNG (Philox4x32-10).
//
// Every stream is identified by (seed, stream id); draws advance a 64-bit
// counter, never the key. Two consequences the rest of the library relies on:
//   * a stream's output depends only on (seed, id, draw index), so replication
//     k can be handed root(seed).stream(k) and produce identical numbers no
//     matter which thread, or in what order, executes it;
//   * splitting is cheap and collision-resistant: child ids are derived by a
//     64-bit mix of (parent id, child index).
//
// The antithetic() view reflects the stream draw-by-draw (uniforms u -> 1-u,
// gaussians z -> -z) so mirrored paths consume the counter identically.
class RngStream {
public:
    static RngStream root(std::uint64_t seed) { return RngStream(seed, 0); }

    // Child stream; deterministic function of (parent id, index).
    RngStream stream(std::uint64_t index) const {
        return RngStream(seed_, mix64(id_ ^ (0x9E3779B97F4A7C15ULL * (index + 1))));
    }

    RngStream antithetic() const {
        RngStream s = *this;
        s.antithetic_ = !s.antithetic_;
        return s;
    }

    std::uint64_t next_u64() {
        if (!have_cached_) {
            block();
            have_cached_ = true;
            return out_[0];
        }
        have_cached_ = false;
        return out_[1];
    }

    // Uniform on the open interval (0,1); safe for log() and inversion.
    double uniform() {
        double u = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
        if (u <= 0.0) u = 0x1.0p-53;
        if (antithetic_) u = 1.0 - u;
        return u;
    }

    // Standard normal via Box-Muller; two uniforms per draw, no spare cached,
    // so the counter advance per gaussian is fixed.
    double gaussian() {
        double u1 = raw_uniform();
        double u2 = raw_uniform();
        double z = std::sqrt(-2.0 * std::log(u1)) *
                   std::cos(6.283185307179586476925286766559 * u2);
        return antithetic_ ? -z : z;
    }

    // Exponential holding time; rate <= 0 yields +infinity (absorbing state).
    double exponential(double rate) {
        if (rate <= 0.0) return std::numeric_limits<double>::infinity();
        return -std::log(uniform()) / rate;
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t id() const { return id_; }

private:
    RngStream(std::uint64_t seed, std::uint64_t id) : seed_(seed), id_(id) {}

    double raw_uniform() {
        double u = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
        return u <= 0.0 ? 0x1.0p-53 : u;
    }

    static std::uint64_t mix64(std::uint64_t x) {
        // splitmix64 finalizer
        x += 0x9E3779B97F4A7C15ULL;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
        return x ^ (x >> 31);
    }

    static void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
        std::uint64_t p = static_cast<std::uint64_t>(a) * b;
        hi = static_cast<std::uint32_t>(p >> 32);
        lo = static_cast<std::uint32_t>(p);
    }

    void block() {
        constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
        constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
        std::uint32_t c0 = static_cast<std::uint32_t>(counter_);
        std::uint32_t c1 = static_cast<std::uint32_t>(counter_ >> 32);
        std::uint32_t c2 = static_cast<std::uint32_t>(id_);
        std::uint32_t c3 = static_cast<std::uint32_t>(id_ >> 32);
        std::uint32_t k0 = static_cast<std::uint32_t>(seed_);
        std::uint32_t k1 = static_cast<std::uint32_t>(seed_ >> 32);
        for (int round = 0; round < 10; ++round) {
            std::uint32_t hi0, lo0, hi1, lo1;
            mulhilo(M0, c0, hi0, lo0);
            mulhilo(M1, c2, hi1, lo1);
            std::uint32_t n0 = hi1 ^ c1 ^ k0;
            std::uint32_t n1 = lo1;
            std::uint32_t n2 = hi0 ^ c3 ^ k1;
            std::uint32_t n3 = lo0;
            c0 = n0; c1 = n1; c2 = n2; c3 = n3;
            k0 += W0;
            k1 += W1;
        }
        out_[0] = (static_cast<std::uint64_t>(c0) << 32) | c1;
        out_[1] = (static_cast<std::uint64_t>(c2) << 32) | c3;
        ++counter_;
    }

    std::uint64_t seed_;
    std::uint64_t id_;
    std::uint64_t counter_ = 0;
    std::uint64_t out_[2] = {0, 0};
    bool have_cached_ = false;
    bool antithetic_ = false;
};

}  // namespace volstop
