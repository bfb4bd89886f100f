#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <sstream>
#include <string>

#include "walkback/error.hpp"

namespace walkback {

// Deterministic random source. Uniform and normal draws are generated from
// raw mt19937_64 output so that results are bit-identical across standard
// library implementations (std::normal_distribution is not portable).
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : gen_(seed) {}

    // Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    // Uniform on (0, 1]; safe as a log argument.
    double uniform_pos() { return 1.0 - uniform(); }

    // Standard normal via Box-Muller; the second value of each pair is cached.
    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform_pos()));
        const double a = 2.0 * std::numbers::pi * uniform();
        cached_ = r * std::sin(a);
        has_cached_ = true;
        return r * std::cos(a);
    }

    // Uniform integer on {0, .., n-1}, unbiased via rejection.
    std::uint64_t uniform_int(std::uint64_t n) {
        if (n == 0) throw DomainError("uniform_int: n must be positive");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = gen_();
        } while (x >= limit);
        return x % n;
    }

    // Index draw from an (assumed normalized) probability vector.
    std::size_t categorical(std::span<const double> probs) {
        const double u = uniform();
        double acc = 0.0;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            acc += probs[i];
            if (u < acc) return i;
        }
        return probs.size() - 1;
    }

    // One raw engine output; used to derive independent child streams.
    std::uint64_t raw() { return gen_(); }

    // Deterministic child stream for indexed fan-out: children derived from
    // the same (base, index) pair coincide regardless of thread count.
    static Rng child(std::uint64_t base, std::uint64_t index) {
        return Rng(splitmix(base + 0x9E3779B97F4A7C15ull * (index + 1)));
    }

    std::string serialize() const {
        std::ostringstream os;
        os << gen_ << ' ' << (has_cached_ ? 1 : 0) << ' ' << bits(cached_);
        return os.str();
    }

    static Rng deserialize(const std::string& s) {
        Rng r;
        std::istringstream is(s);
        int cached = 0;
        std::uint64_t cache_bits = 0;
        is >> r.gen_ >> cached >> cache_bits;
        if (!is) throw ParseError("rng state: malformed serialization");
        r.has_cached_ = cached != 0;
        r.cached_ = from_bits(cache_bits);
        return r;
    }

    bool operator==(const Rng& o) const {
        return gen_ == o.gen_ && has_cached_ == o.has_cached_ &&
               bits(cached_) == bits(o.cached_);
    }

private:
    static std::uint64_t splitmix(std::uint64_t x) {
        x += 0x9E3779B97F4A7C15ull;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
        return x ^ (x >> 31);
    }
    static std::uint64_t bits(double d) {
        std::uint64_t u;
        static_assert(sizeof(u) == sizeof(d));
        __builtin_memcpy(&u, &d, sizeof(u));
        return u;
    }
    static double from_bits(std::uint64_t u) {
        double d;
        __builtin_memcpy(&d, &u, sizeof(d));
        return d;
    }

    std::mt19937_64 gen_;
    bool has_cached_ = false;
    double cached_ = 0.0;
};

}  // namespace walkback
