#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace contra {

// Counter-based splittable generator (splitmix64 streams). Every stochastic
// step in the project draws from an Rng derived from one root seed, so runs
// are reproducible end to end; derive() gives statistically independent
// streams for sub-tasks without sharing mutable state.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(mix(seed ^ 0x9e3779b97f4a7c15ull)) {}

    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    static std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
        return mix(a ^ (mix(b) + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2)));
    }

    static Rng derive(std::uint64_t root, std::uint64_t stream) {
        return Rng(hash_combine(root, stream));
    }

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // (0, 1]
    double uniform_pos() {
        return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; the second draw of each pair is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform_pos();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    void normal_fill(double* out, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) out[i] = normal();
    }

    // Uniform integer in [0, n); n must be > 0.
    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i)
            std::swap(v[i - 1], v[below(i)]);
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Hash of a double vector's bit pattern; used to derive per-query seeds from
// conditioning points (e.g. regenerating PCP samples at the same x).
inline std::uint64_t hash_doubles(const double* v, std::size_t n) {
    std::uint64_t h = 0x84222325cbf29ce4ull;
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t bits;
        static_assert(sizeof(double) == sizeof(std::uint64_t));
        __builtin_memcpy(&bits, &v[i], sizeof(bits));
        h = Rng::hash_combine(h, bits);
    }
    return h;
}

}  // namespace contra
