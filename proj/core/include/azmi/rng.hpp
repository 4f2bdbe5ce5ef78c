#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace azmi {

/// Seeded random stream with named substream derivation.
///
/// All project randomness flows from one master seed through named
/// substreams ("sim", "split", "init", "train", "mc", ...). Substream
/// seeds are derived by hashing, so adding draws to one consumer never
/// perturbs the others. Uniform/normal transforms are built on the raw
/// mt19937_64 output, which the standard pins down bit-exactly.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Derive an independent stream for a named consumer.
    static Rng substream(std::uint64_t master_seed, std::string_view name) {
        // FNV-1a over the name, folded into the seed via splitmix64.
        std::uint64_t h = 14695981039346656037ull;
        for (char c : name) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ull;
        }
        return Rng(splitmix64(master_seed ^ h));
    }

    /// Raw 64-bit draw.
    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53-bit resolution.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Integer in [0, n) without modulo bias (n > 0).
    std::uint64_t uniform_index(std::uint64_t n) {
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    /// Standard normal via Box-Muller; the paired value is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    /// Deterministic in-place Fisher-Yates shuffle.
    template <typename Vec>
    void shuffle(Vec& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(uniform_index(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    static std::uint64_t splitmix64(std::uint64_t x);

    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace azmi
