#pragma once

#include <cmath>
#include <cstdint>

namespace volheston {

// Counter-based stream derivation: every (path, purpose, asset, step) tuple
// maps to its own generator state, so draws do not depend on path count,
// block size, or thread layout.

inline std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

enum class StreamPurpose : std::uint64_t {
    gauss_block = 1,
    b_perp = 2,
    jump_gap = 3,
    jump_mark = 4,
    generic = 5,
};

class RngStream {
  public:
    RngStream(std::uint64_t seed, std::uint64_t path, StreamPurpose purpose, std::uint64_t asset = 0,
              std::uint64_t step = 0) {
        std::uint64_t key = seed;
        (void)splitmix64(key);
        key ^= 0xA24BAED4963EE407ULL * (path + 1);
        (void)splitmix64(key);
        key ^= 0x9FB21C651E98DF25ULL * (static_cast<std::uint64_t>(purpose) + 1);
        (void)splitmix64(key);
        key ^= 0xD6E8FEB86659FD93ULL * (asset + 1);
        (void)splitmix64(key);
        key ^= 0xCA5A826395121157ULL * (step + 1);
        for (auto& w : s_) w = splitmix64(key);
        if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
    }

    // xoshiro256++
    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in (0, 1].
    double next_uniform() {
        return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    }

    // Standard normal pairs via the Marsaglia polar method.
    double next_normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * next_uniform() - 1.0;
            v = 2.0 * next_uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        have_spare_ = true;
        return u * f;
    }

    void fill_normals(double* dst, int count) {
        for (int i = 0; i < count; ++i) dst[i] = next_normal();
    }

    double next_exponential(double lambda) { return -std::log(next_uniform()) / lambda; }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::uint64_t s_[4];
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace volheston
