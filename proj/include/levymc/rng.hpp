#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

#include <Eigen/Core>

namespace levymc {

// Counter-based seeding: every (master_seed, path_index, stream) triple maps to
// an independent generator state, so parallel path generation is deterministic
// and independent of scheduling order.

struct SplitMix64 {
    std::uint64_t state;
    explicit SplitMix64(std::uint64_t s) : state(s) {}
    std::uint64_t next() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
};

// xoshiro256++ (Blackman & Vigna, public domain reference implementation).
class Xoshiro256pp {
  public:
    using result_type = std::uint64_t;
    Xoshiro256pp() : Xoshiro256pp(0x8d5cu) {}
    explicit Xoshiro256pp(std::uint64_t seed) {
        SplitMix64 sm(seed);
        for (auto& w : s_) w = sm.next();
    }
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~std::uint64_t(0); }
    result_type operator()() {
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

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::uint64_t s_[4];
};

inline std::uint64_t derive_stream_seed(std::uint64_t master, std::uint64_t path, std::uint64_t stream) {
    SplitMix64 sm(master);
    std::uint64_t a = sm.next();
    SplitMix64 sp(a ^ (path * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL));
    std::uint64_t b = sp.next();
    SplitMix64 ss(b ^ (stream * 0x9e3779b97f4a7c15ULL + 1));
    return ss.next();
}

// Per-path generator with the distribution samplers the simulator needs.
class PathRng {
  public:
    PathRng(std::uint64_t master, std::uint64_t path, std::uint64_t stream = 0)
        : eng_(derive_stream_seed(master, path, stream)) {}

    explicit PathRng(std::uint64_t raw_seed) : eng_(raw_seed) {}

    // uniform on (0,1); never returns 0 or 1
    double uniform() {
        const double u = (eng_() >> 11) * 0x1.0p-53;
        return u > 0.0 ? u : 0x1.0p-53;
    }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double th = 2.0 * M_PI * u2;
        cached_ = r * std::sin(th);
        have_cached_ = true;
        return r * std::cos(th);
    }

    double exponential(double rate) { return -std::log(uniform()) / rate; }

    // Exact Poisson: Knuth product method for small means, PTRD (Hormann 1993)
    // transformed rejection for large means.
    std::uint64_t poisson(double mean);

    // uniform direction on S^{dim-1}; dim = 1 gives +-1
    Eigen::VectorXd unit_direction(int dim) {
        Eigen::VectorXd v(dim);
        if (dim == 1) {
            v[0] = (eng_() & 1u) ? 1.0 : -1.0;
            return v;
        }
        double n2 = 0.0;
        do {
            for (int i = 0; i < dim; ++i) v[i] = normal();
            n2 = v.squaredNorm();
        } while (n2 < 1e-300);
        return v / std::sqrt(n2);
    }

    std::uint64_t raw() { return eng_(); }

  private:
    Xoshiro256pp eng_;
    double cached_ = 0.0;
    bool have_cached_ = false;
};

}  // namespace levymc
