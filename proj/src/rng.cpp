#include "levymc/rng.hpp"

namespace levymc {

std::uint64_t PathRng::poisson(double mean) {
    if (!(mean > 0.0)) return 0;
    if (mean < 12.0) {
        // Knuth product method
        const double l = std::exp(-mean);
        std::uint64_t k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= uniform();
        } while (p > l);
        return k - 1;
    }
    // PTRD transformed rejection (Hormann 1993); exact for all means used here.
    const double mu = mean;
    const double smu = std::sqrt(mu);
    const double b = 0.931 + 2.53 * smu;
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double v_r = 0.9277 - 3.6224 / (b - 2.0);

    for (;;) {
        double u;
        double v = uniform();
        if (v <= 0.86 * v_r) {
            u = v / v_r - 0.43;
            const double us = 0.5 - std::fabs(u);
            return std::uint64_t(std::floor((2.0 * a / us + b) * u + mu + 0.445));
        }
        if (v >= v_r) {
            u = uniform() - 0.5;
        } else {
            u = v / v_r - 0.93;
            u = (u < 0 ? -0.5 : 0.5) - u;
            v = uniform() * v_r;
        }
        const double us = 0.5 - std::fabs(u);
        if (us < 0.013 && v > us) continue;
        const double kf = std::floor((2.0 * a / us + b) * u + mu + 0.445);
        if (kf < 0.0) continue;
        v = v * inv_alpha / (a / (us * us) + b);
        const std::uint64_t k = std::uint64_t(kf);
        const double log_pk = kf * std::log(mu) - mu - std::lgamma(kf + 1.0);
        if (k >= 10) {
            if (std::log(v * smu) <= log_pk) return k;
        } else {
            if (std::log(v) <= log_pk) return k;
        }
    }
}

}  // namespace levymc
