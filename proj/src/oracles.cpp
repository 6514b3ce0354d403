#include "levymc/oracles.hpp"

#include <cmath>
#include <stdexcept>

#include "levymc/quad.hpp"

namespace levymc::oracle {

double isotropic_psi_coefficient(int d, double alpha) {
    if (!(alpha > 0.0 && alpha < 2.0)) throw std::invalid_argument("alpha must be in (0,2)");
    // int_0^inf (1 - cos v) v^(-1-alpha) dv = pi / (2 Gamma(1+alpha) sin(pi alpha/2))
    const double k1 = M_PI / (2.0 * std::tgamma(1.0 + alpha) * std::sin(M_PI * alpha / 2.0));
    // sphere average E|theta_1|^alpha = Gamma((a+1)/2) Gamma(d/2) / (Gamma(1/2) Gamma((a+d)/2))
    const double avg = std::tgamma((alpha + 1.0) / 2.0) * std::tgamma(d / 2.0) /
                       (std::tgamma(0.5) * std::tgamma((alpha + double(d)) / 2.0));
    return k1 * avg;
}

double cms_symmetric_stable(double alpha, PathRng& rng) {
    const double v = M_PI * (rng.uniform() - 0.5);
    const double w = rng.exponential(1.0);
    if (std::fabs(alpha - 1.0) < 1e-12) return std::tan(v);
    const double t1 = std::sin(alpha * v) / std::pow(std::cos(v), 1.0 / alpha);
    const double t2 = std::pow(std::cos(v - alpha * v) / w, (1.0 - alpha) / alpha);
    return t1 * t2;
}

double kanter_positive_stable(double a, PathRng& rng) {
    if (!(a > 0.0 && a < 1.0)) throw std::invalid_argument("kanter: index must be in (0,1)");
    const double th = M_PI * rng.uniform();
    const double w = rng.exponential(1.0);
    const double num = std::pow(std::sin(a * th), a) * std::pow(std::sin((1.0 - a) * th), 1.0 - a);
    const double afn = std::pow(num / std::sin(th), 1.0 / (1.0 - a));
    return afn * std::pow(w, -(1.0 - a) / a);
}

Eigen::VectorXd isotropic_stable_vector(double alpha, int d, double c, PathRng& rng) {
    if (!(c >= 0.0)) throw std::invalid_argument("isotropic_stable_vector: c must be >= 0");
    Eigen::VectorXd x = Eigen::VectorXd::Zero(d);
    if (c == 0.0) return x;
    const double sigma = std::pow(c, 1.0 / alpha);
    if (d == 1) {
        x[0] = sigma * cms_symmetric_stable(alpha, rng);
        return x;
    }
    const double a = kanter_positive_stable(alpha / 2.0, rng);
    const double s = sigma * std::sqrt(2.0 * a);
    for (int i = 0; i < d; ++i) x[i] = s * rng.normal();
    return x;
}

double stable_density_at_zero(double alpha, int d, double c) {
    const double surface = 2.0 * std::pow(M_PI, d / 2.0) / std::tgamma(d / 2.0);
    return std::pow(2.0 * M_PI, -d) * surface * std::tgamma(double(d) / alpha) *
           std::pow(c, -double(d) / alpha) / alpha;
}

double stable_density_1d(double x, double alpha, double c) {
    // (1/pi) int_0^inf cos(sx) e^{-c s^alpha} ds, cut once the envelope dies
    const double s_max = std::pow(46.0 / c, 1.0 / alpha);
    auto f = [&](double s) { return std::cos(s * x) * std::exp(-c * std::pow(s, alpha)); };
    return quad::gauss_kronrod(f, 0.0, s_max, 1e-10, 1e-14) / M_PI;
}

double stable_cdf_1d(double x, double alpha, double c) {
    const double s_max = std::pow(46.0 / c, 1.0 / alpha);
    auto f = [&](double s) {
        const double sc = s * x;
        const double sinc = std::fabs(sc) < 1e-8 ? x : std::sin(sc) / s;
        return sinc * std::exp(-c * std::pow(s, alpha));
    };
    return 0.5 + quad::gauss_kronrod(f, 0.0, s_max, 1e-10, 1e-14) / M_PI;
}

double dilation_pair_integral(int n, double alpha, int d, double rel_check) {
    const double q = std::exp(-double(n) * alpha) - 1.0;
    const double p = -double(d) / alpha;
    auto f = [&](double s) { return (1.0 - s) * std::pow(1.0 + s * q, p); };
    const double a = quad::gauss_kronrod(f, 0.0, 1.0, 1e-10, 1e-300);
    const double b = quad::adaptive_simpson(f, 0.0, 1.0, 1e-10, 1e-300);
    if (std::fabs(a - b) > rel_check * std::max(std::fabs(a), std::fabs(b)))
        throw quad::QuadratureError("dilation_pair_integral: quadrature rules disagree");
    return a;
}

}  // namespace levymc::oracle
