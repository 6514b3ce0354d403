#include "levymc/quad.hpp"

#include <array>
#include <cstdlib>

namespace levymc::quad {

namespace {

// 15-point Kronrod nodes/weights with embedded 7-point Gauss rule, on [-1,1].
constexpr std::array<double, 8> kronrod_x = {
    0.991455371120813, 0.949107912342759, 0.864864423359769, 0.741531185599394,
    0.586087235467691, 0.405845151377397, 0.207784955007898, 0.0};
constexpr std::array<double, 8> kronrod_w = {
    0.022935322010529, 0.063092092629979, 0.104790010322250, 0.140653259715525,
    0.169004726639267, 0.190350578064785, 0.204432940075298, 0.209482141084728};
constexpr std::array<double, 4> gauss_w = {
    0.129484966168870, 0.279705391489277, 0.381830050505119, 0.417959183673469};

struct GkResult {
    double value;
    double error;
};

GkResult gk15(const std::function<double(double)>& f, double a, double b) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    double fv[15];
    for (int i = 0; i < 7; ++i) {
        fv[i] = f(c - h * kronrod_x[i]);
        fv[14 - i] = f(c + h * kronrod_x[i]);
    }
    fv[7] = f(c);
    double k = kronrod_w[7] * fv[7];
    double g = gauss_w[3] * fv[7];
    for (int i = 0; i < 7; ++i) {
        k += kronrod_w[i] * (fv[i] + fv[14 - i]);
        if (i % 2 == 1) g += gauss_w[i / 2] * (fv[i] + fv[14 - i]);
    }
    return {k * h, std::fabs((k - g) * h)};
}

double gk_recurse(const std::function<double(double)>& f, double a, double b,
                  double rel_tol, double abs_tol, int depth) {
    const GkResult r = gk15(f, a, b);
    if (r.error <= abs_tol || r.error <= rel_tol * std::fabs(r.value)) return r.value;
    if (depth <= 0) {
        if (r.error > 1e3 * (abs_tol + rel_tol * std::fabs(r.value)))
            throw QuadratureError("gauss_kronrod: no convergence");
        return r.value;
    }
    const double m = 0.5 * (a + b);
    return gk_recurse(f, a, m, rel_tol, abs_tol * 0.5, depth - 1) +
           gk_recurse(f, m, b, rel_tol, abs_tol * 0.5, depth - 1);
}

double simpson_recurse(const std::function<double(double)>& f, double a, double b,
                       double fa, double fm, double fb, double whole, double rel_tol,
                       double abs_tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0) {
        if (std::fabs(delta) > 1e3 * (abs_tol + rel_tol * std::fabs(left + right)))
            throw QuadratureError("adaptive_simpson: no convergence");
        return left + right + delta / 15.0;
    }
    if (std::fabs(delta) <= 15.0 * (abs_tol + rel_tol * std::fabs(left + right)))
        return left + right + delta / 15.0;
    return simpson_recurse(f, a, m, fa, flm, fm, left, rel_tol, abs_tol * 0.5, depth - 1) +
           simpson_recurse(f, m, b, fm, frm, fb, right, rel_tol, abs_tol * 0.5, depth - 1);
}

}  // namespace

double gauss_kronrod(const std::function<double(double)>& f, double a, double b,
                     double rel_tol, double abs_tol, int max_depth) {
    if (a == b) return 0.0;
    return gk_recurse(f, a, b, rel_tol, abs_tol, max_depth);
}

double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double rel_tol, double abs_tol, int max_depth) {
    if (a == b) return 0.0;
    const double fa = f(a);
    const double fb = f(b);
    const double m = 0.5 * (a + b);
    const double fm = f(m);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return simpson_recurse(f, a, b, fa, fm, fb, whole, rel_tol, abs_tol, max_depth);
}

double semi_infinite(const std::function<double(double)>& f, double a, double rel_tol) {
    auto g = [&](double s) {
        const double om = 1.0 - s;
        const double r = a + s / om;
        return f(r) / (om * om);
    };
    // endpoint s=1 is an integrable singularity image; stop just short of it
    return gauss_kronrod(g, 0.0, 1.0 - 1e-14, rel_tol, 1e-300);
}

double series_sum(const std::function<double(int)>& f, double rel_tol, int max_terms) {
    double sum = 0.0;
    double prev = 0.0;
    int flat = 0;
    for (int n = 1; n <= max_terms; ++n) {
        const double term = f(n);
        sum += term;
        if (std::fabs(term) <= rel_tol * std::max(std::fabs(sum), 1e-300)) {
            // require a couple of consecutive negligible terms
            if (++flat >= 3) return sum;
        } else {
            flat = 0;
        }
        if (n > 8 && std::fabs(term) > std::fabs(prev) * 1.0001 && std::fabs(term) > 1e12)
            throw QuadratureError("series_sum: divergent series");
        prev = term;
    }
    throw QuadratureError("series_sum: no convergence");
}

}  // namespace levymc::quad
