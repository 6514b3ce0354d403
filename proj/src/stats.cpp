#include "levymc/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace levymc::stats {

MeanVar mean_var(const std::vector<double>& xs) {
    MeanVar mv;
    mv.n = xs.size();
    if (mv.n == 0) return mv;
    double s = 0.0;
    for (double x : xs) s += x;
    mv.mean = s / double(mv.n);
    double ss = 0.0;
    for (double x : xs) {
        const double d = x - mv.mean;
        ss += d * d;
    }
    mv.var = mv.n > 1 ? ss / double(mv.n - 1) : 0.0;
    mv.std_error = mv.n > 1 ? std::sqrt(mv.var / double(mv.n)) : 0.0;
    return mv;
}

double ks_q(double lambda) {
    if (lambda < 1e-8) return 1.0;
    double q = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
        q += term;
        if (std::fabs(term) < 1e-14) break;
    }
    return std::clamp(q, 0.0, 1.0);
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = double(a.size());
    const double nb = double(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::fabs(double(i) / na - double(j) / nb));
    }
    KsResult r;
    r.statistic = d;
    const double ne = std::sqrt(na * nb / (na + nb));
    r.p_value = ks_q((ne + 0.12 + 0.11 / ne) * d);
    return r;
}

KsResult ks_one_sample(std::vector<double> a, const std::function<double(double)>& cdf) {
    if (a.empty()) throw std::invalid_argument("ks_one_sample: empty sample");
    std::sort(a.begin(), a.end());
    const double n = double(a.size());
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double f = cdf(a[i]);
        d = std::max(d, std::fabs(double(i + 1) / n - f));
        d = std::max(d, std::fabs(f - double(i) / n));
    }
    KsResult r;
    r.statistic = d;
    const double ne = std::sqrt(n);
    r.p_value = ks_q((ne + 0.12 + 0.11 / ne) * d);
    return r;
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> w(x.size(), 1.0);
    return fit_line_weighted(x, y, w);
}

LineFit fit_line_weighted(const std::vector<double>& x, const std::vector<double>& y,
                          const std::vector<double>& w) {
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n || w.size() != n)
        throw std::invalid_argument("fit_line: need >= 2 points of equal length");
    double sw = 0, sx = 0, sy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sw += w[i];
        sx += w[i] * x[i];
        sy += w[i] * y[i];
    }
    const double xbar = sx / sw;
    const double ybar = sy / sw;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += w[i] * (x[i] - xbar) * (x[i] - xbar);
        sxy += w[i] * (x[i] - xbar) * (y[i] - ybar);
    }
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = ybar - f.slope * xbar;
    double ssr = 0, sst = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = y[i] - (f.intercept + f.slope * x[i]);
        ssr += w[i] * e * e;
        sst += w[i] * (y[i] - ybar) * (y[i] - ybar);
    }
    f.r2 = sst > 0 ? 1.0 - ssr / sst : 1.0;
    if (n > 2) {
        f.slope_stderr = std::sqrt(std::max(ssr / double(n - 2), 0.0) / sxx);
    } else {
        f.slope_stderr = std::sqrt(1.0 / sxx); // weights are 1/sigma^2
    }
    // never report less than the weight-propagated floor
    f.slope_stderr = std::max(f.slope_stderr, std::sqrt(1.0 / sxx) * 1e-12);
    return f;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n) throw std::invalid_argument("pearson: bad input");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= double(n);
    my /= double(n);
    double sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx <= 0 || syy <= 0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace levymc::stats
