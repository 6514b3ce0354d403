#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace levymc::stats {

struct MeanVar {
    double mean = 0.0;
    double var = 0.0;       // sample variance
    double std_error = 0.0; // of the mean
    std::size_t n = 0;
};

MeanVar mean_var(const std::vector<double>& xs);

// Two-sample Kolmogorov-Smirnov. Inputs are sorted internally.
struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
};
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

// One-sample KS against a CDF given as callable.
KsResult ks_one_sample(std::vector<double> a, const std::function<double(double)>& cdf);

// asymptotic Kolmogorov distribution Q(lambda) = P(sup|B| > lambda)
double ks_q(double lambda);

// Ordinary least squares y = intercept + slope*x.
struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_stderr = 0.0; // from residuals, n-2 dof
    double r2 = 0.0;
};
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

// weighted version; w = 1/sigma_i^2, slope_stderr propagated from the weights
LineFit fit_line_weighted(const std::vector<double>& x, const std::vector<double>& y,
                          const std::vector<double>& w);

double pearson(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace levymc::stats
