#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "levymc/integrator.hpp"

namespace levymc::den {

// Chart through which endpoint samples become coordinate vectors. project
// returns nullopt for dead paths and off-chart states (both count into the
// mass deficit); volume_density is the density of the reference measure
// (Riemannian / Haar) against Lebesgue in these coordinates.
struct Chart {
    int dim = 1;
    std::function<std::optional<Eigen::VectorXd>(const sim::PathState&)> project;
    std::function<double(const Eigen::VectorXd&)> volume_density;
};

Chart euclidean_chart(int d);
Chart manifold_normal_chart(const geom::Point& origin);
// SO3 in exponential coordinates about a base rotation (Haar reference).
Chart so3_log_chart();
// DilTrans restricted to the n = fixed_level slice; coordinates are y, the
// reference measure the left Haar density e^{-nd} on the slice.
Chart diltrans_slice_chart(int d, long fixed_level);

struct Grid {
    Eigen::VectorXd lo, hi;
    std::vector<int> shape; // nodes per axis

    int dim() const { return int(shape.size()); }
    std::size_t nodes() const;
    Eigen::VectorXd node(std::size_t flat) const;
    double node_volume() const; // product of spacings

    static Grid uniform(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                        const std::vector<int>& shape);
    static Grid line(double lo, double hi, int n);
};

struct DensityEstimate {
    Grid grid;
    std::vector<double> values; // density w.r.t. the chart's reference measure
    double bandwidth = 0.0;
    std::size_t sample_count = 0;   // total paths, dead included
    std::size_t on_chart_count = 0;
    double overflow_fraction = 0.0; // alive samples outside the grid box
    double integral = 0.0;          // numerical integral over the grid
    std::string reference_measure;
};

// Gaussian-product KDE of chart samples on the grid. total_count is the full
// path count: dead paths thin the estimate instead of renormalising it, so the
// integral deficit equals the killed mass.
DensityEstimate kde_density(const std::vector<Eigen::VectorXd>& chart_samples,
                            std::size_t total_count, double bandwidth, const Grid& grid,
                            const Chart& chart);

struct PointEstimate {
    double value = 0.0;
    double std_error = 0.0;
};
PointEstimate kde_point(const std::vector<Eigen::VectorXd>& chart_samples,
                        std::size_t total_count, double bandwidth,
                        const Eigen::VectorXd& target, const Chart& chart);

// robust scale (1.4826 * median absolute deviation) per coordinate, collapsed
// to a scalar by the geometric mean; heavy tails keep plain std unusable here
double robust_scale(const std::vector<Eigen::VectorXd>& samples);

enum class Verdict { Bounded, Diverging, Inconclusive };
const char* verdict_name(Verdict v);

struct ProbeReport {
    std::string kind;
    double fitted = 0.0; // exponent or slope
    std::pair<double, double> ci{0.0, 0.0};
    Verdict verdict = Verdict::Inconclusive;
    std::vector<double> ladder_values;
    std::vector<double> ladder_errors;
};

// Samples at horizon t (chart coords) plus the total path count behind them.
using EndpointSampler =
    std::function<std::vector<Eigen::VectorXd>(double t, std::size_t& total_count)>;

// Fits log sup-density against log t over the probe region and compares the
// slope with target_slope (-d/alpha in the flat stable calibration).
ProbeReport sup_density_scaling(const std::vector<double>& t_grid,
                                const EndpointSampler& sampler, const Grid& probe_region,
                                const Chart& chart, double target_slope, double tol);

// Sampler for ladder probes: rung-indexed so implementations can scale the
// path count; must be deterministic in (rung, n_request).
using LadderSampler = std::function<std::vector<Eigen::VectorXd>(
    int rung, std::size_t n_request, std::size_t& total_count)>;

ProbeReport boundedness_probe(const LadderSampler& sampler, const Eigen::VectorXd& target,
                              const std::vector<double>& bandwidth_ladder, const Chart& chart,
                              std::size_t base_samples);

// 1-D: finite-difference slope (p(x0) - p(x0 - h))/h at shrinking h; verdict
// Diverging with a negative fitted slope detects Dp -> -infinity at x0-.
ProbeReport derivative_probe(const LadderSampler& sampler, double target,
                             const std::vector<double>& scale_ladder, const Chart& chart,
                             std::size_t base_samples);

// Two-sample KS between original and transformed chart coordinates on every
// coordinate projection, Bonferroni-corrected; pass is reported as Bounded.
ProbeReport invariance_test(const std::vector<Eigen::VectorXd>& original,
                            const std::vector<Eigen::VectorXd>& transformed,
                            double alpha_level = 0.01);

nlohmann::json probe_to_json(const ProbeReport& p);
nlohmann::json density_to_json(const DensityEstimate& d);
void density_to_csv(const DensityEstimate& d, std::ostream& os);

}  // namespace levymc::den
