#include "levymc/density.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <nlohmann/json.hpp>

#include "levymc/stats.hpp"

namespace levymc::den {

namespace {

constexpr double kKernelCut = 8.0; // kernel support cutoff in bandwidths

double gauss_kernel(double z2) { return std::exp(-0.5 * z2); }

double kernel_norm(int d) { return std::pow(2.0 * M_PI, -0.5 * d); }

}  // namespace

Chart euclidean_chart(int d) {
    Chart c;
    c.dim = d;
    c.project = [d](const sim::PathState& s) -> std::optional<Eigen::VectorXd> {
        if (!s.alive) return std::nullopt;
        const auto& p = s.point();
        if (p.coords.size() != d) throw std::invalid_argument("euclidean_chart: dimension mismatch");
        return p.coords;
    };
    c.volume_density = [](const Eigen::VectorXd&) { return 1.0; };
    return c;
}

Chart manifold_normal_chart(const geom::Point& origin) {
    Chart c;
    c.dim = origin.manifold.d;
    const geom::Point o = origin;
    c.project = [o](const sim::PathState& s) -> std::optional<Eigen::VectorXd> {
        if (!s.alive) return std::nullopt;
        const geom::Point* p = nullptr;
        if (std::holds_alternative<geom::Point>(s.position))
            p = &s.point();
        else if (std::holds_alternative<geom::Frame>(s.position))
            p = &s.frame().base;
        else
            throw std::invalid_argument("manifold_normal_chart: not a manifold state");
        try {
            return geom::chart_to_normal_coords(*p, o);
        } catch (const geom::ChartError&) {
            return std::nullopt; // antipodal: counted as off-chart
        }
    };
    const geom::Manifold m = origin.manifold;
    c.volume_density = [m](const Eigen::VectorXd& v) {
        return geom::normal_coords_volume_density(m, v);
    };
    return c;
}

Chart so3_log_chart() {
    Chart c;
    c.dim = 3;
    c.project = [](const sim::PathState& s) -> std::optional<Eigen::VectorXd> {
        if (!s.alive) return std::nullopt;
        return lie::chart_coords(s.group());
    };
    c.volume_density = [](const Eigen::VectorXd& v) {
        const double t = v.norm();
        if (t < 1e-6) return 1.0 - t * t / 12.0;
        return 2.0 * (1.0 - std::cos(t)) / (t * t);
    };
    return c;
}

Chart diltrans_slice_chart(int d, long fixed_level) {
    Chart c;
    c.dim = d;
    c.project = [fixed_level, d](const sim::PathState& s) -> std::optional<Eigen::VectorXd> {
        if (!s.alive) return std::nullopt;
        const auto& g = s.group();
        if (g.spec.kind != lie::GroupKind::DilTrans || g.spec.d != d)
            throw std::invalid_argument("diltrans_slice_chart: wrong group");
        if (g.n != fixed_level) return std::nullopt;
        return g.vec;
    };
    const double dens = std::exp(-double(fixed_level) * double(d));
    c.volume_density = [dens](const Eigen::VectorXd&) { return dens; };
    return c;
}

std::size_t Grid::nodes() const {
    std::size_t n = 1;
    for (int s : shape) n *= std::size_t(s);
    return n;
}

Eigen::VectorXd Grid::node(std::size_t flat) const {
    Eigen::VectorXd x(dim());
    for (int k = dim() - 1; k >= 0; --k) {
        const std::size_t s = std::size_t(shape[k]);
        const std::size_t i = flat % s;
        flat /= s;
        x[k] = shape[k] == 1 ? lo[k] : lo[k] + (hi[k] - lo[k]) * double(i) / double(shape[k] - 1);
    }
    return x;
}

double Grid::node_volume() const {
    double v = 1.0;
    for (int k = 0; k < dim(); ++k)
        v *= shape[k] > 1 ? (hi[k] - lo[k]) / double(shape[k] - 1) : 1.0;
    return v;
}

Grid Grid::uniform(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                   const std::vector<int>& shape) {
    Grid g;
    g.lo = lo;
    g.hi = hi;
    g.shape = shape;
    return g;
}

Grid Grid::line(double lo, double hi, int n) {
    Grid g;
    g.lo = Eigen::VectorXd::Constant(1, lo);
    g.hi = Eigen::VectorXd::Constant(1, hi);
    g.shape = {n};
    return g;
}

DensityEstimate kde_density(const std::vector<Eigen::VectorXd>& chart_samples,
                            std::size_t total_count, double bandwidth, const Grid& grid,
                            const Chart& chart) {
    if (!(bandwidth > 0.0)) throw std::invalid_argument("kde_density: bandwidth must be > 0");
    if (total_count < chart_samples.size())
        throw std::invalid_argument("kde_density: total_count below sample count");
    const int d = grid.dim();
    if (d != chart.dim) throw std::invalid_argument("kde_density: chart/grid dimension mismatch");

    DensityEstimate est;
    est.grid = grid;
    est.bandwidth = bandwidth;
    est.sample_count = total_count;
    est.on_chart_count = chart_samples.size();
    est.values.assign(grid.nodes(), 0.0);

    std::size_t overflow = 0;
    const double cut = kKernelCut * bandwidth;
    for (const auto& x : chart_samples) {
        bool inside = true;
        for (int k = 0; k < d; ++k)
            if (x[k] < grid.lo[k] - 1e-12 || x[k] > grid.hi[k] + 1e-12) inside = false;
        if (!inside) ++overflow;
    }
    est.overflow_fraction =
        chart_samples.empty() ? 0.0 : double(overflow) / double(chart_samples.size());

    const double norm = kernel_norm(d) / (double(total_count) * std::pow(bandwidth, d));
    const std::size_t n_nodes = grid.nodes();

    if (d == 1) {
        std::vector<double> xs(chart_samples.size());
        for (std::size_t i = 0; i < chart_samples.size(); ++i) xs[i] = chart_samples[i][0];
        std::sort(xs.begin(), xs.end());
        for (std::size_t g = 0; g < n_nodes; ++g) {
            const double c = grid.node(g)[0];
            auto lo = std::lower_bound(xs.begin(), xs.end(), c - cut);
            auto hi = std::upper_bound(xs.begin(), xs.end(), c + cut);
            double acc = 0.0;
            for (auto it = lo; it != hi; ++it) {
                const double z = (c - *it) / bandwidth;
                acc += gauss_kernel(z * z);
            }
            est.values[g] = acc * norm;
        }
    } else {
        // bucket samples on a cut-sized lattice around the grid box
        const double bsz = cut;
        std::vector<int> bshape(d);
        std::vector<double> blo(d);
        std::size_t nb = 1;
        for (int k = 0; k < d; ++k) {
            blo[k] = grid.lo[k] - cut;
            bshape[k] = int(std::floor((grid.hi[k] + cut - blo[k]) / bsz)) + 1;
            nb *= std::size_t(bshape[k]);
        }
        auto bucket_of = [&](const Eigen::VectorXd& x) -> long {
            long idx = 0;
            for (int k = 0; k < d; ++k) {
                const long b = long(std::floor((x[k] - blo[k]) / bsz));
                if (b < 0 || b >= bshape[k]) return -1;
                idx = idx * bshape[k] + b;
            }
            return idx;
        };
        std::vector<std::vector<std::uint32_t>> buckets(nb);
        for (std::size_t i = 0; i < chart_samples.size(); ++i) {
            const long b = bucket_of(chart_samples[i]);
            if (b >= 0) buckets[std::size_t(b)].push_back(std::uint32_t(i));
        }
        std::vector<int> bidx(d), nidx(d);
        const int neigh = d == 2 ? 9 : 27;
        for (std::size_t g = 0; g < n_nodes; ++g) {
            const Eigen::VectorXd c = grid.node(g);
            for (int k = 0; k < d; ++k) bidx[k] = int(std::floor((c[k] - blo[k]) / bsz));
            double acc = 0.0;
            for (int t = 0; t < neigh; ++t) {
                int tt = t;
                bool ok = true;
                for (int k = 0; k < d; ++k) {
                    nidx[k] = bidx[k] + (tt % 3) - 1;
                    tt /= 3;
                    if (nidx[k] < 0 || nidx[k] >= bshape[k]) ok = false;
                }
                if (!ok) continue;
                long flat = 0;
                for (int k = 0; k < d; ++k) flat = flat * bshape[k] + nidx[k];
                for (std::uint32_t i : buckets[std::size_t(flat)]) {
                    const double z2 = (chart_samples[i] - c).squaredNorm() / (bandwidth * bandwidth);
                    if (z2 < kKernelCut * kKernelCut) acc += gauss_kernel(z2);
                }
            }
            est.values[g] = acc * norm;
        }
    }

    for (auto& v : est.values) v = std::max(v, 0.0);
    // integral against Lebesgue on the chart, then convert values to densities
    // w.r.t. the reference (Riemannian/Haar) measure
    double integral = 0.0;
    for (std::size_t g = 0; g < n_nodes; ++g) {
        integral += est.values[g] * grid.node_volume();
        est.values[g] /= chart.volume_density(grid.node(g));
    }
    est.integral = integral;
    return est;
}

PointEstimate kde_point(const std::vector<Eigen::VectorXd>& chart_samples,
                        std::size_t total_count, double bandwidth,
                        const Eigen::VectorXd& target, const Chart& chart) {
    if (!(bandwidth > 0.0)) throw std::invalid_argument("kde_point: bandwidth must be > 0");
    const int d = int(target.size());
    const double norm = kernel_norm(d) / std::pow(bandwidth, d);
    double s1 = 0.0, s2 = 0.0;
    for (const auto& x : chart_samples) {
        const double z2 = (x - target).squaredNorm() / (bandwidth * bandwidth);
        if (z2 >= kKernelCut * kKernelCut) continue;
        const double k = gauss_kernel(z2) * norm;
        s1 += k;
        s2 += k * k;
    }
    const double n = double(total_count);
    PointEstimate pe;
    const double mean = s1 / n;
    const double var = std::max(s2 / n - mean * mean, 0.0);
    const double vd = chart.volume_density(target);
    pe.value = mean / vd;
    pe.std_error = std::sqrt(var / n) / vd;
    return pe;
}

double robust_scale(const std::vector<Eigen::VectorXd>& samples) {
    if (samples.empty()) return 0.0;
    const int d = int(samples.front().size());
    double prod = 1.0;
    std::vector<double> tmp(samples.size());
    for (int k = 0; k < d; ++k) {
        for (std::size_t i = 0; i < samples.size(); ++i) tmp[i] = samples[i][k];
        auto mid = tmp.begin() + long(tmp.size() / 2);
        std::nth_element(tmp.begin(), mid, tmp.end());
        const double med = *mid;
        for (auto& v : tmp) v = std::fabs(v - med);
        std::nth_element(tmp.begin(), mid, tmp.end());
        prod *= 1.4826 * std::max(*mid, 1e-300);
    }
    return std::pow(prod, 1.0 / d);
}

const char* verdict_name(Verdict v) {
    switch (v) {
        case Verdict::Bounded: return "bounded";
        case Verdict::Diverging: return "diverging";
        case Verdict::Inconclusive: return "inconclusive";
    }
    return "inconclusive";
}

ProbeReport sup_density_scaling(const std::vector<double>& t_grid, const EndpointSampler& sampler,
                                const Grid& probe_region, const Chart& chart, double target_slope,
                                double tol) {
    if (t_grid.size() < 4)
        throw std::invalid_argument("sup_density_scaling: need at least 4 time points");
    ProbeReport rep;
    rep.kind = "sup_density_scaling";
    std::vector<double> log_t, log_sup, weights;
    for (double t : t_grid) {
        std::size_t total = 0;
        const auto samples = sampler(t, total);
        if (samples.size() < 100)
            throw std::invalid_argument("sup_density_scaling: too few on-chart samples");
        const double scale = robust_scale(samples);
        if (!(scale > 1e-12))
            throw std::invalid_argument(
                "sup_density_scaling: degenerate law (absolutely continuous input required)");
        const double bw = 0.4 * scale * std::pow(double(samples.size()), -1.0 / (chart.dim + 4));
        const DensityEstimate est = kde_density(samples, total, bw, probe_region, chart);
        std::size_t arg = 0;
        for (std::size_t g = 1; g < est.values.size(); ++g)
            if (est.values[g] > est.values[arg]) arg = g;
        const double sup = est.values[arg];
        const PointEstimate pe = kde_point(samples, total, bw, probe_region.node(arg), chart);
        log_t.push_back(std::log(t));
        log_sup.push_back(std::log(std::max(sup, 1e-300)));
        const double rel = pe.value > 0 ? pe.std_error / pe.value : 1.0;
        weights.push_back(1.0 / std::max(rel * rel, 1e-12));
        rep.ladder_values.push_back(sup);
        rep.ladder_errors.push_back(pe.std_error);
    }
    const auto fit = stats::fit_line_weighted(log_t, log_sup, weights);
    rep.fitted = fit.slope;
    const double half = 1.96 * fit.slope_stderr;
    rep.ci = {fit.slope - half, fit.slope + half};
    if (2.0 * half > 1.0) {
        rep.verdict = Verdict::Inconclusive;
    } else if (std::fabs(fit.slope - target_slope) <= std::max(tol, half)) {
        rep.verdict = Verdict::Bounded;
    } else if (fit.slope < target_slope - tol) {
        rep.verdict = Verdict::Diverging;
    } else {
        rep.verdict = Verdict::Inconclusive;
    }
    return rep;
}

namespace {

struct LadderPoint {
    double value = 0.0;
    double error = 0.0;
};

// grows the sample budget until the MC error is below 20% of the estimate
LadderPoint ladder_estimate(const LadderSampler& sampler, int rung, std::size_t base_samples,
                            const std::function<LadderPoint(const std::vector<Eigen::VectorXd>&,
                                                            std::size_t)>& eval) {
    std::size_t n = base_samples;
    LadderPoint pt;
    for (int attempt = 0; attempt < 3; ++attempt) {
        std::size_t total = 0;
        const auto samples = sampler(rung, n, total);
        pt = eval(samples, total);
        if (pt.value != 0.0 && pt.error <= 0.2 * std::fabs(pt.value)) return pt;
        n *= 4;
    }
    return pt;
}

}  // namespace

ProbeReport boundedness_probe(const LadderSampler& sampler, const Eigen::VectorXd& target,
                              const std::vector<double>& bandwidth_ladder, const Chart& chart,
                              std::size_t base_samples) {
    if (bandwidth_ladder.size() < 4)
        throw std::invalid_argument("boundedness_probe: ladder needs >= 4 rungs");
    for (std::size_t i = 1; i < bandwidth_ladder.size(); ++i)
        if (!(bandwidth_ladder[i] < bandwidth_ladder[i - 1]))
            throw std::invalid_argument("boundedness_probe: ladder must strictly decrease");

    ProbeReport rep;
    rep.kind = "boundedness_probe";
    for (std::size_t r = 0; r < bandwidth_ladder.size(); ++r) {
        const double bw = bandwidth_ladder[r];
        const auto pt = ladder_estimate(
            sampler, int(r), base_samples,
            [&](const std::vector<Eigen::VectorXd>& samples, std::size_t total) {
                const PointEstimate pe = kde_point(samples, total, bw, target, chart);
                return LadderPoint{pe.value, pe.std_error};
            });
        rep.ladder_values.push_back(pt.value);
        rep.ladder_errors.push_back(pt.error);
    }

    const auto& v = rep.ladder_values;
    const auto& e = rep.ladder_errors;
    bool have_error = true;
    for (std::size_t r = 0; r < v.size(); ++r)
        if (!(v[r] > 0.0) || !(e[r] <= 0.2 * v[r])) have_error = false;

    // summary: slope of log value against log bandwidth (0 when bounded)
    std::vector<double> lx, ly, w;
    for (std::size_t r = 0; r < v.size(); ++r) {
        if (v[r] <= 0.0) continue;
        lx.push_back(std::log(bandwidth_ladder[r]));
        ly.push_back(std::log(v[r]));
        const double rel = e[r] / v[r];
        w.push_back(1.0 / std::max(rel * rel, 1e-12));
    }
    if (lx.size() == v.size()) {
        const auto fit = stats::fit_line_weighted(lx, ly, w);
        rep.fitted = fit.slope;
        const double half = 1.96 * fit.slope_stderr;
        rep.ci = {fit.slope - half, fit.slope + half};
    }

    if (!have_error) {
        rep.verdict = Verdict::Inconclusive;
        return rep;
    }
    bool monotone = true;
    for (std::size_t r = 1; r < v.size(); ++r)
        if (!(v[r] > v[r - 1])) monotone = false;
    const double total_growth = v.back() - v.front();
    const double growth_err = std::sqrt(e.back() * e.back() + e.front() * e.front());
    // A bounded density also drifts up as the bandwidth shrinks (the O(bw^2)
    // smoothing bias at a mode), but those increments collapse like the bw^2
    // differences of the ladder; a genuine blow-up keeps growing. Classify by
    // the last/first increment ratio against the geometric midpoint between
    // the smooth-bias prediction and 1.
    const std::size_t R = v.size();
    const double g_first = v[1] - v[0];
    const double g_last = v[R - 1] - v[R - 2];
    const auto& bw = bandwidth_ladder;
    const double smooth_ratio =
        (bw[R - 2] * bw[R - 2] - bw[R - 1] * bw[R - 1]) / (bw[0] * bw[0] - bw[1] * bw[1]);
    const double collapse_threshold = std::sqrt(std::max(smooth_ratio, 1e-6));
    const bool increments_collapse =
        g_first > 0 && g_last <= collapse_threshold * g_first;
    const bool relative_growth = v.back() > 1.2 * v.front();
    if (monotone && total_growth > 3.0 * growth_err && relative_growth && !increments_collapse) {
        rep.verdict = Verdict::Diverging;
        return rep;
    }
    bool stable = true;
    for (std::size_t r = 1; r < v.size(); ++r) {
        const double err = std::sqrt(e[r] * e[r] + e[r - 1] * e[r - 1]);
        if (std::fabs(v[r] - v[r - 1]) > 3.0 * err) stable = false;
    }
    if (stable || (monotone && increments_collapse) ||
        std::fabs(total_growth) <= std::max(3.0 * growth_err, 0.12 * std::fabs(v.back()))) {
        rep.verdict = Verdict::Bounded;
    } else {
        rep.verdict = Verdict::Inconclusive;
    }
    return rep;
}

ProbeReport derivative_probe(const LadderSampler& sampler, double target,
                             const std::vector<double>& scale_ladder, const Chart& chart,
                             std::size_t base_samples) {
    if (chart.dim != 1) throw std::invalid_argument("derivative_probe: 1-D charts only");
    if (scale_ladder.size() < 4)
        throw std::invalid_argument("derivative_probe: ladder needs >= 4 rungs");
    ProbeReport rep;
    rep.kind = "derivative_probe";
    Eigen::VectorXd p0(1), p1(1);
    for (std::size_t r = 0; r < scale_ladder.size(); ++r) {
        const double h = scale_ladder[r];
        const double bw = 0.5 * h;
        p0[0] = target;
        p1[0] = target - h;
        const auto pt = ladder_estimate(
            sampler, int(r), base_samples,
            [&](const std::vector<Eigen::VectorXd>& samples, std::size_t total) {
                const PointEstimate a = kde_point(samples, total, bw, p0, chart);
                const PointEstimate b = kde_point(samples, total, bw, p1, chart);
                LadderPoint lp;
                lp.value = (a.value - b.value) / h;
                lp.error = std::sqrt(a.std_error * a.std_error + b.std_error * b.std_error) / h;
                return lp;
            });
        rep.ladder_values.push_back(pt.value);
        rep.ladder_errors.push_back(pt.error);
    }
    const auto& v = rep.ladder_values;
    const auto& e = rep.ladder_errors;
    rep.fitted = v.back();
    rep.ci = {v.back() - 3.0 * e.back(), v.back() + 3.0 * e.back()};

    bool decreasing = true, increasing = true;
    for (std::size_t r = 1; r < v.size(); ++r) {
        if (!(v[r] < v[r - 1])) decreasing = false;
        if (!(v[r] > v[r - 1])) increasing = false;
    }
    const double total = v.back() - v.front();
    const double terr = std::sqrt(e.back() * e.back() + e.front() * e.front());
    // same increment-collapse filter as the boundedness probe: a smooth
    // density's slope estimates converge like the h^2 ladder differences, a
    // blow-up keeps going
    const std::size_t R = v.size();
    const double g_first = std::fabs(v[1] - v[0]);
    const double g_last = std::fabs(v[R - 1] - v[R - 2]);
    const auto& h = scale_ladder;
    const double smooth_ratio =
        (h[R - 2] * h[R - 2] - h[R - 1] * h[R - 1]) / (h[0] * h[0] - h[1] * h[1]);
    const bool collapse =
        g_first > 0 && g_last <= std::sqrt(std::max(smooth_ratio, 1e-6)) * g_first;
    if (((decreasing && -total > 3.0 * terr) || (increasing && total > 3.0 * terr)) && !collapse) {
        rep.verdict = Verdict::Diverging;
        return rep;
    }
    bool stable = true;
    for (std::size_t r = 1; r < v.size(); ++r) {
        const double err = std::sqrt(e[r] * e[r] + e[r - 1] * e[r - 1]);
        if (std::fabs(v[r] - v[r - 1]) > 3.0 * err) stable = false;
    }
    rep.verdict = (stable || collapse) ? Verdict::Bounded : Verdict::Inconclusive;
    return rep;
}

ProbeReport invariance_test(const std::vector<Eigen::VectorXd>& original,
                            const std::vector<Eigen::VectorXd>& transformed,
                            double alpha_level) {
    if (original.empty() || transformed.empty())
        throw std::invalid_argument("invariance_test: empty sample");
    const int d = int(original.front().size());
    ProbeReport rep;
    rep.kind = "invariance_test";
    double min_p = 1.0;
    int n_tests = 0;
    auto run = [&](const std::function<double(const Eigen::VectorXd&)>& proj) {
        std::vector<double> a(original.size()), b(transformed.size());
        for (std::size_t i = 0; i < original.size(); ++i) a[i] = proj(original[i]);
        for (std::size_t i = 0; i < transformed.size(); ++i) b[i] = proj(transformed[i]);
        const auto ks = stats::ks_two_sample(std::move(a), std::move(b));
        min_p = std::min(min_p, ks.p_value);
        rep.ladder_values.push_back(ks.statistic);
        rep.ladder_errors.push_back(ks.p_value);
        ++n_tests;
    };
    for (int k = 0; k < d; ++k) run([k](const Eigen::VectorXd& x) { return x[k]; });
    if (d > 1) {
        run([](const Eigen::VectorXd& x) { return x.sum(); });
        run([](const Eigen::VectorXd& x) { return x.norm(); });
    }
    rep.fitted = min_p;
    rep.ci = {min_p, min_p};
    rep.verdict = min_p > alpha_level / n_tests ? Verdict::Bounded : Verdict::Diverging;
    return rep;
}

nlohmann::json probe_to_json(const ProbeReport& p) {
    nlohmann::json j;
    j["kind"] = p.kind;
    j["fitted"] = p.fitted;
    j["ci"] = {p.ci.first, p.ci.second};
    j["verdict"] = verdict_name(p.verdict);
    j["ladder_values"] = p.ladder_values;
    j["ladder_errors"] = p.ladder_errors;
    return j;
}

nlohmann::json density_to_json(const DensityEstimate& d) {
    nlohmann::json j;
    j["bandwidth"] = d.bandwidth;
    j["sample_count"] = d.sample_count;
    j["on_chart_count"] = d.on_chart_count;
    j["overflow_fraction"] = d.overflow_fraction;
    j["integral"] = d.integral;
    j["reference_measure"] = d.reference_measure;
    j["grid"] = {{"lo", std::vector<double>(d.grid.lo.data(), d.grid.lo.data() + d.grid.lo.size())},
                 {"hi", std::vector<double>(d.grid.hi.data(), d.grid.hi.data() + d.grid.hi.size())},
                 {"shape", d.grid.shape}};
    return j;
}

void density_to_csv(const DensityEstimate& d, std::ostream& os) {
    for (int k = 0; k < d.grid.dim(); ++k) os << "c" << k << ",";
    os << "value\n";
    os.precision(17);
    for (std::size_t g = 0; g < d.values.size(); ++g) {
        const Eigen::VectorXd x = d.grid.node(g);
        for (int k = 0; k < d.grid.dim(); ++k) os << x[k] << ",";
        os << d.values[g] << "\n";
    }
}

}  // namespace levymc::den
