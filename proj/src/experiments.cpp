#include "levymc/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "levymc/integrator.hpp"
#include "levymc/oracles.hpp"
#include "levymc/parallel.hpp"
#include "levymc/quad.hpp"
#include "levymc/stats.hpp"
#include "levymc/svg.hpp"

namespace levymc::xp {

namespace {

namespace fs = std::filesystem;

// rng stream ids: 0 = jump skeleton, 1 = integrator thinning, 2..5 scenario use
constexpr std::uint64_t kStreamSkeleton = 0;
constexpr std::uint64_t kStreamScenarioA = 2;
constexpr std::uint64_t kStreamScenarioB = 3;

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), f, a, b, c);
    return buf;
}

nlohmann::json merged_params(const nlohmann::json& defaults, const nlohmann::json& given) {
    nlohmann::json out = defaults;
    if (!given.is_null())
        for (auto it = given.begin(); it != given.end(); ++it) out[it.key()] = it.value();
    return out;
}

levy::LevyMeasureSpec stable_spec(double alpha, int d, double c_r,
                                  std::optional<double> trunc = std::nullopt,
                                  bool pure = false) {
    levy::IsotropicStable k;
    k.alpha = alpha;
    k.dim = d;
    k.radial_density_const = c_r;
    k.truncation_radius = trunc;
    levy::LevyMeasureSpec spec;
    spec.kind = k;
    spec.pure_jump = pure;
    return spec;
}

// p_n = e^{-beta n}, p_{-n} = e^{-sigma n}, truncated at machine precision
levy::LevyMeasureSpec geometric_walk_spec(double beta, double sigma) {
    levy::DiscreteSigned k;
    const int nmax = int(std::ceil(38.0 / std::min(beta, sigma)));
    for (int n = 1; n <= nmax; ++n) {
        const double pp = std::exp(-beta * n);
        const double pm = std::exp(-sigma * n);
        if (pp > 1e-17) k.masses.emplace_back(n, pp);
        if (pm > 1e-17) k.masses.emplace_back(-n, pm);
    }
    levy::LevyMeasureSpec spec;
    spec.kind = k;
    spec.pure_jump = true;
    return spec;
}

void add_criterion(ExperimentResult& res, const std::string& id, bool pass,
                   const std::string& detail) {
    res.criteria.push_back({id, pass, detail});
}

void write_outputs(const ExperimentResult& res, const ExperimentConfig& cfg,
                   const std::vector<std::pair<std::string, std::string>>& extra_files = {}) {
    if (cfg.out_dir.empty()) return;
    fs::create_directories(cfg.out_dir);
    std::ofstream f(fs::path(cfg.out_dir) / "result.json");
    f << res.to_json().dump(2) << "\n";
    for (const auto& [name, content] : extra_files) {
        std::ofstream g(fs::path(cfg.out_dir) / name);
        g << content;
    }
}

double getd(const nlohmann::json& p, const char* key) { return p.at(key).get<double>(); }
std::size_t getn(const nlohmann::json& p, const char* key) {
    return p.at(key).get<std::size_t>();
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    c.scenario = j.at("scenario").get<std::string>();
    if (!has_scenario(c.scenario)) throw ConfigError("unknown scenario: " + c.scenario);
    if (j.contains("params")) c.params = j["params"];
    c.seed = j.value("seed", std::uint64_t(20240501));
    c.threads = j.value("threads", 1u);
    c.out_dir = j.value("out_dir", std::string());
    return c;
}

nlohmann::json ExperimentConfig::to_json() const {
    return {{"scenario", scenario}, {"params", params}, {"seed", seed}, {"threads", threads},
            {"out_dir", out_dir}};
}

bool ExperimentResult::all_pass() const {
    for (const auto& c : criteria)
        if (!c.pass) return false;
    return true;
}

nlohmann::json ExperimentResult::to_json() const {
    nlohmann::ordered_json j;
    j["scenario"] = scenario;
    j["seed"] = seed;
    j["params"] = params;
    j["oracle"] = oracle;
    j["mc"] = mc;
    auto pr = nlohmann::json::array();
    for (const auto& p : probes) pr.push_back(den::probe_to_json(p));
    j["probes"] = pr;
    auto cr = nlohmann::json::array();
    for (const auto& c : criteria)
        cr.push_back({{"id", c.id}, {"pass", c.pass}, {"detail", c.detail}});
    j["criteria"] = cr;
    j["all_pass"] = all_pass();
    return j;
}

// --------------------------------------------------------------------------
// scaling_flat: flat isotropic stable through the full pipeline, sup-density
// log-log slope against -d/alpha.
// --------------------------------------------------------------------------

ExperimentResult run_scaling_flat(const ExperimentConfig& cfg) {
    const auto p = merged_params(default_params("scaling_flat"), cfg.params);
    const int d = p.at("d").get<int>();
    const double alpha = getd(p, "alpha");
    const double c_r = getd(p, "radial_const");
    const double delta = getd(p, "delta");
    const std::size_t paths = getn(p, "paths_per_t");
    const double tol = getd(p, "slope_tol");
    const std::vector<double> t_grid = p.at("t_grid").get<std::vector<double>>();
    if (!(alpha > 0 && alpha < 2) || d < 1 || d > 2)
        throw ConfigError("scaling_flat: need alpha in (0,2), d in {1,2}");

    const auto t0 = std::chrono::steady_clock::now();
    ExperimentResult res;
    res.scenario = "scaling_flat";
    res.params = p;
    res.seed = cfg.seed;

    const auto spec = stable_spec(alpha, d, c_r);
    const levy::PreparedLevySampler sampler(spec, delta);
    sim::CoefficientField field;
    field.kind = sim::EuclideanLinear{"identity" + std::to_string(d), d, d};

    const double psi = c_r * oracle::isotropic_psi_coefficient(d, alpha);
    auto oracle_p0 = nlohmann::json::array();
    for (double t : t_grid) oracle_p0.push_back(oracle::stable_density_at_zero(alpha, d, psi * t));
    res.oracle["p_at_zero"] = oracle_p0;
    res.oracle["target_slope"] = -double(d) / alpha;

    const den::Chart chart = den::euclidean_chart(d);
    const double hw = getd(p, "region_halfwidth");
    const int nodes = p.at("region_nodes").get<int>();
    den::Grid region = den::Grid::uniform(Eigen::VectorXd::Constant(d, -hw),
                                          Eigen::VectorXd::Constant(d, hw),
                                          std::vector<int>(std::size_t(d), nodes));

    std::size_t t_index = 0;
    auto mc_p0 = nlohmann::json::array();
    den::EndpointSampler endpoint_sampler = [&](double t, std::size_t& total) {
        std::vector<Eigen::VectorXd> out(paths);
        const std::uint64_t base = std::uint64_t(t_index) * paths;
        parallel_for_chunks(paths, 4096, cfg.threads, [&](std::size_t, std::size_t b, std::size_t e) {
            levy::JumpSkeleton skel;
            sim::PathState x0;
            x0.position = geom::origin_point(geom::Manifold::euclidean(d));
            for (std::size_t i = b; i < e; ++i) {
                PathRng rng(cfg.seed, base + i, kStreamSkeleton);
                sampler.sample(t, rng, skel);
                PathRng aux(cfg.seed, base + i, 1);
                const sim::SimOutput so = sim::integrate_path(x0, skel, field, aux, nullptr);
                out[i] = so.endpoint.point().coords;
            }
        });
        total = paths;
        ++t_index;
        return out;
    };

    den::ProbeReport probe =
        den::sup_density_scaling(t_grid, endpoint_sampler, region, chart, -double(d) / alpha, tol);
    res.probes.push_back(probe);
    for (std::size_t i = 0; i < t_grid.size(); ++i)
        mc_p0.push_back(probe.ladder_values[i]);
    res.mc["sup_density"] = mc_p0;
    res.mc["fitted_slope"] = probe.fitted;
    res.mc["slope_ci"] = {probe.ci.first, probe.ci.second};

    const double target = -double(d) / alpha;
    const std::string id = p.value("criterion_id", std::string("AC-1"));
    add_criterion(res, id + "-slope", std::fabs(probe.fitted - target) <= tol,
                  fmt("fitted slope %.4f vs target %.4f (tol %.2f)", probe.fitted, target, tol));

    res.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (p.value("delta_stability_check", false)) {
        ExperimentConfig sub = cfg;
        sub.params = p;
        sub.params["delta"] = delta / 2.0;
        sub.params["delta_stability_check"] = false;
        sub.params["criterion_id"] = "SF-delta-half";
        sub.out_dir.clear();
        const ExperimentResult half = run_scaling_flat(sub);
        const double slope_half = half.mc.at("fitted_slope").get<double>();
        const double ci_w = probe.ci.second - probe.ci.first;
        add_criterion(res, "SF-delta-stability",
                      std::fabs(slope_half - probe.fitted) <= std::max(ci_w, 0.05),
                      fmt("slope %.4f at delta/2 vs %.4f (ci width %.4f)", slope_half,
                          probe.fitted, ci_w));
    }

    std::vector<std::pair<std::string, std::string>> files;
    svg::Series s1;
    s1.x = t_grid;
    s1.y = probe.ladder_values;
    files.emplace_back("scaling.svg",
                       svg::line_plot({s1}, "sup density vs t (log-log)", true, true));
    if (!cfg.out_dir.empty()) {
        // full KDE grid at the largest horizon for inspection
        t_index = t_grid.size() - 1;
        std::size_t total = 0;
        const auto samples = endpoint_sampler(t_grid.back(), total);
        const double bw =
            0.4 * den::robust_scale(samples) * std::pow(double(samples.size()), -1.0 / (d + 4));
        auto est = den::kde_density(samples, total, bw, region, chart);
        est.reference_measure = "lebesgue";
        std::ostringstream csv;
        den::density_to_csv(est, csv);
        files.emplace_back("density_endpoint.csv", csv.str());
    }
    write_outputs(res, cfg, files);
    return res;
}

// --------------------------------------------------------------------------
// affine_dilation: X = (Y, N) on the dilation-translation group; Eq-exact
// conditional densities, the A_n quadrature chain, boundedness regimes.
// --------------------------------------------------------------------------

namespace {

struct DilTransSegments {
    std::vector<double> len;   // segment lengths covering [0,1]
    std::vector<long> level;   // N level on each segment
    long final_level = 0;
    double alpha_time = 0.0;   // int_0^1 e^{alpha N_s} ds
};

void n_skeleton_segments(const levy::PreparedLevySampler& nsam, double t, double alpha,
                         PathRng& rng, levy::JumpSkeleton& buf, DilTransSegments& seg) {
    nsam.sample(t, rng, buf);
    seg.len.clear();
    seg.level.clear();
    double prev = 0.0;
    long lvl = 0;
    double at = 0.0;
    for (std::size_t i = 0; i < buf.size(); ++i) {
        const double ti = buf.times[i];
        seg.len.push_back(ti - prev);
        seg.level.push_back(lvl);
        at += (ti - prev) * std::exp(alpha * double(lvl));
        lvl += long(std::llround(buf.mark(i)[0]));
        prev = ti;
    }
    seg.len.push_back(t - prev);
    seg.level.push_back(lvl);
    at += (t - prev) * std::exp(alpha * double(lvl));
    seg.final_level = lvl;
    seg.alpha_time = at;
}

// exact conditional draw of Y_1 given the N segments (psi(u)=|u|^alpha per unit time)
Eigen::VectorXd exact_y_given_n(const DilTransSegments& seg, double alpha, int d, PathRng& rng) {
    Eigen::VectorXd y = Eigen::VectorXd::Zero(d);
    for (std::size_t i = 0; i < seg.len.size(); ++i) {
        if (seg.len[i] <= 0.0) continue;
        y += std::exp(double(seg.level[i])) *
             oracle::isotropic_stable_vector(alpha, d, seg.len[i], rng);
    }
    return y;
}

struct RegimeSpec {
    int d;
    double alpha, beta, sigma;
    std::string target; // "x" (the (0,0) slice) or "y" (the marginal)
    std::string expect; // "", "bounded", "diverging"
    std::string id;
};

}  // namespace

ExperimentResult run_affine_dilation(const ExperimentConfig& cfg) {
    const auto p = merged_params(default_params("affine_dilation"), cfg.params);
    ExperimentResult res;
    res.scenario = "affine_dilation";
    res.params = p;
    res.seed = cfg.seed;

    const double alpha = getd(p, "alpha");
    const double beta = getd(p, "beta");
    const double sigma = getd(p, "sigma");
    const int d = p.at("d").get<int>();
    if (!(alpha > 0 && alpha < 2) || beta <= 0 || sigma <= 0 || d < 1)
        throw ConfigError("affine_dilation: invalid (alpha, beta, sigma, d)");

    // (ii) Eq-exact conditional density vs conditional KDE, skeleton by skeleton
    {
        const std::size_t n_skel = getn(p, "n_skeletons");
        const std::size_t m = getn(p, "paths_per_skeleton");
        const auto nspec = geometric_walk_spec(beta, sigma);
        const levy::PreparedLevySampler nsam(nspec, 0.5);
        const double c_lam = oracle::stable_density_at_zero(alpha, d, 1.0);
        res.oracle["c_lambda"] = c_lam;
        const den::Chart chart = den::euclidean_chart(d);
        bool all_ok = true;
        auto per_skel = nlohmann::json::array();
        levy::JumpSkeleton buf;
        DilTransSegments seg;
        for (std::size_t k = 0; k < n_skel; ++k) {
            PathRng nrng(cfg.seed, k, kStreamScenarioA);
            n_skeleton_segments(nsam, 1.0, alpha, nrng, buf, seg);
            const double exact = c_lam * std::pow(seg.alpha_time, -double(d) / alpha);
            std::vector<Eigen::VectorXd> ys(m);
            parallel_for_chunks(m, 8192, cfg.threads, [&](std::size_t, std::size_t b, std::size_t e) {
                for (std::size_t i = b; i < e; ++i) {
                    PathRng rng(cfg.seed, k * m + i, kStreamScenarioB);
                    ys[i] = exact_y_given_n(seg, alpha, d, rng);
                }
            });
            const double scale = den::robust_scale(ys);
            const double bw = 0.3 * scale * std::pow(double(m), -1.0 / (d + 4));
            const auto pe = den::kde_point(ys, m, bw, Eigen::VectorXd::Zero(d), chart);
            const bool ok = std::fabs(pe.value - exact) <= 3.0 * pe.std_error;
            all_ok = all_ok && ok;
            per_skel.push_back({{"skeleton", k},
                                {"alpha_time", seg.alpha_time},
                                {"exact", exact},
                                {"kde", pe.value},
                                {"kde_sigma", pe.std_error},
                                {"pass", ok}});
        }
        res.mc["conditional_density"] = per_skel;
        const auto n_pass =
            std::count_if(per_skel.begin(), per_skel.end(),
                          [](const nlohmann::json& e) { return e.at("pass").get<bool>(); });
        add_criterion(res, "AC-4", all_ok,
                      fmt("%.0f/%.0f skeletons matched the conditional density at 0 within 3 sigma",
                          double(n_pass), double(n_skel)));
    }

    // (iii) the A_n density chain: quadrature value against the displayed bound
    {
        const double a5 = getd(p, "an_alpha");
        const int d5 = p.at("an_d").get<int>();
        const int nmax = p.at("an_range").get<int>();
        double sum_p = 0.0;
        {
            const auto w = geometric_walk_spec(beta, sigma);
            for (const auto& [n, mass] : std::get<levy::DiscreteSigned>(w.kind).masses)
                sum_p += mass;
        }
        const double c_n = 0.5 * std::exp(-sum_p);
        const double c_lam5 = oracle::stable_density_at_zero(a5, d5, 1.0);
        res.oracle["c_N"] = c_n;
        res.oracle["c_lambda_an"] = c_lam5;
        // Both links of the displayed chain, on computed numbers with no
        // tolerance. The final step carries its honest constant 2^(-d/alpha):
        // the source's "c" is a running constant, and the same-constant
        // reading of the last inequality is numerically false (see the
        // decisions ledger).
        bool ok = true;
        auto rows = nlohmann::json::array();
        const double chain_const = std::pow(2.0, -double(d5) / a5);
        for (int n = 1; n <= nmax; ++n) {
            const double integral = oracle::dilation_pair_integral(n, a5, d5);
            const double pn = std::exp(-beta * n);
            const double pmn = std::exp(-sigma * n);
            const double x = std::exp(-double(n) * a5);
            const double lhs = 2.0 * c_lam5 * c_n * pmn * pn * integral;
            const double mid = c_lam5 * c_n * pmn * pn * x * x *
                               std::pow(1.0 - (1.0 - x) * (1.0 - x), -double(d5) / a5);
            const double rhs = chain_const * c_lam5 * c_n * pmn * pn *
                               std::exp(double(n) * (double(d5) - 2.0 * a5));
            const bool row_ok = lhs >= mid && mid >= rhs;
            ok = ok && row_ok;
            rows.push_back({{"n", n}, {"p_An_00", lhs}, {"mid_bound", mid},
                            {"exp_bound", rhs}, {"pass", row_ok}});
        }
        res.oracle["an_chain"] = rows;
        res.oracle["an_chain_constant"] = chain_const;
        add_criterion(res, "AC-5", ok,
                      fmt("p_An(0,0) >= mid >= 2^(-d/a) c p_-n p_n e^{n(d-2a)} exactly for "
                          "n = 1..%.0f (a=%.2f, d=%.0f)",
                          double(nmax), a5, double(d5)));
    }

    // (iv) boundedness probes across the regimes
    {
        std::vector<RegimeSpec> regimes;
        for (const auto& r : p.at("regimes")) {
            RegimeSpec rs;
            rs.d = r.at("d").get<int>();
            rs.alpha = r.at("alpha").get<double>();
            rs.beta = r.at("beta").get<double>();
            rs.sigma = r.at("sigma").get<double>();
            rs.target = r.at("target").get<std::string>();
            rs.expect = r.value("expect", std::string());
            rs.id = r.value("id", std::string());
            regimes.push_back(rs);
        }
        const std::size_t probe_paths = getn(p, "probe_paths");
        int regime_idx = 0;
        for (const auto& rg : regimes) {
            const auto nspec = geometric_walk_spec(rg.beta, rg.sigma);
            const levy::PreparedLevySampler nsam(nspec, 0.5);
            const bool slice = rg.target == "x";
            const den::Chart chart = den::euclidean_chart(rg.d);
            const std::uint64_t salt =
                std::uint64_t(1000 + regime_idx) * 1000003ULL; // disjoint path space
            den::LadderSampler lsampler = [&, salt](int rung, std::size_t n,
                                                    std::size_t& total) {
                std::vector<std::vector<Eigen::VectorXd>> parts(
                    (n + 8191) / 8192);
                parallel_for_chunks(n, 8192, cfg.threads,
                                    [&](std::size_t chunk, std::size_t b, std::size_t e) {
                    levy::JumpSkeleton buf;
                    DilTransSegments seg;
                    auto& out = parts[chunk];
                    out.reserve(e - b);
                    for (std::size_t i = b; i < e; ++i) {
                        PathRng rng(cfg.seed, salt + std::uint64_t(rung) * 100000000ULL + i,
                                    kStreamScenarioA);
                        n_skeleton_segments(nsam, 1.0, rg.alpha, rng, buf, seg);
                        if (slice && seg.final_level != 0) continue;
                        out.push_back(exact_y_given_n(seg, rg.alpha, rg.d, rng));
                    }
                });
                std::vector<Eigen::VectorXd> all;
                for (auto& pt : parts)
                    for (auto& v : pt) all.push_back(std::move(v));
                total = n;
                return all;
            };
            std::vector<double> ladder = p.at("ladders").at(std::to_string(rg.d))
                                             .get<std::vector<double>>();
            den::ProbeReport probe = den::boundedness_probe(
                lsampler, Eigen::VectorXd::Zero(rg.d), ladder, chart, probe_paths);
            probe.kind = "boundedness:" + rg.target +
                         fmt(" d=%.0f a=%.2f b=%.2f", double(rg.d), rg.alpha, rg.beta) +
                         fmt(" s=%.2f", rg.sigma);
            res.probes.push_back(probe);
            if (!rg.expect.empty()) {
                const bool ok = std::string(den::verdict_name(probe.verdict)) == rg.expect;
                add_criterion(res, rg.id.empty() ? ("AD-regime" + std::to_string(regime_idx))
                                                 : rg.id,
                              ok,
                              "verdict " + std::string(den::verdict_name(probe.verdict)) +
                                  " expected " + rg.expect);
            }
            ++regime_idx;
        }
    }

    // generic-integrator cross-check of the exact Y arm (one-parameter run)
    {
        const std::size_t n = getn(p, "xcheck_paths");
        const double delta = 1e-3;
        const auto drv = stable_spec(alpha, d, 1.0 / oracle::isotropic_psi_coefficient(d, alpha),
                                     std::nullopt, alpha < 1.0);
        const levy::PreparedLevySampler dsam(drv, delta);
        const auto nspec = geometric_walk_spec(beta, sigma);
        const levy::PreparedLevySampler nsam(nspec, 0.5);

        std::vector<double> y_exact(n), y_gen(n);
        parallel_for_chunks(n, 4096, cfg.threads, [&](std::size_t, std::size_t b, std::size_t e) {
            levy::JumpSkeleton nbuf, dbuf;
            DilTransSegments seg;
            for (std::size_t i = b; i < e; ++i) {
                PathRng rng(cfg.seed, 7000000000ULL + i, kStreamScenarioA);
                n_skeleton_segments(nsam, 1.0, alpha, rng, nbuf, seg);
                y_exact[i] = exact_y_given_n(seg, alpha, d, rng)[0];
                // generic arm: left-invariant walk driven by the truncated
                // stable, N applied as group jumps at its skeleton times
                PathRng rng2(cfg.seed, 7000000000ULL + i, kStreamScenarioB);
                dsam.sample(1.0, rng2, dbuf);
                double y = 0.0;
                long lvl = 0;
                std::size_t in = 0, id2 = 0;
                while (id2 < dbuf.size() || in < nbuf.size()) {
                    const double tn = in < nbuf.size() ? nbuf.times[in] : 2.0;
                    const double td = id2 < dbuf.size() ? dbuf.times[id2] : 2.0;
                    if (td < tn) {
                        y += std::exp(double(lvl)) * dbuf.mark(id2)[0];
                        ++id2;
                    } else {
                        lvl += long(std::llround(nbuf.mark(in)[0]));
                        ++in;
                    }
                }
                y_gen[i] = y;
            }
        });
        const auto ks = stats::ks_two_sample(y_exact, y_gen);
        res.mc["xcheck_ks"] = ks.statistic;
        res.mc["xcheck_p"] = ks.p_value;
        add_criterion(res, "AD-integrator-xcheck", ks.p_value > 0.005,
                      fmt("KS %.4f (p %.4f) exact vs generic arm", ks.statistic, ks.p_value));
    }

    write_outputs(res, cfg);
    return res;
}

// --------------------------------------------------------------------------
// killed_halfline: symmetric stable minus a standard Poisson, killed at the
// exit from (-inf, 1); overshoot law and the left derivative at 0.
// --------------------------------------------------------------------------

ExperimentResult run_killed_halfline(const ExperimentConfig& cfg) {
    const auto p = merged_params(default_params("killed_halfline"), cfg.params);
    ExperimentResult res;
    res.scenario = "killed_halfline";
    res.params = p;
    res.seed = cfg.seed;

    const double alpha = getd(p, "alpha");
    const double c_r = getd(p, "radial_const");
    const double delta = getd(p, "delta");
    const double horizon = getd(p, "t");
    const double barrier = getd(p, "barrier");
    if (!(alpha > 0 && alpha < 1)) throw ConfigError("killed_halfline: desk scale needs alpha in (0,1)");

    auto stable = stable_spec(alpha, 1, c_r, std::nullopt, /*pure=*/true);
    levy::LevyMeasureSpec poisson;
    poisson.kind = levy::DiscreteSigned{{{-1, 1.0}}};
    poisson.pure_jump = true;
    const levy::PreparedLevySampler ssam(stable, delta);
    const levy::PreparedLevySampler psam(poisson, 0.5);
    const double ray_coeff = c_r / 2.0; // upward Levy density is ray_coeff * r^(-1-alpha)

    // merged two-component skeleton; marks stay 1-D
    auto sample_merged = [&](PathRng& rng, levy::JumpSkeleton& a, levy::JumpSkeleton& b,
                             levy::JumpSkeleton& out) {
        ssam.sample(horizon, rng, a);
        psam.sample(horizon, rng, b);
        out.horizon = horizon;
        out.cutoff_delta = delta;
        out.mark_dim = 1;
        out.compensator_drift = Eigen::VectorXd::Zero(1);
        out.times.resize(a.size() + b.size());
        out.marks.resize(a.size() + b.size());
        std::size_t ia = 0, ib = 0, k = 0;
        while (ia < a.size() || ib < b.size()) {
            const double ta = ia < a.size() ? a.times[ia] : 2.0 * horizon;
            const double tb = ib < b.size() ? b.times[ib] : 2.0 * horizon;
            if (ta <= tb) {
                out.times[k] = ta;
                out.marks[k] = a.marks[ia];
                ++ia;
            } else {
                out.times[k] = tb;
                out.marks[k] = b.marks[ib];
                ++ib;
            }
            ++k;
        }
    };

    // (i)+(ii) overshoot histogram against the exit-intensity estimator
    {
        const std::size_t n = getn(p, "overshoot_paths");
        const int bins = p.at("bins").get<int>();
        const double ylo = getd(p, "y_lo");
        const double yhi = getd(p, "y_hi");
        const double bw = (yhi - ylo) / bins;

        struct ChunkAcc {
            std::vector<double> obs, est, est_sq;
            std::size_t exits = 0;
            std::size_t neg_overshoot = 0;
        };
        const std::size_t n_chunks = (n + 8191) / 8192;
        std::vector<ChunkAcc> acc(n_chunks);

        parallel_for_chunks(n, 8192, cfg.threads, [&](std::size_t chunk, std::size_t b,
                                                      std::size_t e) {
            auto& a = acc[chunk];
            a.obs.assign(bins, 0.0);
            a.est.assign(bins, 0.0);
            a.est_sq.assign(bins, 0.0);
            levy::JumpSkeleton sa, sb, merged;
            std::vector<double> est_one(bins);
            for (std::size_t i = b; i < e; ++i) {
                PathRng rng(cfg.seed, i, kStreamSkeleton);
                sample_merged(rng, sa, sb, merged);
                double x = 0.0;
                double prev_t = 0.0;
                std::fill(est_one.begin(), est_one.end(), 0.0);
                bool alive = true;
                for (std::size_t k2 = 0; k2 < merged.size() && alive; ++k2) {
                    const double dt = merged.times[k2] - prev_t;
                    // exit-intensity integral over this constant segment
                    for (int bn = 0; bn < bins; ++bn) {
                        const double e0 = ylo + bn * bw - x;
                        const double e1 = e0 + bw;
                        est_one[bn] += dt * ray_coeff / alpha *
                                       (std::pow(e0, -alpha) - std::pow(e1, -alpha));
                    }
                    prev_t = merged.times[k2];
                    x += merged.marks[k2];
                    if (x >= barrier) {
                        alive = false;
                        if (x - barrier <= 0.0) ++a.neg_overshoot;
                        ++a.exits;
                        const int bn = int(std::floor((x - ylo) / bw));
                        if (bn >= 0 && bn < bins) a.obs[bn] += 1.0;
                    }
                }
                if (alive) {
                    const double dt = horizon - prev_t;
                    for (int bn = 0; bn < bins; ++bn) {
                        const double e0 = ylo + bn * bw - x;
                        const double e1 = e0 + bw;
                        est_one[bn] += dt * ray_coeff / alpha *
                                       (std::pow(e0, -alpha) - std::pow(e1, -alpha));
                    }
                }
                for (int bn = 0; bn < bins; ++bn) {
                    a.est[bn] += est_one[bn];
                    a.est_sq[bn] += est_one[bn] * est_one[bn];
                }
            }
        });

        std::vector<double> obs(bins, 0.0), est(bins, 0.0), est_sq(bins, 0.0);
        std::size_t exits = 0, neg = 0;
        for (const auto& a : acc) {
            for (int bn = 0; bn < bins; ++bn) {
                obs[bn] += a.obs[bn];
                est[bn] += a.est[bn];
                est_sq[bn] += a.est_sq[bn];
            }
            exits += a.exits;
            neg += a.neg_overshoot;
        }
        bool bins_ok = true;
        auto rows = nlohmann::json::array();
        for (int bn = 0; bn < bins; ++bn) {
            const double pa = obs[bn] / double(n);
            const double pb = est[bn] / double(n);
            // sigma of the difference: binomial arm + estimator arm
            const double var_obs = pa * (1.0 - pa) / double(n);
            const double mean_est = pb;
            const double var_est =
                std::max(est_sq[bn] / double(n) - mean_est * mean_est, 0.0) / double(n);
            const double sd = std::sqrt(var_obs + var_est);
            const bool ok = std::fabs(pa - pb) <= 3.0 * sd + 1e-12;
            bins_ok = bins_ok && ok;
            rows.push_back({{"y_lo", ylo + bn * bw}, {"observed", pa}, {"estimator", pb},
                            {"sigma", sd}, {"pass", ok}});
        }
        res.mc["overshoot_bins"] = rows;
        res.mc["exit_fraction"] = double(exits) / double(n);
        add_criterion(res, "AC-7-overshoot", bins_ok,
                      fmt("all %d overshoot bins within 3 sigma (exit fraction %.3f)",
                          double(bins), double(exits) / double(n)));
        add_criterion(res, "AC-7-no-creeping", neg == 0,
                      "every recorded exit happened by a strictly positive jump overshoot");
    }

    // (iii) left derivative blow-up at the shadow point 0
    {
        const std::size_t n = getn(p, "probe_paths");
        const auto ladder = p.at("scale_ladder").get<std::vector<double>>();
        const den::Chart chart = den::euclidean_chart(1);

        // shared endpoint set across rungs (common randomness quiets the trend)
        std::vector<Eigen::VectorXd> shared;
        std::size_t shared_n = 0;
        den::LadderSampler lsampler = [&](int, std::size_t n_req, std::size_t& total) {
            if (shared.empty() || shared_n < n_req) {
                shared_n = std::max(n_req, n);
                std::vector<std::vector<Eigen::VectorXd>> parts((shared_n + 16383) / 16384);
                parallel_for_chunks(shared_n, 16384, cfg.threads,
                                    [&](std::size_t chunk, std::size_t b, std::size_t e) {
                    levy::JumpSkeleton sa, sb, merged;
                    auto& out = parts[chunk];
                    out.reserve(e - b);
                    for (std::size_t i = b; i < e; ++i) {
                        PathRng rng(cfg.seed, 1000000000ULL + i, kStreamSkeleton);
                        sample_merged(rng, sa, sb, merged);
                        double x = 0.0;
                        bool alive = true;
                        for (std::size_t k2 = 0; k2 < merged.size(); ++k2) {
                            x += merged.marks[k2];
                            if (x >= barrier) {
                                alive = false;
                                break;
                            }
                        }
                        if (alive) {
                            Eigen::VectorXd v(1);
                            v[0] = x;
                            out.push_back(std::move(v));
                        }
                    }
                });
                shared.clear();
                for (auto& pt : parts)
                    for (auto& v : pt) shared.push_back(std::move(v));
            }
            total = shared_n;
            return shared;
        };
        den::ProbeReport probe =
            den::derivative_probe(lsampler, getd(p, "probe_x0"), ladder, chart, n);
        res.probes.push_back(probe);
        const bool ok = probe.verdict == den::Verdict::Diverging && probe.fitted < 0.0;
        add_criterion(res, "AC-7-derivative", ok,
                      std::string("derivative probe verdict ") + den::verdict_name(probe.verdict) +
                          fmt(", last slope %.3f", probe.fitted));

        if (!cfg.out_dir.empty()) {
            std::size_t total = 0;
            const auto samples = lsampler(0, std::min<std::size_t>(n, 500000), total);
            const den::Grid grid = den::Grid::line(-4.0, 1.0, 201);
            const double bw = 0.35 * den::robust_scale(samples) *
                              std::pow(double(samples.size()), -0.2);
            auto est = den::kde_density(samples, total, bw, grid, chart);
            est.reference_measure = "lebesgue (sub-probability: killed mass removed)";
            std::ostringstream csv;
            den::density_to_csv(est, csv);
            write_outputs(res, cfg, {{"density_endpoint.csv", csv.str()}});
            return res;
        }
    }

    write_outputs(res, cfg);
    return res;
}

// --------------------------------------------------------------------------
// exit_polynomial: nested intervals, small-jump-count exit probabilities
// --------------------------------------------------------------------------

namespace {

struct ExitGeometry {
    double u0 = 0.25;
    double ring = 0.25; // v_k = u_k + ring
    double gap = 1.5;   // u_{k+1} = v_k + gap
    double u(int k) const { return k == 0 ? u0 : v(k - 1) + gap; }
    double v(int k) const { return u(k) + ring; }
};

// compound Poisson walk on R; returns P_x0[X_t in (-u0, u0)] hit flag
struct AtomicWalker {
    std::vector<double> cdf;   // over signed atoms
    std::vector<double> jumps;
    double rate = 0.0;

    AtomicWalker(const std::vector<std::pair<double, double>>& atoms) {
        double acc = 0.0;
        for (const auto& [r, m] : atoms) {
            acc += m / 2.0;
            cdf.push_back(acc);
            jumps.push_back(r);
            acc += m / 2.0;
            cdf.push_back(acc);
            jumps.push_back(-r);
        }
        rate = acc;
        for (auto& c : cdf) c /= acc;
    }

    double draw(PathRng& rng) const {
        const double u = rng.uniform();
        const std::size_t k = std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
        return jumps[std::min(k, jumps.size() - 1)];
    }
};

}  // namespace

ExperimentResult run_exit_polynomial(const ExperimentConfig& cfg) {
    const auto p = merged_params(default_params("exit_polynomial"), cfg.params);
    ExperimentResult res;
    res.scenario = "exit_polynomial";
    res.params = p;
    res.seed = cfg.seed;

    ExitGeometry geo;
    std::vector<std::pair<double, double>> atoms;
    for (const auto& a : p.at("atoms"))
        atoms.emplace_back(a.at("radius").get<double>(), a.at("mass").get<double>());
    const AtomicWalker walker(atoms);
    const auto t_grid = p.at("t_grid").get<std::vector<double>>();
    const double max_jump =
        std::max_element(atoms.begin(), atoms.end())->first;
    if (max_jump >= geo.gap)
        throw ConfigError("exit_polynomial: gap must exceed the largest jump");

    auto naive_prob = [&](int n_rings, std::size_t paths, std::uint64_t salt, double t,
                          double& sigma) {
        const double x0 = geo.v(n_rings - 1) + 0.05;
        const std::size_t n_chunks = (paths + 16383) / 16384;
        std::vector<std::size_t> hits_c(n_chunks, 0);
        parallel_for_chunks(paths, 16384, cfg.threads,
                            [&](std::size_t chunk, std::size_t b, std::size_t e) {
            std::size_t h = 0;
            for (std::size_t i = b; i < e; ++i) {
                PathRng rng(cfg.seed, salt + i, kStreamScenarioA);
                const std::uint64_t m = rng.poisson(walker.rate * t);
                double x = x0;
                for (std::uint64_t k = 0; k < m; ++k) x += walker.draw(rng);
                if (std::fabs(x) < geo.u0) ++h;
            }
            hits_c[chunk] += h;
        });
        std::size_t hits = 0;
        for (auto h : hits_c) hits += h;
        const double prob = double(hits) / double(paths);
        sigma = std::sqrt(std::max(prob * (1.0 - prob), 1e-300) / double(paths));
        if (hits < 100) sigma = -double(hits); // signals "inconclusive"
        return prob;
    };

    // fixed-effort splitting with levels one jump-length apart
    auto split_prob = [&](int n_rings, std::size_t effort, std::uint64_t salt, double t,
                          double& sigma) {
        const double x0 = geo.v(n_rings - 1) + 0.05;
        std::vector<double> levels;
        for (double lv = x0 - 1.0; lv > geo.u0 + 0.5; lv -= 1.0) levels.push_back(lv + 0.005);
        struct Entry {
            double x, s;
        };
        std::vector<Entry> ensemble{{x0, 0.0}};
        double prob = 1.0;
        double rel_var = 0.0;
        PathRng pick(cfg.seed, salt, kStreamScenarioB);
        for (std::size_t stage = 0; stage <= levels.size(); ++stage) {
            const bool final_stage = stage == levels.size();
            const double goal = final_stage ? geo.u0 : levels[stage];
            std::vector<Entry> next;
            std::size_t hit = 0;
            for (std::size_t i = 0; i < effort; ++i) {
                const Entry start = ensemble[pick.raw() % ensemble.size()];
                PathRng rng(cfg.seed, salt + stage * 100000000ULL + i, kStreamScenarioA);
                double x = start.x;
                double s = start.s;
                // intermediate stages split at the first passage below the
                // level; the final stage scores the position AT the horizon
                // (the lemma bounds occupancy, not first passage)
                while (true) {
                    s += rng.exponential(walker.rate);
                    if (s >= t) break;
                    x += walker.draw(rng);
                    if (!final_stage && x < goal) {
                        ++hit;
                        next.push_back({x, s});
                        break;
                    }
                }
                if (final_stage && std::fabs(x) < goal) ++hit;
            }
            const double f = double(hit) / double(effort);
            if (hit == 0) {
                sigma = -1.0;
                return 0.0;
            }
            prob *= f;
            rel_var += (1.0 - f) / double(hit);
            if (!final_stage) ensemble = std::move(next);
        }
        sigma = prob * std::sqrt(rel_var);
        return prob;
    };

    auto fit_scenario = [&](const std::string& id, int n_rings, bool use_split,
                            std::size_t paths) {
        std::vector<double> lx, ly, w;
        auto rows = nlohmann::json::array();
        bool conclusive = true;
        for (std::size_t ti = 0; ti < t_grid.size(); ++ti) {
            double sg = 0.0;
            const std::uint64_t salt = (std::uint64_t(n_rings) * 10 + ti + (use_split ? 5 : 0))
                                       * 1000000000ULL;
            const double pr = use_split
                                  ? split_prob(n_rings, paths, salt, t_grid[ti], sg)
                                  : naive_prob(n_rings, paths, salt, t_grid[ti], sg);
            if (sg <= 0.0) conclusive = false;
            rows.push_back({{"t", t_grid[ti]}, {"prob", pr}, {"sigma", sg}});
            if (pr > 0.0 && sg > 0.0) {
                lx.push_back(std::log(t_grid[ti]));
                ly.push_back(std::log(pr));
                const double rel = sg / pr;
                w.push_back(1.0 / std::max(rel * rel, 1e-12));
            }
        }
        res.mc[id] = rows;
        if (!conclusive || lx.size() < t_grid.size()) {
            add_criterion(res, id, false,
                          "inconclusive: fewer than 100 rare-event hits at the smallest t "
                          "(config must raise paths)");
            return;
        }
        const auto fit = stats::fit_line_weighted(lx, ly, w);
        const double need = double(n_rings) - 0.5;
        res.mc[id + "_slope"] = fit.slope;
        add_criterion(res, id, fit.slope >= need,
                      fmt("fitted exit exponent %.3f >= %.1f", fit.slope, need));
    };

    fit_scenario("AC-8-n2-naive", 2, false, getn(p, "paths_naive"));
    fit_scenario("AC-8-n3-splitting", 3, true, getn(p, "split_effort"));

    // splitting estimator validated against naive MC where both are feasible
    {
        double s1 = 0.0, s2 = 0.0;
        const double t = t_grid.front();
        const double pn = naive_prob(2, getn(p, "paths_naive"), 31ULL * 1000000000ULL, t, s1);
        const double ps = split_prob(2, getn(p, "split_effort"), 33ULL * 1000000000ULL, t, s2);
        const bool ok = s1 > 0.0 && s2 > 0.0 &&
                        std::fabs(pn - ps) <= 3.0 * std::sqrt(s1 * s1 + s2 * s2);
        res.mc["split_validation"] = {{"naive", pn}, {"split", ps}, {"sigma_naive", s1},
                                      {"sigma_split", s2}};
        add_criterion(res, "AC-8-split-validation", ok,
                      fmt("splitting %.3e vs naive %.3e at n=2", ps, pn));
    }

    write_outputs(res, cfg);
    return res;
}

// --------------------------------------------------------------------------
// isotropic_manifold: frame-bundle lift of radial x uniform jumps
// --------------------------------------------------------------------------

ExperimentResult run_isotropic_manifold(const ExperimentConfig& cfg) {
    const auto p = merged_params(default_params("isotropic_manifold"), cfg.params);
    ExperimentResult res;
    res.scenario = "isotropic_manifold";
    res.params = p;
    res.seed = cfg.seed;

    const std::string mname = p.at("manifold").get<std::string>();
    geom::Manifold mfd;
    if (mname == "sphere2")
        mfd = geom::Manifold::sphere2();
    else if (mname == "hyperboloid2")
        mfd = geom::Manifold::hyperboloid(2);
    else
        throw ConfigError("isotropic_manifold: manifold must be sphere2 or hyperboloid2");

    const double alpha = getd(p, "alpha");
    const double c_r = getd(p, "radial_const");
    const double trunc = getd(p, "truncation");
    const double delta = getd(p, "delta");
    const double t = getd(p, "t");
    const std::size_t paths = getn(p, "paths");

    const auto spec = stable_spec(alpha, 2, c_r, trunc, alpha < 1.0);
    // Assumption-level audit on the radial part before any simulation
    {
        const auto audit = levy::integrability_audit(spec);
        if (!audit.ok) throw ConfigError("isotropic_manifold: spec failed the audit");
        std::vector<Eigen::VectorXd> dirs;
        Eigen::VectorXd e1(2), e2(2);
        e1 << 1, 0;
        e2 << 0, 1;
        dirs = {e1, e2};
        const auto sb = levy::verify_scaling_bounds(spec, alpha, {0.1, 0.3, 0.6, 1.0}, dirs);
        res.oracle["scaling_bounds"] = {{"c_hat", sb.c_hat}, {"C_hat", sb.C_hat}, {"pass", sb.pass}};
        if (!sb.pass) throw ConfigError("isotropic_manifold: scaling-bound audit failed");
    }

    const levy::PreparedLevySampler sampler(spec, delta);
    const geom::Point origin = geom::origin_point(mfd);
    sim::CoefficientField field;
    field.kind = sim::FrameHorizontal{mfd};

    // initial frame uniform on the fibre: canonical frame rotated by a random
    // angle, reflected with probability 1/2
    auto random_fibre_frame = [&](PathRng& rng) {
        geom::Frame fr = geom::canonical_frame(origin);
        const double th = 2.0 * M_PI * rng.uniform();
        const bool flip = rng.raw() & 1u;
        Eigen::VectorXd b0 = std::cos(th) * fr.basis.col(0) + std::sin(th) * fr.basis.col(1);
        Eigen::VectorXd b1 = -std::sin(th) * fr.basis.col(0) + std::cos(th) * fr.basis.col(1);
        if (flip) b1 = -b1;
        fr.basis.col(0) = b0;
        fr.basis.col(1) = b1;
        return fr;
    };

    std::vector<Eigen::VectorXd> charts(paths);
    std::vector<std::uint8_t> on_chart(paths, 0);
    const den::Chart chart = den::manifold_normal_chart(origin);
    parallel_for_chunks(paths, 2048, cfg.threads, [&](std::size_t, std::size_t b, std::size_t e) {
        levy::JumpSkeleton skel;
        for (std::size_t i = b; i < e; ++i) {
            PathRng rng(cfg.seed, i, kStreamSkeleton);
            sampler.sample(t, rng, skel);
            sim::PathState x0;
            PathRng frng(cfg.seed, i, kStreamScenarioA);
            x0.position = random_fibre_frame(frng);
            PathRng aux(cfg.seed, i, 1);
            const sim::SimOutput so = sim::integrate_path(x0, skel, field, aux, nullptr);
            const auto c = chart.project(so.endpoint);
            if (c) {
                charts[i] = *c;
                on_chart[i] = 1;
            }
        }
    });
    std::vector<Eigen::VectorXd> samples;
    samples.reserve(paths);
    for (std::size_t i = 0; i < paths; ++i)
        if (on_chart[i]) samples.push_back(charts[i]);

    // isotropy: the law in normal coordinates at the start point is invariant
    // under rotations of the chart plane
    {
        const double cth = std::cos(1.9), sth = std::sin(1.9);
        std::vector<Eigen::VectorXd> rotated;
        rotated.reserve(samples.size());
        for (const auto& v : samples) {
            Eigen::VectorXd w(2);
            w[0] = cth * v[0] - sth * v[1];
            w[1] = sth * v[0] + cth * v[1];
            rotated.push_back(w);
        }
        den::ProbeReport probe = den::invariance_test(samples, rotated);
        probe.kind = "isotropy_invariance";
        res.probes.push_back(probe);
        add_criterion(res, "ISO-invariance", probe.verdict == den::Verdict::Bounded,
                      fmt("min KS p-value %.4f across projections", probe.fitted));
    }

    // flat cross-check: the same radial spec on R^2 must match the direct
    // isotropic simulation
    {
        const std::size_t n2 = std::min<std::size_t>(paths, samples.size());
        std::vector<double> flat_norm(n2), lift_norm(n2);
        sim::CoefficientField flat_field;
        flat_field.kind = sim::EuclideanLinear{"identity2", 2, 2};
        parallel_for_chunks(n2, 4096, cfg.threads, [&](std::size_t, std::size_t b, std::size_t e) {
            levy::JumpSkeleton skel;
            sim::PathState x0;
            x0.position = geom::origin_point(geom::Manifold::euclidean(2));
            for (std::size_t i = b; i < e; ++i) {
                PathRng rng(cfg.seed, 4000000000ULL + i, kStreamSkeleton);
                sampler.sample(t, rng, skel);
                PathRng aux(cfg.seed, 4000000000ULL + i, 1);
                const auto so = sim::integrate_path(x0, skel, flat_field, aux, nullptr);
                flat_norm[i] = so.endpoint.point().coords.norm();
            }
        });
        sim::CoefficientField lift_flat;
        lift_flat.kind = sim::FrameHorizontal{geom::Manifold::euclidean(2)};
        const geom::Point fo = geom::origin_point(geom::Manifold::euclidean(2));
        parallel_for_chunks(n2, 4096, cfg.threads, [&](std::size_t, std::size_t b, std::size_t e) {
            levy::JumpSkeleton skel;
            for (std::size_t i = b; i < e; ++i) {
                PathRng rng(cfg.seed, 5000000000ULL + i, kStreamSkeleton);
                sampler.sample(t, rng, skel);
                sim::PathState x0;
                geom::Frame fr = geom::canonical_frame(fo);
                PathRng frng(cfg.seed, 5000000000ULL + i, kStreamScenarioA);
                const double th = 2.0 * M_PI * frng.uniform();
                const Eigen::MatrixXd b0 = fr.basis;
                fr.basis.col(0) = std::cos(th) * b0.col(0) + std::sin(th) * b0.col(1);
                fr.basis.col(1) = -std::sin(th) * b0.col(0) + std::cos(th) * b0.col(1);
                x0.position = fr;
                PathRng aux(cfg.seed, 5000000000ULL + i, 1);
                const auto so = sim::integrate_path(x0, skel, lift_flat, aux, nullptr);
                lift_norm[i] = so.endpoint.frame().base.coords.norm();
            }
        });
        const auto ks = stats::ks_two_sample(flat_norm, lift_norm);
        res.mc["flat_xcheck_ks"] = ks.statistic;
        res.mc["flat_xcheck_p"] = ks.p_value;
        add_criterion(res, "ISO-flat-xcheck", ks.p_value > 0.005,
                      fmt("KS %.4f (p %.4f) frame lift on R^2 vs direct simulation",
                          ks.statistic, ks.p_value));
    }

    res.mc["on_chart_fraction"] = double(samples.size()) / double(paths);
    write_outputs(res, cfg);
    return res;
}

// --------------------------------------------------------------------------
// lie_group_levy: left-increment laws on SO3, moment verdicts on DilTrans
// --------------------------------------------------------------------------

ExperimentResult run_lie_group_levy(const ExperimentConfig& cfg) {
    const auto p = merged_params(default_params("lie_group_levy"), cfg.params);
    ExperimentResult res;
    res.scenario = "lie_group_levy";
    res.params = p;
    res.seed = cfg.seed;

    // SO3 arm: stationarity and independence of left increments
    {
        const double alpha = getd(p, "so3_alpha");
        const double c_r = getd(p, "so3_radial_const");
        const double delta = getd(p, "so3_delta");
        const double s = getd(p, "s");
        const double t = getd(p, "t");
        const std::size_t n = getn(p, "so3_paths");

        const auto spec = stable_spec(alpha, 3, c_r, 1.0);
        const levy::PreparedLevySampler sampler(spec, delta);
        sim::CoefficientField field;
        field.kind = sim::LieLeftInvariant{lie::GroupSpec::so3()};

        std::vector<Eigen::VectorXd> xs_chart(n), inc_chart(n), fresh_chart(n);
        parallel_for_chunks(n, 2048, cfg.threads, [&](std::size_t, std::size_t b, std::size_t e) {
            levy::JumpSkeleton skel;
            for (std::size_t i = b; i < e; ++i) {
                sim::PathState id0;
                id0.position = lie::identity(lie::GroupSpec::so3());
                PathRng r1(cfg.seed, i, kStreamSkeleton);
                sampler.sample(s, r1, skel);
                PathRng a1(cfg.seed, i, 1);
                const auto xs = sim::integrate_path(id0, skel, field, a1, nullptr);
                sampler.sample(t - s, r1, skel);
                const auto xt = sim::integrate_path(xs.endpoint, skel, field, a1, nullptr);
                const auto inc = lie::compose(lie::inverse(xs.endpoint.group()),
                                              xt.endpoint.group());
                xs_chart[i] = lie::chart_coords(xs.endpoint.group());
                inc_chart[i] = lie::chart_coords(inc);
                PathRng r2(cfg.seed, 6000000000ULL + i, kStreamSkeleton);
                sampler.sample(t - s, r2, skel);
                PathRng a2(cfg.seed, 6000000000ULL + i, 1);
                const auto xf = sim::integrate_path(id0, skel, field, a2, nullptr);
                fresh_chart[i] = lie::chart_coords(xf.endpoint.group());
            }
        });

        den::ProbeReport station = den::invariance_test(inc_chart, fresh_chart);
        station.kind = "left_increment_stationarity";
        res.probes.push_back(station);

        // independence: correlations between chart(X_s) and chart(increment)
        double min_p = 1.0;
        int tests = 0;
        for (int a = 0; a < 3; ++a)
            for (int b2 = 0; b2 < 3; ++b2) {
                std::vector<double> u(n), v(n);
                for (std::size_t i = 0; i < n; ++i) {
                    u[i] = xs_chart[i][a];
                    v[i] = inc_chart[i][b2];
                }
                const double r = stats::pearson(u, v);
                const double z = std::fabs(r) * std::sqrt(double(n) - 3.0);
                const double pv = std::erfc(z / std::sqrt(2.0));
                min_p = std::min(min_p, pv);
                ++tests;
            }
        res.mc["independence_min_p"] = min_p;
        const bool indep_ok = min_p > 0.01 / tests;
        const bool stat_ok = station.verdict == den::Verdict::Bounded;
        add_criterion(res, "LIE-increments", indep_ok && stat_ok,
                      fmt("stationarity min KS p %.4f; independence min p %.4f", station.fitted,
                          min_p));

        // compact unimodular case: bounded density at the identity
        const std::size_t nb = getn(p, "so3_probe_paths");
        const auto ladder = p.at("so3_ladder").get<std::vector<double>>();
        std::vector<Eigen::VectorXd> cache; // shared across rungs
        den::LadderSampler lsampler = [&](int, std::size_t n_req, std::size_t& total) {
            if (cache.size() < n_req) {
                cache.assign(n_req, Eigen::VectorXd());
                parallel_for_chunks(n_req, 2048, cfg.threads,
                                    [&](std::size_t, std::size_t b, std::size_t e) {
                    levy::JumpSkeleton skel;
                    for (std::size_t i = b; i < e; ++i) {
                        sim::PathState id0;
                        id0.position = lie::identity(lie::GroupSpec::so3());
                        PathRng r1(cfg.seed, 7000000000ULL + i, kStreamSkeleton);
                        sampler.sample(t, r1, skel);
                        PathRng a1(cfg.seed, 7000000000ULL + i, 1);
                        const auto so = sim::integrate_path(id0, skel, field, a1, nullptr);
                        cache[i] = lie::chart_coords(so.endpoint.group());
                    }
                });
            }
            total = n_req;
            return cache;
        };
        den::ProbeReport bprobe = den::boundedness_probe(
            lsampler, Eigen::VectorXd::Zero(3), ladder, den::so3_log_chart(), nb);
        bprobe.kind = "so3_boundedness_at_identity";
        res.probes.push_back(bprobe);
        add_criterion(res, "LIE-so3-bounded", bprobe.verdict == den::Verdict::Bounded,
                      std::string("verdict ") + den::verdict_name(bprobe.verdict));
    }

    // DilTrans arm: the moment-condition arithmetic of the dilation family
    {
        auto rows = nlohmann::json::array();
        bool ok = true;
        for (const auto& c : p.at("diltrans_checks")) {
            const int d = c.at("d").get<int>();
            const double beta = c.at("beta").get<double>();
            const double sigma = c.at("sigma").get<double>();
            const int j = c.at("j").get<int>();
            const std::string side = c.value("side", "left");
            const bool expect_finite = c.at("expect_finite").get<bool>();
            const auto rep = lie::diltrans_family_moment(
                d, beta, sigma, j, side == "left" ? lie::HaarSide::Left : lie::HaarSide::Right);
            ok = ok && (rep.finite == expect_finite);
            rows.push_back({{"d", d}, {"beta", beta}, {"sigma", sigma}, {"j", j},
                            {"side", side}, {"finite", rep.finite}, {"value", rep.value},
                            {"expected_finite", expect_finite}});
        }
        res.oracle["diltrans_moments"] = rows;
        add_criterion(res, "LIE-diltrans-moments", ok,
                      "big-jump moment verdicts match the dilation-family thresholds");
    }

    write_outputs(res, cfg);
    return res;
}

// --------------------------------------------------------------------------

namespace {

const std::map<std::string, ExperimentResult (*)(const ExperimentConfig&)>& runners() {
    static const std::map<std::string, ExperimentResult (*)(const ExperimentConfig&)> reg = {
        {"scaling_flat", run_scaling_flat},
        {"affine_dilation", run_affine_dilation},
        {"killed_halfline", run_killed_halfline},
        {"exit_polynomial", run_exit_polynomial},
        {"isotropic_manifold", run_isotropic_manifold},
        {"lie_group_levy", run_lie_group_levy},
    };
    return reg;
}

}  // namespace

std::vector<std::string> scenario_names() {
    std::vector<std::string> names;
    for (const auto& [k, v] : runners()) names.push_back(k);
    return names;
}

bool has_scenario(const std::string& scenario) { return runners().count(scenario) > 0; }

nlohmann::json default_params(const std::string& scenario) {
    if (scenario == "scaling_flat")
        return {{"d", 1},
                {"alpha", 1.5},
                {"radial_const", 0.15},
                {"delta", 1e-3},
                {"paths_per_t", 1000000},
                {"t_grid", {0.05, 0.1, 0.2, 0.4}},
                {"slope_tol", 0.1},
                {"region_halfwidth", 0.6},
                {"region_nodes", 121},
                {"delta_stability_check", false},
                {"criterion_id", "AC-1"}};
    if (scenario == "affine_dilation")
        return {{"alpha", 0.8},
                {"beta", 1.0},
                {"sigma", 1.0},
                {"d", 1},
                {"n_skeletons", 20},
                {"paths_per_skeleton", 200000},
                {"an_alpha", 0.5},
                {"an_d", 3},
                {"an_range", 8},
                {"probe_paths", 1000000},
                {"xcheck_paths", 30000},
                {"ladders",
                 {{"1", {0.1, 0.05, 0.025, 0.0125}},
                  {"2", {0.14, 0.09, 0.055, 0.035}},
                  {"3", {0.16, 0.08, 0.04, 0.02}}}},
                {"regimes",
                 {{{"d", 1}, {"alpha", 0.8}, {"beta", 2.0}, {"sigma", 2.0}, {"target", "x"},
                   {"expect", "bounded"}, {"id", "AC-6-bounded"}},
                  {{"d", 3}, {"alpha", 0.5}, {"beta", 0.5}, {"sigma", 0.5}, {"target", "x"},
                   {"expect", "diverging"}, {"id", "AC-6-diverging"}},
                  {{"d", 2}, {"alpha", 0.8}, {"beta", 3.0}, {"sigma", 1.0}, {"target", "y"}},
                  {{"d", 1}, {"alpha", 0.8}, {"beta", 2.0}, {"sigma", 2.0}, {"target", "y"}}}}};
    if (scenario == "killed_halfline")
        return {{"alpha", 0.6},      {"radial_const", 0.5}, {"delta", 1e-3},
                {"t", 1.0},          {"barrier", 1.0},      {"overshoot_paths", 300000},
                {"bins", 20},        {"y_lo", 1.1},         {"y_hi", 3.0},
                {"probe_paths", 12000000},                  {"probe_x0", 0.0},
                {"scale_ladder", {0.4, 0.2, 0.1, 0.05}}};
    if (scenario == "exit_polynomial")
        return {{"atoms", {{{"radius", 1.0}, {"mass", 2.0}}, {{"radius", 0.45}, {"mass", 2.0}}}},
                {"t_grid", {0.4, 0.2, 0.1, 0.05}},
                {"paths_naive", 10000000},
                {"split_effort", 200000}};
    if (scenario == "isotropic_manifold")
        return {{"manifold", "sphere2"}, {"alpha", 1.3},  {"radial_const", 0.65},
                {"truncation", 0.8},     {"delta", 3e-3}, {"t", 0.5},
                {"paths", 100000}};
    if (scenario == "lie_group_levy")
        return {{"so3_alpha", 1.2},
                {"so3_radial_const", 0.5},
                {"so3_delta", 0.01},
                {"s", 0.4},
                {"t", 0.8},
                {"so3_paths", 120000},
                {"so3_probe_paths", 600000},
                {"so3_ladder", {0.1, 0.08, 0.065, 0.05}},
                {"diltrans_checks",
                 {{{"d", 3}, {"beta", 0.5}, {"sigma", 0.5}, {"j", 0}, {"side", "left"},
                   {"expect_finite", false}},
                  {{"d", 1}, {"beta", 2.0}, {"sigma", 2.0}, {"j", 0}, {"side", "left"},
                   {"expect_finite", true}},
                  {{"d", 1}, {"beta", 2.0}, {"sigma", 2.0}, {"j", 0}, {"side", "right"},
                   {"expect_finite", true}},
                  {{"d", 3}, {"beta", 0.5}, {"sigma", 0.5}, {"j", 0}, {"side", "right"},
                   {"expect_finite", false}},
                  {{"d", 1}, {"beta", 4.0}, {"sigma", 1.5}, {"j", 2}, {"side", "left"},
                   {"expect_finite", true}}}}};
    throw ConfigError("unknown scenario: " + scenario);
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    auto it = runners().find(config.scenario);
    if (it == runners().end()) throw ConfigError("unknown scenario: " + config.scenario);
    return it->second(config);
}

}  // namespace levymc::xp
