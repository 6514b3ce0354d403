#include <doctest.h>

#include <cmath>

#include "levymc/density.hpp"
#include "levymc/oracles.hpp"
#include "levymc/rng.hpp"

using namespace levymc;

namespace {

std::vector<Eigen::VectorXd> scalar_samples(const std::vector<double>& xs) {
    std::vector<Eigen::VectorXd> out;
    out.reserve(xs.size());
    for (double x : xs) out.push_back(Eigen::VectorXd::Constant(1, x));
    return out;
}

}  // namespace

TEST_SUITE_BEGIN("density");

TEST_CASE("uniform law is flat to 2 percent at the reference bandwidth") {
    const std::size_t n = 1000000;
    PathRng rng(101, 0, 0);
    std::vector<double> xs(n);
    for (auto& x : xs) x = rng.uniform();
    const double bw = std::pow(double(n), -0.2);
    const auto grid = den::Grid::line(0.2, 0.8, 61);
    const auto est = den::kde_density(scalar_samples(xs), n, bw, grid, den::euclidean_chart(1));
    double worst = 0.0;
    for (double v : est.values) worst = std::max(worst, std::fabs(v - 1.0));
    CHECK(worst <= 0.02);
}

TEST_CASE("symmetric stable density at zero matches the Fourier oracle within 2 percent") {
    const double alpha = 1.5;
    const std::size_t n = 1000000;
    PathRng rng(103, 0, 0);
    std::vector<Eigen::VectorXd> xs;
    xs.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        xs.push_back(Eigen::VectorXd::Constant(1, oracle::cms_symmetric_stable(alpha, rng)));
    // c = 1: psi(u) = |u|^alpha, density at 0 is (1/pi) Gamma(1 + 1/alpha)
    const double want = oracle::stable_density_at_zero(alpha, 1, 1.0);
    CHECK(want == doctest::Approx(std::tgamma(1.0 + 1.0 / alpha) / M_PI).epsilon(1e-12));
    CHECK(oracle::stable_density_1d(0.0, alpha, 1.0) == doctest::Approx(want).epsilon(1e-8));
    const double bw = 0.08; // smoothing bias and MC noise both well under 1%
    const auto pe = den::kde_point(xs, n, bw, Eigen::VectorXd::Zero(1), den::euclidean_chart(1));
    CHECK(std::fabs(pe.value - want) / want <= 0.02);
}

TEST_CASE("point mass concentrates as the bandwidth shrinks") {
    std::vector<Eigen::VectorXd> xs(5000, Eigen::VectorXd::Constant(1, 0.5));
    const auto grid = den::Grid::line(0.0, 1.0, 21); // 0.5 is a grid node
    double prev = 0.0;
    for (double bw : {0.1, 0.03, 0.01}) {
        const auto est = den::kde_density(xs, xs.size(), bw, grid, den::euclidean_chart(1));
        double peak = 0.0;
        std::size_t arg = 0;
        for (std::size_t g = 0; g < est.values.size(); ++g)
            if (est.values[g] > peak) {
                peak = est.values[g];
                arg = g;
            }
        CHECK(est.grid.node(arg)[0] == doctest::Approx(0.5));
        CHECK(peak > prev);
        prev = peak;
    }
}

TEST_CASE("integral deficit equals the killed mass") {
    const std::size_t alive = 70000, total = 100000;
    PathRng rng(107, 0, 0);
    std::vector<double> xs(alive);
    for (auto& x : xs) x = rng.uniform();
    const auto grid = den::Grid::line(-0.25, 1.25, 151);
    const auto est = den::kde_density(scalar_samples(xs), total, 0.01, grid,
                                      den::euclidean_chart(1));
    const double killed = 1.0 - double(alive) / double(total);
    const double sd = std::sqrt(killed * (1.0 - killed) / double(total));
    CHECK(std::fabs((1.0 - est.integral) - killed) <= 3.0 * sd + 0.005);
}

TEST_CASE("off-grid samples are reported, not dropped") {
    PathRng rng(109, 0, 0);
    std::vector<double> xs(10000);
    for (auto& x : xs) x = 2.0 * rng.uniform(); // half the mass beyond the grid
    const auto grid = den::Grid::line(0.0, 1.0, 51);
    const auto est = den::kde_density(scalar_samples(xs), xs.size(), 0.02, grid,
                                      den::euclidean_chart(1));
    CHECK(est.overflow_fraction == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("boundedness probe separates flat from square-root blow-up") {
    const std::vector<double> ladder{0.1, 0.05, 0.025, 0.0125};
    // uniform: bounded
    den::LadderSampler uniform_sampler = [](int rung, std::size_t n, std::size_t& total) {
        PathRng rng(200 + rung, 0, 0);
        std::vector<Eigen::VectorXd> xs(n);
        for (auto& x : xs) x = Eigen::VectorXd::Constant(1, rng.uniform(-1.0, 1.0));
        total = n;
        return xs;
    };
    const auto flat = den::boundedness_probe(uniform_sampler, Eigen::VectorXd::Zero(1), ladder,
                                             den::euclidean_chart(1), 200000);
    CHECK(flat.verdict == den::Verdict::Bounded);

    // |x|^{-1/2}/2 on [-1,1] via inverse CDF: x = sign * u^2
    den::LadderSampler singular_sampler = [](int rung, std::size_t n, std::size_t& total) {
        PathRng rng(300 + rung, 0, 0);
        std::vector<Eigen::VectorXd> xs(n);
        for (auto& x : xs) {
            const double u = rng.uniform();
            const double s = (rng.raw() & 1u) ? 1.0 : -1.0;
            x = Eigen::VectorXd::Constant(1, s * u * u);
        }
        total = n;
        return xs;
    };
    const auto sing = den::boundedness_probe(singular_sampler, Eigen::VectorXd::Zero(1), ladder,
                                             den::euclidean_chart(1), 200000);
    CHECK(sing.verdict == den::Verdict::Diverging);
    CHECK(sing.ci.first <= sing.fitted);
    CHECK(sing.fitted <= sing.ci.second);
}

TEST_CASE("derivative probe: flat at a symmetric mode, blow-up at a root edge") {
    const std::vector<double> ladder{0.4, 0.2, 0.1, 0.05};
    den::LadderSampler normal_sampler = [](int, std::size_t n, std::size_t& total) {
        PathRng rng(400, 0, 0);
        std::vector<Eigen::VectorXd> xs(n);
        for (auto& x : xs) x = Eigen::VectorXd::Constant(1, rng.normal());
        total = n;
        return xs;
    };
    const auto flat = den::derivative_probe(normal_sampler, 0.0, ladder,
                                            den::euclidean_chart(1), 400000);
    CHECK(flat.verdict == den::Verdict::Bounded);

    // density (3/2) sqrt(1-x) on [0,1]: Dp -> -inf as x -> 1^-
    den::LadderSampler edge_sampler = [](int, std::size_t n, std::size_t& total) {
        PathRng rng(500, 0, 0);
        std::vector<Eigen::VectorXd> xs(n);
        for (auto& x : xs)
            x = Eigen::VectorXd::Constant(1, 1.0 - std::pow(rng.uniform(), 2.0 / 3.0));
        total = n;
        return xs;
    };
    const auto edge = den::derivative_probe(edge_sampler, 1.0, ladder,
                                            den::euclidean_chart(1), 400000);
    CHECK(edge.verdict == den::Verdict::Diverging);
    CHECK(edge.fitted < 0.0);
}

TEST_CASE("scaling probe recovers the self-similar exponent") {
    const double alpha = 1.5;
    const std::vector<double> t_grid{0.05, 0.1, 0.2, 0.4};
    den::EndpointSampler sampler = [&](double t, std::size_t& total) {
        const std::size_t n = 200000;
        PathRng rng(601 + std::uint64_t(1000 * t), 0, 0);
        std::vector<Eigen::VectorXd> xs(n);
        const double scale = std::pow(t, 1.0 / alpha);
        for (auto& x : xs)
            x = Eigen::VectorXd::Constant(1, scale * oracle::cms_symmetric_stable(alpha, rng));
        total = n;
        return xs;
    };
    const auto grid = den::Grid::line(-0.5, 0.5, 101);
    const auto rep = den::sup_density_scaling(t_grid, sampler, grid, den::euclidean_chart(1),
                                              -1.0 / alpha, 0.15);
    CHECK(std::fabs(rep.fitted - (-1.0 / alpha)) <= 0.15);
    CHECK(rep.verdict == den::Verdict::Bounded);

    // degenerate (deterministic) input is rejected
    den::EndpointSampler dirac = [](double, std::size_t& total) {
        total = 1000;
        return std::vector<Eigen::VectorXd>(1000, Eigen::VectorXd::Zero(1));
    };
    CHECK_THROWS_AS(den::sup_density_scaling(t_grid, dirac, grid, den::euclidean_chart(1),
                                             -1.0, 0.1),
                    std::invalid_argument);
}

TEST_CASE("invariance test: identity, rotation, anisotropy") {
    PathRng rng(701, 0, 0);
    const std::size_t n = 100000;
    std::vector<Eigen::VectorXd> iso(n);
    for (auto& x : iso) x = oracle::isotropic_stable_vector(1.5, 2, 1.0, rng);

    // identity transform: statistic exactly zero
    const auto same = den::invariance_test(iso, iso);
    CHECK(same.verdict == den::Verdict::Bounded);
    for (double s : same.ladder_values) CHECK(s == 0.0);

    // quarter rotation preserves an isotropic law
    std::vector<Eigen::VectorXd> rot(n);
    for (std::size_t i = 0; i < n; ++i) {
        Eigen::VectorXd w(2);
        w[0] = -iso[i][1];
        w[1] = iso[i][0];
        rot[i] = w;
    }
    CHECK(den::invariance_test(iso, rot).verdict == den::Verdict::Bounded);

    // axis-only atoms are not rotation invariant
    std::vector<Eigen::VectorXd> axis(n), axis_rot(n);
    for (std::size_t i = 0; i < n; ++i) {
        Eigen::VectorXd v = Eigen::VectorXd::Zero(2);
        v[0] = rng.normal(); // mass concentrated on the x-axis
        axis[i] = v;
        Eigen::VectorXd w(2);
        w[0] = -v[1];
        w[1] = v[0];
        axis_rot[i] = w;
    }
    CHECK(den::invariance_test(axis, axis_rot).verdict == den::Verdict::Diverging);
}

TEST_CASE("manifold chart corrects by the volume density") {
    // uniform-ish cap on the sphere: the chart density must divide by sin(r)/r
    const auto origin = geom::origin_point(geom::Manifold::sphere2());
    const auto chart = den::manifold_normal_chart(origin);
    Eigen::VectorXd far(2);
    far << 1.2, 0.0;
    CHECK(chart.volume_density(far) == doctest::Approx(std::sin(1.2) / 1.2).epsilon(1e-12));
    const auto h = den::manifold_normal_chart(geom::origin_point(geom::Manifold::hyperboloid(3)));
    CHECK(h.volume_density(far) ==
          doctest::Approx(std::pow(std::sinh(1.2) / 1.2, 2.0)).epsilon(1e-12));
}

TEST_SUITE_END();
