#include <doctest.h>

#include <cmath>

#include <nlohmann/json.hpp>

#include "levymc/levy.hpp"
#include "levymc/quad.hpp"

using namespace levymc;

namespace {

levy::LevyMeasureSpec stable1(double alpha, double c_r, std::optional<double> trunc = {}) {
    levy::IsotropicStable k;
    k.alpha = alpha;
    k.dim = 1;
    k.radial_density_const = c_r;
    k.truncation_radius = trunc;
    levy::LevyMeasureSpec s;
    s.kind = k;
    return s;
}

// quadrature oracle for the radial tail of the stable family
double tail_oracle(double alpha, double c_r, double delta, double trunc) {
    return quad::gauss_kronrod(
        [&](double r) { return c_r * std::pow(r, -1.0 - alpha); }, delta, trunc, 1e-12);
}

}  // namespace

TEST_SUITE_BEGIN("levy_core");

TEST_CASE("tail mass of the truncated stable matches the antiderivative") {
    // density alpha*|l|^(-alpha-1) on each ray (c_r = alpha), truncated at 1
    auto s = stable1(1.0, 1.0, 1.0);
    const double got = levy::tail_mass(s, 0.5);
    CHECK(got == doctest::Approx(1.0 / 0.5 - 1.0).epsilon(1e-12)); // = 1.0
    CHECK(got == doctest::Approx(tail_oracle(1.0, 1.0, 0.5, 1.0)).epsilon(1e-9));

    // cutoff above the truncation radius: empty set
    CHECK(levy::tail_mass(s, 1.5) == 0.0);
}

TEST_CASE("discrete signed tail mass by direct summation") {
    levy::DiscreteSigned k;
    double expected = 0.0;
    for (int n = 1; n <= 60; ++n) {
        k.masses.emplace_back(n, std::exp(-double(n)));
        k.masses.emplace_back(-n, std::exp(-2.0 * double(n)));
        expected += std::exp(-double(n)) + std::exp(-2.0 * double(n));
    }
    levy::LevyMeasureSpec s;
    s.kind = k;
    s.pure_jump = true;
    CHECK(levy::tail_mass(s, 0.5) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("tail mass is monotone in the cutoff") {
    auto s = stable1(1.3, 0.7, 2.0);
    double prev = levy::tail_mass(s, 0.01);
    for (double d : {0.05, 0.2, 0.5, 1.0, 1.9, 2.5}) {
        const double cur = levy::tail_mass(s, d);
        CHECK(cur <= prev + 1e-15);
        prev = cur;
    }
}

TEST_CASE("skeleton above the truncation radius is empty with kappa drift") {
    auto s = stable1(1.5, 1.5, 1.0);
    s.drift_kappa = Eigen::VectorXd::Constant(1, 0.7);
    const auto skel = levy::sample_jump_skeleton(s, 2.0, 1.5, 42);
    CHECK(skel.size() == 0);
    CHECK(skel.compensator_drift[0] == doctest::Approx(0.7)); // symmetric: kappa survives
}

TEST_CASE("skeleton determinism and seed separation") {
    auto s = stable1(1.5, 1.5, 1.0);
    const auto a = levy::sample_jump_skeleton(s, 1.0, 0.05, 7, 3);
    const auto b = levy::sample_jump_skeleton(s, 1.0, 0.05, 7, 3);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.times[i] == b.times[i]);
        CHECK(a.marks[i] == b.marks[i]);
    }
    const auto c = levy::sample_jump_skeleton(s, 1.0, 0.05, 7, 4);
    CHECK(a.size() != c.size()); // different path index, different stream
}

TEST_CASE("event counts and mark moments match the measure") {
    // alpha = 1.5 truncated at 1, delta = 0.1: rate = delta^-1.5 - 1
    auto s = stable1(1.5, 1.5, 1.0);
    const double delta = 0.1;
    const double rate = levy::tail_mass(s, delta);
    CHECK(rate == doctest::Approx(std::pow(delta, -1.5) - 1.0).epsilon(1e-12));

    levy::PreparedLevySampler sampler(s, delta);
    levy::JumpSkeleton skel;
    const std::size_t n_skel = 100000;
    double count_sum = 0.0, count_sq = 0.0;
    double mark_sum = 0.0;
    double m2_sum = 0.0, m2_sq = 0.0;
    for (std::size_t i = 0; i < n_skel; ++i) {
        PathRng rng(1234, i, 0);
        sampler.sample(1.0, rng, skel);
        count_sum += double(skel.size());
        count_sq += double(skel.size()) * double(skel.size());
        double m2 = 0.0;
        for (std::size_t k = 0; k < skel.size(); ++k) {
            mark_sum += skel.marks[k];
            m2 += skel.marks[k] * skel.marks[k];
        }
        m2_sum += m2;
        m2_sq += m2 * m2;
        for (std::size_t k = 1; k < skel.size(); ++k) CHECK(skel.times[k] > skel.times[k - 1]);
        for (std::size_t k = 0; k < skel.size(); ++k)
            CHECK(std::fabs(skel.marks[k]) > delta);
    }
    const double mean_count = count_sum / n_skel;
    const double sd_count = std::sqrt((count_sq / n_skel - mean_count * mean_count) / n_skel);
    CHECK(std::fabs(mean_count - rate) <= 3.0 * sd_count);

    // symmetric marks average to zero
    CHECK(std::fabs(mark_sum / count_sum) < 0.01);

    // empirical second moment of marks in(delta,1] vs the exact integral
    const double m2_exact = levy::second_moment_restricted(s, delta, 1.0)(0, 0);
    const double m2_mean = m2_sum / n_skel;
    const double m2_sd = std::sqrt((m2_sq / n_skel - m2_mean * m2_mean) / n_skel);
    CHECK(std::fabs(m2_mean - m2_exact) <= 3.0 * m2_sd);
}

TEST_CASE("scaling bounds: untruncated stable ratio is constant alpha/(2-alpha)") {
    const double alpha = 1.4;
    auto s = stable1(alpha, alpha); // density alpha |l|^(-1-alpha) on each ray
    std::vector<Eigen::VectorXd> dirs{Eigen::VectorXd::Constant(1, 1.0)};
    const auto rep = levy::verify_scaling_bounds(s, alpha, {0.05, 0.1, 0.3, 0.7, 1.0}, dirs);
    const double expected = alpha / (2.0 - alpha);
    CHECK(rep.pass);
    CHECK(rep.c_hat == doctest::Approx(expected).epsilon(1e-12));
    CHECK(rep.C_hat == doctest::Approx(expected).epsilon(1e-12));
    CHECK(rep.c_hat / rep.C_hat >= 0.999);

    // quadrature cross-check of I(rho) at one rho
    const double rho = 0.3;
    const double quad_val = quad::gauss_kronrod(
        [&](double r) { return r * r * alpha * std::pow(r, -1.0 - alpha); }, 1e-12, rho, 1e-12);
    CHECK(levy::second_moment_restricted(s, 0, rho)(0, 0) ==
          doctest::Approx(quad_val).epsilon(1e-6));
}

TEST_CASE("scaling bounds: measure on the first axis is degenerate in e2") {
    levy::Product prod;
    prod.components.push_back(stable1(1.5, 1.5, 1.0));
    levy::DiscreteSigned none;
    levy::LevyMeasureSpec empty;
    empty.kind = none;
    prod.components.push_back(empty);
    levy::LevyMeasureSpec s;
    s.kind = prod;
    Eigen::VectorXd e2 = Eigen::VectorXd::Zero(2);
    e2[1] = 1.0;
    const auto rep = levy::verify_scaling_bounds(s, 1.5, {0.2, 0.5, 1.0}, {e2});
    CHECK(rep.C_hat == 0.0);
    CHECK_FALSE(rep.pass);
}

TEST_CASE("semi-stable atomic masses keep the ratio in a fixed band") {
    // atoms at 2^-k with mass 2^(k alpha): dyadic-geometric second moments
    const double alpha = 1.2;
    levy::AtomicRadial k;
    k.dim = 1;
    for (int j = 1; j <= 40; ++j)
        k.atoms.emplace_back(std::pow(2.0, -j), std::pow(2.0, alpha * j));
    levy::LevyMeasureSpec s;
    s.kind = k;
    std::vector<double> rho_grid;
    for (int j = 0; j < 24; ++j) rho_grid.push_back(std::pow(2.0, -j / 3.0));
    const auto rep = levy::verify_scaling_bounds(s, alpha, rho_grid,
                                                 {Eigen::VectorXd::Constant(1, 1.0)});
    CHECK(rep.pass);
    CHECK(rep.c_hat > 0.0);
    CHECK(rep.C_hat / rep.c_hat <= std::pow(2.0, 2.0 - alpha) + 1e-9);
}

TEST_CASE("small jump variance closed forms and the zero limit") {
    const double alpha = 1.5;
    auto s = stable1(alpha, alpha);
    double prev = 1e300;
    for (double d : {0.5, 0.1, 0.01, 1e-4}) {
        const double v = levy::small_jump_variance(s, d)(0, 0);
        CHECK(v == doctest::Approx(alpha * std::pow(d, 2.0 - alpha) / (2.0 - alpha))
                       .epsilon(1e-12));
        CHECK(v < prev);
        prev = v;
    }
    const double quad_val = quad::gauss_kronrod(
        [&](double r) { return r * r * alpha * std::pow(r, -1.0 - alpha); }, 1e-14, 0.1, 1e-12);
    CHECK(levy::small_jump_variance(s, 0.1)(0, 0) == doctest::Approx(quad_val).epsilon(1e-6));
}

TEST_CASE("product spec has block-diagonal small-jump variance") {
    levy::Product prod;
    prod.components.push_back(stable1(1.5, 1.5));
    prod.components.push_back(stable1(0.8, 0.8));
    levy::LevyMeasureSpec s;
    s.kind = prod;
    s.pure_jump = false;
    const auto m = levy::small_jump_variance(s, 0.3);
    REQUIRE(m.rows() == 2);
    CHECK(m(0, 1) == 0.0);
    CHECK(m(1, 0) == 0.0);
    CHECK(m(0, 0) > 0.0);
    CHECK(m(1, 1) > 0.0);
}

TEST_CASE("audit rejects the bad configurations") {
    // alpha = 1 asymmetric without a principal-value drift
    levy::DiscreteSigned k;
    k.masses = {{1, 1.0}};
    levy::LevyMeasureSpec s;
    s.kind = k;
    s.alpha_index = 1.0;
    CHECK_FALSE(levy::integrability_audit(s).ok);

    // pure jump with a drift
    auto s2 = stable1(0.6, 1.0);
    s2.pure_jump = true;
    s2.drift_kappa = Eigen::VectorXd::Constant(1, 0.2);
    CHECK_FALSE(levy::integrability_audit(s2).ok);

    auto s3 = stable1(1.5, 1.5, 1.0);
    CHECK(levy::integrability_audit(s3).ok);

    CHECK_THROWS_AS(levy::tail_mass(s3, -1.0), std::invalid_argument);
}

TEST_CASE("spec JSON round trip") {
    levy::Product prod;
    prod.components.push_back(stable1(1.5, 0.3, 1.0));
    levy::DiscreteSigned k;
    k.masses = {{1, 0.5}, {-2, 0.25}};
    levy::LevyMeasureSpec dk;
    dk.kind = k;
    dk.pure_jump = true;
    prod.components.push_back(dk);
    levy::LevyMeasureSpec s;
    s.kind = prod;
    s.drift_kappa = Eigen::VectorXd::Zero(2);
    s.drift_kappa << 0.1, -0.2;

    const auto j = levy::spec_to_json(s);
    const auto back = levy::spec_from_json(j);
    CHECK(back.dim() == 2);
    CHECK(levy::tail_mass(back, 0.5) == doctest::Approx(levy::tail_mass(s, 0.5)));
    CHECK(back.drift_kappa[1] == doctest::Approx(-0.2));
}

TEST_SUITE_END();
