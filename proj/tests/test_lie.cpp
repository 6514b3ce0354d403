#include <doctest.h>

#include <cmath>

#include <nlohmann/json.hpp>

#include <Eigen/Dense>

#include "levymc/lie.hpp"
#include "levymc/rng.hpp"

using namespace levymc;
using lie::GroupElement;
using lie::GroupSpec;

namespace {

GroupElement random_element(const GroupSpec& spec, PathRng& rng) {
    switch (spec.kind) {
        case lie::GroupKind::SO3: return lie::random_rotation(rng);
        case lie::GroupKind::Affine: {
            GroupElement g = lie::identity(spec);
            for (int r = 0; r < spec.d; ++r)
                for (int c = 0; c < spec.d; ++c) g.mat(r, c) += 0.4 * rng.normal();
            for (int r = 0; r < spec.d; ++r) g.vec[r] = rng.normal();
            if (std::fabs(g.mat.determinant()) < 0.05) g.mat += Eigen::MatrixXd::Identity(spec.d, spec.d);
            return g;
        }
        case lie::GroupKind::DilTrans: {
            GroupElement g = lie::identity(spec);
            for (int r = 0; r < spec.d; ++r) g.vec[r] = rng.normal();
            g.n = long(rng.raw() % 7) - 3;
            return g;
        }
    }
    return lie::identity(spec);
}

// straight Taylor series for the matrix exponential; oracle for Rodrigues
Eigen::Matrix3d series_exp(const Eigen::Matrix3d& a) {
    Eigen::Matrix3d term = Eigen::Matrix3d::Identity();
    Eigen::Matrix3d sum = term;
    for (int k = 1; k <= 30; ++k) {
        term = (term * a / double(k)).eval();
        sum += term;
    }
    return sum;
}

}  // namespace

TEST_SUITE_BEGIN("lie");

TEST_CASE("group laws hold to 1e-12") {
    PathRng rng(3, 0, 0);
    for (auto spec : {GroupSpec::so3(), GroupSpec::affine(2), GroupSpec::dil_trans(3)}) {
        const GroupElement e = lie::identity(spec);
        for (int trial = 0; trial < 200; ++trial) {
            const GroupElement g = random_element(spec, rng);
            const GroupElement h = random_element(spec, rng);
            const GroupElement k = random_element(spec, rng);
            const GroupElement gi = lie::inverse(g);
            const GroupElement prod = lie::compose(g, gi);
            CHECK((lie::chart_coords(prod) - lie::chart_coords(e)).norm() <= 1e-12);
            const auto left = lie::compose(lie::compose(g, h), k);
            const auto right = lie::compose(g, lie::compose(h, k));
            CHECK((lie::chart_coords(left) - lie::chart_coords(right)).norm() <= 1e-10);
        }
    }
}

TEST_CASE("dilation-translation composition law") {
    const GroupSpec spec = GroupSpec::dil_trans(2);
    GroupElement dil = lie::identity(spec);
    dil.n = 1;
    GroupElement trans = lie::identity(spec);
    trans.vec << 0.7, -1.3;
    GroupElement dil_inv = lie::identity(spec);
    dil_inv.n = -1;
    // (0,1).(y,0).(0,-1) = (e y, 0)
    const auto out = lie::compose(lie::compose(dil, trans), dil_inv);
    CHECK(out.n == 0);
    CHECK((out.vec - std::exp(1.0) * trans.vec).norm() <= 1e-14);
}

TEST_CASE("SO3 exponential: quarter turn and the series oracle") {
    lie::LieAlgebraVector u{GroupSpec::so3(), Eigen::VectorXd::Zero(3)};
    u.components[2] = M_PI / 2.0;
    const auto g = lie::group_exp(u);
    Eigen::Vector3d e1(1, 0, 0);
    CHECK((Eigen::Vector3d(g.mat * e1) - Eigen::Vector3d(0, 1, 0)).norm() <= 1e-12);

    PathRng rng(5, 0, 0);
    for (int trial = 0; trial < 100; ++trial) {
        Eigen::Vector3d w;
        for (int i = 0; i < 3; ++i) w[i] = rng.normal();
        Eigen::Matrix3d k;
        k << 0, -w[2], w[1], w[2], 0, -w[0], -w[1], w[0], 0;
        lie::LieAlgebraVector v{GroupSpec::so3(), w};
        CHECK((lie::group_exp(v).mat - series_exp(k)).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("adjoint and modulus are homomorphisms") {
    PathRng rng(7, 0, 0);
    for (auto spec : {GroupSpec::so3(), GroupSpec::affine(2), GroupSpec::dil_trans(2)}) {
        for (int trial = 0; trial < 100; ++trial) {
            const GroupElement g = random_element(spec, rng);
            const GroupElement h = random_element(spec, rng);
            const Eigen::MatrixXd lhs = lie::adjoint(lie::compose(g, h));
            const Eigen::MatrixXd rhs = lie::adjoint(g) * lie::adjoint(h);
            CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, rhs.cwiseAbs().maxCoeff()));
            const double cg = lie::modulus(g), ch = lie::modulus(h);
            CHECK(std::fabs(lie::modulus(lie::compose(g, h)) - cg * ch) <= 1e-10 * cg * ch);
        }
    }
}

TEST_CASE("modulus closed forms match |det Ad|") {
    PathRng rng(11, 0, 0);
    // compact SO3 is unimodular
    for (int trial = 0; trial < 20; ++trial)
        CHECK(lie::modulus(random_element(GroupSpec::so3(), rng)) == 1.0);

    // DilTrans: Ad = e^n I, chi = e^{nd}
    const GroupSpec dt = GroupSpec::dil_trans(3);
    for (int trial = 0; trial < 20; ++trial) {
        const GroupElement g = random_element(dt, rng);
        CHECK(lie::modulus(g) ==
              doctest::Approx(std::exp(double(g.n) * 3.0)).epsilon(1e-13));
        CHECK((lie::adjoint(g) -
               std::exp(double(g.n)) * Eigen::MatrixXd::Identity(3, 3))
                  .cwiseAbs()
                  .maxCoeff() <= 1e-13);
        CHECK(std::fabs(lie::adjoint(g).determinant()) ==
              doctest::Approx(lie::modulus(g)).epsilon(1e-10));
    }

    // Affine: chi = |det g1|, numerically equal to |det Ad|
    const GroupSpec af = GroupSpec::affine(2);
    for (int trial = 0; trial < 20; ++trial) {
        const GroupElement g = random_element(af, rng);
        CHECK(lie::modulus(g) == doctest::Approx(std::fabs(g.mat.determinant())).epsilon(1e-12));
        CHECK(std::fabs(lie::adjoint(g).determinant()) ==
              doctest::Approx(lie::modulus(g)).epsilon(1e-9));
    }
}

TEST_CASE("haar densities: sides, ratios, left invariance by importance sampling") {
    // unimodular SO3: left equals right
    const auto so3_left = lie::haar_density(GroupSpec::so3(), lie::HaarSide::Left);
    const auto so3_right = lie::haar_density(GroupSpec::so3(), lie::HaarSide::Right);
    PathRng rng(13, 0, 0);
    for (int i = 0; i < 20; ++i) {
        const auto g = lie::random_rotation(rng);
        CHECK(so3_left(g) == doctest::Approx(so3_right(g)));
    }

    // DilTrans: right/left ratio is chi = e^{nd}
    const GroupSpec dt = GroupSpec::dil_trans(2);
    const auto dt_left = lie::haar_density(dt, lie::HaarSide::Left);
    const auto dt_right = lie::haar_density(dt, lie::HaarSide::Right);
    for (int i = 0; i < 20; ++i) {
        const auto g = random_element(dt, rng);
        CHECK(dt_right(g) / dt_left(g) ==
              doctest::Approx(lie::modulus(g)).epsilon(1e-12));
    }

    // left invariance: int f(g0 g) haar_left = int f(g) haar_left, by an
    // importance-sampled MC oracle on the (y, n) parametrisation
    const GroupSpec dt1 = GroupSpec::dil_trans(1);
    const auto dens = lie::haar_density(dt1, lie::HaarSide::Left);
    GroupElement g0 = lie::identity(dt1);
    g0.vec[0] = 0.4;
    g0.n = 1;
    auto f = [](const GroupElement& g) {
        const double y = g.vec[0];
        if (g.n < -2 || g.n > 2 || std::fabs(y) > 2.5) return 0.0;
        return std::exp(-y * y) * (1.0 + 0.5 * std::cos(double(g.n)));
    };
    // proposal: n uniform in [-6, 6], y uniform in [-40, 40] (covers supp f(g0 .))
    const double qy = 1.0 / 80.0, qn = 1.0 / 13.0;
    double s0 = 0, s1 = 0, s0sq = 0, s1sq = 0;
    const int n_mc = 400000;
    for (int i = 0; i < n_mc; ++i) {
        GroupElement g = lie::identity(dt1);
        g.vec[0] = rng.uniform(-40.0, 40.0);
        g.n = long(rng.raw() % 13) - 6;
        const double w = dens(g) / (qy * qn);
        const double a = w * f(g);
        const double b = w * f(lie::compose(g0, g));
        s0 += a;
        s1 += b;
        s0sq += a * a;
        s1sq += b * b;
    }
    const double m0 = s0 / n_mc, m1 = s1 / n_mc;
    const double sd = std::sqrt((s0sq / n_mc - m0 * m0) / n_mc +
                                (s1sq / n_mc - m1 * m1) / n_mc);
    CHECK(std::fabs(m0 - m1) <= 3.0 * sd);
}

TEST_CASE("big jump moments: thresholds of the dilation family") {
    // left verdict: finite iff d + j < beta
    CHECK_FALSE(lie::diltrans_family_moment(3, 0.5, 0.5, 0).finite);
    CHECK(lie::diltrans_family_moment(1, 2.0, 2.0, 0).finite);
    CHECK_FALSE(lie::diltrans_family_moment(1, 2.0, 2.0, 1).finite); // 1+1 !< 2
    // right verdict: finite iff d + j < sigma
    CHECK(lie::diltrans_family_moment(1, 0.5, 2.0, 0, lie::HaarSide::Right).finite);
    CHECK_FALSE(lie::diltrans_family_moment(3, 2.0, 0.5, 0, lie::HaarSide::Right).finite);

    // compact-support jump lists are always finite
    PathRng rng(17, 0, 0);
    std::vector<std::pair<GroupElement, double>> atoms;
    for (int i = 0; i < 5; ++i)
        atoms.emplace_back(random_element(GroupSpec::dil_trans(2), rng), 0.3);
    const auto rep = lie::big_jump_moment(GroupSpec::dil_trans(2), atoms, 3);
    CHECK(rep.finite);
    CHECK(rep.value > 0.0);

    // the finite family value agrees with a direct truncated sum
    const auto fam = lie::diltrans_family_moment(1, 3.0, 2.0, 0);
    double direct = 0.0;
    for (int n = 1; n <= 500; ++n)
        direct += std::exp(-3.0 * n) * std::exp(double(n)) +
                  std::exp(-2.0 * n) * std::exp(-double(n));
    CHECK(fam.value == doctest::Approx(direct).epsilon(1e-10));
}

TEST_CASE("semidirect projection, section, and the product rule") {
    const GroupSpec dt = GroupSpec::dil_trans(2);
    CHECK(lie::semidirect_project(lie::identity(dt)).norm() == 0.0);
    PathRng rng(19, 0, 0);
    for (int trial = 0; trial < 1000; ++trial) {
        const GroupElement g = random_element(dt, rng);
        CHECK((lie::semidirect_project(g) - g.vec).norm() == 0.0);

        // product rule S(x1) h1 S(x2) h2 = S(x1 + h1(x2)) h1 h2 with h = dilations
        Eigen::VectorXd x1(2), x2(2);
        for (int k = 0; k < 2; ++k) {
            x1[k] = rng.normal();
            x2[k] = rng.normal();
        }
        GroupElement h1 = lie::identity(dt);
        h1.n = long(rng.raw() % 5) - 2;
        GroupElement h2 = lie::identity(dt);
        h2.n = long(rng.raw() % 5) - 2;
        const auto lhs = lie::compose(lie::compose(lie::section_lift(dt, x1), h1),
                                      lie::compose(lie::section_lift(dt, x2), h2));
        const Eigen::VectorXd h1x2 = std::exp(double(h1.n)) * x2;
        const auto rhs = lie::compose(lie::section_lift(dt, x1 + h1x2), lie::compose(h1, h2));
        CHECK((lie::chart_coords(lhs) - lie::chart_coords(rhs)).norm() <= 1e-12);

        // chi(S_x^{-1}) = 1/chi_M(x) holds exactly (both sides are 1 here)
        const auto s = lie::section_lift(dt, x1);
        CHECK(lie::modulus(lie::inverse(s)) * lie::modulus(s) == 1.0);
    }

    // project . lift = identity
    Eigen::VectorXd x(2);
    x << 1.5, -0.25;
    CHECK((lie::semidirect_project(lie::section_lift(dt, x)) - x).norm() == 0.0);
    CHECK_THROWS_AS(lie::semidirect_project(lie::identity(GroupSpec::so3())),
                    std::invalid_argument);
}

TEST_CASE("element JSON round trip") {
    PathRng rng(23, 0, 0);
    for (auto spec : {GroupSpec::so3(), GroupSpec::affine(2), GroupSpec::dil_trans(3)}) {
        const GroupElement g = random_element(spec, rng);
        const auto back = lie::element_from_json(lie::element_to_json(g));
        CHECK((lie::chart_coords(back) - lie::chart_coords(g)).norm() <= 1e-14);
    }
}

TEST_SUITE_END();
