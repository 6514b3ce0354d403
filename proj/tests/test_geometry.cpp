#include <doctest.h>

#include <cmath>

#include "levymc/geometry.hpp"
#include "levymc/rng.hpp"

using namespace levymc;
using geom::Manifold;
using geom::Point;
using geom::TangentVector;

namespace {

// test-side oracle: RK4 on the ambient geodesic/transport system
//   gamma'' = -<gamma', gamma'>_a gamma,   w' = -<w, gamma'>_a gamma
struct OdeOracle {
    Manifold m;

    double inner(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
        return geom::ambient_inner(m, a, b);
    }

    void rhs(const Eigen::VectorXd& g, const Eigen::VectorXd& v, const Eigen::VectorXd& w,
             Eigen::VectorXd& dg, Eigen::VectorXd& dv, Eigen::VectorXd& dw) const {
        dg = v;
        if (m.kind == geom::ManifoldKind::Euclidean) {
            dv = Eigen::VectorXd::Zero(g.size());
            dw = Eigen::VectorXd::Zero(g.size());
        } else {
            dv = -inner(v, v) * g;
            dw = -inner(w, v) * g;
        }
    }

    // integrate to time 1
    void run(const Point& x, const Eigen::VectorXd& v0, const Eigen::VectorXd& w0,
             Eigen::VectorXd& g_out, Eigen::VectorXd& v_out, Eigen::VectorXd& w_out,
             int steps = 4000) const {
        Eigen::VectorXd g = x.coords, v = v0, w = w0;
        const double h = 1.0 / steps;
        Eigen::VectorXd k1g, k1v, k1w, k2g, k2v, k2w, k3g, k3v, k3w, k4g, k4v, k4w;
        for (int i = 0; i < steps; ++i) {
            rhs(g, v, w, k1g, k1v, k1w);
            rhs(g + 0.5 * h * k1g, v + 0.5 * h * k1v, w + 0.5 * h * k1w, k2g, k2v, k2w);
            rhs(g + 0.5 * h * k2g, v + 0.5 * h * k2v, w + 0.5 * h * k2w, k3g, k3v, k3w);
            rhs(g + h * k3g, v + h * k3v, w + h * k3w, k4g, k4v, k4w);
            g += h / 6.0 * (k1g + 2 * k2g + 2 * k3g + k4g);
            v += h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v);
            w += h / 6.0 * (k1w + 2 * k2w + 2 * k3w + k4w);
        }
        g_out = g;
        v_out = v;
        w_out = w;
    }
};

Point random_point(const Manifold& m, PathRng& rng) {
    Point o = geom::origin_point(m);
    const geom::Frame fr = geom::canonical_frame(o);
    Eigen::VectorXd c(m.d);
    for (int i = 0; i < m.d; ++i) c[i] = 0.8 * rng.normal();
    return geom::chart_from_normal_coords(o, c);
}

TangentVector random_tangent(const Point& x, double scale, PathRng& rng) {
    TangentVector v;
    v.base = x;
    v.components = Eigen::VectorXd::Zero(x.coords.size());
    for (int i = 0; i < x.coords.size(); ++i) v.components[i] = rng.normal();
    geom::project_tangent(x, v.components);
    // fix the Riemannian length (the Minkowski projection can inflate the raw
    // draw badly at large radius)
    const double n = std::sqrt(std::max(
        geom::fiber_inner(x.manifold, v.components, v.components), 1e-300));
    v.components *= scale * std::fabs(rng.normal() + 0.3) / n;
    return v;
}

}  // namespace

TEST_SUITE_BEGIN("geometry");

TEST_CASE("exp map fixed points and closed forms") {
    for (auto m : {Manifold::euclidean(3), Manifold::sphere2(), Manifold::hyperboloid(3)}) {
        PathRng rng(99, 0, 0);
        const Point x = random_point(m, rng);
        TangentVector zero;
        zero.base = x;
        zero.components = Eigen::VectorXd::Zero(m.ambient_dim());
        const Point y = geom::exp_map(x, zero);
        CHECK((y.coords - x.coords).norm() < 1e-14);
    }

    // hyperboloid ray from the origin point
    const Manifold h = Manifold::hyperboloid(3);
    const Point o = geom::origin_point(h);
    TangentVector v;
    v.base = o;
    v.components = Eigen::VectorXd::Zero(4);
    const double r = 1.7;
    v.components[1] = r;
    const Point y = geom::exp_map(o, v);
    CHECK(y.coords[0] == doctest::Approx(std::cosh(r)).epsilon(1e-12));
    CHECK(y.coords[1] == doctest::Approx(std::sinh(r)).epsilon(1e-12));
    CHECK(std::fabs(y.coords[2]) < 1e-14);

    // half great circle lands at the antipode
    const Manifold s2 = Manifold::sphere2();
    PathRng rng(7, 1, 0);
    const Point x = random_point(s2, rng);
    TangentVector u = random_tangent(x, 1.0, rng);
    u.components *= M_PI / u.components.norm();
    const Point anti = geom::exp_map(x, u);
    CHECK((anti.coords + x.coords).norm() < 1e-9);
}

TEST_CASE("exp map agrees with the geodesic ODE oracle") {
    for (auto m : {Manifold::sphere2(), Manifold::hyperboloid(2), Manifold::hyperboloid(4)}) {
        OdeOracle oracle{m};
        PathRng rng(11, std::uint64_t(m.d), 0);
        for (int trial = 0; trial < 20; ++trial) {
            const Point x = random_point(m, rng);
            const TangentVector v = random_tangent(x, 0.7, rng);
            Eigen::VectorXd g, vv, ww;
            oracle.run(x, v.components, v.components, g, vv, ww);
            const Point y = geom::exp_map(x, v);
            CHECK((y.coords - g).norm() <= 1e-9);
        }
    }
}

TEST_CASE("parallel transport preserves inner products and matches the ODE") {
    for (auto m : {Manifold::sphere2(), Manifold::hyperboloid(2), Manifold::hyperboloid(3)}) {
        OdeOracle oracle{m};
        PathRng rng(13, std::uint64_t(m.d), 0);
        for (int trial = 0; trial < 20; ++trial) {
            const Point x = random_point(m, rng);
            const TangentVector v = random_tangent(x, 0.8, rng);
            const TangentVector w1 = random_tangent(x, 1.0, rng);
            const TangentVector w2 = random_tangent(x, 1.0, rng);
            const auto p1 = geom::parallel_transport(x, v, w1);
            const auto p2 = geom::parallel_transport(x, v, w2);
            const double before = geom::fiber_inner(m, w1.components, w2.components);
            const double after = geom::fiber_inner(m, p1.components, p2.components);
            CHECK(std::fabs(before - after) <= 1e-9);

            Eigen::VectorXd g, vv, ww;
            oracle.run(x, v.components, w1.components, g, vv, ww);
            CHECK((p1.components - ww).norm() <= 1e-8);
        }
    }

    // transport of v along itself gives the endpoint velocity, norm |v|
    const Manifold s2 = Manifold::sphere2();
    PathRng rng(17, 0, 0);
    const Point x = random_point(s2, rng);
    const TangentVector v = random_tangent(x, 0.9, rng);
    const auto pv = geom::parallel_transport(x, v, v);
    CHECK(pv.components.norm() == doctest::Approx(v.components.norm()).epsilon(1e-10));

    // a full great circle is trivial holonomy for its own tangent frame
    TangentVector full = v;
    full.components *= 2.0 * M_PI / v.components.norm();
    const TangentVector w = random_tangent(x, 1.0, rng);
    const auto back = geom::parallel_transport(x, full, w);
    CHECK((back.base.coords - x.coords).norm() < 1e-9);
    CHECK((back.components - w.components).norm() < 1e-8);
}

TEST_CASE("frame horizontal step basics") {
    // lambda = 0 leaves the frame unchanged
    for (auto m : {Manifold::euclidean(2), Manifold::sphere2(), Manifold::hyperboloid(2)}) {
        const geom::Frame fr = geom::canonical_frame(geom::origin_point(m));
        const auto out = geom::frame_horizontal_step(fr, Eigen::VectorXd::Zero(m.d));
        CHECK((out.base.coords - fr.base.coords).norm() < 1e-14);
        CHECK((out.basis - fr.basis).norm() < 1e-12);
    }

    // Euclidean: translation, basis unchanged
    const Manifold e2 = Manifold::euclidean(2);
    geom::Frame fr = geom::canonical_frame(geom::origin_point(e2));
    Eigen::VectorXd lam(2);
    lam << 0.3, -0.4;
    const auto out = geom::frame_horizontal_step(fr, lam);
    CHECK((out.base.coords - lam).norm() < 1e-14);
    CHECK((out.basis - fr.basis).norm() < 1e-14);

    // hyperboloid out-and-back along a geodesic returns base and frame
    const Manifold h2 = Manifold::hyperboloid(2);
    PathRng rng(23, 0, 0);
    geom::Frame f0 = geom::canonical_frame(geom::origin_point(h2));
    Eigen::VectorXd l2(2);
    l2 << 0.8, -0.5;
    const auto mid = geom::frame_horizontal_step(f0, l2);
    const auto back = geom::frame_horizontal_step(mid, -l2);
    CHECK((back.base.coords - f0.base.coords).norm() < 1e-9);
    CHECK((back.basis - f0.basis).norm() < 1e-8);

    // orthonormality after many random steps; the walk is tethered to the
    // numerically sane region (doubles cannot hold 1e-10 Gram residuals when
    // ambient hyperboloid coordinates reach cosh of a large radius)
    geom::Frame cur = f0;
    const geom::Point h2_origin = geom::origin_point(h2);
    auto inward = [&](const geom::Frame& f) {
        // direction toward the origin expressed in f's own basis
        const Eigen::VectorXd w = geom::chart_to_normal_coords(h2_origin, f.base);
        const Eigen::VectorXd v_amb = geom::canonical_frame(f.base).basis * w;
        Eigen::VectorXd l(2);
        for (int k = 0; k < 2; ++k) l[k] = geom::fiber_inner(h2, v_amb, f.basis.col(k));
        return Eigen::VectorXd(l.normalized());
    };
    for (int i = 0; i < 200; ++i) {
        Eigen::VectorXd l(2);
        l << 0.3 * rng.normal(), 0.3 * rng.normal();
        if (geom::riemannian_distance(cur.base, h2_origin) > 2.0) l = 0.5 * inward(cur);
        cur = geom::frame_horizontal_step(cur, l);
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) {
                const double g = geom::fiber_inner(h2, cur.basis.col(a), cur.basis.col(b));
                CHECK(std::fabs(g - (a == b ? 1.0 : 0.0)) <= 1e-10);
            }
        CHECK(geom::constraint_residual(cur.base) <= 1e-10);
    }
}

TEST_CASE("distance and the normal-coordinate chart invert each other") {
    const Manifold h3 = Manifold::hyperboloid(3);
    const Point o = geom::origin_point(h3);
    Point y = o;
    const double r = 2.3;
    y.coords.setZero();
    y.coords[0] = std::cosh(r);
    y.coords[1] = std::sinh(r);
    CHECK(geom::riemannian_distance(o, y) == doctest::Approx(r).epsilon(1e-12));
    CHECK(geom::riemannian_distance(o, o) == 0.0);

    for (auto m : {Manifold::euclidean(2), Manifold::sphere2(), Manifold::hyperboloid(2)}) {
        PathRng rng(31, std::uint64_t(m.d), 0);
        const Point origin = random_point(m, rng);
        double max_err = 0.0;
        for (int i = 0; i < 1000; ++i) {
            Eigen::VectorXd c(m.d);
            for (int k = 0; k < m.d; ++k) c[k] = 0.6 * rng.normal();
            if (m.kind == geom::ManifoldKind::Sphere2 && c.norm() > 2.8) c *= 2.8 / c.norm();
            const Point p = geom::chart_from_normal_coords(origin, c);
            const Eigen::VectorXd back = geom::chart_to_normal_coords(p, origin);
            max_err = std::max(max_err, (back - c).norm());
        }
        CHECK(max_err <= 1e-9);
    }

    // antipodal chart failure on the sphere
    const Point np = geom::origin_point(Manifold::sphere2());
    Point sp = np;
    sp.coords = -np.coords;
    CHECK_THROWS_AS(geom::chart_to_normal_coords(sp, np), geom::ChartError);
}

TEST_CASE("geodesic flow property") {
    for (auto m : {Manifold::sphere2(), Manifold::hyperboloid(2)}) {
        PathRng rng(37, std::uint64_t(m.d), 0);
        for (int trial = 0; trial < 50; ++trial) {
            const Point x = random_point(m, rng);
            const TangentVector v = random_tangent(x, 0.8, rng);
            const double s = rng.uniform();
            const double t = rng.uniform();
            TangentVector sv = v;
            sv.components *= s;
            TangentVector stv = v;
            stv.components *= s + t;
            const Point direct = geom::exp_map(x, stv);
            const auto pv = geom::parallel_transport(x, sv, v);
            TangentVector tv = pv;
            tv.components *= t;
            const Point staged = geom::exp_map(pv.base, tv);
            CHECK((direct.coords - staged.coords).norm() <= 1e-8);
        }
    }
}

TEST_CASE("mismatched base points are rejected") {
    const Manifold s2 = Manifold::sphere2();
    PathRng rng(41, 0, 0);
    const Point x = random_point(s2, rng);
    const Point y = random_point(s2, rng);
    TangentVector v = random_tangent(y, 0.5, rng);
    CHECK_THROWS_AS(geom::exp_map(x, v), std::invalid_argument);
}

TEST_SUITE_END();
