#pragma once

#include <stdexcept>

#include <Eigen/Core>

namespace levymc::geom {

struct ChartError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class ManifoldKind { Euclidean, Sphere2, Hyperboloid };

struct Manifold {
    ManifoldKind kind = ManifoldKind::Euclidean;
    int d = 1; // intrinsic dimension (Sphere2 fixes d = 2)

    int ambient_dim() const {
        switch (kind) {
            case ManifoldKind::Euclidean: return d;
            case ManifoldKind::Sphere2: return 3;
            case ManifoldKind::Hyperboloid: return d + 1;
        }
        return d;
    }
    bool operator==(const Manifold& o) const { return kind == o.kind && d == o.d; }

    static Manifold euclidean(int d) { return {ManifoldKind::Euclidean, d}; }
    static Manifold sphere2() { return {ManifoldKind::Sphere2, 2}; }
    static Manifold hyperboloid(int d) { return {ManifoldKind::Hyperboloid, d}; }
};

// Ambient coordinates: R^d; S^2 as |x| = 1 in R^3; H^d as the upper sheet
// x0^2 - sum x_i^2 = 1, x0 > 0 of the Minkowski quadric in R^(1+d).
struct Point {
    Manifold manifold;
    Eigen::VectorXd coords;
};

struct TangentVector {
    Point base;
    Eigen::VectorXd components; // ambient, tangent to the manifold at base
};

// Orthonormal basis of T_x M stored as ambient column vectors.
struct Frame {
    Point base;
    Eigen::MatrixXd basis; // ambient_dim x d
};

// Minkowski on the hyperboloid's ambient space, Euclidean elsewhere.
double ambient_inner(const Manifold& m, const Eigen::VectorXd& a, const Eigen::VectorXd& b);
// Riemannian inner product of tangent vectors (positive definite).
double fiber_inner(const Manifold& m, const Eigen::VectorXd& a, const Eigen::VectorXd& b);

Point origin_point(const Manifold& m); // R^d: 0; S^2: north pole; H^d: (1,0,..)

// |manifold constraint residual| before the fix; used to assert per-step drift
double reproject(Point& x);
void project_tangent(const Point& x, Eigen::VectorXd& v);

Point exp_map(const Point& x, const TangentVector& v);
TangentVector parallel_transport(const Point& x, const TangentVector& v, const TangentVector& w);
double riemannian_distance(const Point& x, const Point& y);

// Normal coordinates at `origin` in the canonical frame: exp_origin^{-1}.
Eigen::VectorXd chart_to_normal_coords(const Point& x, const Point& origin);
Point chart_from_normal_coords(const Point& origin, const Eigen::VectorXd& coords);

// deterministic orthonormal basis of T_origin M
Frame canonical_frame(const Point& origin);

Frame frame_horizontal_step(const Frame& frame, const Eigen::VectorXd& lambda);

// Density of the Riemannian measure against Lebesgue in normal coordinates:
// 1 on R^d, sin(r)/r on S^2, (sinh(r)/r)^(d-1) on H^d.
double normal_coords_volume_density(const Manifold& m, const Eigen::VectorXd& chart_coords);

double constraint_residual(const Point& x);

}  // namespace levymc::geom
