#include "levymc/geometry.hpp"

#include <cmath>

#include <Eigen/Geometry>

namespace levymc::geom {

namespace {

void check_same_base(const Point& x, const Point& base, const char* who) {
    if (!(x.manifold == base.manifold) || (x.coords - base.coords).norm() > 1e-12)
        throw std::invalid_argument(std::string(who) + ": tangent vector based at a different point");
}

double sinc(double r) { // sin(r)/r
    return r < 1e-6 ? 1.0 - r * r / 6.0 : std::sin(r) / r;
}
double sinhc(double r) { // sinh(r)/r
    return r < 1e-6 ? 1.0 + r * r / 6.0 : std::sinh(r) / r;
}

}  // namespace

double ambient_inner(const Manifold& m, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (m.kind == ManifoldKind::Hyperboloid)
        return a[0] * b[0] - a.tail(a.size() - 1).dot(b.tail(b.size() - 1));
    return a.dot(b);
}

double fiber_inner(const Manifold& m, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (m.kind == ManifoldKind::Hyperboloid) return -ambient_inner(m, a, b);
    return a.dot(b);
}

Point origin_point(const Manifold& m) {
    Point p{m, Eigen::VectorXd::Zero(m.ambient_dim())};
    if (m.kind == ManifoldKind::Sphere2) p.coords[2] = 1.0;
    if (m.kind == ManifoldKind::Hyperboloid) p.coords[0] = 1.0;
    return p;
}

double constraint_residual(const Point& x) {
    switch (x.manifold.kind) {
        case ManifoldKind::Euclidean: return 0.0;
        case ManifoldKind::Sphere2: return std::fabs(x.coords.norm() - 1.0);
        case ManifoldKind::Hyperboloid: {
            const double q = ambient_inner(x.manifold, x.coords, x.coords);
            return std::fabs(q - 1.0);
        }
    }
    return 0.0;
}

double reproject(Point& x) {
    const double res = constraint_residual(x);
    switch (x.manifold.kind) {
        case ManifoldKind::Euclidean: break;
        case ManifoldKind::Sphere2: x.coords /= x.coords.norm(); break;
        case ManifoldKind::Hyperboloid: {
            const double q = ambient_inner(x.manifold, x.coords, x.coords);
            if (!(q > 0.0)) throw ChartError("reproject: point left the hyperboloid sheet");
            x.coords /= std::sqrt(q);
            if (x.coords[0] < 0.0) throw ChartError("reproject: point crossed to the lower sheet");
            break;
        }
    }
    return res;
}

void project_tangent(const Point& x, Eigen::VectorXd& v) {
    switch (x.manifold.kind) {
        case ManifoldKind::Euclidean: break;
        case ManifoldKind::Sphere2: v -= v.dot(x.coords) * x.coords; break;
        case ManifoldKind::Hyperboloid:
            // <x,x>_M = 1, want <v,x>_M = 0
            v -= ambient_inner(x.manifold, v, x.coords) * x.coords;
            break;
    }
}

Point exp_map(const Point& x, const TangentVector& v) {
    check_same_base(x, v.base, "exp_map");
    Point out = x;
    switch (x.manifold.kind) {
        case ManifoldKind::Euclidean: out.coords = x.coords + v.components; return out;
        case ManifoldKind::Sphere2: {
            const double r = v.components.norm();
            out.coords = std::cos(r) * x.coords + sinc(r) * v.components;
            reproject(out);
            return out;
        }
        case ManifoldKind::Hyperboloid: {
            const double r2 = fiber_inner(x.manifold, v.components, v.components);
            const double r = std::sqrt(std::max(r2, 0.0));
            out.coords = std::cosh(r) * x.coords + sinhc(r) * v.components;
            reproject(out);
            return out;
        }
    }
    return out;
}

TangentVector parallel_transport(const Point& x, const TangentVector& v, const TangentVector& w) {
    check_same_base(x, v.base, "parallel_transport");
    check_same_base(x, w.base, "parallel_transport");
    TangentVector out;
    out.base = exp_map(x, v);
    switch (x.manifold.kind) {
        case ManifoldKind::Euclidean: out.components = w.components; return out;
        case ManifoldKind::Sphere2: {
            const double r = v.components.norm();
            if (r < 1e-14) {
                out.components = w.components;
                return out;
            }
            const Eigen::VectorXd u = v.components / r;
            const double wu = w.components.dot(u);
            out.components = w.components +
                             wu * ((std::cos(r) - 1.0) * u - std::sin(r) * x.coords);
            project_tangent(out.base, out.components);
            return out;
        }
        case ManifoldKind::Hyperboloid: {
            const double r = std::sqrt(std::max(fiber_inner(x.manifold, v.components, v.components), 0.0));
            if (r < 1e-14) {
                out.components = w.components;
                return out;
            }
            const Eigen::VectorXd u = v.components / r;
            const double wu = fiber_inner(x.manifold, w.components, u);
            // rotate in the (x,u) plane: u -> sinh(r) x + cosh(r) u
            out.components = w.components +
                             wu * (std::sinh(r) * x.coords + (std::cosh(r) - 1.0) * u);
            project_tangent(out.base, out.components);
            return out;
        }
    }
    return out;
}

double riemannian_distance(const Point& x, const Point& y) {
    if (!(x.manifold == y.manifold))
        throw std::invalid_argument("riemannian_distance: different manifolds");
    switch (x.manifold.kind) {
        case ManifoldKind::Euclidean: return (x.coords - y.coords).norm();
        case ManifoldKind::Sphere2: {
            const double c = std::clamp(x.coords.dot(y.coords), -1.0, 1.0);
            return std::acos(c);
        }
        case ManifoldKind::Hyperboloid: {
            const double c = std::max(ambient_inner(x.manifold, x.coords, y.coords), 1.0);
            return std::acosh(c);
        }
    }
    return 0.0;
}

Frame canonical_frame(const Point& origin) {
    const Manifold& m = origin.manifold;
    Frame f;
    f.base = origin;
    f.basis.resize(m.ambient_dim(), m.d);
    switch (m.kind) {
        case ManifoldKind::Euclidean:
            f.basis = Eigen::MatrixXd::Identity(m.d, m.d);
            return f;
        case ManifoldKind::Sphere2: {
            // start from the ambient axis least aligned with the point
            int k = 0;
            for (int i = 1; i < 3; ++i)
                if (std::fabs(origin.coords[i]) < std::fabs(origin.coords[k])) k = i;
            Eigen::Vector3d e = Eigen::Vector3d::Zero();
            e[k] = 1.0;
            const Eigen::Vector3d x = origin.coords;
            Eigen::Vector3d b1 = e - e.dot(x) * x;
            b1.normalize();
            const Eigen::Vector3d b2 = x.cross(b1);
            f.basis.col(0) = b1;
            f.basis.col(1) = b2;
            return f;
        }
        case ManifoldKind::Hyperboloid: {
            // Minkowski Gram-Schmidt of the spatial axes projected to T_x
            const Eigen::VectorXd& x = origin.coords;
            int col = 0;
            for (int i = 1; i <= m.d && col < m.d; ++i) {
                Eigen::VectorXd v = Eigen::VectorXd::Zero(m.ambient_dim());
                v[i] = 1.0;
                v -= ambient_inner(m, v, x) * x;
                for (int jc = 0; jc < col; ++jc)
                    v -= fiber_inner(m, v, f.basis.col(jc)) * f.basis.col(jc);
                const double n2 = fiber_inner(m, v, v);
                if (n2 > 1e-20) {
                    f.basis.col(col++) = v / std::sqrt(n2);
                }
            }
            if (col != m.d) throw ChartError("canonical_frame: degenerate basis");
            return f;
        }
    }
    return f;
}

Eigen::VectorXd chart_to_normal_coords(const Point& x, const Point& origin) {
    const Manifold& m = x.manifold;
    if (!(m == origin.manifold))
        throw std::invalid_argument("chart_to_normal_coords: different manifolds");
    Eigen::VectorXd v_amb(m.ambient_dim());
    switch (m.kind) {
        case ManifoldKind::Euclidean:
            return x.coords - origin.coords;
        case ManifoldKind::Sphere2: {
            const double c = std::clamp(x.coords.dot(origin.coords), -1.0, 1.0);
            const double theta = std::acos(c);
            if (theta > M_PI - 1e-6)
                throw ChartError("chart_to_normal_coords: antipodal point on S^2");
            v_amb = x.coords - c * origin.coords;
            const double s = v_amb.norm();
            v_amb = s > 1e-14 ? Eigen::VectorXd(v_amb * (theta / s))
                              : Eigen::VectorXd::Zero(3).eval();
            break;
        }
        case ManifoldKind::Hyperboloid: {
            const double c = std::max(ambient_inner(m, x.coords, origin.coords), 1.0);
            const double r = std::acosh(c);
            v_amb = x.coords - c * origin.coords;
            const double s = std::sqrt(std::max(fiber_inner(m, v_amb, v_amb), 0.0));
            v_amb = s > 1e-14 ? Eigen::VectorXd(v_amb * (r / s))
                              : Eigen::VectorXd::Zero(m.ambient_dim()).eval();
            break;
        }
    }
    const Frame fr = canonical_frame(origin);
    Eigen::VectorXd out(m.d);
    for (int j = 0; j < m.d; ++j) out[j] = fiber_inner(m, v_amb, fr.basis.col(j));
    return out;
}

Point chart_from_normal_coords(const Point& origin, const Eigen::VectorXd& coords) {
    const Frame fr = canonical_frame(origin);
    TangentVector v;
    v.base = origin;
    v.components = fr.basis * coords;
    return exp_map(origin, v);
}

Frame frame_horizontal_step(const Frame& frame, const Eigen::VectorXd& lambda) {
    const Manifold& m = frame.base.manifold;
    if (lambda.size() != m.d)
        throw std::invalid_argument("frame_horizontal_step: lambda must have manifold dimension");
    TangentVector v;
    v.base = frame.base;
    v.components = frame.basis * lambda;
    Frame out;
    out.base = exp_map(frame.base, v);
    out.basis.resize(frame.basis.rows(), frame.basis.cols());
    for (int j = 0; j < frame.basis.cols(); ++j) {
        TangentVector w;
        w.base = frame.base;
        w.components = frame.basis.col(j);
        out.basis.col(j) = parallel_transport(frame.base, v, w).components;
    }
    // re-orthonormalise in the fiber metric to stop drift over long paths
    for (int j = 0; j < out.basis.cols(); ++j) {
        Eigen::VectorXd b = out.basis.col(j);
        for (int k = 0; k < j; ++k)
            b -= fiber_inner(m, b, out.basis.col(k)) * out.basis.col(k);
        out.basis.col(j) = b / std::sqrt(fiber_inner(m, b, b));
    }
    return out;
}

double normal_coords_volume_density(const Manifold& m, const Eigen::VectorXd& chart_coords) {
    const double r = chart_coords.norm();
    switch (m.kind) {
        case ManifoldKind::Euclidean: return 1.0;
        case ManifoldKind::Sphere2: return sinc(r);
        case ManifoldKind::Hyperboloid: return std::pow(sinhc(r), m.d - 1);
    }
    return 1.0;
}

}  // namespace levymc::geom
