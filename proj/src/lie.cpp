#include "levymc/lie.hpp"

#include <cmath>

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <Eigen/SVD>
#include <nlohmann/json.hpp>

#include "levymc/quad.hpp"

namespace levymc::lie {

namespace {

void check_same_spec(const GroupElement& g, const GroupElement& h, const char* who) {
    if (!(g.spec == h.spec)) throw std::invalid_argument(std::string(who) + ": spec mismatch");
}

Eigen::Matrix3d skew(const Eigen::Vector3d& w) {
    Eigen::Matrix3d k;
    k << 0, -w[2], w[1], w[2], 0, -w[0], -w[1], w[0], 0;
    return k;
}

Eigen::Matrix3d rodrigues(const Eigen::Vector3d& w) {
    const double th = w.norm();
    const Eigen::Matrix3d k = skew(w);
    double a, b;
    if (th < 1e-6) {
        a = 1.0 - th * th / 6.0;
        b = 0.5 - th * th / 24.0;
    } else {
        a = std::sin(th) / th;
        b = (1.0 - std::cos(th)) / (th * th);
    }
    return Eigen::Matrix3d::Identity() + a * k + b * k * k;
}

Eigen::Vector3d so3_log(const Eigen::Matrix3d& r) {
    const double c = std::clamp((r.trace() - 1.0) / 2.0, -1.0, 1.0);
    const double th = std::acos(c);
    Eigen::Vector3d v(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
    if (th < 1e-6) return 0.5 * v;
    if (th > M_PI - 1e-6) {
        // axis from the symmetric part
        Eigen::Matrix3d s = 0.5 * (r + Eigen::Matrix3d::Identity());
        int k = 0;
        for (int i = 1; i < 3; ++i)
            if (s(i, i) > s(k, k)) k = i;
        Eigen::Vector3d axis = s.col(k) / std::sqrt(std::max(s(k, k), 1e-16));
        axis.normalize();
        if (v.dot(axis) < 0) axis = -axis;
        return th * axis;
    }
    return th / (2.0 * std::sin(th)) * v;
}

// phi(A) = sum A^k / (k+1)!  (so exp([[A,b],[0,0]]) translates by phi(A) b)
Eigen::MatrixXd phi_series(const Eigen::MatrixXd& a) {
    const int d = int(a.rows());
    Eigen::MatrixXd term = Eigen::MatrixXd::Identity(d, d);
    Eigen::MatrixXd sum = term;
    for (int k = 1; k <= 60; ++k) {
        term = term * a / double(k + 1);
        sum += term;
        if (term.cwiseAbs().maxCoeff() < 1e-18) break;
    }
    return sum;
}

Eigen::MatrixXd matrix_exp(const Eigen::MatrixXd& a) {
    // scaling and squaring on the plain Taylor series
    const double nrm = a.cwiseAbs().rowwise().sum().maxCoeff();
    int s = 0;
    double scale = 1.0;
    while (nrm * scale > 0.5) {
        scale *= 0.5;
        ++s;
    }
    const Eigen::MatrixXd b = a * scale;
    Eigen::MatrixXd term = Eigen::MatrixXd::Identity(a.rows(), a.cols());
    Eigen::MatrixXd sum = term;
    for (int k = 1; k <= 40; ++k) {
        term = term * b / double(k);
        sum += term;
        if (term.cwiseAbs().maxCoeff() < 1e-19) break;
    }
    for (int i = 0; i < s; ++i) sum = sum * sum;
    return sum;
}

}  // namespace

GroupElement identity(const GroupSpec& spec) {
    GroupElement g;
    g.spec = spec;
    switch (spec.kind) {
        case GroupKind::SO3: g.mat = Eigen::Matrix3d::Identity(); break;
        case GroupKind::Affine:
            g.mat = Eigen::MatrixXd::Identity(spec.d, spec.d);
            g.vec = Eigen::VectorXd::Zero(spec.d);
            break;
        case GroupKind::DilTrans:
            g.vec = Eigen::VectorXd::Zero(spec.d);
            g.n = 0;
            break;
    }
    return g;
}

GroupElement compose(const GroupElement& g, const GroupElement& h) {
    check_same_spec(g, h, "compose");
    GroupElement out;
    out.spec = g.spec;
    switch (g.spec.kind) {
        case GroupKind::SO3: out.mat = g.mat * h.mat; break;
        case GroupKind::Affine:
            out.mat = g.mat * h.mat;
            out.vec = g.mat * h.vec + g.vec;
            break;
        case GroupKind::DilTrans:
            // (y2,n2).(y1,n1) = (e^{n2} y1 + y2, n1 + n2)
            out.vec = std::exp(double(g.n)) * h.vec + g.vec;
            out.n = g.n + h.n;
            break;
    }
    return out;
}

GroupElement inverse(const GroupElement& g) {
    GroupElement out;
    out.spec = g.spec;
    switch (g.spec.kind) {
        case GroupKind::SO3: out.mat = g.mat.transpose(); break;
        case GroupKind::Affine: {
            const Eigen::MatrixXd gi = g.mat.inverse();
            out.mat = gi;
            out.vec = -gi * g.vec;
            break;
        }
        case GroupKind::DilTrans:
            out.vec = -std::exp(-double(g.n)) * g.vec;
            out.n = -g.n;
            break;
    }
    return out;
}

GroupElement group_exp(const LieAlgebraVector& u) {
    GroupElement out;
    out.spec = u.spec;
    switch (u.spec.kind) {
        case GroupKind::SO3:
            out.mat = rodrigues(Eigen::Vector3d(u.components));
            break;
        case GroupKind::Affine: {
            const int d = u.spec.d;
            if (u.components.size() != d * d + d)
                throw std::invalid_argument("group_exp: bad algebra dimension");
            Eigen::MatrixXd u1(d, d);
            for (int c = 0; c < d; ++c) u1.col(c) = u.components.segment(c * d, d);
            const Eigen::VectorXd u2 = u.components.tail(d);
            out.mat = matrix_exp(u1);
            out.vec = phi_series(u1) * u2;
            break;
        }
        case GroupKind::DilTrans:
            out.vec = u.components;
            out.n = 0;
            break;
    }
    return out;
}

double renormalize(GroupElement& g) {
    if (g.spec.kind != GroupKind::SO3) return 0.0;
    const double res = (g.mat.transpose() * g.mat - Eigen::Matrix3d::Identity())
                           .cwiseAbs()
                           .maxCoeff();
    // Gram-Schmidt the columns
    Eigen::Vector3d c0 = g.mat.col(0).normalized();
    Eigen::Vector3d c1 = g.mat.col(1) - g.mat.col(1).dot(c0) * c0;
    c1.normalize();
    const Eigen::Vector3d c2 = c0.cross(c1);
    g.mat.col(0) = c0;
    g.mat.col(1) = c1;
    g.mat.col(2) = c2;
    return res;
}

Eigen::MatrixXd adjoint(const GroupElement& g) {
    switch (g.spec.kind) {
        case GroupKind::SO3: return g.mat;
        case GroupKind::DilTrans:
            return std::exp(double(g.n)) * Eigen::MatrixXd::Identity(g.spec.d, g.spec.d);
        case GroupKind::Affine: {
            // Ad_g (u1,u2) = (g1 u1 g1^{-1}, g1 u2 - g1 u1 g1^{-1} g2)
            const int d = g.spec.d;
            const Eigen::MatrixXd gi = g.mat.inverse();
            const int ad = d * d + d;
            Eigen::MatrixXd out = Eigen::MatrixXd::Zero(ad, ad);
            // action on vec(u1): vec(g1 u1 g1^{-1}) = (g1^{-T} kron g1) vec(u1)
            for (int c = 0; c < d; ++c)
                for (int r = 0; r < d; ++r)
                    out.block(0, 0, d * d, d * d).block(r * d, c * d, d, d) =
                        gi(c, r) * g.mat; // (g1^{-T})(r,c) = gi(c,r)
            // u2 receives -g1 u1 (g1^{-1} g2): column block for vec(u1)
            const Eigen::VectorXd h = gi * g.vec;
            for (int c = 0; c < d; ++c)
                out.block(d * d, c * d, d, d) = -h[c] * g.mat;
            out.block(d * d, d * d, d, d) = g.mat;
            return out;
        }
    }
    throw std::logic_error("adjoint: unreachable");
}

double modulus(const GroupElement& g) {
    switch (g.spec.kind) {
        case GroupKind::SO3: return 1.0;
        case GroupKind::DilTrans: return std::exp(double(g.n) * double(g.spec.d));
        case GroupKind::Affine: return std::fabs(g.mat.determinant());
    }
    return 1.0;
}

double adjoint_op_norm(const GroupElement& g) {
    if (g.spec.kind == GroupKind::SO3) return 1.0;
    if (g.spec.kind == GroupKind::DilTrans) return std::exp(double(g.n));
    const Eigen::MatrixXd ad = adjoint(g);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(ad);
    return svd.singularValues()[0];
}

std::function<double(const GroupElement&)> haar_density(const GroupSpec& spec, HaarSide side) {
    switch (spec.kind) {
        case GroupKind::SO3:
            // exp-chart density 2(1-cos t)/t^2, both sides (unimodular)
            return [](const GroupElement& g) {
                const double t = so3_log(g.mat).norm();
                if (t < 1e-6) return 1.0 - t * t / 12.0;
                return 2.0 * (1.0 - std::cos(t)) / (t * t);
            };
        case GroupKind::Affine: {
            const int d = spec.d;
            const double p = side == HaarSide::Left ? double(d + 1) : double(d);
            return [p](const GroupElement& g) {
                return std::pow(std::fabs(g.mat.determinant()), -p);
            };
        }
        case GroupKind::DilTrans: {
            if (side == HaarSide::Right) return [](const GroupElement&) { return 1.0; };
            const int d = spec.d;
            return [d](const GroupElement& g) { return std::exp(-double(g.n) * double(d)); };
        }
    }
    throw std::logic_error("haar_density: unreachable");
}

MomentReport big_jump_moment(const GroupSpec&,
                             const std::vector<std::pair<GroupElement, double>>& levy_on_group,
                             int j, HaarSide side) {
    MomentReport rep;
    for (const auto& [g, rate] : levy_on_group) {
        double term;
        if (side == HaarSide::Left) {
            term = rate * modulus(g) * std::pow(adjoint_op_norm(g), j);
        } else {
            const GroupElement gi = inverse(g);
            term = rate / modulus(g) * std::pow(adjoint_op_norm(gi), j);
        }
        rep.value += term;
    }
    rep.finite = std::isfinite(rep.value);
    return rep;
}

MomentReport diltrans_family_moment(int d, double beta, double sigma, int j, HaarSide side) {
    // left:  sum e^{n(d+j-beta)} + sum e^{-n(sigma+d+j)}
    // right: sum e^{-n(beta+d+j)} + sum e^{n(d+j-sigma)}
    MomentReport rep;
    const double decay = side == HaarSide::Left ? beta : sigma;
    const double other = side == HaarSide::Left ? sigma : beta;
    rep.finite = double(d) + double(j) < decay;
    auto geo = [](double expo) { // sum_{n>=1} e^{n expo}, valid for expo < 0
        const double q = std::exp(expo);
        return q / (1.0 - q);
    };
    if (rep.finite) {
        rep.value = geo(double(d) + double(j) - decay) + geo(-(other + double(d) + double(j)));
    } else {
        // partial sum up to n = 50 as the reported diagnostic
        double s = 0.0;
        for (int n = 1; n <= 50; ++n) s += std::exp(double(n) * (double(d) + double(j) - decay));
        rep.value = s + geo(-(other + double(d) + double(j)));
    }
    return rep;
}

Eigen::VectorXd semidirect_project(const GroupElement& g) {
    switch (g.spec.kind) {
        case GroupKind::Affine: return g.vec;
        case GroupKind::DilTrans: return g.vec;
        case GroupKind::SO3: throw std::invalid_argument("semidirect_project: SO3 is not semidirect");
    }
    throw std::logic_error("semidirect_project: unreachable");
}

GroupElement section_lift(const GroupSpec& spec, const Eigen::VectorXd& x) {
    GroupElement g = identity(spec);
    switch (spec.kind) {
        case GroupKind::Affine: g.vec = x; break;
        case GroupKind::DilTrans:
            g.vec = x;
            g.n = 0;
            break;
        case GroupKind::SO3: throw std::invalid_argument("section_lift: SO3 is not semidirect");
    }
    return g;
}

Eigen::VectorXd chart_coords(const GroupElement& g) {
    switch (g.spec.kind) {
        case GroupKind::SO3: return so3_log(g.mat);
        case GroupKind::DilTrans: {
            Eigen::VectorXd out(g.spec.d + 1);
            out.head(g.spec.d) = g.vec;
            out[g.spec.d] = double(g.n);
            return out;
        }
        case GroupKind::Affine: {
            const int d = g.spec.d;
            Eigen::VectorXd out(d * d + d);
            for (int c = 0; c < d; ++c) out.segment(c * d, d) = g.mat.col(c);
            out.tail(d) = g.vec;
            return out;
        }
    }
    throw std::logic_error("chart_coords: unreachable");
}

GroupElement random_rotation(PathRng& rng) {
    // uniform quaternion
    Eigen::Vector4d q;
    for (int i = 0; i < 4; ++i) q[i] = rng.normal();
    q.normalize();
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    GroupElement g;
    g.spec = GroupSpec::so3();
    g.mat.resize(3, 3);
    g.mat << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
        2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
        2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return g;
}

nlohmann::json element_to_json(const GroupElement& g) {
    nlohmann::json j;
    switch (g.spec.kind) {
        case GroupKind::SO3: {
            j["group"] = "so3";
            auto rows = nlohmann::json::array();
            for (int r = 0; r < 3; ++r)
                rows.push_back(std::vector<double>{g.mat(r, 0), g.mat(r, 1), g.mat(r, 2)});
            j["matrix"] = rows;
            break;
        }
        case GroupKind::Affine: {
            j["group"] = "affine";
            j["d"] = g.spec.d;
            auto rows = nlohmann::json::array();
            for (int r = 0; r < g.spec.d; ++r) {
                std::vector<double> row(g.spec.d);
                for (int c = 0; c < g.spec.d; ++c) row[c] = g.mat(r, c);
                rows.push_back(row);
            }
            j["g1"] = rows;
            j["g2"] = std::vector<double>(g.vec.data(), g.vec.data() + g.vec.size());
            break;
        }
        case GroupKind::DilTrans: {
            j["group"] = "dil_trans";
            j["d"] = g.spec.d;
            j["y"] = std::vector<double>(g.vec.data(), g.vec.data() + g.vec.size());
            j["n"] = g.n;
            break;
        }
    }
    return j;
}

GroupElement element_from_json(const nlohmann::json& j) {
    const std::string kind = j.at("group").get<std::string>();
    GroupElement g;
    if (kind == "so3") {
        g.spec = GroupSpec::so3();
        g.mat.resize(3, 3);
        const auto rows = j.at("matrix");
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) g.mat(r, c) = rows[r][c].get<double>();
    } else if (kind == "affine") {
        const int d = j.at("d").get<int>();
        g.spec = GroupSpec::affine(d);
        g.mat.resize(d, d);
        const auto rows = j.at("g1");
        for (int r = 0; r < d; ++r)
            for (int c = 0; c < d; ++c) g.mat(r, c) = rows[r][c].get<double>();
        const auto v = j.at("g2").get<std::vector<double>>();
        g.vec = Eigen::Map<const Eigen::VectorXd>(v.data(), d);
    } else if (kind == "dil_trans") {
        const int d = j.at("d").get<int>();
        g.spec = GroupSpec::dil_trans(d);
        const auto v = j.at("y").get<std::vector<double>>();
        g.vec = Eigen::Map<const Eigen::VectorXd>(v.data(), d);
        g.n = j.at("n").get<long>();
    } else {
        throw std::invalid_argument("unknown group kind: " + kind);
    }
    return g;
}

}  // namespace levymc::lie
