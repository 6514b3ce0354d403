#pragma once

#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "levymc/rng.hpp"

namespace levymc::lie {

enum class GroupKind { SO3, Affine, DilTrans };

struct GroupSpec {
    GroupKind kind = GroupKind::SO3;
    int d = 3; // space dimension for Affine(d) / DilTrans(d); ignored for SO3

    int algebra_dim() const {
        switch (kind) {
            case GroupKind::SO3: return 3;
            case GroupKind::Affine: return d * d + d;
            case GroupKind::DilTrans: return d;
        }
        return 0;
    }
    bool operator==(const GroupSpec& o) const { return kind == o.kind && (kind == GroupKind::SO3 || d == o.d); }

    static GroupSpec so3() { return {GroupKind::SO3, 3}; }
    static GroupSpec affine(int d) { return {GroupKind::Affine, d}; }
    static GroupSpec dil_trans(int d) { return {GroupKind::DilTrans, d}; }
};

// SO3: mat is the rotation. Affine: (mat, vec) is x -> mat x + vec.
// DilTrans: (vec, n) is x -> e^n x + vec.
struct GroupElement {
    GroupSpec spec;
    Eigen::MatrixXd mat;
    Eigen::VectorXd vec;
    long n = 0;
};

// Algebra coordinates: SO3 the rotation vector; Affine [vec(u1); u2]
// (column-major); DilTrans the translation part (the identity component).
struct LieAlgebraVector {
    GroupSpec spec;
    Eigen::VectorXd components;
};

GroupElement identity(const GroupSpec& spec);
GroupElement compose(const GroupElement& g, const GroupElement& h);
GroupElement inverse(const GroupElement& g);
GroupElement group_exp(const LieAlgebraVector& u);

// Orthonormality restore for SO3 products over long paths; returns the
// pre-correction residual |R^T R - I|_inf. No-op on the other groups.
double renormalize(GroupElement& g);

Eigen::MatrixXd adjoint(const GroupElement& g);
double modulus(const GroupElement& g); // chi_G(g) = |det Ad_g|
double adjoint_op_norm(const GroupElement& g); // |Ad_g| in the 2-norm

enum class HaarSide { Left, Right };
// Density against the coordinate parametrisation's product measure, modulo a
// multiplicative constant (SO3: exp-chart; Affine: Lebesgue d(g1)d(g2);
// DilTrans: Lebesgue(y) x counting(n)).
std::function<double(const GroupElement&)> haar_density(const GroupSpec& spec, HaarSide side);

struct MomentReport {
    double value = 0.0;   // sum, or partial sum when divergent
    bool finite = true;   // convergence verdict
};

// sum over atoms of rate * chi(g) * |Ad_g|^j   (left case)
// or rate / chi(g) * |Ad_g^{-1}|^j             (right case)
MomentReport big_jump_moment(const GroupSpec& spec,
                             const std::vector<std::pair<GroupElement, double>>& levy_on_group,
                             int j, HaarSide side = HaarSide::Left);

// Analytic verdict for the DilTrans family p_n = e^(-beta n), p_(-n) = e^(-sigma n):
// left finite iff d + j < beta, right finite iff d + j < sigma.
MomentReport diltrans_family_moment(int d, double beta, double sigma, int j,
                                    HaarSide side = HaarSide::Left);

// pi(g) = g(0) for the semidirect groups
Eigen::VectorXd semidirect_project(const GroupElement& g);
GroupElement section_lift(const GroupSpec& spec, const Eigen::VectorXd& x);

// coordinates used by statistical tests: SO3 rotation vector, DilTrans [y; n],
// Affine [vec(g1); g2]
Eigen::VectorXd chart_coords(const GroupElement& g);

GroupElement random_rotation(PathRng& rng); // Haar-uniform on SO3

nlohmann::json element_to_json(const GroupElement& g);
GroupElement element_from_json(const nlohmann::json& j);

}  // namespace levymc::lie
