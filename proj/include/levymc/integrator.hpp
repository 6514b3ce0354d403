#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>

#include <Eigen/Core>

#include "levymc/geometry.hpp"
#include "levymc/levy.hpp"
#include "levymc/lie.hpp"
#include "levymc/rng.hpp"

namespace levymc::sim {

struct ExplosionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ContractViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Position is frozen once alive turns false (cemetery convention).
struct PathState {
    std::variant<geom::Point, lie::GroupElement, geom::Frame> position;
    bool alive = true;
    double time = 0.0;

    const geom::Point& point() const { return std::get<geom::Point>(position); }
    const lie::GroupElement& group() const { return std::get<lie::GroupElement>(position); }
    const geom::Frame& frame() const { return std::get<geom::Frame>(position); }
};

// --- coefficient field -------------------------------------------------------

// a-bar(x) as a named matrix field R^m -> R^d; constant fields carry the
// matrix so flows and jumps stay closed-form.
struct MatrixField {
    std::string id;
    int state_dim = 1;
    int driver_dim = 1;
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> eval;
    std::optional<Eigen::MatrixXd> constant; // set when eval is x-independent
};
void register_matrix_field(const MatrixField& field);
const MatrixField& matrix_field(const std::string& id);

using DriftField = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
void register_drift_field(const std::string& id, int dim, DriftField fn,
                          std::optional<Eigen::VectorXd> constant = std::nullopt);

using DomainPredicate = std::function<bool(const PathState&)>;
void register_domain_predicate(const std::string& id, DomainPredicate fn);
const DomainPredicate& domain_predicate(const std::string& id);

struct EuclideanLinear {
    std::string field_id = "identity";
    int state_dim = 1;
    int driver_dim = 1;
};
struct FrameHorizontal {
    geom::Manifold manifold;
};
struct LieLeftInvariant {
    lie::GroupSpec group;
};
struct LieRightInvariant {
    lie::GroupSpec group;
};
struct CoefficientField;
struct Killed {
    std::shared_ptr<const CoefficientField> inner;
    std::string domain_predicate_id;
};

struct SoftKill {
    std::function<double(const PathState&)> rate;
    double sup_rate = 0.0;
};

// State-dependent jump kernel, realised by thinning candidate events of rate
// sup_mass: accept with mass(x)/sup_mass, then draw the mark at x. This
// produces the same jump law as the inverse-kernel construction driven by an
// auxiliary stable process (both have Levy kernel mu'_x).
struct StateJumpKernel {
    std::function<double(const PathState&)> mass;
    std::function<Eigen::VectorXd(const PathState&, PathRng&)> draw_mark;
    double sup_mass = 0.0;
};

struct CoefficientField {
    std::variant<EuclideanLinear, FrameHorizontal, LieLeftInvariant, LieRightInvariant, Killed> kind;
    // zero | registered drift id (Euclidean), or a constant algebra vector id
    // for the group cases
    std::string drift_id = "zero";
    Eigen::VectorXd group_drift; // algebra coordinates; empty = 0
    double marcus_remainder_order_gamma = 2.0;
    std::optional<SoftKill> soft_kill;
    std::optional<StateJumpKernel> state_jumps;

    int driver_dim() const;
};

CoefficientField kill_hard(const CoefficientField& coeffs, const std::string& domain_predicate_id);
CoefficientField kill_soft(const CoefficientField& coeffs,
                           std::function<double(const PathState&)> rate, double sup_rate);
CoefficientField state_dependent_jumps(const CoefficientField& base, StateJumpKernel kernel);

// --- operations --------------------------------------------------------------

// Time-1 flow of xdot = a-bar(x) lambda; closed form for frame/group/constant
// fields, adaptive RK (local error 1e-10) otherwise.
PathState marcus_flow(const PathState& x, const Eigen::VectorXd& lambda,
                      const CoefficientField& coeffs);

struct JumpRecord {
    double time;
    Eigen::VectorXd mark;
    const PathState* after;
};
using JumpObserver = std::function<void(const JumpRecord&)>;

struct SimOutput {
    PathState endpoint;
    std::uint64_t jump_count = 0;
    int max_flow_substeps = 1;
    Eigen::MatrixXd truncation_bias_report; // horizon * small_jump_variance
};

// aux_rng feeds only the thinning decisions (soft kill / state jumps); the
// jump skeleton fully determines everything else.
SimOutput integrate_path(const PathState& x0, const levy::JumpSkeleton& skeleton,
                         const CoefficientField& coeffs, PathRng& aux_rng,
                         const JumpObserver* observer = nullptr);

SimOutput integrate_path(const PathState& x0, const levy::JumpSkeleton& skeleton,
                         const CoefficientField& coeffs, std::uint64_t master_seed,
                         std::uint64_t path_index);

struct SurjectivityReport {
    double min_singular_value = 0.0;
    bool pass = false;
    std::size_t worst_point = 0;
};
SurjectivityReport surjectivity_check(const CoefficientField& coeffs,
                                      const std::vector<PathState>& sample_points);

// --- generator ---------------------------------------------------------------

// f plus the directional derivative lambda -> Df(x) a-bar(x) lambda, supplied
// analytically so the small-jump compensation does not lose precision.
struct TestFunction {
    std::string id;
    std::function<double(const PathState&)> f;
    std::function<double(const PathState&, const Eigen::VectorXd&)> dirderiv_driver;
};

// evaluates Df(x)(b + a-bar kappa)
//   + int_{|l|<=1} [f(a(x,l)) - f(x) - Df(x) a-bar(x) l] mu(dl)
//   + int_{|l|>1}  [f(a(x,l)) - f(x)] mu(dl)
double generator_apply(const TestFunction& f, const PathState& x,
                       const levy::LevyMeasureSpec& spec, const CoefficientField& coeffs,
                       double rel_tol = 1e-6);

}  // namespace levymc::sim
