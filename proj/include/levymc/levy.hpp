#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "levymc/rng.hpp"

namespace levymc::levy {

struct AuditError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Parametric Levy measures. The isotropic family is radial x uniform-angular:
// mu = mu_R (x) nu_unif with radial density radial_density_const * r^(-alpha-1);
// for d = 1 the "angular" part is a fair +-1 coin, so e.g. the measure
// |lambda|^(-alpha-1) d lambda on R corresponds to radial_density_const = 2.
struct IsotropicStable {
    double alpha = 1.5;
    int dim = 1;
    double radial_density_const = 1.0;
    std::optional<double> truncation_radius; // nullopt = untruncated
};

// Atoms of mass p_n at the integer levels n (1-D marks).
struct DiscreteSigned {
    std::vector<std::pair<int, double>> masses;
};

// Atoms of mass m_k on the sphere of radius r_k, uniform direction.
struct AtomicRadial {
    std::vector<std::pair<double, double>> atoms; // (radius, mass)
    int dim = 1;
};

// Finite-rate jumps with marks drawn from a named sampler. These events are
// added raw (no compensation); samplers are expected to produce marks whose
// magnitude exceeds any cutoff in use.
struct CompoundFinite {
    double total_rate = 0.0;
    std::string mark_sampler_id;
    int dim = 1;
};

struct LevyMeasureSpec;

// Independent components on disjoint coordinate blocks.
struct Product {
    std::vector<LevyMeasureSpec> components;
};

struct LevyMeasureSpec {
    std::variant<IsotropicStable, DiscreteSigned, AtomicRadial, CompoundFinite, Product> kind;
    Eigen::VectorXd drift_kappa; // kappa of the representation; empty = 0
    // Scaling index used by the compensator rule; derived from the stable kind
    // when left at the sentinel -1.
    double alpha_index = -1.0;
    bool pure_jump = false; // alpha < 1 mode: skeleton drift is exactly 0

    int dim() const;
    double effective_alpha() const;
    Eigen::VectorXd kappa() const; // zero-filled to dim()
};

using MarkSampler = std::function<Eigen::VectorXd(PathRng&)>;
void register_mark_sampler(const std::string& id, MarkSampler fn, double mark_norm_hint = 1.0);
const MarkSampler& mark_sampler(const std::string& id);

// mu({ |lambda| > delta }); exact for all built-in variants.
double tail_mass(const LevyMeasureSpec& spec, double delta);

// integral of lambda over { lo < |lambda| <= hi } (CompoundFinite contributes 0)
Eigen::VectorXd mean_restricted(const LevyMeasureSpec& spec, double lo, double hi);

// integral of lambda lambda^T over { lo < |lambda| <= hi }
Eigen::MatrixXd second_moment_restricted(const LevyMeasureSpec& spec, double lo, double hi);

// integral of lambda lambda^T over { |lambda| <= delta }: the truncation-bias
// report of the simulation scheme.
Eigen::MatrixXd small_jump_variance(const LevyMeasureSpec& spec, double delta);

bool is_symmetric(const LevyMeasureSpec& spec);

struct AuditReport {
    bool ok = true;
    std::vector<std::string> messages;
};
// Checks integral(|lambda|^2 ^ 1) mu < infinity plus the alpha = 1 and
// pure-jump preconditions. Throws nothing; failures land in the report.
AuditReport integrability_audit(const LevyMeasureSpec& spec);

// Jumps above the cutoff on (0, t], plus the compensator drift of the scheme.
struct JumpSkeleton {
    double horizon = 0.0;
    double cutoff_delta = 0.0;
    int mark_dim = 0;
    std::vector<double> times;               // strictly increasing, in (0, t]
    std::vector<double> marks;               // event-major, mark_dim per event
    Eigen::VectorXd compensator_drift;       // per unit time

    std::size_t size() const { return times.size(); }
    Eigen::Map<const Eigen::VectorXd> mark(std::size_t i) const {
        return Eigen::Map<const Eigen::VectorXd>(marks.data() + i * std::size_t(mark_dim), mark_dim);
    }
};

// One-shot sampler; seeding contract: randomness derives from
// (master_seed, path_index) only, independent of call order and threads.
JumpSkeleton sample_jump_skeleton(const LevyMeasureSpec& spec, double t, double delta,
                                  std::uint64_t master_seed, std::uint64_t path_index = 0);

// Hot-loop form: tables prepared once per (spec, delta), buffers reused.
class PreparedLevySampler {
  public:
    PreparedLevySampler(const LevyMeasureSpec& spec, double delta);

    double rate() const { return rate_; }
    double delta() const { return delta_; }
    int mark_dim() const { return dim_; }
    const Eigen::VectorXd& compensator_drift() const { return drift_; }

    void sample(double t, PathRng& rng, JumpSkeleton& out) const;

  private:
    struct Component; // flattened Product tree
    std::vector<Component> comps_;
    std::vector<double> comp_cdf_;
    double rate_ = 0.0;
    double delta_ = 0.0;
    int dim_ = 0;
    Eigen::VectorXd drift_;

  public:
    ~PreparedLevySampler();
    PreparedLevySampler(PreparedLevySampler&&) noexcept;
};

struct ScalingBoundsReport {
    double c_hat = 0.0;
    double C_hat = 0.0;
    bool pass = false;
};

// min/max over the grid of I(rho,u)/rho^(2-alpha) with
// I(rho,u) = integral_{|lambda|<=rho} <lambda,u>^2 mu(d lambda).
ScalingBoundsReport verify_scaling_bounds(const LevyMeasureSpec& spec, double alpha,
                                          const std::vector<double>& rho_grid,
                                          const std::vector<Eigen::VectorXd>& directions);

nlohmann::json spec_to_json(const LevyMeasureSpec& spec);
LevyMeasureSpec spec_from_json(const nlohmann::json& j);

}  // namespace levymc::levy
