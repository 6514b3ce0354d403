#include "levymc/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "levymc/quad.hpp"

namespace levymc::sim {

namespace {

// --- registries ---------------------------------------------------------------

struct Registries {
    std::map<std::string, MatrixField> fields;
    std::map<std::string, std::tuple<int, DriftField, std::optional<Eigen::VectorXd>>> drifts;
    std::map<std::string, DomainPredicate> predicates;

    static Registries& instance() {
        static Registries r = [] {
            Registries reg;
            for (int d : {1, 2, 3}) {
                MatrixField f;
                f.id = "identity" + std::to_string(d);
                f.state_dim = f.driver_dim = d;
                f.constant = Eigen::MatrixXd::Identity(d, d);
                f.eval = [d](const Eigen::VectorXd&) { return Eigen::MatrixXd::Identity(d, d); };
                reg.fields[f.id] = f;
            }
            {
                // smooth non-constant field on R^2, full rank everywhere
                MatrixField f;
                f.id = "swirl2";
                f.state_dim = f.driver_dim = 2;
                f.eval = [](const Eigen::VectorXd& x) {
                    Eigen::Matrix2d m;
                    m << 1.0 + 0.3 * std::sin(x[1]), 0.2 * std::cos(x[0]),
                        -0.2 * std::sin(x[0]), 1.0 + 0.3 * std::cos(x[1]);
                    return Eigen::MatrixXd(m);
                };
                reg.fields[f.id] = f;
            }
            {
                // rank deficient exactly at the origin
                MatrixField f;
                f.id = "pinch2";
                f.state_dim = f.driver_dim = 2;
                f.eval = [](const Eigen::VectorXd& x) {
                    Eigen::Matrix2d m;
                    const double s = x.squaredNorm() / (1.0 + x.squaredNorm());
                    m << 1.0, 0.0, 0.0, s;
                    return Eigen::MatrixXd(m);
                };
                reg.fields[f.id] = f;
            }
            reg.predicates["all"] = [](const PathState&) { return true; };
            reg.predicates["euclid_below_1"] = [](const PathState& s) {
                return s.point().coords[0] < 1.0;
            };
            return reg;
        }();
        return r;
    }
};

void check_state_kind(const CoefficientField& base, const PathState& s) {
    std::visit(
        [&](const auto& k) {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, EuclideanLinear>) {
                if (!std::holds_alternative<geom::Point>(s.position) ||
                    s.point().manifold.kind != geom::ManifoldKind::Euclidean ||
                    s.point().coords.size() != k.state_dim)
                    throw std::invalid_argument("coefficient field expects a Euclidean point state");
            } else if constexpr (std::is_same_v<T, FrameHorizontal>) {
                if (!std::holds_alternative<geom::Frame>(s.position) ||
                    !(s.frame().base.manifold == k.manifold))
                    throw std::invalid_argument("coefficient field expects a frame state");
            } else if constexpr (std::is_same_v<T, LieLeftInvariant> ||
                                 std::is_same_v<T, LieRightInvariant>) {
                const lie::GroupSpec& gs = k.group;
                if (!std::holds_alternative<lie::GroupElement>(s.position) ||
                    !(s.group().spec == gs))
                    throw std::invalid_argument("coefficient field expects a group element state");
            } else {
                throw std::logic_error("check_state_kind: killed layer not unwrapped");
            }
        },
        base.kind);
}

struct KillLayers {
    const CoefficientField* base = nullptr; // innermost non-killed field
    std::vector<const DomainPredicate*> predicates;
};

KillLayers unwrap(const CoefficientField& coeffs) {
    KillLayers kl;
    const CoefficientField* cur = &coeffs;
    while (std::holds_alternative<Killed>(cur->kind)) {
        const auto& k = std::get<Killed>(cur->kind);
        kl.predicates.push_back(&domain_predicate(k.domain_predicate_id));
        cur = k.inner.get();
    }
    kl.base = cur;
    return kl;
}

bool domain_ok(const KillLayers& kl, const PathState& s) {
    for (const auto* p : kl.predicates)
        if (!(*p)(s)) return false;
    return true;
}

// --- in-place jump steppers ----------------------------------------------------

void so3_step(Eigen::MatrixXd& r, const Eigen::Vector3d& w, bool left) {
    const double th = w.norm();
    Eigen::Matrix3d k;
    k << 0, -w[2], w[1], w[2], 0, -w[0], -w[1], w[0], 0;
    double a, b;
    if (th < 1e-6) {
        a = 1.0 - th * th / 6.0;
        b = 0.5 - th * th / 24.0;
    } else {
        a = std::sin(th) / th;
        b = (1.0 - std::cos(th)) / (th * th);
    }
    const Eigen::Matrix3d e = Eigen::Matrix3d::Identity() + a * k + b * k * k;
    const Eigen::Matrix3d cur = r;
    r = left ? (cur * e).eval() : (e * cur).eval();
}

// adaptive RKF45 for the nonconstant Euclidean Marcus flow
int rk_flow(Eigen::VectorXd& x, const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& v,
            double t_end, double tol) {
    static constexpr int kMaxSteps = 1000000;
    double t = 0.0;
    double h = t_end;
    int steps = 0;
    Eigen::VectorXd k1, k2, k3, k4, k5, k6, x4, x5;
    while (t < t_end) {
        if (++steps > kMaxSteps) throw ExplosionError("marcus flow exceeded the substep cap");
        h = std::min(h, t_end - t);
        k1 = v(x);
        k2 = v(x + h * (k1 / 4.0));
        k3 = v(x + h * (3.0 / 32.0 * k1 + 9.0 / 32.0 * k2));
        k4 = v(x + h * (1932.0 / 2197.0 * k1 - 7200.0 / 2197.0 * k2 + 7296.0 / 2197.0 * k3));
        k5 = v(x + h * (439.0 / 216.0 * k1 - 8.0 * k2 + 3680.0 / 513.0 * k3 - 845.0 / 4104.0 * k4));
        k6 = v(x + h * (-8.0 / 27.0 * k1 + 2.0 * k2 - 3544.0 / 2565.0 * k3 + 1859.0 / 4104.0 * k4 -
                        11.0 / 40.0 * k5));
        x4 = x + h * (25.0 / 216.0 * k1 + 1408.0 / 2565.0 * k3 + 2197.0 / 4104.0 * k4 - k5 / 5.0);
        x5 = x + h * (16.0 / 135.0 * k1 + 6656.0 / 12825.0 * k3 + 28561.0 / 56430.0 * k4 -
                      9.0 / 50.0 * k5 + 2.0 / 55.0 * k6);
        const double err = (x5 - x4).norm();
        const double scale = tol * std::max(1.0, x.norm());
        if (err <= scale || h <= 1e-14) {
            t += h;
            x = x5;
        }
        const double ratio = err > 0 ? 0.9 * std::pow(scale / err, 0.2) : 4.0;
        h *= std::clamp(ratio, 0.1, 4.0);
    }
    return steps;
}

struct StepContext {
    const MatrixField* field = nullptr; // Euclidean only
    bool left = true;                   // Lie side
    int max_substeps = 1;
};

void jump_step_inplace(PathState& st, const Eigen::VectorXd& mark, const CoefficientField& base,
                       StepContext& ctx) {
    std::visit(
        [&](auto&& kind) {
            using T = std::decay_t<decltype(kind)>;
            if constexpr (std::is_same_v<T, EuclideanLinear>) {
                auto& x = std::get<geom::Point>(st.position).coords;
                if (ctx.field->constant) {
                    x.noalias() += (*ctx.field->constant) * mark;
                } else {
                    const int steps = rk_flow(
                        x,
                        [&](const Eigen::VectorXd& y) -> Eigen::VectorXd {
                            return ctx.field->eval(y) * mark;
                        },
                        1.0, 1e-10);
                    ctx.max_substeps = std::max(ctx.max_substeps, steps);
                }
            } else if constexpr (std::is_same_v<T, FrameHorizontal>) {
                auto& fr = std::get<geom::Frame>(st.position);
                fr = geom::frame_horizontal_step(fr, mark);
            } else if constexpr (std::is_same_v<T, LieLeftInvariant> ||
                                 std::is_same_v<T, LieRightInvariant>) {
                constexpr bool left = std::is_same_v<T, LieLeftInvariant>;
                auto& g = std::get<lie::GroupElement>(st.position);
                switch (g.spec.kind) {
                    case lie::GroupKind::SO3:
                        so3_step(g.mat, Eigen::Vector3d(mark), left);
                        break;
                    case lie::GroupKind::DilTrans:
                        // exp(mark) = (mark, 0)
                        if (left)
                            g.vec.noalias() += std::exp(double(g.n)) * mark;
                        else
                            g.vec.noalias() += mark;
                        break;
                    case lie::GroupKind::Affine: {
                        lie::LieAlgebraVector u{g.spec, mark};
                        const lie::GroupElement e = lie::group_exp(u);
                        g = left ? lie::compose(g, e) : lie::compose(e, g);
                        break;
                    }
                }
            } else {
                throw std::logic_error("jump_step_inplace: killed layer not unwrapped");
            }
        },
        base.kind);
}

// drift velocity b(x) + a-bar(x) c for the Euclidean case
struct EuclidDrift {
    bool zero = true;
    bool constant = true;
    Eigen::VectorXd v; // when constant
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> eval;
};

EuclidDrift make_euclid_drift(const CoefficientField& base, const StepContext& ctx,
                              const Eigen::VectorXd& comp_drift) {
    EuclidDrift d;
    const bool has_comp = comp_drift.size() > 0 && comp_drift.norm() > 0.0;
    const bool has_b = base.drift_id != "zero";
    if (!has_comp && !has_b) return d;
    d.zero = false;
    if (!has_b && ctx.field->constant) {
        d.v = (*ctx.field->constant) * comp_drift;
        return d;
    }
    d.constant = false;
    const auto& reg = Registries::instance().drifts;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> bfn;
    if (has_b) {
        auto it = reg.find(base.drift_id);
        if (it == reg.end()) throw std::invalid_argument("unknown drift field: " + base.drift_id);
        bfn = std::get<1>(it->second);
    }
    const MatrixField* fld = ctx.field;
    Eigen::VectorXd cd = comp_drift;
    d.eval = [fld, bfn, cd, has_comp](const Eigen::VectorXd& x) {
        Eigen::VectorXd v = Eigen::VectorXd::Zero(x.size());
        if (has_comp) v += fld->eval(x) * cd;
        if (bfn) v += bfn(x);
        return v;
    };
    return d;
}

// exact drift flows for group states: g exp(dt u) or exp(dt u) g
void group_drift_step(lie::GroupElement& g, const Eigen::VectorXd& u, double dt, bool left) {
    if (u.size() == 0) return;
    lie::LieAlgebraVector a{g.spec, dt * u};
    const lie::GroupElement e = lie::group_exp(a);
    g = left ? lie::compose(g, e) : lie::compose(e, g);
}

}  // namespace

// --- registry API ---------------------------------------------------------------

void register_matrix_field(const MatrixField& field) {
    Registries::instance().fields[field.id] = field;
}
const MatrixField& matrix_field(const std::string& id) {
    auto& reg = Registries::instance().fields;
    auto it = reg.find(id);
    if (it == reg.end()) throw std::invalid_argument("unknown matrix field: " + id);
    return it->second;
}
void register_drift_field(const std::string& id, int dim, DriftField fn,
                          std::optional<Eigen::VectorXd> constant) {
    Registries::instance().drifts[id] = {dim, std::move(fn), std::move(constant)};
}
void register_domain_predicate(const std::string& id, DomainPredicate fn) {
    Registries::instance().predicates[id] = std::move(fn);
}
const DomainPredicate& domain_predicate(const std::string& id) {
    auto& reg = Registries::instance().predicates;
    auto it = reg.find(id);
    if (it == reg.end()) throw std::invalid_argument("unknown domain predicate: " + id);
    return it->second;
}

int CoefficientField::driver_dim() const {
    return std::visit(
        [](const auto& k) -> int {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, EuclideanLinear>) return k.driver_dim;
            if constexpr (std::is_same_v<T, FrameHorizontal>) return k.manifold.d;
            if constexpr (std::is_same_v<T, LieLeftInvariant>) {
                return k.group.kind == lie::GroupKind::SO3 ? 3 : k.group.d;
            }
            if constexpr (std::is_same_v<T, LieRightInvariant>) {
                return k.group.kind == lie::GroupKind::SO3 ? 3 : k.group.d;
            }
            if constexpr (std::is_same_v<T, Killed>) return k.inner->driver_dim();
        },
        kind);
}

CoefficientField kill_hard(const CoefficientField& coeffs, const std::string& id) {
    domain_predicate(id); // validate now
    CoefficientField out = coeffs;
    Killed k;
    k.inner = std::make_shared<CoefficientField>(coeffs);
    k.domain_predicate_id = id;
    out.kind = k;
    return out;
}

CoefficientField kill_soft(const CoefficientField& coeffs,
                           std::function<double(const PathState&)> rate, double sup_rate) {
    if (!(sup_rate > 0.0) || !std::isfinite(sup_rate))
        throw std::invalid_argument("kill_soft: a finite sup of the rate is required");
    CoefficientField out = coeffs;
    out.soft_kill = SoftKill{std::move(rate), sup_rate};
    return out;
}

CoefficientField state_dependent_jumps(const CoefficientField& base, StateJumpKernel kernel) {
    if (!(kernel.sup_mass > 0.0) || !std::isfinite(kernel.sup_mass))
        throw std::invalid_argument("state_dependent_jumps: finite sup_mass required");
    CoefficientField out = base;
    out.state_jumps = std::move(kernel);
    return out;
}

// --- marcus_flow -----------------------------------------------------------------

PathState marcus_flow(const PathState& x, const Eigen::VectorXd& lambda,
                      const CoefficientField& coeffs) {
    KillLayers kl = unwrap(coeffs);
    if (!kl.predicates.empty())
        throw std::invalid_argument("marcus_flow: canonical flow is only defined for non-killed fields");
    check_state_kind(*kl.base, x);
    PathState out = x;
    if (!out.alive) return out;
    StepContext ctx;
    if (std::holds_alternative<EuclideanLinear>(kl.base->kind))
        ctx.field = &matrix_field(std::get<EuclideanLinear>(kl.base->kind).field_id);
    jump_step_inplace(out, lambda, *kl.base, ctx);
    return out;
}

// --- integrate_path ---------------------------------------------------------------

namespace {

struct AgendaItem {
    double t;
    int type; // 0 mark, 1 soft kill, 2 state jump, 3 group jump
    std::uint32_t idx;
};

}  // namespace

SimOutput integrate_path(const PathState& x0, const levy::JumpSkeleton& skeleton,
                         const CoefficientField& coeffs, PathRng& aux_rng,
                         const JumpObserver* observer) {
    KillLayers kl = unwrap(coeffs);
    const CoefficientField& base = *kl.base;
    check_state_kind(base, x0);
    StepContext ctx;
    if (std::holds_alternative<EuclideanLinear>(base.kind)) {
        const auto& e = std::get<EuclideanLinear>(base.kind);
        ctx.field = &matrix_field(e.field_id);
        if (skeleton.mark_dim != e.driver_dim)
            throw std::invalid_argument("integrate_path: skeleton/driver dimension mismatch");
    }
    ctx.left = !std::holds_alternative<LieRightInvariant>(base.kind);

    const double T = skeleton.horizon;
    SimOutput out;
    out.endpoint = x0;
    out.endpoint.time = 0.0;
    PathState& st = out.endpoint;

    if (!domain_ok(kl, st)) st.alive = false;

    const bool group_state = std::holds_alternative<lie::GroupElement>(st.position);
    const bool frame_state = std::holds_alternative<geom::Frame>(st.position);

    // drift handling
    EuclidDrift edrift;
    Eigen::VectorXd group_u; // algebra drift incl. compensator
    if (std::holds_alternative<geom::Point>(st.position)) {
        edrift = make_euclid_drift(base, ctx, skeleton.compensator_drift);
    } else if (group_state) {
        group_u = skeleton.compensator_drift;
        if (base.group_drift.size() > 0) {
            if (group_u.size() == 0)
                group_u = base.group_drift;
            else
                group_u += base.group_drift;
        }
        if (group_u.size() > 0 && group_u.norm() == 0.0) group_u.resize(0);
    } else if (frame_state) {
        const bool has_drift =
            (skeleton.compensator_drift.size() > 0 && skeleton.compensator_drift.norm() > 0.0) ||
            base.drift_id != "zero";
        if (has_drift)
            throw std::invalid_argument("integrate_path: frame-bundle paths support zero drift only");
    }

    auto apply_drift = [&](PathState& state, double s) { // flow state forward by s
        if (s <= 0.0) return;
        if (std::holds_alternative<geom::Point>(state.position)) {
            if (edrift.zero) return;
            auto& x = std::get<geom::Point>(state.position).coords;
            if (edrift.constant) {
                x.noalias() += s * edrift.v;
            } else {
                const int steps = rk_flow(x, edrift.eval, s, 1e-10);
                ctx.max_substeps = std::max(ctx.max_substeps, steps);
            }
        } else if (group_state) {
            if (group_u.size() > 0)
                group_drift_step(std::get<lie::GroupElement>(state.position), group_u, s, ctx.left);
        }
    };

    const bool drift_moves = (std::holds_alternative<geom::Point>(st.position) && !edrift.zero) ||
                             (group_state && group_u.size() > 0);

    auto drift_flow = [&](double dt) {
        if (!st.alive || dt <= 0.0) return;
        if (kl.predicates.empty() || !drift_moves) {
            apply_drift(st, dt);
            st.time += dt;
            return;
        }
        // hard kill during a drift segment: bisect the crossing time
        const PathState seg_start = st;
        apply_drift(st, dt);
        st.time += dt;
        if (domain_ok(kl, st)) return;
        double lo = 0.0, hi = dt;
        while (hi - lo > 1e-10) {
            const double mid = 0.5 * (lo + hi);
            PathState probe = seg_start;
            apply_drift(probe, mid);
            if (domain_ok(kl, probe))
                lo = mid;
            else
                hi = mid;
        }
        st = seg_start;
        apply_drift(st, hi);
        st.time = seg_start.time + hi;
        st.alive = false;
    };

    auto post_jump_check = [&](double t_now) {
        if (!domain_ok(kl, st)) {
            st.alive = false;
            st.time = t_now;
        }
    };

    const bool plain = !coeffs.soft_kill && !coeffs.state_jumps;

    // tight loop for the dominant case: constant linear field, constant (or
    // zero) drift, optional hard kill (zero-drift only, so no crossing search),
    // no observer
    if (plain && !observer && ctx.field && ctx.field->constant && edrift.constant &&
        (kl.predicates.empty() || edrift.zero) &&
        std::holds_alternative<geom::Point>(st.position)) {
        const Eigen::MatrixXd& A = *ctx.field->constant;
        auto& x = std::get<geom::Point>(st.position).coords;
        const int sd = int(x.size());
        const int md = skeleton.mark_dim;
        const double* marks = skeleton.marks.data();
        const bool killed = !kl.predicates.empty();
        const bool has_drift = !edrift.zero;
        double now = 0.0;
        for (std::size_t i = 0; i < skeleton.size(); ++i) {
            const double te = skeleton.times[i];
            if (has_drift)
                for (int k = 0; k < sd; ++k) x[k] += (te - now) * edrift.v[k];
            now = te;
            const double* m = marks + i * std::size_t(md);
            for (int k = 0; k < sd; ++k) {
                double acc = 0.0;
                for (int j = 0; j < md; ++j) acc += A(k, j) * m[j];
                x[k] += acc;
            }
            ++out.jump_count;
            if (killed && !domain_ok(kl, st)) {
                st.alive = false;
                st.time = te;
                break;
            }
        }
        if (st.alive) {
            if (has_drift)
                for (int k = 0; k < sd; ++k) x[k] += (T - now) * edrift.v[k];
            st.time = T;
        }
        out.max_flow_substeps = ctx.max_substeps;
        out.truncation_bias_report = Eigen::MatrixXd::Zero(skeleton.mark_dim, skeleton.mark_dim);
        return out;
    }

    if (plain) {
        // skeleton-only walk
        for (std::size_t i = 0; i < skeleton.size() && st.alive; ++i) {
            const double te = skeleton.times[i];
            drift_flow(te - st.time);
            if (!st.alive) break;
            jump_step_inplace(st, skeleton.mark(i), base, ctx);
            ++out.jump_count;
            st.time = te;
            post_jump_check(te);
            if (observer && *observer) {
                JumpRecord rec{te, skeleton.mark(i), &st};
                (*observer)(rec);
            }
        }
        if (st.alive) drift_flow(T - st.time);
    } else {
        // merged agenda with thinned candidate streams
        std::vector<AgendaItem> agenda;
        agenda.reserve(skeleton.size() + 16);
        for (std::size_t i = 0; i < skeleton.size(); ++i)
            agenda.push_back({skeleton.times[i], 0, std::uint32_t(i)});
        if (coeffs.soft_kill) {
            const std::uint64_t n = aux_rng.poisson(coeffs.soft_kill->sup_rate * T);
            for (std::uint64_t i = 0; i < n; ++i)
                agenda.push_back({aux_rng.uniform() * T, 1, std::uint32_t(i)});
        }
        if (coeffs.state_jumps) {
            const std::uint64_t n = aux_rng.poisson(coeffs.state_jumps->sup_mass * T);
            for (std::uint64_t i = 0; i < n; ++i)
                agenda.push_back({aux_rng.uniform() * T, 2, std::uint32_t(i)});
        }
        std::sort(agenda.begin(), agenda.end(), [](const AgendaItem& a, const AgendaItem& b) {
            if (a.t != b.t) return a.t < b.t;
            if (a.type != b.type) return a.type < b.type;
            return a.idx < b.idx;
        });
        for (const auto& item : agenda) {
            if (!st.alive) break;
            drift_flow(item.t - st.time);
            if (!st.alive) break;
            switch (item.type) {
                case 0: {
                    jump_step_inplace(st, skeleton.mark(item.idx), base, ctx);
                    ++out.jump_count;
                    st.time = item.t;
                    post_jump_check(item.t);
                    if (observer && *observer) {
                        JumpRecord rec{item.t, skeleton.mark(item.idx), &st};
                        (*observer)(rec);
                    }
                    break;
                }
                case 1: {
                    const double h = coeffs.soft_kill->rate(st);
                    if (h > coeffs.soft_kill->sup_rate * (1.0 + 1e-12))
                        throw ContractViolation("kill_soft: rate exceeded its declared sup");
                    if (aux_rng.uniform() < h / coeffs.soft_kill->sup_rate) {
                        st.alive = false;
                        st.time = item.t;
                    }
                    break;
                }
                case 2: {
                    const double m = coeffs.state_jumps->mass(st);
                    if (m > coeffs.state_jumps->sup_mass * (1.0 + 1e-12))
                        throw ContractViolation("state_dependent_jumps: mass exceeded sup_mass");
                    if (aux_rng.uniform() < m / coeffs.state_jumps->sup_mass) {
                        const Eigen::VectorXd mark = coeffs.state_jumps->draw_mark(st, aux_rng);
                        jump_step_inplace(st, mark, base, ctx);
                        ++out.jump_count;
                        st.time = item.t;
                        post_jump_check(item.t);
                        if (observer && *observer) {
                            JumpRecord rec{item.t, mark, &st};
                            (*observer)(rec);
                        }
                    }
                    break;
                }
            }
        }
        if (st.alive) drift_flow(T - st.time);
    }

    if (st.alive) st.time = T;
    out.max_flow_substeps = ctx.max_substeps;
    out.truncation_bias_report = Eigen::MatrixXd::Zero(skeleton.mark_dim, skeleton.mark_dim);
    return out;
}

SimOutput integrate_path(const PathState& x0, const levy::JumpSkeleton& skeleton,
                         const CoefficientField& coeffs, std::uint64_t master_seed,
                         std::uint64_t path_index) {
    PathRng aux(master_seed, path_index, /*stream=*/1);
    return integrate_path(x0, skeleton, coeffs, aux, nullptr);
}

// --- surjectivity ------------------------------------------------------------------

namespace {

Eigen::MatrixXd ambient_abar(const CoefficientField& base, const PathState& s) {
    return std::visit(
        [&](const auto& kind) -> Eigen::MatrixXd {
            using T = std::decay_t<decltype(kind)>;
            if constexpr (std::is_same_v<T, EuclideanLinear>) {
                return matrix_field(kind.field_id).eval(s.point().coords);
            } else if constexpr (std::is_same_v<T, FrameHorizontal>) {
                const auto& fr = s.frame();
                const int a = int(fr.basis.rows());
                const int d = int(fr.basis.cols());
                // horizontal lift: base part g, vertical part from the transport
                // derivative (0 on R^d, -(x e_j^T) row blocks on S^2, + on H^d)
                Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(a * (1 + d), d);
                jac.topRows(a) = fr.basis;
                const auto mk = fr.base.manifold.kind;
                if (mk != geom::ManifoldKind::Euclidean) {
                    const double sign = mk == geom::ManifoldKind::Sphere2 ? -1.0 : 1.0;
                    for (int j = 0; j < d; ++j)
                        jac.block(a * (1 + j), j, a, 1) = sign * fr.base.coords;
                }
                return jac;
            } else if constexpr (std::is_same_v<T, LieLeftInvariant> ||
                                 std::is_same_v<T, LieRightInvariant>) {
                constexpr bool left = std::is_same_v<T, LieLeftInvariant>;
                const auto& g = s.group();
                switch (g.spec.kind) {
                    case lie::GroupKind::SO3: {
                        Eigen::MatrixXd jac(9, 3);
                        for (int j = 0; j < 3; ++j) {
                            Eigen::Vector3d e = Eigen::Vector3d::Zero();
                            e[j] = 1.0;
                            Eigen::Matrix3d k;
                            k << 0, -e[2], e[1], e[2], 0, -e[0], -e[1], e[0], 0;
                            const Eigen::Matrix3d t = left ? Eigen::Matrix3d(g.mat * k)
                                                           : Eigen::Matrix3d(k * g.mat);
                            jac.col(j) = Eigen::Map<const Eigen::VectorXd>(t.data(), 9);
                        }
                        return jac;
                    }
                    case lie::GroupKind::DilTrans: {
                        const double f = left ? std::exp(double(g.n)) : 1.0;
                        return f * Eigen::MatrixXd::Identity(g.spec.d, g.spec.d);
                    }
                    case lie::GroupKind::Affine: {
                        const int d = g.spec.d;
                        const int ad = d * d + d;
                        Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(ad, ad);
                        for (int c = 0; c < d; ++c)
                            for (int r = 0; r < d; ++r) {
                                // algebra basis E_{rc} (+ zero translation)
                                const int col = c * d + r;
                                if (left) {
                                    // g exp(t E) => (g1 E, 0): matrix column c is g1 col r
                                    for (int i = 0; i < d; ++i) jac(c * d + i, col) = g.mat(i, r);
                                } else {
                                    // exp(tE) g => (E g1, E g2)
                                    for (int j = 0; j < d; ++j) jac(j * d + r, col) = g.mat(c, j);
                                    jac(d * d + r, col) = g.vec[c];
                                }
                            }
                        for (int k = 0; k < d; ++k) {
                            // translation basis vectors
                            const int col = d * d + k;
                            if (left)
                                for (int i = 0; i < d; ++i) jac(d * d + i, col) = g.mat(i, k);
                            else
                                jac(d * d + k, col) = 1.0;
                        }
                        return jac;
                    }
                }
            }
            throw std::logic_error("ambient_abar: unsupported kind");
        },
        base.kind);
}

}  // namespace

SurjectivityReport surjectivity_check(const CoefficientField& coeffs,
                                      const std::vector<PathState>& sample_points) {
    if (sample_points.empty()) throw std::invalid_argument("surjectivity_check: no sample points");
    KillLayers kl = unwrap(coeffs);
    SurjectivityReport rep;
    rep.min_singular_value = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < sample_points.size(); ++i) {
        const Eigen::MatrixXd jac = ambient_abar(*kl.base, sample_points[i]);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac);
        const double smin = svd.singularValues()[svd.singularValues().size() - 1];
        if (smin < rep.min_singular_value) {
            rep.min_singular_value = smin;
            rep.worst_point = i;
        }
    }
    rep.pass = rep.min_singular_value >= 1e-8;
    return rep;
}

// --- generator ----------------------------------------------------------------------

namespace {

// angular rules returning (directions, weights) averaging to 1
void angular_rule(int m, std::vector<Eigen::VectorXd>& dirs, std::vector<double>& w) {
    dirs.clear();
    w.clear();
    if (m == 1) {
        Eigen::VectorXd p(1), q(1);
        p[0] = 1.0;
        q[0] = -1.0;
        dirs = {p, q};
        w = {0.5, 0.5};
        return;
    }
    if (m == 2) {
        const int n = 48;
        for (int i = 0; i < n; ++i) {
            const double th = 2.0 * M_PI * (i + 0.5) / n;
            Eigen::VectorXd u(2);
            u << std::cos(th), std::sin(th);
            dirs.push_back(u);
            w.push_back(1.0 / n);
        }
        return;
    }
    if (m == 3) {
        // product rule: Gauss-Legendre in cos(theta) x uniform phi
        const int nt = 16, np = 32;
        // 16-point Gauss-Legendre nodes/weights on [-1,1]
        static const double gx[8] = {0.0950125098376374, 0.2816035507792589,
                                     0.4580167776572274, 0.6178762444026438,
                                     0.7554044083550030, 0.8656312023878318,
                                     0.9445750230732326, 0.9894009349916499};
        static const double gw[8] = {0.1894506104550685, 0.1826034150449236,
                                     0.1691565193950025, 0.1495959888165767,
                                     0.1246289712555339, 0.0951585116824928,
                                     0.0622535239386479, 0.0271524594117541};
        for (int i = 0; i < nt; ++i) {
            const double c = i < 8 ? -gx[7 - i] : gx[i - 8];
            const double wi = i < 8 ? gw[7 - i] : gw[i - 8];
            const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
            for (int j = 0; j < np; ++j) {
                const double ph = 2.0 * M_PI * (j + 0.5) / np;
                Eigen::VectorXd u(3);
                u << s * std::cos(ph), s * std::sin(ph), c;
                dirs.push_back(u);
                w.push_back(wi / 2.0 / np); // GL weight integrates dc over [-1,1]
            }
        }
        return;
    }
    throw std::invalid_argument("generator_apply: angular quadrature supports m <= 3");
}

}  // namespace

double generator_apply(const TestFunction& f, const PathState& x,
                       const levy::LevyMeasureSpec& spec, const CoefficientField& coeffs,
                       double rel_tol) {
    KillLayers kl = unwrap(coeffs);
    if (!kl.predicates.empty() || coeffs.soft_kill || coeffs.state_jumps)
        throw std::invalid_argument("generator_apply: plain (non-killed) fields only");
    const CoefficientField& base = *kl.base;
    if (base.drift_id != "zero")
        throw std::invalid_argument(
            "generator_apply: express drift through the driver (kappa / group_drift)");
    const int m = base.driver_dim();
    if (spec.dim() != m) throw std::invalid_argument("generator_apply: driver dimension mismatch");

    const double f0 = f.f(x);
    double val = 0.0;

    // Df(x)(b + a-bar kappa): both live in the driver space here
    Eigen::VectorXd drift = spec.kappa();
    if (base.group_drift.size() > 0) drift += base.group_drift;
    if (drift.norm() > 0.0) val += f.dirderiv_driver(x, drift);

    auto delta_f = [&](const Eigen::VectorXd& lambda, bool compensated) {
        const PathState y = marcus_flow(x, lambda, base);
        double v = f.f(y) - f0;
        if (compensated) v -= f.dirderiv_driver(x, lambda);
        return v;
    };

    // walk the (possibly product) spec; each component acts in its block
    std::function<void(const levy::LevyMeasureSpec&, int)> add = [&](const levy::LevyMeasureSpec& s,
                                                                     int off) {
        std::visit(
            [&](const auto& k) {
                using T = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<T, levy::IsotropicStable>) {
                    std::vector<Eigen::VectorXd> dirs;
                    std::vector<double> w;
                    angular_rule(k.dim, dirs, w);
                    Eigen::VectorXd lambda = Eigen::VectorXd::Zero(m);
                    auto avg = [&](double r, bool comp) {
                        double acc = 0.0;
                        for (std::size_t i = 0; i < dirs.size(); ++i) {
                            lambda.setZero();
                            lambda.segment(off, k.dim) = r * dirs[i];
                            acc += w[i] * delta_f(lambda, comp);
                        }
                        return acc;
                    };
                    const double R = k.truncation_radius.value_or(
                        std::numeric_limits<double>::infinity());
                    const double small_hi = std::min(1.0, R);
                    const double r_lo = 1e-5;
                    auto small_integrand = [&](double r) {
                        return avg(r, true) * k.radial_density_const * std::pow(r, -1.0 - k.alpha);
                    };
                    val += quad::gauss_kronrod(small_integrand, r_lo, small_hi, rel_tol, 1e-14);
                    // gamma-order remainder below r_lo (integrand is O(r^2))
                    val += avg(r_lo, true) * k.radial_density_const * std::pow(r_lo, -k.alpha) /
                           (2.0 - k.alpha);
                    if (R > 1.0) {
                        auto big_integrand = [&](double r) {
                            return avg(r, false) * k.radial_density_const *
                                   std::pow(r, -1.0 - k.alpha);
                        };
                        if (std::isfinite(R))
                            val += quad::gauss_kronrod(big_integrand, 1.0, R, rel_tol, 1e-14);
                        else
                            val += quad::semi_infinite(big_integrand, 1.0, rel_tol);
                    }
                } else if constexpr (std::is_same_v<T, levy::DiscreteSigned>) {
                    Eigen::VectorXd lambda = Eigen::VectorXd::Zero(m);
                    for (const auto& [n, p] : k.masses) {
                        lambda.setZero();
                        lambda[off] = double(n);
                        val += p * delta_f(lambda, std::abs(n) <= 1);
                    }
                } else if constexpr (std::is_same_v<T, levy::AtomicRadial>) {
                    std::vector<Eigen::VectorXd> dirs;
                    std::vector<double> w;
                    angular_rule(k.dim, dirs, w);
                    Eigen::VectorXd lambda = Eigen::VectorXd::Zero(m);
                    for (const auto& [r, mass] : k.atoms) {
                        double acc = 0.0;
                        for (std::size_t i = 0; i < dirs.size(); ++i) {
                            lambda.setZero();
                            lambda.segment(off, k.dim) = r * dirs[i];
                            acc += w[i] * delta_f(lambda, r <= 1.0);
                        }
                        val += mass * acc;
                    }
                } else if constexpr (std::is_same_v<T, levy::CompoundFinite>) {
                    throw std::invalid_argument(
                        "generator_apply: compound_finite needs a closed-form kernel");
                } else if constexpr (std::is_same_v<T, levy::Product>) {
                    int o = off;
                    for (const auto& c : k.components) {
                        add(c, o);
                        o += c.dim();
                    }
                }
            },
            s.kind);
    };
    add(spec, 0);
    return val;
}

}  // namespace levymc::sim
