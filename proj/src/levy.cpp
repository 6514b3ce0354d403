#include "levymc/levy.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

namespace levymc::levy {

namespace {

double pow_neg_alpha(double r, double alpha) { return std::pow(r, -alpha); }

struct SamplerRegistry {
    std::map<std::string, MarkSampler> fns;
    static SamplerRegistry& instance() {
        static SamplerRegistry reg = [] {
            SamplerRegistry r;
            r.fns["minus_one"] = [](PathRng&) {
                Eigen::VectorXd v(1);
                v[0] = -1.0;
                return v;
            };
            r.fns["plus_one"] = [](PathRng&) {
                Eigen::VectorXd v(1);
                v[0] = 1.0;
                return v;
            };
            r.fns["uniform_radius_1_2"] = [](PathRng& rng) {
                Eigen::VectorXd v(1);
                v[0] = rng.uniform(1.0, 2.0) * ((rng.raw() & 1u) ? 1.0 : -1.0);
                return v;
            };
            return r;
        }();
        return reg;
    }
};

}  // namespace

void register_mark_sampler(const std::string& id, MarkSampler fn, double) {
    SamplerRegistry::instance().fns[id] = std::move(fn);
}

const MarkSampler& mark_sampler(const std::string& id) {
    auto& reg = SamplerRegistry::instance().fns;
    auto it = reg.find(id);
    if (it == reg.end()) throw std::invalid_argument("unknown mark sampler: " + id);
    return it->second;
}

int LevyMeasureSpec::dim() const {
    return std::visit(
        [](const auto& k) -> int {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, IsotropicStable>) return k.dim;
            if constexpr (std::is_same_v<T, DiscreteSigned>) return 1;
            if constexpr (std::is_same_v<T, AtomicRadial>) return k.dim;
            if constexpr (std::is_same_v<T, CompoundFinite>) return k.dim;
            if constexpr (std::is_same_v<T, Product>) {
                int d = 0;
                for (const auto& c : k.components) d += c.dim();
                return d;
            }
        },
        kind);
}

double LevyMeasureSpec::effective_alpha() const {
    if (alpha_index >= 0.0) return alpha_index;
    return std::visit(
        [](const auto& k) -> double {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, IsotropicStable>) return k.alpha;
            if constexpr (std::is_same_v<T, Product>) {
                double a = 0.0;
                for (const auto& c : k.components) a = std::max(a, c.effective_alpha());
                return a;
            }
            return 0.0; // finite-variation kinds
        },
        kind);
}

Eigen::VectorXd LevyMeasureSpec::kappa() const {
    Eigen::VectorXd k = Eigen::VectorXd::Zero(dim());
    if (drift_kappa.size() > 0) {
        if (drift_kappa.size() != k.size())
            throw std::invalid_argument("drift_kappa dimension mismatch");
        k = drift_kappa;
    }
    return k;
}

double tail_mass(const LevyMeasureSpec& spec, double delta) {
    if (!(delta > 0.0)) throw std::invalid_argument("tail_mass: delta must be > 0");
    return std::visit(
        [&](const auto& k) -> double {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, IsotropicStable>) {
                const double R = k.truncation_radius.value_or(
                    std::numeric_limits<double>::infinity());
                if (delta >= R) return 0.0;
                const double rma = std::isfinite(R) ? pow_neg_alpha(R, k.alpha) : 0.0;
                return k.radial_density_const / k.alpha * (pow_neg_alpha(delta, k.alpha) - rma);
            }
            if constexpr (std::is_same_v<T, DiscreteSigned>) {
                double s = 0.0;
                for (const auto& [n, p] : k.masses)
                    if (std::abs(n) > delta) s += p;
                return s;
            }
            if constexpr (std::is_same_v<T, AtomicRadial>) {
                double s = 0.0;
                for (const auto& [r, m] : k.atoms)
                    if (r > delta) s += m;
                return s;
            }
            if constexpr (std::is_same_v<T, CompoundFinite>) return k.total_rate;
            if constexpr (std::is_same_v<T, Product>) {
                double s = 0.0;
                for (const auto& c : k.components) s += tail_mass(c, delta);
                return s;
            }
        },
        spec.kind);
}

Eigen::VectorXd mean_restricted(const LevyMeasureSpec& spec, double lo, double hi) {
    const int d = spec.dim();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(d);
    std::visit(
        [&](const auto& k) {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, DiscreteSigned>) {
                for (const auto& [n, p] : k.masses) {
                    const double an = std::abs(double(n));
                    if (an > lo && an <= hi) out[0] += double(n) * p;
                }
            } else if constexpr (std::is_same_v<T, Product>) {
                int off = 0;
                for (const auto& c : k.components) {
                    out.segment(off, c.dim()) = mean_restricted(c, lo, hi);
                    off += c.dim();
                }
            }
            // isotropic / atomic-radial are direction-symmetric; compound is
            // finite activity and added raw
        },
        spec.kind);
    return out;
}

Eigen::MatrixXd second_moment_restricted(const LevyMeasureSpec& spec, double lo, double hi) {
    const int d = spec.dim();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d, d);
    std::visit(
        [&](const auto& k) {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, IsotropicStable>) {
                const double R = k.truncation_radius.value_or(
                    std::numeric_limits<double>::infinity());
                const double a = std::max(lo, 0.0);
                const double b = std::min(hi, R);
                if (b > a) {
                    // (c/d) * (b^(2-a) - a^(2-a)) / (2-a) on each diagonal entry
                    const double e = 2.0 - k.alpha;
                    const double s = k.radial_density_const / double(k.dim) *
                                     (std::pow(b, e) - std::pow(a, e)) / e;
                    out.diagonal().setConstant(s);
                }
            } else if constexpr (std::is_same_v<T, DiscreteSigned>) {
                for (const auto& [n, p] : k.masses) {
                    const double an = std::abs(double(n));
                    if (an > lo && an <= hi) out(0, 0) += double(n) * double(n) * p;
                }
            } else if constexpr (std::is_same_v<T, AtomicRadial>) {
                double s = 0.0;
                for (const auto& [r, m] : k.atoms)
                    if (r > lo && r <= hi) s += m * r * r;
                out.diagonal().setConstant(s / double(k.dim));
            } else if constexpr (std::is_same_v<T, Product>) {
                int off = 0;
                for (const auto& c : k.components) {
                    out.block(off, off, c.dim(), c.dim()) = second_moment_restricted(c, lo, hi);
                    off += c.dim();
                }
            }
        },
        spec.kind);
    return out;
}

Eigen::MatrixXd small_jump_variance(const LevyMeasureSpec& spec, double delta) {
    if (!(delta > 0.0)) throw std::invalid_argument("small_jump_variance: delta must be > 0");
    return second_moment_restricted(spec, 0.0, delta);
}

bool is_symmetric(const LevyMeasureSpec& spec) {
    return std::visit(
        [](const auto& k) -> bool {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, IsotropicStable>) return true;
            if constexpr (std::is_same_v<T, AtomicRadial>) return true;
            if constexpr (std::is_same_v<T, DiscreteSigned>) {
                for (const auto& [n, p] : k.masses) {
                    bool matched = false;
                    for (const auto& [n2, p2] : k.masses)
                        if (n2 == -n && std::fabs(p2 - p) <= 1e-15 * std::max(p, p2)) {
                            matched = true;
                            break;
                        }
                    if (!matched && p > 0.0) return false;
                }
                return true;
            }
            if constexpr (std::is_same_v<T, CompoundFinite>) return false;
            if constexpr (std::is_same_v<T, Product>) {
                for (const auto& c : k.components)
                    if (!is_symmetric(c)) return false;
                return true;
            }
        },
        spec.kind);
}

AuditReport integrability_audit(const LevyMeasureSpec& spec) {
    AuditReport rep;
    auto fail = [&](const std::string& m) {
        rep.ok = false;
        rep.messages.push_back(m);
    };
    std::function<void(const LevyMeasureSpec&)> walk = [&](const LevyMeasureSpec& s) {
        std::visit(
            [&](const auto& k) {
                using T = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<T, IsotropicStable>) {
                    if (!(k.alpha > 0.0 && k.alpha < 2.0))
                        fail("isotropic_stable: alpha must lie in (0,2)");
                    if (k.radial_density_const < 0.0)
                        fail("isotropic_stable: radial density constant must be >= 0");
                    if (k.truncation_radius && !(*k.truncation_radius > 0.0))
                        fail("isotropic_stable: truncation_radius must be > 0");
                } else if constexpr (std::is_same_v<T, DiscreteSigned>) {
                    double total = 0.0;
                    for (const auto& [n, p] : k.masses) {
                        if (p < 0.0) fail("discrete_signed: masses must be >= 0");
                        if (n == 0) fail("discrete_signed: level 0 is not a jump");
                        total += p;
                    }
                    if (!std::isfinite(total)) fail("discrete_signed: masses must sum to a finite value");
                } else if constexpr (std::is_same_v<T, AtomicRadial>) {
                    double s2 = 0.0;
                    for (const auto& [r, m] : k.atoms) {
                        if (!(r > 0.0)) fail("atomic_radial: radii must be > 0");
                        if (!(m > 0.0)) fail("atomic_radial: masses must be > 0");
                        s2 += m * std::min(r * r, 1.0);
                    }
                    if (!std::isfinite(s2)) fail("atomic_radial: not integrable");
                } else if constexpr (std::is_same_v<T, CompoundFinite>) {
                    if (k.total_rate < 0.0) fail("compound_finite: rate must be >= 0");
                } else if constexpr (std::is_same_v<T, Product>) {
                    for (const auto& c : k.components) walk(c);
                }
            },
            s.kind);
    };
    walk(spec);

    const double a = spec.effective_alpha();
    if (a == 1.0 && !is_symmetric(spec))
        fail("alpha = 1 requires a symmetric measure or an explicit principal-value drift");
    if (a < 1.0 && !spec.pure_jump && !is_symmetric(spec))
        fail("alpha <= 1 asymmetric specs must be declared pure_jump");
    if (spec.pure_jump && spec.drift_kappa.size() > 0 && spec.drift_kappa.norm() > 0.0)
        fail("pure_jump specs must have zero drift_kappa");
    return rep;
}

// ---------------------------------------------------------------------------

struct PreparedLevySampler::Component {
    enum Kind { Stable, Discrete, Atomic, Compound } type = Stable;
    int offset = 0;
    int cdim = 1;
    double rate = 0.0;
    // stable: r = (rma + u * span)^(-1/alpha)
    double alpha = 0.0;
    double rma = 0.0;
    double span = 0.0;
    std::vector<double> cdf;    // normalized within component
    std::vector<double> value;  // discrete level or atomic radius
    const MarkSampler* sampler = nullptr;
};

PreparedLevySampler::~PreparedLevySampler() = default;
PreparedLevySampler::PreparedLevySampler(PreparedLevySampler&&) noexcept = default;

PreparedLevySampler::PreparedLevySampler(const LevyMeasureSpec& spec, double delta) {
    if (!(delta > 0.0)) throw std::invalid_argument("sample_jump_skeleton: delta must be > 0");
    auto audit = integrability_audit(spec);
    if (!audit.ok) throw AuditError("levy audit failed: " + audit.messages.front());
    delta_ = delta;
    dim_ = spec.dim();

    std::function<void(const LevyMeasureSpec&, int)> flatten = [&](const LevyMeasureSpec& s,
                                                                   int offset) {
        std::visit(
            [&](const auto& k) {
                using T = std::decay_t<decltype(k)>;
                Component c;
                c.offset = offset;
                if constexpr (std::is_same_v<T, IsotropicStable>) {
                    c.type = Component::Stable;
                    c.cdim = k.dim;
                    c.alpha = k.alpha;
                    const double R = k.truncation_radius.value_or(
                        std::numeric_limits<double>::infinity());
                    if (delta < R) {
                        c.rma = std::isfinite(R) ? pow_neg_alpha(R, k.alpha) : 0.0;
                        c.span = pow_neg_alpha(delta, k.alpha) - c.rma;
                        c.rate = k.radial_density_const / k.alpha * c.span;
                    }
                    if (c.rate > 0.0) comps_.push_back(std::move(c));
                } else if constexpr (std::is_same_v<T, DiscreteSigned>) {
                    c.type = Component::Discrete;
                    c.cdim = 1;
                    double acc = 0.0;
                    for (const auto& [n, p] : k.masses) {
                        if (std::abs(n) > delta && p > 0.0) {
                            acc += p;
                            c.cdf.push_back(acc);
                            c.value.push_back(double(n));
                        }
                    }
                    c.rate = acc;
                    for (auto& x : c.cdf) x /= acc;
                    if (c.rate > 0.0) comps_.push_back(std::move(c));
                } else if constexpr (std::is_same_v<T, AtomicRadial>) {
                    c.type = Component::Atomic;
                    c.cdim = k.dim;
                    double acc = 0.0;
                    for (const auto& [r, m] : k.atoms) {
                        if (r > delta && m > 0.0) {
                            acc += m;
                            c.cdf.push_back(acc);
                            c.value.push_back(r);
                        }
                    }
                    c.rate = acc;
                    for (auto& x : c.cdf) x /= acc;
                    if (c.rate > 0.0) comps_.push_back(std::move(c));
                } else if constexpr (std::is_same_v<T, CompoundFinite>) {
                    c.type = Component::Compound;
                    c.cdim = k.dim;
                    c.rate = k.total_rate;
                    c.sampler = &mark_sampler(k.mark_sampler_id);
                    if (c.rate > 0.0) comps_.push_back(std::move(c));
                } else if constexpr (std::is_same_v<T, Product>) {
                    int off = offset;
                    for (const auto& sub : k.components) {
                        flatten(sub, off);
                        off += sub.dim();
                    }
                }
            },
            s.kind);
    };
    flatten(spec, 0);

    rate_ = 0.0;
    for (const auto& c : comps_) {
        rate_ += c.rate;
        comp_cdf_.push_back(rate_);
    }

    // Compensator drift per the skeleton invariant.
    const double a = spec.effective_alpha();
    if (spec.pure_jump) {
        drift_ = Eigen::VectorXd::Zero(dim_);
    } else if (a <= 1.0 && !is_symmetric(spec)) {
        throw std::invalid_argument(
            "sample_jump_skeleton: alpha <= 1 requires pure_jump or a symmetric measure");
    } else {
        drift_ = spec.kappa() - mean_restricted(spec, delta, 1.0);
    }
}

void PreparedLevySampler::sample(double t, PathRng& rng, JumpSkeleton& out) const {
    if (!(t > 0.0)) throw std::invalid_argument("sample_jump_skeleton: t must be > 0");
    out.horizon = t;
    out.cutoff_delta = delta_;
    out.mark_dim = dim_;
    out.compensator_drift = drift_;
    const std::uint64_t n = rate_ > 0.0 ? rng.poisson(rate_ * t) : 0;
    out.times.resize(n);
    for (std::uint64_t i = 0; i < n; ++i) out.times[i] = rng.uniform() * t;
    std::sort(out.times.begin(), out.times.end());
    out.marks.assign(n * std::size_t(dim_), 0.0);
    for (std::uint64_t i = 0; i < n; ++i) {
        double* mark = out.marks.data() + i * std::size_t(dim_);
        // component pick
        std::size_t ci = 0;
        if (comps_.size() > 1) {
            const double u = rng.uniform() * rate_;
            while (ci + 1 < comps_.size() && u > comp_cdf_[ci]) ++ci;
        }
        const Component& c = comps_[ci];
        switch (c.type) {
            case Component::Stable: {
                const double u = rng.uniform();
                const double r = std::pow(c.rma + u * c.span, -1.0 / c.alpha);
                if (c.cdim == 1) {
                    mark[c.offset] = (rng.raw() & 1u) ? r : -r;
                } else {
                    const Eigen::VectorXd dir = rng.unit_direction(c.cdim);
                    for (int j = 0; j < c.cdim; ++j) mark[c.offset + j] = r * dir[j];
                }
                break;
            }
            case Component::Discrete: {
                const double u = rng.uniform();
                const std::size_t k =
                    std::lower_bound(c.cdf.begin(), c.cdf.end(), u) - c.cdf.begin();
                mark[c.offset] = c.value[std::min(k, c.value.size() - 1)];
                break;
            }
            case Component::Atomic: {
                const double u = rng.uniform();
                const std::size_t k =
                    std::lower_bound(c.cdf.begin(), c.cdf.end(), u) - c.cdf.begin();
                const double r = c.value[std::min(k, c.value.size() - 1)];
                if (c.cdim == 1) {
                    mark[c.offset] = (rng.raw() & 1u) ? r : -r;
                } else {
                    const Eigen::VectorXd dir = rng.unit_direction(c.cdim);
                    for (int j = 0; j < c.cdim; ++j) mark[c.offset + j] = r * dir[j];
                }
                break;
            }
            case Component::Compound: {
                const Eigen::VectorXd m = (*c.sampler)(rng);
                if (m.size() != c.cdim)
                    throw std::invalid_argument("mark sampler dimension mismatch");
                for (int j = 0; j < c.cdim; ++j) mark[c.offset + j] = m[j];
                break;
            }
        }
    }
}

JumpSkeleton sample_jump_skeleton(const LevyMeasureSpec& spec, double t, double delta,
                                  std::uint64_t master_seed, std::uint64_t path_index) {
    PreparedLevySampler prep(spec, delta);
    PathRng rng(master_seed, path_index, /*stream=*/0);
    JumpSkeleton out;
    prep.sample(t, rng, out);
    return out;
}

ScalingBoundsReport verify_scaling_bounds(const LevyMeasureSpec& spec, double alpha,
                                          const std::vector<double>& rho_grid,
                                          const std::vector<Eigen::VectorXd>& directions) {
    if (rho_grid.empty() || directions.empty())
        throw std::invalid_argument("verify_scaling_bounds: empty grid");
    ScalingBoundsReport rep;
    rep.c_hat = std::numeric_limits<double>::infinity();
    rep.C_hat = 0.0;
    for (double rho : rho_grid) {
        if (!(rho > 0.0 && rho <= 1.0))
            throw std::invalid_argument("verify_scaling_bounds: rho must be in (0,1]");
        const Eigen::MatrixXd m2 = second_moment_restricted(spec, 0.0, rho);
        const double denom = std::pow(rho, 2.0 - alpha);
        for (const auto& u : directions) {
            const double ratio = u.dot(m2 * u) / denom;
            rep.c_hat = std::min(rep.c_hat, ratio);
            rep.C_hat = std::max(rep.C_hat, ratio);
        }
    }
    rep.pass = rep.c_hat > 1e-12 && std::isfinite(rep.C_hat);
    return rep;
}

// ---------------------------------------------------------------------------

nlohmann::json spec_to_json(const LevyMeasureSpec& spec) {
    nlohmann::json j;
    std::visit(
        [&](const auto& k) {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, IsotropicStable>) {
                j["kind"] = "isotropic_stable";
                j["alpha"] = k.alpha;
                j["dim"] = k.dim;
                j["radial_density_const"] = k.radial_density_const;
                if (k.truncation_radius) j["truncation_radius"] = *k.truncation_radius;
            } else if constexpr (std::is_same_v<T, DiscreteSigned>) {
                j["kind"] = "discrete_signed";
                auto arr = nlohmann::json::array();
                for (const auto& [n, p] : k.masses) arr.push_back({{"level", n}, {"mass", p}});
                j["masses"] = arr;
            } else if constexpr (std::is_same_v<T, AtomicRadial>) {
                j["kind"] = "atomic_radial";
                j["dim"] = k.dim;
                auto arr = nlohmann::json::array();
                for (const auto& [r, m] : k.atoms) arr.push_back({{"radius", r}, {"mass", m}});
                j["atoms"] = arr;
            } else if constexpr (std::is_same_v<T, CompoundFinite>) {
                j["kind"] = "compound_finite";
                j["total_rate"] = k.total_rate;
                j["mark_sampler_id"] = k.mark_sampler_id;
                j["dim"] = k.dim;
            } else if constexpr (std::is_same_v<T, Product>) {
                j["kind"] = "product";
                auto arr = nlohmann::json::array();
                for (const auto& c : k.components) arr.push_back(spec_to_json(c));
                j["components"] = arr;
            }
        },
        spec.kind);
    if (spec.drift_kappa.size() > 0)
        j["drift_kappa"] = std::vector<double>(spec.drift_kappa.data(),
                                               spec.drift_kappa.data() + spec.drift_kappa.size());
    if (spec.alpha_index >= 0.0) j["alpha_index"] = spec.alpha_index;
    if (spec.pure_jump) j["pure_jump"] = true;
    return j;
}

LevyMeasureSpec spec_from_json(const nlohmann::json& j) {
    LevyMeasureSpec spec;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "isotropic_stable") {
        IsotropicStable k;
        k.alpha = j.at("alpha").get<double>();
        k.dim = j.at("dim").get<int>();
        k.radial_density_const = j.at("radial_density_const").get<double>();
        if (j.contains("truncation_radius") && !j["truncation_radius"].is_null())
            k.truncation_radius = j["truncation_radius"].get<double>();
        spec.kind = k;
    } else if (kind == "discrete_signed") {
        DiscreteSigned k;
        for (const auto& e : j.at("masses"))
            k.masses.emplace_back(e.at("level").get<int>(), e.at("mass").get<double>());
        spec.kind = k;
    } else if (kind == "atomic_radial") {
        AtomicRadial k;
        k.dim = j.at("dim").get<int>();
        for (const auto& e : j.at("atoms"))
            k.atoms.emplace_back(e.at("radius").get<double>(), e.at("mass").get<double>());
        spec.kind = k;
    } else if (kind == "compound_finite") {
        CompoundFinite k;
        k.total_rate = j.at("total_rate").get<double>();
        k.mark_sampler_id = j.at("mark_sampler_id").get<std::string>();
        k.dim = j.value("dim", 1);
        spec.kind = k;
    } else if (kind == "product") {
        Product k;
        for (const auto& e : j.at("components")) k.components.push_back(spec_from_json(e));
        spec.kind = k;
    } else {
        throw std::invalid_argument("unknown Levy measure kind: " + kind);
    }
    if (j.contains("drift_kappa")) {
        const auto v = j["drift_kappa"].get<std::vector<double>>();
        spec.drift_kappa = Eigen::Map<const Eigen::VectorXd>(v.data(), long(v.size()));
    }
    spec.alpha_index = j.value("alpha_index", -1.0);
    spec.pure_jump = j.value("pure_jump", false);
    return spec;
}

}  // namespace levymc::levy
