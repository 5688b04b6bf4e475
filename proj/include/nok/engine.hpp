#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nok/design.hpp"
#include "nok/errors.hpp"
#include "nok/prox.hpp"

namespace nok {

namespace detail {

inline void hash_bytes(std::uint64_t& h, const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;  // FNV-1a
    }
}

inline void hash_value(std::uint64_t& h, double v) { hash_bytes(h, &v, sizeof v); }
inline void hash_value(std::uint64_t& h, long v) { hash_bytes(h, &v, sizeof v); }

}  // namespace detail

/// Everything one T-step run needs: design, rotation(s), penalty, depth,
/// and the input scaling (1 for the W form, 1/sqrt(N) for the D form).
struct NokConfig {
    std::shared_ptr<const StructuredDesign> design;
    std::vector<RotationState> rotations;  // one shared rotation, or one per layer
    Penalty penalty;
    long steps = 1;
    double input_gain = 1.0;
    MatvecMode mode = MatvecMode::Auto;

    static NokConfig make(std::shared_ptr<const StructuredDesign> design, Penalty penalty, long T,
                          double gain = 1.0) {
        NokConfig cfg;
        cfg.rotations.push_back(RotationState::identity(design->dim()));
        cfg.design = std::move(design);
        cfg.penalty = penalty;
        cfg.steps = T;
        cfg.input_gain = gain;
        cfg.validate();
        return cfg;
    }

    bool shared_rotation() const { return rotations.size() == 1; }

    const RotationState& rotation_at(long t) const {
        return shared_rotation() ? rotations.front() : rotations.at(static_cast<std::size_t>(t));
    }

    void validate() const {
        if (!design) throw InvalidInputError("config has no design");
        if (steps < 1) throw InvalidInputError("T must be >= 1");
        if (!(input_gain > 0.0) || !std::isfinite(input_gain))
            throw InvalidInputError("input_gain must be positive and finite");
        if (rotations.empty() || (rotations.size() != 1 && rotations.size() != static_cast<std::size_t>(steps)))
            throw InvalidInputError("need one shared rotation or one per layer");
        for (const auto& R : rotations)
            if (R.dim() != design->dim()) throw InvalidInputError("rotation dimension must equal d");
        penalty.validate();
        if (penalty.family == PenaltyFamily::TopK && penalty.k > design->samples())
            throw InvalidInputError("TopK k exceeds N");
    }

    std::uint64_t fingerprint() const {
        std::uint64_t h = 1469598103934665603ULL;
        detail::hash_value(h, design->n());
        detail::hash_value(h, design->m());
        detail::hash_value(h, static_cast<long>(design->seed() ? 1 : 0));
        if (design->seed()) {
            const std::uint64_t s = *design->seed();
            detail::hash_bytes(h, &s, sizeof s);
        }
        for (Eigen::Index i = 0; i < design->rotation().phases.size(); ++i)
            detail::hash_value(h, design->rotation().phases[i]);
        for (auto p : design->rotation().permutation) detail::hash_value(h, static_cast<long>(p));
        for (const auto& R : rotations)
            detail::hash_bytes(h, R.matrix().data(),
                               sizeof(double) * static_cast<std::size_t>(R.matrix().size()));
        detail::hash_value(h, static_cast<long>(penalty.family));
        detail::hash_value(h, penalty.lambda);
        detail::hash_value(h, penalty.gamma);
        detail::hash_value(h, penalty.k);
        detail::hash_value(h, steps);
        detail::hash_value(h, input_gain);
        return h;
    }
};

/// Iterates y_0..y_T of one run plus the objective value at each of them.
struct Trajectory {
    VectorXd input;
    std::vector<VectorXd> iterates;
    std::vector<double> objectives;
    std::uint64_t config_fingerprint = 0;

    long steps() const { return static_cast<long>(iterates.size()) - 1; }
};

/// Q(y) = 0.5*||gain*x - (1/N) W y||^2 + (1/N) phi_lambda(y).
/// With gain = 1 this is the finite objective verbatim; other gains fold the
/// scaling into the input so the descent certificates keep the same constants.
inline double objective(const NokConfig& cfg, const VectorXd& x, const VectorXd& y) {
    cfg.validate();
    if (!cfg.shared_rotation())
        throw UnsupportedOperationError("objective requires a shared rotation");
    const auto& design = *cfg.design;
    if (x.size() != design.dim()) throw InvalidInputError("input length must equal d");
    if (y.size() != design.samples()) throw InvalidInputError("code length must equal N");
    const double N = static_cast<double>(design.samples());
    const VectorXd recon = apply_design_adjoint(design, cfg.rotation_at(0), 1.0 / N, y, cfg.mode);
    const double quad = 0.5 * (cfg.input_gain * x - recon).squaredNorm();
    return quad + penalty_value(cfg.penalty, y) / N;
}

/// One update y -> h(gain*W^T x + (I - W^T W / N) y). The residual operator
/// is applied as two structured matvecs; the N x N matrix never exists.
inline VectorXd step(const NokConfig& cfg, const VectorXd& x, const VectorXd& y, long t = 0) {
    const auto& design = *cfg.design;
    if (x.size() != design.dim()) throw InvalidInputError("input length must equal d");
    if (y.size() != design.samples()) throw InvalidInputError("code length must equal N");
    const double d_over_N = static_cast<double>(design.dim()) / static_cast<double>(design.samples());
    const VectorXd bias = apply_design(design, cfg.rotation_at(t), cfg.input_gain, x, cfg.mode);
    const VectorXd a = bias + y - d_over_N * design.bt_times(design.b_times(y, cfg.mode), cfg.mode);
    return prox(cfg.penalty, a);
}

/// Run T steps from y_0 = 0 (or an explicit start), recording objectives.
inline Trajectory forward(const NokConfig& cfg, const VectorXd& x,
                          const VectorXd* y_start = nullptr) {
    cfg.validate();
    const auto& design = *cfg.design;
    if (x.size() != design.dim()) throw InvalidInputError("input length must equal d");
    const double d_over_N = static_cast<double>(design.dim()) / static_cast<double>(design.samples());

    Trajectory traj;
    traj.input = x;
    traj.config_fingerprint = cfg.fingerprint();
    VectorXd y = y_start ? *y_start : VectorXd::Zero(design.samples());
    if (y.size() != design.samples()) throw InvalidInputError("y_0 length must equal N");
    traj.iterates.push_back(y);

    const bool track_objective = cfg.shared_rotation();
    const auto record_objective = [&](long step_index) {
        const double q = objective(cfg, x, traj.iterates.back());
        // +inf is legitimate only for an infeasible explicit start
        if (std::isnan(q) || (std::isinf(q) && (step_index > 0 || !y_start)))
            throw NumericOverflowError("objective became non-finite", step_index);
        traj.objectives.push_back(q);
    };
    if (track_objective) record_objective(0);

    std::optional<VectorXd> shared_bias;
    if (cfg.shared_rotation())
        shared_bias = apply_design(design, cfg.rotation_at(0), cfg.input_gain, x, cfg.mode);

    for (long t = 0; t < cfg.steps; ++t) {
        VectorXd a;
        if (shared_bias) {
            a = *shared_bias + y - d_over_N * design.bt_times(design.b_times(y, cfg.mode), cfg.mode);
        } else {
            a = apply_design(design, cfg.rotation_at(t), cfg.input_gain, x, cfg.mode) + y -
                d_over_N * design.bt_times(design.b_times(y, cfg.mode), cfg.mode);
        }
        y = prox(cfg.penalty, a);
        if (!y.allFinite()) throw NumericOverflowError("iterate became non-finite", t + 1);
        traj.iterates.push_back(y);
        if (track_objective) record_objective(t + 1);
    }
    return traj;
}

// ---------------------------------------------------------------------------
// Certificates
// ---------------------------------------------------------------------------

struct DescentReport {
    std::string name;
    bool passed = false;
    // most-binding slack: negative when the inequality holds with margin
    double max_violation = -std::numeric_limits<double>::infinity();
    double tolerance = 0.0;
    double max_identity_gap = 0.0;  // monotonic suite only
    double identity_tolerance = 0.0;
    long steps = 0;
    std::vector<double> violations;  // per step / per prefix
    std::string detail;
};

/// Check, for every step, the descent inequality
///   Q(y_{t+1}) <= Q(y_t) - (1/2N)||dy||^2 + (1/2)||W dy / N||^2
/// and that the bound equals Q(y_t) - (1/2N)||(I - W^T W/N) dy||^2.
inline DescentReport verify_monotonic(const NokConfig& cfg, const Trajectory& traj,
                                      double tol = 1e-10, double identity_tol = 1e-12) {
    cfg.validate();
    if (traj.config_fingerprint != cfg.fingerprint())
        throw InvalidInputError("trajectory was produced by a different config");
    if (traj.iterates.empty()) throw InvalidInputError("empty trajectory");
    const auto& design = *cfg.design;
    const double N = static_cast<double>(design.samples());
    const double d_over_N = static_cast<double>(design.dim()) / N;

    DescentReport rep;
    rep.name = "monotonic_descent";
    const double q0 = objective(cfg, traj.input, traj.iterates.front());
    const double scale = 1.0 + std::abs(q0);
    rep.tolerance = tol * scale;
    rep.identity_tolerance = identity_tol * scale;
    rep.steps = traj.steps();

    double q_prev = q0;
    for (long t = 0; t < rep.steps; ++t) {
        const VectorXd& y0 = traj.iterates[static_cast<std::size_t>(t)];
        const VectorXd& y1 = traj.iterates[static_cast<std::size_t>(t) + 1];
        const VectorXd dy = y1 - y0;
        const double q_next = objective(cfg, traj.input, y1);
        const VectorXd w_dy = apply_design_adjoint(design, cfg.rotation_at(0), 1.0 / N, dy, cfg.mode);
        const double bound_a = q_prev - dy.squaredNorm() / (2.0 * N) + 0.5 * w_dy.squaredNorm();
        const VectorXd resid_dy = dy - d_over_N * design.bt_times(design.b_times(dy, cfg.mode), cfg.mode);
        const double bound_b = q_prev - resid_dy.squaredNorm() / (2.0 * N);
        rep.violations.push_back(q_next - bound_a);
        rep.max_violation = std::max(rep.max_violation, q_next - bound_a);
        rep.max_identity_gap = std::max(rep.max_identity_gap, std::abs(bound_a - bound_b));
        q_prev = q_next;
    }
    rep.passed = rep.max_violation < rep.tolerance && rep.max_identity_gap < rep.identity_tolerance;
    return rep;
}

/// Long-run iterate of the same map; the y* oracle for the convex rate check.
inline VectorXd fixed_point(const NokConfig& cfg, const VectorXd& x, long max_iters = 100000,
                            double tol = 1e-14) {
    cfg.validate();
    VectorXd y = VectorXd::Zero(cfg.design->samples());
    for (long t = 0; t < max_iters; ++t) {
        VectorXd next = step(cfg, x, y);
        if (!next.allFinite()) throw NumericOverflowError("fixed-point iterate became non-finite", t + 1);
        const double gap = (next - y).norm();
        y.swap(next);
        if (gap < tol) break;
    }
    return y;
}

/// Outcome of the convex O(1/T) rate check, per prefix length T'.
/// The printed bound weights the step sum by (t+1)/N; that weight overstates
/// what its own telescoping argument yields (t/N), and the overstated form is
/// violated by roughly (1/2N)||y_1 - y_0||^2 already at T' = 1 on generic
/// data, so both variants are measured and reported separately.
struct RateReport {
    std::string name = "convex_rate";
    bool passed = false;        // simple && printed: the acceptance reading
    bool simple_ok = false;     // T (Q(y_T) - Q(y*)) <= (1/2N)||y_0 - y*||^2
    bool printed_ok = false;    // full RHS with the (t+1)/N step weights
    bool telescoped_ok = false; // full RHS with the provable t/N step weights
    double max_violation_simple = -std::numeric_limits<double>::infinity();
    double max_violation_printed = -std::numeric_limits<double>::infinity();
    double max_violation_telescoped = -std::numeric_limits<double>::infinity();
    double tolerance = 0.0;
    long steps = 0;
    std::vector<double> violations;  // printed variant, per prefix
};

/// Check, for every prefix length T' of the trajectory,
///   T' (Q(y_T') - Q(y*)) <= (1/2N)||y_0 - y*||^2 - (1/2N)||y_T' - y*||^2
///                           - (1/2) sum ||W(y_t - y*)/N||^2
///                           - (1/2) sum (w_t/N)||y_{t+1} - y_t||^2
/// with step weights w_t = t+1 (as printed) and w_t = t (as provable), plus
/// the simplified O(1/T) form that keeps only the first right-hand term.
inline RateReport verify_convex_rate(const NokConfig& cfg, const Trajectory& traj,
                                     const VectorXd& y_star, double tol = 1e-8) {
    cfg.validate();
    if (!cfg.penalty.is_convex())
        throw UnsupportedOperationError("rate check requires convex penalty");
    if (traj.config_fingerprint != cfg.fingerprint())
        throw InvalidInputError("trajectory was produced by a different config");
    if (y_star.size() != cfg.design->samples()) throw InvalidInputError("y* length must equal N");
    const auto& design = *cfg.design;
    const double N = static_cast<double>(design.samples());

    RateReport rep;
    const double q0 = objective(cfg, traj.input, traj.iterates.front());
    const double scale = 1.0 + std::abs(q0);
    rep.tolerance = tol * scale;
    rep.steps = traj.steps();

    const double q_star = objective(cfg, traj.input, y_star);
    const double init_term = (traj.iterates.front() - y_star).squaredNorm() / (2.0 * N);

    double sum_w_terms = 0.0;
    double sum_steps_printed = 0.0;
    double sum_steps_telescoped = 0.0;
    for (long T = 1; T <= rep.steps; ++T) {
        const VectorXd& y_prev = traj.iterates[static_cast<std::size_t>(T - 1)];
        const VectorXd& y_T = traj.iterates[static_cast<std::size_t>(T)];
        const VectorXd w_gap =
            apply_design_adjoint(design, cfg.rotation_at(0), 1.0 / N, y_prev - y_star, cfg.mode);
        sum_w_terms += 0.5 * w_gap.squaredNorm();
        const double step_sq = (y_T - y_prev).squaredNorm();
        sum_steps_printed += 0.5 * static_cast<double>(T) / N * step_sq;
        sum_steps_telescoped += 0.5 * static_cast<double>(T - 1) / N * step_sq;

        const double lhs = static_cast<double>(T) * (objective(cfg, traj.input, y_T) - q_star);
        const double rhs_common = init_term - (y_T - y_star).squaredNorm() / (2.0 * N) - sum_w_terms;
        const double viol_printed = lhs - (rhs_common - sum_steps_printed);
        const double viol_telescoped = lhs - (rhs_common - sum_steps_telescoped);
        const double viol_simple = lhs - init_term;
        rep.violations.push_back(viol_printed);
        rep.max_violation_printed = std::max(rep.max_violation_printed, viol_printed);
        rep.max_violation_telescoped = std::max(rep.max_violation_telescoped, viol_telescoped);
        rep.max_violation_simple = std::max(rep.max_violation_simple, viol_simple);
    }
    rep.simple_ok = rep.max_violation_simple < rep.tolerance;
    rep.printed_ok = rep.max_violation_printed < rep.tolerance;
    rep.telescoped_ok = rep.max_violation_telescoped < rep.tolerance;
    rep.passed = rep.simple_ok && rep.printed_ok;
    return rep;
}

/// Run the k-sparse iteration y_{t+1} = topk(D^T x + (I - D^T D) y_t) with
/// D = W/sqrt(N) and check the per-step certificate
///   L(y_{t+1}) <= L(y_t) + 0.5||y_{t+1}-a||^2 - 0.5||y_t-a||^2 - c_k||dy||^2,
///   c_k = (n - (2k-1) sqrt(n) - m) / (2n),
/// with strict descent whenever k is below (n - m + sqrt(n)) / (2 sqrt(n)).
inline DescentReport ksparse_run_and_verify(const std::shared_ptr<const StructuredDesign>& design,
                                            const RotationState& R, const VectorXd& x, long k,
                                            long T, double tol = 1e-10,
                                            MatvecMode mode = MatvecMode::Auto) {
    if (!design) throw InvalidInputError("null design");
    if (x.size() != design->dim()) throw InvalidInputError("input length must equal d");
    if (k < 1 || k > design->samples()) throw InvalidInputError("k must lie in [1, N]");
    if (T < 1) throw InvalidInputError("T must be >= 1");
    const double n = static_cast<double>(design->n());
    const double m = static_cast<double>(design->m());
    const double N = static_cast<double>(design->samples());
    const double root_N = std::sqrt(N);
    const double d_over_N = static_cast<double>(design->dim()) / N;
    const double c_k = (n - (2.0 * static_cast<double>(k) - 1.0) * std::sqrt(n) - m) / (2.0 * n);
    const bool strict_regime = static_cast<double>(k) < (n - m + std::sqrt(n)) / (2.0 * std::sqrt(n));

    const auto loss = [&](const VectorXd& y) {
        const VectorXd recon = apply_design_adjoint(*design, R, 1.0 / root_N, y, mode);
        return 0.5 * (x - recon).squaredNorm();
    };

    DescentReport rep;
    rep.name = "ksparse_descent";
    VectorXd y = VectorXd::Zero(design->samples());
    double L_prev = loss(y);
    const double scale = 1.0 + std::abs(L_prev);
    rep.tolerance = tol * scale;
    rep.steps = T;
    rep.detail = strict_regime ? "strict regime" : "certificate only";

    const VectorXd bias = apply_design(*design, R, 1.0 / root_N, x, mode);
    bool strict_ok = true;
    for (long t = 0; t < T; ++t) {
        const VectorXd a = bias + y - d_over_N * design->bt_times(design->b_times(y, mode), mode);
        const VectorXd y_next = prox_topk(a, k);
        const double L_next = loss(y_next);
        const double bound = L_prev + 0.5 * (y_next - a).squaredNorm() - 0.5 * (y - a).squaredNorm() -
                             c_k * (y_next - y).squaredNorm();
        const double viol = L_next - bound;
        rep.violations.push_back(viol);
        rep.max_violation = std::max(rep.max_violation, viol);
        if (strict_regime && (y_next - y).norm() > 0.0) {
            // quantitative strictness: the drop must cover c_k ||dy||^2
            if (L_next - L_prev + c_k * (y_next - y).squaredNorm() > rep.tolerance) strict_ok = false;
        }
        y = y_next;
        L_prev = L_next;
    }
    rep.passed = rep.max_violation < rep.tolerance && strict_ok;
    if (!strict_ok) rep.detail += "; strict descent violated";
    return rep;
}

}  // namespace nok
