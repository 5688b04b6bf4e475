#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <vector>

#include "nok/design.hpp"
#include "nok/engine.hpp"
#include "nok/errors.hpp"
#include "nok/parallel.hpp"

namespace nok {

// ---------------------------------------------------------------------------
// Cayley parameterization
// ---------------------------------------------------------------------------

/// The d(d-1)/2 free coefficients of a d x d skew-symmetric matrix,
/// stored as the strict upper triangle in row-major order.
class SkewParams {
  public:
    explicit SkewParams(Eigen::Index dim)
        : dim_(dim), coeffs_(VectorXd::Zero(dim * (dim - 1) / 2)) {
        if (dim < 1) throw InvalidInputError("dimension must be >= 1");
    }

    SkewParams(Eigen::Index dim, VectorXd coeffs) : dim_(dim), coeffs_(std::move(coeffs)) {
        if (dim < 1) throw InvalidInputError("dimension must be >= 1");
        if (coeffs_.size() != dim * (dim - 1) / 2)
            throw InvalidInputError("coefficient count must be d(d-1)/2");
        if (!coeffs_.allFinite()) throw InvalidInputError("coefficients must be finite");
    }

    static SkewParams random(Eigen::Index dim, std::mt19937_64& rng, double scale = 1.0) {
        std::normal_distribution<double> gauss(0.0, scale);
        SkewParams sk(dim);
        for (Eigen::Index i = 0; i < sk.coeffs_.size(); ++i) sk.coeffs_[i] = gauss(rng);
        return sk;
    }

    /// Strict upper triangle of M, read row-major; M must be skew to 1e-10.
    static SkewParams from_matrix(const MatrixXd& M) {
        if (M.rows() != M.cols()) throw InvalidInputError("matrix must be square");
        if ((M + M.transpose()).norm() > 1e-10) throw InvalidInputError("matrix is not skew-symmetric");
        SkewParams sk(M.rows());
        Eigen::Index idx = 0;
        for (Eigen::Index i = 0; i < M.rows(); ++i)
            for (Eigen::Index j = i + 1; j < M.cols(); ++j) sk.coeffs_[idx++] = M(i, j);
        return sk;
    }

    MatrixXd to_matrix() const {
        MatrixXd M = MatrixXd::Zero(dim_, dim_);
        Eigen::Index idx = 0;
        for (Eigen::Index i = 0; i < dim_; ++i)
            for (Eigen::Index j = i + 1; j < dim_; ++j) {
                M(i, j) = coeffs_[idx];
                M(j, i) = -coeffs_[idx];
                ++idx;
            }
        return M;
    }

    Eigen::Index dim() const { return dim_; }
    const VectorXd& coefficients() const { return coeffs_; }
    VectorXd& coefficients() { return coeffs_; }

  private:
    Eigen::Index dim_;
    VectorXd coeffs_;
};

/// R = (I + M)(I - M)^{-1}; always special-orthogonal for skew M.
inline RotationState cayley(const SkewParams& params) {
    const MatrixXd M = params.to_matrix();
    const MatrixXd I = MatrixXd::Identity(params.dim(), params.dim());
    // (I + M) and (I - M)^{-1} commute, so one solve suffices.
    return RotationState((I - M).partialPivLu().solve(I + M));
}

/// M = (R - I)(R + I)^{-1}; defined when R has no -1 eigenvalue.
inline SkewParams inverse_cayley(const RotationState& R) {
    const Eigen::Index d = R.dim();
    const MatrixXd I = MatrixXd::Identity(d, d);
    const MatrixXd sum = R.matrix() + I;
    const Eigen::JacobiSVD<MatrixXd> svd(sum);
    if (svd.singularValues()(d - 1) < 1e-10)
        throw SingularInputError("rotation has an eigenvalue at -1; Cayley preimage does not exist");
    const MatrixXd M = sum.partialPivLu().solve(R.matrix() - I);
    if ((M + M.transpose()).norm() > 1e-10)
        throw IntegrityError("computed Cayley preimage is not skew-symmetric");
    return SkewParams::from_matrix(0.5 * (M - M.transpose()));
}

/// Haar-ish random special-orthogonal matrix via the Cayley map.
inline RotationState random_rotation(Eigen::Index d, std::mt19937_64& rng) {
    return cayley(SkewParams::random(d, rng));
}

// ---------------------------------------------------------------------------
// Nearest orthogonal matrix
// ---------------------------------------------------------------------------

struct ProcrustesResult {
    RotationState rotation;
    double min_singular_value = 0.0;
    bool degenerate = false;  // rank-deficient input; R is one of many optima
};

/// R = U V^T from the SVD of M, the maximizer of trace(R^T M) over all
/// orthogonal R. `current` is kept when M is exactly zero (every orthogonal
/// matrix is then optimal).
inline ProcrustesResult procrustes(const MatrixXd& M, const RotationState& current) {
    if (M.rows() != M.cols()) throw InvalidInputError("matrix must be square");
    if (M.rows() != current.dim()) throw InvalidInputError("dimension mismatch");
    if (!M.allFinite()) throw InvalidInputError("matrix must be finite");
    if (M.norm() == 0.0) return {current, 0.0, true};
    Eigen::JacobiSVD<MatrixXd> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const double min_sv = svd.singularValues()(M.rows() - 1);
    return {RotationState(svd.matrixU() * svd.matrixV().transpose()), min_sv, min_sv < 1e-12};
}

inline ProcrustesResult procrustes(const MatrixXd& M) {
    if (M.rows() != M.cols()) throw InvalidInputError("matrix must be square");
    return procrustes(M, RotationState::identity(M.rows()));
}

// ---------------------------------------------------------------------------
// Unsupervised alternating descent
// ---------------------------------------------------------------------------

struct AlternatingConfig {
    long inner_steps = 5;  // T1: code updates per phase
    long phases = 10;      // T2: alternating phases
    Penalty penalty = Penalty::l1(0.1);
    std::optional<RotationState> initial_rotation;  // default identity
    std::optional<MatrixXd> initial_codes;          // default zero
    MatvecMode mode = MatvecMode::Auto;
    long threads = 1;
};

struct AlternatingResult {
    RotationState rotation;
    MatrixXd codes;                      // N x S
    std::vector<double> objective_trace; // initial value plus one per half-phase
    bool procrustes_degenerate = false;
};

/// Minimize 0.5*||X - (sqrt(d)/N) R^T B Y||_F^2 + (1/N) phi(Y) by
/// alternating T1 proximal code updates (columns in parallel) with the
/// closed-form rotation update from the SVD of (sqrt(d)/N) B Y X^T.
inline AlternatingResult alternating_fit(const MatrixXd& X,
                                         std::shared_ptr<const StructuredDesign> design,
                                         const AlternatingConfig& config) {
    if (!design) throw InvalidInputError("null design");
    if (X.rows() != design->dim()) throw InvalidInputError("data rows must equal d");
    if (X.cols() < 1) throw InvalidInputError("need at least one sample");
    if (!X.allFinite()) throw InvalidInputError("data must be finite");
    if (config.inner_steps < 1) throw InvalidInputError("T1 must be >= 1");
    if (config.phases < 0) throw InvalidInputError("T2 must be >= 0");
    config.penalty.validate();
    if (!config.penalty.is_scalar())
        throw InvalidInputError("alternating fit needs a scalar-separable penalty");

    const long d = design->dim();
    const long N = design->samples();
    const long S = X.cols();
    const double root_d = std::sqrt(static_cast<double>(d));

    RotationState R = config.initial_rotation ? *config.initial_rotation : RotationState::identity(d);
    if (R.dim() != d) throw InvalidInputError("initial rotation dimension must equal d");
    MatrixXd Y = config.initial_codes ? *config.initial_codes : MatrixXd::Zero(N, S);
    if (Y.rows() != N || Y.cols() != S) throw InvalidInputError("initial codes must be N x S");

    const auto total_objective = [&](const RotationState& rot, const MatrixXd& codes) {
        const MatrixXd recon =
            (root_d / static_cast<double>(N)) * rot.matrix().transpose() * (design->matrix() * codes);
        double phi = 0.0;
        for (Eigen::Index j = 0; j < codes.cols(); ++j)
            for (Eigen::Index i = 0; i < codes.rows(); ++i)
                phi += penalty_value(config.penalty, codes(i, j));
        const double value = 0.5 * (X - recon).squaredNorm() + phi / static_cast<double>(N);
        if (!std::isfinite(value)) throw NumericOverflowError("alternating objective is not finite", 0);
        return value;
    };

    AlternatingResult result{R, Y, {}, false};
    result.objective_trace.push_back(total_objective(R, Y));

    for (long phase = 0; phase < config.phases; ++phase) {
        NokConfig cfg;
        cfg.design = design;
        cfg.rotations = {R};
        cfg.penalty = config.penalty;
        cfg.steps = config.inner_steps;
        cfg.mode = config.mode;

        parallel_for(S, config.threads, [&](long j) {
            VectorXd y = Y.col(j);
            for (long t = 0; t < config.inner_steps; ++t) y = step(cfg, X.col(j), y);
            Y.col(j) = y;
        });
        result.objective_trace.push_back(total_objective(R, Y));

        const MatrixXd M =
            (root_d / static_cast<double>(N)) * (design->matrix() * Y) * X.transpose();
        const ProcrustesResult pr = procrustes(M, R);
        R = pr.rotation;
        result.procrustes_degenerate = result.procrustes_degenerate || pr.degenerate;
        result.objective_trace.push_back(total_objective(R, Y));
    }

    result.rotation = R;
    result.codes = Y;
    return result;
}

// ---------------------------------------------------------------------------
// Finite-difference training of a shared rotation (tiny-scale demo)
// ---------------------------------------------------------------------------

struct FdTrainResult {
    SkewParams params;
    std::vector<double> loss_trace;  // iters + 1 values
};

/// Squared-error loss of a fixed linear readout of y_T under the shared
/// rotation R = cayley(M).
inline std::function<double(const SkewParams&)> make_shared_rotation_loss(
    const MatrixXd& X, const VectorXd& labels, std::shared_ptr<const StructuredDesign> design,
    const Penalty& penalty, long T) {
    if (!design) throw InvalidInputError("null design");
    if (X.rows() != design->dim()) throw InvalidInputError("data rows must equal d");
    if (labels.size() != X.cols()) throw InvalidInputError("one label per sample");
    penalty.validate();
    const double inv_root_N = 1.0 / std::sqrt(static_cast<double>(design->samples()));
    return [=](const SkewParams& params) {
        NokConfig cfg;
        cfg.design = design;
        cfg.rotations = {cayley(params)};
        cfg.penalty = penalty;
        cfg.steps = T;
        double loss = 0.0;
        for (Eigen::Index j = 0; j < X.cols(); ++j) {
            VectorXd y = VectorXd::Zero(design->samples());
            for (long t = 0; t < T; ++t) y = step(cfg, X.col(j), y);
            const double z = y.sum() * inv_root_N;
            loss += 0.5 * (z - labels[j]) * (z - labels[j]);
        }
        return loss / static_cast<double>(X.cols());
    };
}

/// Central-difference gradient over the skew coefficients.
inline VectorXd fd_gradient(const std::function<double(const SkewParams&)>& loss,
                            const SkewParams& at, double eps = 1e-4, long threads = 1) {
    if (!(eps > 0.0)) throw InvalidInputError("eps must be positive");
    VectorXd grad(at.coefficients().size());
    parallel_for(grad.size(), threads, [&](long i) {
        SkewParams probe = at;
        probe.coefficients()[i] = at.coefficients()[i] + eps;
        const double up = loss(probe);
        probe.coefficients()[i] = at.coefficients()[i] - eps;
        const double down = loss(probe);
        grad[i] = (up - down) / (2.0 * eps);
    });
    return grad;
}

/// Plain gradient descent on the skew coefficients with FD gradients.
/// Deliberately capped at d <= 8: each gradient costs d(d-1) full runs.
inline FdTrainResult fd_train_shared_R(const MatrixXd& X, const VectorXd& labels,
                                       std::shared_ptr<const StructuredDesign> design,
                                       const Penalty& penalty, long T, double step_size,
                                       long iters, double eps = 1e-4, long threads = 1) {
    if (!design) throw InvalidInputError("null design");
    if (design->dim() > 8) throw ScaleLimitError("finite-difference training is capped at d <= 8");
    if (iters < 0) throw InvalidInputError("iters must be >= 0");
    const auto loss = make_shared_rotation_loss(X, labels, design, penalty, T);

    FdTrainResult result{SkewParams(design->dim()), {}};
    result.loss_trace.reserve(static_cast<std::size_t>(iters) + 1);
    result.loss_trace.push_back(loss(result.params));
    for (long it = 0; it < iters; ++it) {
        if (step_size != 0.0) {
            const VectorXd grad = fd_gradient(loss, result.params, eps, threads);
            result.params.coefficients() -= step_size * grad;
        }
        result.loss_trace.push_back(loss(result.params));
    }
    return result;
}

}  // namespace nok
