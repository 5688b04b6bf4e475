#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <vector>

#include "nok/engine.hpp"
#include "nok/errors.hpp"
#include "nok/parallel.hpp"

namespace nok {

/// y_T(x): the T-th iterate, the explicit feature map of the finite kernel
/// k_{T,N}(x, x') = (1/N) <y_T(x), y_T(x')>.
inline VectorXd feature_map(const NokConfig& cfg, const VectorXd& x) {
    cfg.validate();
    VectorXd y = VectorXd::Zero(cfg.design->samples());
    for (long t = 0; t < cfg.steps; ++t) {
        y = step(cfg, x, y, t);
        if (!y.allFinite()) throw NumericOverflowError("feature iterate became non-finite", t + 1);
    }
    return y;
}

inline double kernel_value(const NokConfig& cfg, const VectorXd& x, const VectorXd& x_prime) {
    const VectorXd a = feature_map(cfg, x);
    const VectorXd b = feature_map(cfg, x_prime);
    return a.dot(b) / static_cast<double>(cfg.design->samples());
}

struct GramMatrix {
    MatrixXd K;               // S x S, exactly symmetric
    MatrixXd features;        // N x S cache; empty if the budget was exceeded
    double min_eigenvalue = 0.0;
    bool psd_ok = false;
    std::uint64_t config_fingerprint = 0;
};

/// Pairwise kernel matrix over the columns of X. Features are cached when
/// S*N doubles fit the budget, otherwise recomputed per pair; either way the
/// upper triangle is computed once and mirrored.
inline GramMatrix gram(const NokConfig& cfg, const MatrixXd& X, long threads = 1,
                       std::size_t cache_budget_bytes = std::size_t(256) << 20) {
    cfg.validate();
    if (X.rows() != cfg.design->dim()) throw InvalidInputError("data rows must equal d");
    if (X.cols() < 1) throw InvalidInputError("need at least one sample");
    const long S = X.cols();
    const long N = cfg.design->samples();
    const double dN = static_cast<double>(N);

    GramMatrix result;
    result.config_fingerprint = cfg.fingerprint();
    result.K.resize(S, S);

    const bool cache = static_cast<std::size_t>(S) * static_cast<std::size_t>(N) * sizeof(double) <=
                       cache_budget_bytes;
    if (cache) {
        result.features.resize(N, S);
        parallel_for(S, threads, [&](long j) { result.features.col(j) = feature_map(cfg, X.col(j)); });
        parallel_for(S, threads, [&](long i) {
            for (long j = i; j < S; ++j)
                result.K(i, j) = result.features.col(i).dot(result.features.col(j)) / dN;
        });
    } else {
        parallel_for(S, threads, [&](long i) {
            const VectorXd fi = feature_map(cfg, X.col(i));
            for (long j = i; j < S; ++j)
                result.K(i, j) = fi.dot(feature_map(cfg, X.col(j))) / dN;
        });
    }
    for (long i = 0; i < S; ++i)
        for (long j = 0; j < i; ++j) result.K(i, j) = result.K(j, i);

    const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(result.K, Eigen::EigenvaluesOnly);
    result.min_eigenvalue = eig.eigenvalues()(0);
    const double psd_tol = 1e-8 * std::max(1.0, result.K.diagonal().maxCoeff());
    result.psd_ok = result.min_eigenvalue >= -psd_tol;
    if (!result.psd_ok)
        throw IntegrityError("Gram matrix of explicit features is not PSD within tolerance");
    return result;
}

// ---------------------------------------------------------------------------
// Monte-Carlo first-layer oracle
// ---------------------------------------------------------------------------

struct McEstimate {
    double value = 0.0;
    double std_error = 0.0;
    long samples = 0;
};

/// E_w[h(w^T x) h(w^T x')] with w uniform on sqrt(d) * S^{d-1}, estimated by
/// normalizing Gaussian draws. Returns the mean and its standard error.
inline McEstimate mc_first_layer_kernel(const VectorXd& x, const VectorXd& x_prime,
                                        const Penalty& penalty, long samples, std::uint64_t seed) {
    if (x.size() != x_prime.size()) throw InvalidInputError("inputs must share a dimension");
    if (samples < 1000) throw InvalidInputError("need at least 1e3 samples");
    penalty.validate();
    if (!penalty.is_scalar()) throw UnsupportedOperationError("needs a scalar proximal operator");
    const Eigen::Index d = x.size();
    const double root_d = std::sqrt(static_cast<double>(d));

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    double sum = 0.0;
    double sum_sq = 0.0;
    VectorXd w(d);
    for (long s = 0; s < samples; ++s) {
        for (Eigen::Index i = 0; i < d; ++i) w[i] = gauss(rng);
        w *= root_d / w.norm();
        const double v = prox(penalty, w.dot(x)) * prox(penalty, w.dot(x_prime));
        sum += v;
        sum_sq += v * v;
    }
    McEstimate est;
    est.samples = samples;
    est.value = sum / static_cast<double>(samples);
    const double var =
        std::max(0.0, (sum_sq - sum * sum / static_cast<double>(samples)) / static_cast<double>(samples - 1));
    est.std_error = std::sqrt(var / static_cast<double>(samples));
    return est;
}

/// First-layer kernel from block-wise randomly rotated structured samples:
/// the average over `blocks` independent Haar rotations R_k of
/// (1/N) sum_j h(w_j^T x) h(w_j^T x') with w_j the columns of sqrt(d) R_k^T B.
/// The rotations make the points marginally uniform on sqrt(d) S^{d-1}, the
/// premise under which the first-layer kernel converges to the spherical
/// expectation; the deterministic block alone carries a torus bias.
inline double rotated_first_layer_kernel(const StructuredDesign& block, const Penalty& penalty,
                                         const VectorXd& x, const VectorXd& x_prime, long blocks,
                                         std::uint64_t seed) {
    penalty.validate();
    if (!penalty.is_scalar()) throw UnsupportedOperationError("needs a scalar proximal operator");
    if (x.size() != block.dim() || x_prime.size() != block.dim())
        throw InvalidInputError("input length must equal d");
    if (blocks < 1) throw InvalidInputError("need at least one block");
    const double root_d = std::sqrt(static_cast<double>(block.dim()));
    std::mt19937_64 rng(seed);
    double acc = 0.0;
    for (long k = 0; k < blocks; ++k) {
        const MatrixXd R = haar_orthogonal(block.dim(), rng);
        const VectorXd u = root_d * block.bt_times(R * x);
        const VectorXd v = root_d * block.bt_times(R * x_prime);
        double s = 0.0;
        for (Eigen::Index j = 0; j < u.size(); ++j) s += prox(penalty, u[j]) * prox(penalty, v[j]);
        acc += s / static_cast<double>(block.samples());
    }
    return acc / static_cast<double>(blocks);
}

// ---------------------------------------------------------------------------
// Kernel ridge regression
// ---------------------------------------------------------------------------

struct RidgeModel {
    VectorXd alpha;
    double ridge = 0.0;
    MatrixXd train_features;  // N x S
    double residual = 0.0;    // relative normal-equation residual
    std::uint64_t config_fingerprint = 0;
};

/// Solve (K + ridge * S * I) alpha = labels. The per-sample ridge scaling
/// keeps the strength comparable across dataset sizes.
inline RidgeModel ridge_fit(const GramMatrix& gram, const VectorXd& labels, double ridge) {
    const long S = gram.K.rows();
    if (labels.size() != S) throw InvalidInputError("one label per sample");
    if (ridge < 0.0 || !std::isfinite(ridge)) throw InvalidInputError("ridge must be >= 0");
    if (gram.features.size() == 0)
        throw InvalidInputError("gram was built without a feature cache; predictions need features");

    const MatrixXd A = gram.K + ridge * static_cast<double>(S) * MatrixXd::Identity(S, S);
    RidgeModel model;
    model.ridge = ridge;
    model.train_features = gram.features;
    model.config_fingerprint = gram.config_fingerprint;
    model.alpha = A.ldlt().solve(labels);

    const double denom = std::max(labels.norm(), 1e-300);
    model.residual = (A * model.alpha - labels).norm() / denom;
    if (model.residual > 1e-8) {
        if (ridge == 0.0) throw SingularInputError("kernel system is singular at ridge = 0");
        throw IntegrityError("ridge solve failed to meet the residual bound");
    }
    return model;
}

inline double predict(const RidgeModel& model, const NokConfig& cfg, const VectorXd& x) {
    if (model.config_fingerprint != cfg.fingerprint())
        throw InvalidInputError("model was fitted under a different config");
    const VectorXd y = feature_map(cfg, x);
    const VectorXd k = model.train_features.transpose() * y / static_cast<double>(cfg.design->samples());
    return k.dot(model.alpha);
}

}  // namespace nok
