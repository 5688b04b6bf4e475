#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "nok/errors.hpp"

namespace nok {

using Eigen::VectorXd;

enum class PenaltyFamily { L0, L1, Mcp, CappedL1, Scad, Mcp0, IndicatorNonneg, TopK };

inline std::string family_name(PenaltyFamily f) {
    switch (f) {
        case PenaltyFamily::L0: return "L0";
        case PenaltyFamily::L1: return "L1";
        case PenaltyFamily::Mcp: return "MCP";
        case PenaltyFamily::CappedL1: return "CappedL1";
        case PenaltyFamily::Scad: return "SCAD";
        case PenaltyFamily::Mcp0: return "MCP0";
        case PenaltyFamily::IndicatorNonneg: return "IndicatorNonneg";
        case PenaltyFamily::TopK: return "TopK";
    }
    throw IntegrityError("unknown penalty family");
}

inline PenaltyFamily family_from_name(const std::string& name) {
    if (name == "L0") return PenaltyFamily::L0;
    if (name == "L1") return PenaltyFamily::L1;
    if (name == "MCP") return PenaltyFamily::Mcp;
    if (name == "CappedL1") return PenaltyFamily::CappedL1;
    if (name == "SCAD") return PenaltyFamily::Scad;
    if (name == "MCP0") return PenaltyFamily::Mcp0;
    if (name == "IndicatorNonneg") return PenaltyFamily::IndicatorNonneg;
    if (name == "TopK") return PenaltyFamily::TopK;
    throw InvalidInputError("unknown penalty family '" + name + "'");
}

/// A regularizer phi_lambda paired with its proximal operator h.
struct Penalty {
    PenaltyFamily family = PenaltyFamily::L1;
    double lambda = 0.0;
    double gamma = 0.0;  // MCP: >1, CappedL1: >0, SCAD: >2
    long k = 0;          // TopK sparsity

    static Penalty l0(double lambda) { return checked({PenaltyFamily::L0, lambda, 0.0, 0}); }
    static Penalty l1(double lambda) { return checked({PenaltyFamily::L1, lambda, 0.0, 0}); }
    static Penalty mcp(double lambda, double gamma) { return checked({PenaltyFamily::Mcp, lambda, gamma, 0}); }
    static Penalty capped_l1(double lambda, double gamma) { return checked({PenaltyFamily::CappedL1, lambda, gamma, 0}); }
    static Penalty scad(double lambda, double gamma) { return checked({PenaltyFamily::Scad, lambda, gamma, 0}); }
    static Penalty mcp0(double lambda) { return checked({PenaltyFamily::Mcp0, lambda, 0.0, 0}); }
    static Penalty nonneg() { return checked({PenaltyFamily::IndicatorNonneg, 0.0, 0.0, 0}); }
    static Penalty top_k(long k) { return checked({PenaltyFamily::TopK, 0.0, 0.0, k}); }

    bool is_scalar() const { return family != PenaltyFamily::TopK; }
    bool is_convex() const {
        return family == PenaltyFamily::L1 || family == PenaltyFamily::IndicatorNonneg;
    }

    void validate() const {
        if (!std::isfinite(lambda) || lambda < 0.0) throw InvalidInputError("lambda must be >= 0");
        switch (family) {
            case PenaltyFamily::Mcp:
                if (!(gamma > 1.0)) throw InvalidInputError("MCP requires gamma > 1");
                break;
            case PenaltyFamily::CappedL1:
                if (!(gamma > 0.0)) throw InvalidInputError("CappedL1 requires gamma > 0");
                break;
            case PenaltyFamily::Scad:
                if (!(gamma > 2.0)) throw InvalidInputError("SCAD requires gamma > 2");
                break;
            case PenaltyFamily::TopK:
                if (k < 1) throw InvalidInputError("TopK requires k >= 1");
                break;
            default: break;
        }
    }

  private:
    static Penalty checked(Penalty p) {
        p.validate();
        return p;
    }
};

// ---------------------------------------------------------------------------
// phi_lambda
// ---------------------------------------------------------------------------

/// Scalar penalty value. MCP and SCAD use the closed forms of their
/// integral definitions; IndicatorNonneg returns +inf below zero.
inline double penalty_value(const Penalty& p, double z) {
    p.validate();
    if (!std::isfinite(z)) throw InvalidInputError("penalty argument must be finite");
    const double az = std::abs(z);
    const double lam = p.lambda;
    switch (p.family) {
        case PenaltyFamily::L0:
            return z == 0.0 ? 0.0 : lam;
        case PenaltyFamily::L1:
            return lam * az;
        case PenaltyFamily::Mcp:
            // integral of lam*max(0, 1 - x/(gamma*lam)) from 0 to |z|
            if (az <= p.gamma * lam) return lam * az - z * z / (2.0 * p.gamma);
            return p.gamma * lam * lam / 2.0;
        case PenaltyFamily::CappedL1:
            return lam * std::min(az, p.gamma);
        case PenaltyFamily::Scad: {
            // integral of lam*min(1, max(0, gamma*lam - x)/((gamma-1)*lam))
            if (az <= lam) return lam * az;
            if (az <= p.gamma * lam)
                return (2.0 * p.gamma * lam * az - z * z - lam * lam) / (2.0 * (p.gamma - 1.0));
            return lam * lam * (p.gamma + 1.0) / 2.0;
        }
        case PenaltyFamily::Mcp0: {
            const double t = std::max(std::sqrt(lam) - az, 0.0);
            return 0.5 * (lam - t * t);
        }
        case PenaltyFamily::IndicatorNonneg:
            return z < 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
        case PenaltyFamily::TopK:
            throw UnsupportedOperationError("TopK has no scalar penalty value");
    }
    throw IntegrityError("unknown penalty family");
}

/// Separable vector penalty; TopK reads as the k-sparsity indicator.
inline double penalty_value(const Penalty& p, const VectorXd& y) {
    if (p.family == PenaltyFamily::TopK) {
        p.validate();
        const long nnz = (y.array() != 0.0).count();
        return nnz <= p.k ? 0.0 : std::numeric_limits<double>::infinity();
    }
    double acc = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) acc += penalty_value(p, y[i]);
    return acc;
}

// ---------------------------------------------------------------------------
// h = prox_{phi_lambda}
// ---------------------------------------------------------------------------

inline double sign_of(double z) { return (z > 0.0) - (z < 0.0); }

inline double soft_threshold(double z, double lam) {
    return sign_of(z) * std::max(0.0, std::abs(z) - lam);
}

inline double prox(const Penalty& p, double z) {
    p.validate();
    if (!std::isfinite(z)) throw InvalidInputError("prox argument must be finite");
    const double az = std::abs(z);
    const double lam = p.lambda;
    switch (p.family) {
        case PenaltyFamily::L0:
            return az >= std::sqrt(2.0 * lam) ? z : 0.0;
        case PenaltyFamily::L1:
            return soft_threshold(z, lam);
        case PenaltyFamily::Mcp:
            if (az > p.gamma * lam) return z;
            if (az > lam) return sign_of(z) * (az - lam) / (1.0 - 1.0 / p.gamma);
            return 0.0;
        case PenaltyFamily::CappedL1: {
            const double x1 = sign_of(z) * std::max(az, p.gamma);
            const double x2 = sign_of(z) * std::min(p.gamma, std::max(0.0, az - lam));
            const auto q = [&](double x) {
                return 0.5 * (x - z) * (x - z) + lam * std::min(std::abs(x), p.gamma);
            };
            return q(x1) <= q(x2) ? x1 : x2;
        }
        case PenaltyFamily::Scad:
            if (az > p.gamma * lam) return z;
            if (az > 2.0 * lam) return ((p.gamma - 1.0) * z - sign_of(z) * p.gamma * lam) / (p.gamma - 2.0);
            return soft_threshold(z, lam);
        case PenaltyFamily::Mcp0:
            // set-valued at |z| = sqrt(lam); resolved toward the identity
            return az >= std::sqrt(lam) ? z : 0.0;
        case PenaltyFamily::IndicatorNonneg:
            return std::max(z, 0.0);
        case PenaltyFamily::TopK:
            throw UnsupportedOperationError("TopK prox is vector-level; use prox_topk");
    }
    throw IntegrityError("unknown penalty family");
}

/// Euclidean projection onto k-sparse vectors: keep the k entries of
/// largest magnitude, ties broken toward the lowest index.
inline VectorXd prox_topk(const VectorXd& z, long k) {
    const long N = z.size();
    if (k < 1 || k > N) throw InvalidInputError("k must lie in [1, N]");
    std::vector<Eigen::Index> order(static_cast<std::size_t>(N));
    std::iota(order.begin(), order.end(), Eigen::Index(0));
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        return std::abs(z[a]) > std::abs(z[b]);
    });
    VectorXd out = VectorXd::Zero(N);
    for (long i = 0; i < k; ++i) out[order[static_cast<std::size_t>(i)]] = z[order[static_cast<std::size_t>(i)]];
    return out;
}

inline VectorXd prox(const Penalty& p, const VectorXd& z) {
    if (p.family == PenaltyFamily::TopK) {
        p.validate();
        return prox_topk(z, p.k);
    }
    VectorXd out(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) out[i] = prox(p, z[i]);
    return out;
}

}  // namespace nok
