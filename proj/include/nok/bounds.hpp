#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "nok/design.hpp"
#include "nok/errors.hpp"

namespace nok {

/// Constants feeding the Rademacher and generalization bounds. The module is
/// a pure calculator; nothing here is estimated from data.
struct BoundInputs {
    double lipschitz = 1.0;        // L of the loss in its first argument
    double weight_norm = 1.0;      // bound on the last-layer weight norm
    long samples = 1;              // N
    long depth = 1;                // T
    double coherence = 0.0;        // mu* of the last-layer features, in [0, 1]
    double input_frobenius = 0.0;  // ||X||_F
    double delta = 0.05;           // confidence level, in (0, 1)
    double empirical_risk = 0.0;   // in [0, 1]

    void validate() const {
        if (!(lipschitz >= 0.0) || !std::isfinite(lipschitz)) throw InvalidInputError("L must be >= 0");
        if (!(weight_norm >= 0.0) || !std::isfinite(weight_norm)) throw InvalidInputError("B_w must be >= 0");
        if (samples < 1) throw InvalidInputError("N must be >= 1");
        if (depth < 0) throw InvalidInputError("T must be >= 0");
        if (!(coherence >= 0.0 && coherence <= 1.0)) throw InvalidInputError("mu* must lie in [0, 1]");
        if (!(input_frobenius >= 0.0) || !std::isfinite(input_frobenius))
            throw InvalidInputError("||X||_F must be >= 0");
        if (!(delta > 0.0 && delta < 1.0)) throw InvalidInputError("delta must lie in (0, 1)");
        if (!(empirical_risk >= 0.0 && empirical_risk <= 1.0))
            throw InvalidInputError("empirical risk must lie in [0, 1]");
    }
};

/// Coherence of a feature embedding: the largest absolute cosine between
/// distinct columns. One column reads as perfectly spread (0).
inline double embedding_coherence(const MatrixXd& features) { return mutual_coherence(features); }

/// L * B_w * sqrt(((N-1) mu* + 1) T) / N * ||X||_F.
inline double rademacher_bound(const BoundInputs& in) {
    in.validate();
    const double N = static_cast<double>(in.samples);
    const double inside = ((N - 1.0) * in.coherence + 1.0) * static_cast<double>(in.depth);
    return in.lipschitz * in.weight_norm * std::sqrt(inside) / N * in.input_frobenius;
}

/// empirical risk + Rademacher term + sqrt(8 ln(2/delta) / N). Unclipped;
/// the sum may exceed 1 and is reported raw.
inline double generalization_bound(const BoundInputs& in) {
    in.validate();
    const double N = static_cast<double>(in.samples);
    const double confidence = std::sqrt(8.0 * std::log(2.0 / in.delta) / N);
    return in.empirical_risk + rademacher_bound(in) + confidence;
}

}  // namespace nok
