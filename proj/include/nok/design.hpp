#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include "nok/errors.hpp"
#include "nok/fft.hpp"

namespace nok {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Modular arithmetic
// ---------------------------------------------------------------------------

inline bool is_prime(long n) {
    if (n < 2) return false;
    if (n < 4) return true;
    if (n % 2 == 0) return false;
    for (long p = 3; p * p <= n; p += 2)
        if (n % p == 0) return false;
    return true;
}

inline long pow_mod(long base, long exp, long mod) {
    unsigned __int128 acc = 1;
    unsigned __int128 b = static_cast<unsigned long>(((base % mod) + mod) % mod);
    while (exp > 0) {
        if (exp & 1) acc = (acc * b) % static_cast<unsigned long>(mod);
        b = (b * b) % static_cast<unsigned long>(mod);
        exp >>= 1;
    }
    return static_cast<long>(acc);
}

inline std::vector<long> distinct_prime_factors(long n) {
    std::vector<long> out;
    for (long p = 2; p * p <= n; p += (p == 2 ? 1 : 2)) {
        if (n % p == 0) {
            out.push_back(p);
            while (n % p == 0) n /= p;
        }
    }
    if (n > 1) out.push_back(n);
    return out;
}

/// Smallest g >= 2 whose multiplicative order modulo prime n is n-1.
inline long find_primitive_root(long n) {
    if (n < 3 || !is_prime(n)) throw InvalidInputError("n must be prime and >= 3");
    const std::vector<long> factors = distinct_prime_factors(n - 1);
    for (long g = 2; g < n; ++g) {
        bool primitive = true;
        for (long p : factors) {
            if (pow_mod(g, (n - 1) / p, n) == 1) {
                primitive = false;
                break;
            }
        }
        if (primitive) return g;
    }
    throw IntegrityError("no primitive root found (unreachable for prime n)");
}

/// Index set {g^0, g^((n-1)/m), ..., g^((m-1)(n-1)/m)} mod n, sorted.
/// This is the order-m subgroup of the multiplicative group mod n.
inline std::vector<long> build_index_set(long n, long m) {
    if (m < 1) throw InvalidInputError("m must be positive");
    if (!is_prime(n) || n < 3) throw InvalidInputError("n must be prime");
    if ((n - 1) % m != 0) throw InvalidInputError("m must divide n-1");
    const long g = find_primitive_root(n);
    std::vector<long> lambda(static_cast<std::size_t>(m));
    for (long j = 0; j < m; ++j) lambda[static_cast<std::size_t>(j)] = pow_mod(g, j * (n - 1) / m, n);
    std::sort(lambda.begin(), lambda.end());
    if (std::adjacent_find(lambda.begin(), lambda.end()) != lambda.end())
        throw IntegrityError("index set has repeated elements");
    return lambda;
}

// ---------------------------------------------------------------------------
// Rotations
// ---------------------------------------------------------------------------

/// An orthogonal d x d matrix, validated on construction.
class RotationState {
  public:
    explicit RotationState(MatrixXd R) : R_(std::move(R)) {
        if (R_.rows() != R_.cols()) throw InvalidInputError("rotation must be square");
        const auto I = MatrixXd::Identity(R_.rows(), R_.cols());
        if ((R_.transpose() * R_ - I).norm() > 1e-10 || (R_ * R_.transpose() - I).norm() > 1e-10)
            throw InvalidInputError("matrix is not orthogonal to 1e-10");
    }

    static RotationState identity(Eigen::Index d) { return RotationState(MatrixXd::Identity(d, d)); }

    const MatrixXd& matrix() const { return R_; }
    Eigen::Index dim() const { return R_.rows(); }

  private:
    MatrixXd R_;
};

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// signs of R's diagonal fixed. May have determinant -1.
inline MatrixXd haar_orthogonal(Eigen::Index d, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    MatrixXd A(d, d);
    for (Eigen::Index j = 0; j < d; ++j)
        for (Eigen::Index i = 0; i < d; ++i) A(i, j) = gauss(rng);
    Eigen::HouseholderQR<MatrixXd> qr(A);
    MatrixXd Q = qr.householderQ();
    const MatrixXd R = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index i = 0; i < d; ++i)
        if (R(i, i) < 0) Q.col(i) = -Q.col(i);
    return Q;
}

/// Complex diagonal phase rotation plus a row permutation. Identity by default.
struct DiagonalRotation {
    VectorXd phases;                       // m angles in [0, 2*pi)
    std::vector<Eigen::Index> permutation; // output row i reads input row permutation[i]

    static DiagonalRotation identity(long m) {
        DiagonalRotation rot;
        rot.phases = VectorXd::Zero(m);
        rot.permutation.resize(static_cast<std::size_t>(2 * m));
        std::iota(rot.permutation.begin(), rot.permutation.end(), Eigen::Index(0));
        return rot;
    }

    static DiagonalRotation random(long m, std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> uni(0.0, 2.0 * std::numbers::pi);
        DiagonalRotation rot = identity(m);
        for (long j = 0; j < m; ++j) rot.phases[j] = uni(rng);
        std::shuffle(rot.permutation.begin(), rot.permutation.end(), rng);
        return rot;
    }

    void validate(long m) const {
        if (phases.size() != m) throw InvalidInputError("phase count must equal m");
        if (!phases.allFinite()) throw InvalidInputError("phases must be finite");
        std::vector<bool> seen(static_cast<std::size_t>(2 * m), false);
        if (permutation.size() != static_cast<std::size_t>(2 * m))
            throw InvalidInputError("permutation must act on {1,...,d}");
        for (Eigen::Index p : permutation) {
            if (p < 0 || p >= 2 * m || seen[static_cast<std::size_t>(p)])
                throw InvalidInputError("permutation is not a bijection");
            seen[static_cast<std::size_t>(p)] = true;
        }
    }
};

enum class MatvecMode { Auto, Naive, Fast };

// ---------------------------------------------------------------------------
// Structured design
// ---------------------------------------------------------------------------

/// The d x N sampling matrix B built from m rows of an n-point discrete
/// Fourier matrix, stacked as [[Re F, -Im F], [Im F, Re F]] and scaled so
/// every column has unit norm and B B^T = (n/m) I_d. Immutable.
class StructuredDesign {
  public:
    StructuredDesign(long n, long m)
        : StructuredDesign(n, m, DiagonalRotation::identity(m), std::nullopt) {}

    StructuredDesign(long n, long m, DiagonalRotation rotation, std::optional<std::uint64_t> seed)
        : n_(n),
          m_(m),
          lambda_(build_index_set(n, m)),
          rotation_(std::move(rotation)),
          seed_(seed),
          plan_(std::make_shared<detail::Dft>(static_cast<std::size_t>(n))) {
        rotation_.validate(m_);
        build_matrix();
        check_invariants();
    }

    long n() const { return n_; }
    long m() const { return m_; }
    long dim() const { return 2 * m_; }       // d
    long samples() const { return 2 * n_; }   // N
    const std::vector<long>& index_set() const { return lambda_; }
    const MatrixXd& matrix() const { return B_; }
    const DiagonalRotation& rotation() const { return rotation_; }
    std::optional<std::uint64_t> seed() const { return seed_; }

    bool use_fast_path(MatvecMode mode) const {
        switch (mode) {
            case MatvecMode::Naive: return false;
            case MatvecMode::Fast: return true;
            case MatvecMode::Auto: return n_ >= 64;
        }
        return false;
    }

    /// B^T v for v in R^d, via one length-n transform on the fast path.
    VectorXd bt_times(const VectorXd& v, MatvecMode mode = MatvecMode::Auto) const {
        if (v.size() != dim()) throw InvalidInputError("vector length must equal d");
        if (!use_fast_path(mode)) return B_.transpose() * v;
        const std::size_t un = static_cast<std::size_t>(n_);
        // Undo the row permutation, fold the two halves into complex values,
        // absorb the phases, and scatter onto the index set.
        VectorXd vt(dim());
        for (Eigen::Index i = 0; i < dim(); ++i) vt[rotation_.permutation[static_cast<std::size_t>(i)]] = v[i];
        std::vector<detail::cplx> c(un, detail::cplx(0, 0));
        for (long i = 0; i < m_; ++i) {
            const detail::cplx u(vt[i], -vt[m_ + i]);
            const detail::cplx phase(std::cos(rotation_.phases[i]), std::sin(rotation_.phases[i]));
            c[static_cast<std::size_t>(lambda_[static_cast<std::size_t>(i)])] = u * phase;
        }
        const std::vector<detail::cplx> V = plan_->transform(c, +1);
        const double scale = 1.0 / std::sqrt(static_cast<double>(m_));
        VectorXd out(samples());
        for (long j = 0; j < n_; ++j) {
            const detail::cplx t = V[static_cast<std::size_t>((j + 1) % n_)];
            out[j] = scale * t.real();
            out[n_ + j] = -scale * t.imag();
        }
        return out;
    }

    /// B y for y in R^N, via one length-n transform on the fast path.
    VectorXd b_times(const VectorXd& y, MatvecMode mode = MatvecMode::Auto) const {
        if (y.size() != samples()) throw InvalidInputError("vector length must equal N");
        if (!use_fast_path(mode)) return B_ * y;
        const std::size_t un = static_cast<std::size_t>(n_);
        std::vector<detail::cplx> z(un);
        for (long j = 0; j < n_; ++j)
            z[static_cast<std::size_t>((j + 1) % n_)] = detail::cplx(y[j], y[n_ + j]);
        const std::vector<detail::cplx> G = plan_->transform(z, +1);
        const double scale = 1.0 / std::sqrt(static_cast<double>(m_));
        VectorXd pre(dim());
        for (long i = 0; i < m_; ++i) {
            const detail::cplx phase(std::cos(rotation_.phases[i]), std::sin(rotation_.phases[i]));
            const detail::cplx t = phase * G[static_cast<std::size_t>(lambda_[static_cast<std::size_t>(i)])];
            pre[i] = scale * t.real();
            pre[m_ + i] = scale * t.imag();
        }
        VectorXd out(dim());
        for (Eigen::Index i = 0; i < dim(); ++i) out[i] = pre[rotation_.permutation[static_cast<std::size_t>(i)]];
        return out;
    }

  private:
    void build_matrix() {
        const long d = dim();
        const long N = samples();
        B_.resize(d, N);
        MatrixXd base(d, N);
        const double scale = 1.0 / std::sqrt(static_cast<double>(m_));
        for (long i = 0; i < m_; ++i) {
            const double k = static_cast<double>(lambda_[static_cast<std::size_t>(i)]);
            const double theta = rotation_.phases[i];
            for (long j = 0; j < n_; ++j) {
                // Column index in the Fourier block runs 1..n.
                const double ang = theta + 2.0 * std::numbers::pi * k * static_cast<double>(j + 1) / static_cast<double>(n_);
                const double c = scale * std::cos(ang);
                const double s = scale * std::sin(ang);
                base(i, j) = c;
                base(i, n_ + j) = -s;
                base(m_ + i, j) = s;
                base(m_ + i, n_ + j) = c;
            }
        }
        for (long i = 0; i < d; ++i) B_.row(i) = base.row(rotation_.permutation[static_cast<std::size_t>(i)]);
    }

    void check_invariants() const {
        for (Eigen::Index j = 0; j < B_.cols(); ++j)
            if (std::abs(B_.col(j).norm() - 1.0) > 1e-10)
                throw IntegrityError("design column is not unit norm");
        const double ratio = static_cast<double>(n_) / static_cast<double>(m_);
        const MatrixXd gram = B_ * B_.transpose();
        if ((gram - ratio * MatrixXd::Identity(dim(), dim())).norm() > 1e-10)
            throw IntegrityError("design rows are not orthogonal");
    }

    long n_;
    long m_;
    std::vector<long> lambda_;
    DiagonalRotation rotation_;
    std::optional<std::uint64_t> seed_;
    std::shared_ptr<const detail::Dft> plan_;
    MatrixXd B_;
};

inline StructuredDesign build_design(long n, long m) { return StructuredDesign(n, m); }

/// Phase-rotate the Fourier rows and permute the real rows. Preserves the
/// full column Gram matrix B^T B and every design invariant.
inline StructuredDesign randomize_design(const StructuredDesign& design, const DiagonalRotation& rotation) {
    // An explicit rotation is not reproducible from a seed; drop any seed tag.
    return StructuredDesign(design.n(), design.m(), rotation, std::nullopt);
}

inline StructuredDesign randomize_design(const StructuredDesign& design, std::uint64_t seed) {
    return StructuredDesign(design.n(), design.m(), DiagonalRotation::random(design.m(), seed), seed);
}

// ---------------------------------------------------------------------------
// Coherence and the assembled operator
// ---------------------------------------------------------------------------

/// max_{i != j} |<col_i, col_j>| / (||col_i|| ||col_j||); 0 for one column.
inline double mutual_coherence(const MatrixXd& M) {
    if (M.cols() == 0) throw InvalidInputError("matrix has no columns");
    MatrixXd unit(M.rows(), M.cols());
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
        const double norm = M.col(j).norm();
        if (norm <= 0.0) throw InvalidInputError("column " + std::to_string(j + 1) + " has zero norm");
        unit.col(j) = M.col(j) / norm;
    }
    if (M.cols() == 1) return 0.0;
    double mu = 0.0;
    for (Eigen::Index i = 0; i < M.cols(); ++i)
        for (Eigen::Index j = i + 1; j < M.cols(); ++j)
            mu = std::max(mu, std::abs(unit.col(i).dot(unit.col(j))));
    return std::min(mu, 1.0);  // cosines; roundoff can spill past 1 only by eps
}

/// Coherence bound sqrt(n)/m of the closed-form construction.
inline double coherence_bound(const StructuredDesign& design) {
    return std::sqrt(static_cast<double>(design.n())) / static_cast<double>(design.m());
}

/// gain * W^T x with W = sqrt(d) R^T B.
inline VectorXd apply_design(const StructuredDesign& design, const RotationState& R, double gain,
                             const VectorXd& x, MatvecMode mode = MatvecMode::Auto) {
    if (R.dim() != design.dim()) throw InvalidInputError("rotation dimension must equal d");
    if (x.size() != design.dim()) throw InvalidInputError("input length must equal d");
    const double root_d = std::sqrt(static_cast<double>(design.dim()));
    return design.bt_times(R.matrix() * x, mode) * (gain * root_d);
}

/// gain * W y (the adjoint direction), W = sqrt(d) R^T B.
inline VectorXd apply_design_adjoint(const StructuredDesign& design, const RotationState& R, double gain,
                                     const VectorXd& y, MatvecMode mode = MatvecMode::Auto) {
    if (R.dim() != design.dim()) throw InvalidInputError("rotation dimension must equal d");
    if (y.size() != design.samples()) throw InvalidInputError("input length must equal N");
    const double root_d = std::sqrt(static_cast<double>(design.dim()));
    return R.matrix().transpose() * design.b_times(y, mode) * (gain * root_d);
}

}  // namespace nok
