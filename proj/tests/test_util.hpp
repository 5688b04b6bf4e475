#pragma once

#include <Eigen/Dense>
#include <random>

namespace nok_test {

inline Eigen::MatrixXd random_gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd M(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) M(i, j) = gauss(rng);
    return M;
}

inline Eigen::VectorXd random_unit_vector(Eigen::Index d, std::mt19937_64& rng) {
    Eigen::VectorXd v = random_gaussian(d, 1, rng);
    return v / v.norm();
}

// Haar-distributed orthogonal matrix (may have determinant -1).
inline Eigen::MatrixXd random_orthogonal(Eigen::Index d, std::mt19937_64& rng) {
    Eigen::MatrixXd A = random_gaussian(d, d, rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
    Eigen::MatrixXd Q = qr.householderQ();
    Eigen::MatrixXd R = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index i = 0; i < d; ++i)
        if (R(i, i) < 0) Q.col(i) = -Q.col(i);
    return Q;
}

}  // namespace nok_test
