// Fit kernel ridge regression on a toy two-cluster problem using the
// T-step feature map, then classify held-out points by the sign of the
// prediction.

#include <cstdio>
#include <memory>
#include <random>

#include "nok/nok.hpp"

int main() {
    auto design = std::make_shared<const nok::StructuredDesign>(13, 4);  // d = 8
    nok::NokConfig cfg = nok::NokConfig::make(design, nok::Penalty::l1(0.05), 3);

    std::mt19937_64 rng(7);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const auto draw = [&](double center_sign) {
        Eigen::VectorXd v(8);
        for (Eigen::Index i = 0; i < 8; ++i) v[i] = 0.15 * gauss(rng);
        v[0] += center_sign;
        return v;
    };

    Eigen::MatrixXd X(8, 30);
    Eigen::VectorXd labels(30);
    for (int i = 0; i < 30; ++i) {
        const double s = i % 2 == 0 ? 1.0 : -1.0;
        X.col(i) = draw(s);
        labels[i] = s;
    }

    const nok::GramMatrix g = nok::gram(cfg, X);
    std::printf("gram: %ldx%ld, min eigenvalue %.3e, PSD %s\n", long(g.K.rows()), long(g.K.cols()),
                g.min_eigenvalue, g.psd_ok ? "yes" : "no");

    const nok::RidgeModel model = nok::ridge_fit(g, labels, 1e-3);
    std::printf("ridge solve residual: %.3e\n", model.residual);

    int correct = 0;
    const int held_out = 40;
    for (int i = 0; i < held_out; ++i) {
        const double s = i % 2 == 0 ? 1.0 : -1.0;
        const double pred = nok::predict(model, cfg, draw(s));
        if (pred * s > 0.0) ++correct;
    }
    std::printf("held-out accuracy: %d/%d\n", correct, held_out);
    return correct >= held_out * 9 / 10 ? 0 : 1;
}
