// Run the T-step proximal iteration on one random input and print the
// objective trace together with the per-step descent certificate.

#include <cstdio>
#include <memory>
#include <random>

#include "nok/nok.hpp"

int main() {
    auto design = std::make_shared<const nok::StructuredDesign>(29, 4);  // d = 8, N = 58
    nok::NokConfig cfg = nok::NokConfig::make(design, nok::Penalty::l1(0.1), 25);

    std::mt19937_64 rng(2024);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd x(design->dim());
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = gauss(rng);
    x /= x.norm();

    const nok::Trajectory traj = nok::forward(cfg, x);
    const nok::DescentReport rep = nok::verify_monotonic(cfg, traj);

    std::printf("step  objective        drop          certificate slack\n");
    for (long t = 0; t < rep.steps; ++t) {
        std::printf("%4ld  %.12f  %.3e  %+.3e\n", t + 1,
                    traj.objectives[static_cast<std::size_t>(t) + 1],
                    traj.objectives[static_cast<std::size_t>(t)] -
                        traj.objectives[static_cast<std::size_t>(t) + 1],
                    rep.violations[static_cast<std::size_t>(t)]);
    }
    std::printf("certificate %s (max violation %.3e, tolerance %.3e)\n",
                rep.passed ? "PASSED" : "FAILED", rep.max_violation, rep.tolerance);

    const long nonzero = (traj.iterates.back().array() != 0.0).count();
    std::printf("final code: %ld of %ld coefficients nonzero\n", nonzero, design->samples());
    return rep.passed ? 0 : 1;
}
