#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "nok/prox.hpp"

using namespace nok;

namespace {

// Grid-search oracle for argmin_x 0.5*(x-z)^2 + phi(x).
double grid_min_objective(const Penalty& p, double z, double step = 1e-3, double lo = -10.0,
                          double hi = 10.0) {
    double best = std::numeric_limits<double>::infinity();
    const long count = static_cast<long>(std::llround((hi - lo) / step));
    for (long i = 0; i <= count; ++i) {
        const double x = lo + static_cast<double>(i) * step;
        const double q = 0.5 * (x - z) * (x - z) + penalty_value(p, x);
        best = std::min(best, q);
    }
    return best;
}

double prox_objective(const Penalty& p, double z, double x) {
    return 0.5 * (x - z) * (x - z) + penalty_value(p, x);
}

// Composite Simpson rule.
double simpson(const std::function<double(double)>& f, double a, double b, long intervals = 20000) {
    if (intervals % 2 != 0) ++intervals;
    const double h = (b - a) / static_cast<double>(intervals);
    double acc = f(a) + f(b);
    for (long i = 1; i < intervals; ++i) acc += f(a + h * static_cast<double>(i)) * (i % 2 ? 4.0 : 2.0);
    return acc * h / 3.0;
}

std::vector<Penalty> table_families(double lambda) {
    return {Penalty::l0(lambda),           Penalty::l1(lambda),
            Penalty::mcp(lambda, 3.0),     Penalty::capped_l1(lambda, 1.0),
            Penalty::scad(lambda, 3.7),    Penalty::mcp0(lambda),
            Penalty::nonneg()};
}

}  // namespace

TEST_CASE("tabulated prox values") {
    CHECK(prox(Penalty::l1(0.5), 2.0) == Catch::Approx(1.5));
    CHECK(prox(Penalty::l1(0.5), -2.0) == Catch::Approx(-1.5));
    CHECK(prox(Penalty::l1(0.5), 0.3) == 0.0);

    // hard threshold at sqrt(2*lambda) = 2; the boundary keeps z
    CHECK(prox(Penalty::l0(2.0), 1.9) == 0.0);
    CHECK(prox(Penalty::l0(2.0), 2.1) == Catch::Approx(2.1));
    CHECK(prox(Penalty::l0(2.0), 2.0) == Catch::Approx(2.0));
    CHECK(prox(Penalty::l0(2.0), -2.0) == Catch::Approx(-2.0));

    CHECK(prox(Penalty::scad(1.0, 3.0), 2.5) == Catch::Approx(2.0));
    CHECK(prox(Penalty::mcp(1.0, 2.0), 1.5) == Catch::Approx(1.0));
    CHECK(prox(Penalty::nonneg(), -1.0) == 0.0);
    CHECK(prox(Penalty::nonneg(), 1.25) == Catch::Approx(1.25));

    // MCP0 keeps z on the |z| = sqrt(lambda) boundary
    CHECK(prox(Penalty::mcp0(4.0), 2.0) == Catch::Approx(2.0));
    CHECK(prox(Penalty::mcp0(4.0), 1.999) == 0.0);
}

TEST_CASE("penalty values") {
    CHECK(penalty_value(Penalty::l1(0.5), 2.0) == Catch::Approx(1.0));
    CHECK(penalty_value(Penalty::l0(1.0), 0.0) == 0.0);
    CHECK(penalty_value(Penalty::l0(1.0), 0.1) == Catch::Approx(1.0));
    CHECK(penalty_value(Penalty::mcp(1.0, 2.0), 5.0) == Catch::Approx(1.0));
    CHECK(std::isinf(penalty_value(Penalty::nonneg(), -1.0)));
    CHECK(penalty_value(Penalty::nonneg(), 0.0) == 0.0);
    CHECK_THROWS_AS(penalty_value(Penalty::top_k(2), 1.0), UnsupportedOperationError);
}

TEST_CASE("MCP and SCAD closed forms match numeric quadrature") {
    for (double lambda : {0.1, 0.5, 1.0, 2.0}) {
        for (double gamma : {1.5, 2.0, 3.0}) {
            const Penalty p = Penalty::mcp(lambda, gamma);
            const auto integrand = [&](double x) { return lambda * std::max(0.0, 1.0 - x / (gamma * lambda)); };
            for (double z : {0.3, 1.0, 2.5, 7.0}) {
                const double expect = simpson(integrand, 0.0, z);
                CHECK(penalty_value(p, z) == Catch::Approx(expect).margin(1e-6));
                CHECK(penalty_value(p, -z) == Catch::Approx(expect).margin(1e-6));
            }
        }
        for (double gamma : {2.5, 3.0, 3.7}) {
            const Penalty p = Penalty::scad(lambda, gamma);
            const auto integrand = [&](double x) {
                return lambda * std::min(1.0, std::max(0.0, gamma * lambda - x) / ((gamma - 1.0) * lambda));
            };
            for (double z : {0.3, 1.0, 2.5, 7.0}) {
                const double expect = simpson(integrand, 0.0, z);
                CHECK(penalty_value(p, z) == Catch::Approx(expect).margin(1e-6));
                CHECK(penalty_value(p, -z) == Catch::Approx(expect).margin(1e-6));
            }
        }
    }
}

TEST_CASE("every prox beats the grid oracle") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> uni(-5.0, 5.0);
    std::vector<Penalty> cells;
    for (double lambda : {0.1, 0.5, 1.0, 2.0}) {
        cells.push_back(Penalty::l0(lambda));
        cells.push_back(Penalty::l1(lambda));
        cells.push_back(Penalty::mcp(lambda, 1.5));
        cells.push_back(Penalty::mcp(lambda, 3.0));
        cells.push_back(Penalty::capped_l1(lambda, 0.5));
        cells.push_back(Penalty::capped_l1(lambda, 2.0));
        cells.push_back(Penalty::scad(lambda, 2.5));
        cells.push_back(Penalty::scad(lambda, 3.7));
        cells.push_back(Penalty::mcp0(lambda));
    }
    cells.push_back(Penalty::nonneg());
    for (const Penalty& p : cells) {
        for (int rep = 0; rep < 40; ++rep) {
            const double z = uni(rng);
            const double h = prox(p, z);
            REQUIRE(prox_objective(p, z, h) <= grid_min_objective(p, z) + 1e-8);
        }
    }
}

TEST_CASE("shrinkage and sign preservation") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> uni(-8.0, 8.0);
    for (double lambda : {0.1, 0.5, 1.0, 2.0}) {
        for (const Penalty& p : table_families(lambda)) {
            for (int rep = 0; rep < 1000; ++rep) {
                const double z = uni(rng);
                const double h = prox(p, z);
                REQUIRE(std::abs(h) <= std::abs(z) + 1e-15);
                if (p.family != PenaltyFamily::IndicatorNonneg) REQUIRE(h * z >= 0.0);
            }
        }
    }
}

TEST_CASE("top-k projection") {
    Eigen::VectorXd z(3);
    z << 3, -5, 1;
    Eigen::VectorXd kept = prox_topk(z, 1);
    CHECK(kept[0] == 0.0);
    CHECK(kept[1] == -5.0);
    CHECK(kept[2] == 0.0);

    // tie broken toward the lowest index
    Eigen::VectorXd tie(2);
    tie << 2, -2;
    Eigen::VectorXd kept_tie = prox_topk(tie, 1);
    CHECK(kept_tie[0] == 2.0);
    CHECK(kept_tie[1] == 0.0);

    CHECK((prox_topk(z, 3) - z).norm() == 0.0);
    CHECK_THROWS_AS(prox_topk(z, 0), InvalidInputError);
    CHECK_THROWS_AS(prox_topk(z, 4), InvalidInputError);
    CHECK_THROWS_AS(prox(Penalty::top_k(1), 0.5), UnsupportedOperationError);
}

TEST_CASE("top-k equals brute-force support enumeration") {
    std::mt19937_64 rng(57);
    std::normal_distribution<double> gauss(0.0, 2.0);
    for (int rep = 0; rep < 50; ++rep) {
        const long N = 4 + static_cast<long>(rep % 5);  // up to 8
        Eigen::VectorXd z(N);
        for (long i = 0; i < N; ++i) z[i] = gauss(rng);
        for (long k = 1; k <= N; ++k) {
            double best = std::numeric_limits<double>::infinity();
            for (long mask = 0; mask < (1L << N); ++mask) {
                if (__builtin_popcountll(static_cast<unsigned long long>(mask)) != k) continue;
                double dist = 0.0;
                for (long i = 0; i < N; ++i)
                    if (!(mask & (1L << i))) dist += z[i] * z[i];
                best = std::min(best, dist);
            }
            const Eigen::VectorXd y = prox_topk(z, k);
            CHECK((y - z).squaredNorm() == Catch::Approx(best).margin(1e-12));
            CHECK((y.array() != 0.0).count() <= k);
        }
    }
}

TEST_CASE("vector prox is the separable map") {
    Eigen::VectorXd z(4);
    z << -2.0, 0.3, 0.8, 5.0;
    const Eigen::VectorXd out = prox(Penalty::l1(0.5), z);
    for (Eigen::Index i = 0; i < z.size(); ++i)
        CHECK(out[i] == Catch::Approx(prox(Penalty::l1(0.5), z[i])));

    const double total = penalty_value(Penalty::l1(0.5), z);
    CHECK(total == Catch::Approx(0.5 * z.lpNorm<1>()));
}

TEST_CASE("every scalar family vanishes at zero") {
    for (double lambda : {0.0, 0.1, 1.0}) {
        for (const Penalty& p : table_families(lambda)) {
            CHECK(penalty_value(p, 0.0) == 0.0);
            CHECK(prox(p, 0.0) == 0.0);
        }
    }
}

TEST_CASE("penalty parameter validation") {
    CHECK_THROWS_AS(Penalty::mcp(1.0, 1.0), InvalidInputError);
    CHECK_THROWS_AS(Penalty::scad(1.0, 2.0), InvalidInputError);
    CHECK_THROWS_AS(Penalty::capped_l1(1.0, 0.0), InvalidInputError);
    CHECK_THROWS_AS(Penalty::l1(-0.1), InvalidInputError);
    CHECK_THROWS_AS(Penalty::top_k(0), InvalidInputError);
    CHECK(Penalty::l1(0.5).is_convex());
    CHECK(Penalty::nonneg().is_convex());
    CHECK_FALSE(Penalty::mcp(1.0, 3.0).is_convex());
    CHECK(family_from_name("SCAD") == PenaltyFamily::Scad);
    CHECK(family_name(PenaltyFamily::CappedL1) == "CappedL1");
    CHECK_THROWS_AS(family_from_name("bogus"), InvalidInputError);
}
