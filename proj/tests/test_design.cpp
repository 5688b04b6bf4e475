#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <set>

#include "nok/design.hpp"
#include "test_util.hpp"

using namespace nok;

namespace {

// Brute-force multiplicative order of g modulo n.
long order_mod(long g, long n) {
    long acc = g % n;
    long ord = 1;
    while (acc != 1) {
        acc = (acc * g) % n;
        ++ord;
        if (ord > n) return -1;
    }
    return ord;
}

long smallest_primitive_root_oracle(long n) {
    for (long g = 2; g < n; ++g)
        if (order_mod(g, n) == n - 1) return g;
    return -1;
}

}  // namespace

TEST_CASE("find_primitive_root matches the brute-force order oracle") {
    for (long n : {3L, 5L, 7L, 11L, 13L, 29L, 97L})
        CHECK(find_primitive_root(n) == smallest_primitive_root_oracle(n));
    CHECK(find_primitive_root(3) == 2);
    CHECK(find_primitive_root(7) == 3);
    CHECK(find_primitive_root(13) == 2);
    CHECK_THROWS_AS(find_primitive_root(12), InvalidInputError);
    CHECK_THROWS_AS(find_primitive_root(2), InvalidInputError);
    CHECK_THROWS_AS(find_primitive_root(1), InvalidInputError);
}

TEST_CASE("build_index_set produces the sorted subgroup") {
    CHECK(build_index_set(5, 2) == std::vector<long>{1, 4});
    CHECK(build_index_set(13, 4) == std::vector<long>{1, 5, 8, 12});
    CHECK(build_index_set(13, 12) == std::vector<long>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12});
    CHECK_THROWS_AS(build_index_set(13, 5), InvalidInputError);
    CHECK_THROWS_AS(build_index_set(12, 4), InvalidInputError);

    // Oracle: direct modular exponentiation of the smallest primitive root.
    for (auto [n, m] : std::vector<std::pair<long, long>>{{5, 2}, {13, 4}, {13, 6}, {29, 4}, {29, 14}}) {
        const long g = smallest_primitive_root_oracle(n);
        std::set<long> expect;
        for (long j = 0; j < m; ++j) expect.insert(pow_mod(g, j * (n - 1) / m, n));
        const auto lambda = build_index_set(n, m);
        CHECK(std::set<long>(lambda.begin(), lambda.end()) == expect);
        CHECK(std::is_sorted(lambda.begin(), lambda.end()));
        CHECK(static_cast<long>(lambda.size()) == m);
    }
}

TEST_CASE("build_design satisfies the structural invariants") {
    const StructuredDesign design = build_design(13, 4);
    CHECK(design.matrix().rows() == 8);
    CHECK(design.matrix().cols() == 26);
    for (Eigen::Index j = 0; j < design.matrix().cols(); ++j)
        CHECK(std::abs(design.matrix().col(j).norm() - 1.0) < 1e-10);
    const Eigen::MatrixXd gram = design.matrix() * design.matrix().transpose();
    CHECK((gram - (13.0 / 4.0) * Eigen::MatrixXd::Identity(8, 8)).norm() < 1e-10);

    const StructuredDesign small = build_design(3, 2);
    CHECK(small.matrix().rows() == 4);
    CHECK(small.matrix().cols() == 6);
    const Eigen::MatrixXd gram_small = small.matrix() * small.matrix().transpose();
    CHECK((gram_small - 1.5 * Eigen::MatrixXd::Identity(4, 4)).norm() < 1e-10);
}

TEST_CASE("mutual_coherence basics") {
    CHECK(mutual_coherence(Eigen::MatrixXd::Identity(4, 4)) == 0.0);

    Eigen::MatrixXd dup(3, 3);
    dup << 1, 1, 0, 2, 2, 1, 0, 0, 3;
    CHECK(mutual_coherence(dup) == Catch::Approx(1.0));

    Eigen::MatrixXd single(3, 1);
    single << 1, 2, 3;
    CHECK(mutual_coherence(single) == 0.0);

    Eigen::MatrixXd with_zero = Eigen::MatrixXd::Identity(3, 3);
    with_zero.col(1).setZero();
    CHECK_THROWS_AS(mutual_coherence(with_zero), InvalidInputError);

    const StructuredDesign design = build_design(13, 4);
    const double mu = mutual_coherence(design.matrix());
    CHECK(mu <= std::sqrt(13.0) / 4.0 + 1e-12);
    CHECK(mu >= 0.0);
}

TEST_CASE("coherence bound holds across the design grid") {
    for (auto [n, m] : std::vector<std::pair<long, long>>{{5, 2}, {13, 4}, {13, 6}, {29, 4}, {29, 14}}) {
        const StructuredDesign design = build_design(n, m);
        CHECK(mutual_coherence(design.matrix()) <= coherence_bound(design) + 1e-12);
    }
}

TEST_CASE("randomize_design preserves the column Gram matrix") {
    const StructuredDesign design = build_design(13, 4);

    SECTION("zero phases and identity permutation change nothing") {
        const StructuredDesign same = randomize_design(design, DiagonalRotation::identity(4));
        CHECK((same.matrix() - design.matrix()).norm() == 0.0);
    }

    SECTION("seeded randomization keeps B^T B and the invariants") {
        const Eigen::MatrixXd gram_before = design.matrix().transpose() * design.matrix();
        for (std::uint64_t seed : {1ULL, 42ULL, 777ULL}) {
            const StructuredDesign rand = randomize_design(design, seed);
            CHECK(rand.seed() == seed);
            const Eigen::MatrixXd gram_after = rand.matrix().transpose() * rand.matrix();
            CHECK((gram_after - gram_before).norm() < 1e-10);
            for (Eigen::Index j = 0; j < rand.matrix().cols(); ++j)
                CHECK(std::abs(rand.matrix().col(j).norm() - 1.0) < 1e-10);
            const Eigen::MatrixXd row_gram = rand.matrix() * rand.matrix().transpose();
            CHECK((row_gram - (13.0 / 4.0) * Eigen::MatrixXd::Identity(8, 8)).norm() < 1e-10);
        }
    }

    SECTION("same seed reproduces the same matrix") {
        const StructuredDesign a = randomize_design(design, 9001);
        const StructuredDesign b = randomize_design(design, 9001);
        CHECK((a.matrix() - b.matrix()).norm() == 0.0);
    }
}

TEST_CASE("apply_design agrees with the dense product") {
    std::mt19937_64 rng(31);
    const auto design = std::make_shared<StructuredDesign>(13, 4);
    const double root_d = std::sqrt(8.0);

    SECTION("zero input and gain linearity") {
        const RotationState I = RotationState::identity(8);
        CHECK(apply_design(*design, I, 1.0, Eigen::VectorXd::Zero(8)).norm() == 0.0);
        const Eigen::VectorXd x = nok_test::random_unit_vector(8, rng);
        const Eigen::VectorXd once = apply_design(*design, I, 1.0, x);
        const Eigen::VectorXd twice = apply_design(*design, I, 2.0, x);
        CHECK((twice - 2.0 * once).norm() < 1e-14);
    }

    SECTION("identity rotation matches explicit dense multiply") {
        const RotationState I = RotationState::identity(8);
        for (int rep = 0; rep < 10; ++rep) {
            const Eigen::VectorXd x = nok_test::random_unit_vector(8, rng);
            const Eigen::VectorXd expect = root_d * design->matrix().transpose() * x;
            CHECK((apply_design(*design, I, 1.0, x) - expect).norm() < 1e-12);
        }
    }

    SECTION("rotated design matches W = sqrt(d) R^T B") {
        const RotationState R(nok_test::random_orthogonal(8, rng));
        const Eigen::MatrixXd W = root_d * R.matrix().transpose() * design->matrix();
        const Eigen::VectorXd x = nok_test::random_unit_vector(8, rng);
        CHECK((apply_design(*design, R, 1.0, x) - W.transpose() * x).norm() < 1e-12);
        const Eigen::VectorXd y = nok_test::random_gaussian(26, 1, rng);
        CHECK((apply_design_adjoint(*design, R, 1.0, y) - W * y).norm() < 1e-12);
    }

    SECTION("dimension mismatch is rejected") {
        const RotationState I = RotationState::identity(8);
        CHECK_THROWS_AS(apply_design(*design, I, 1.0, Eigen::VectorXd::Zero(7)), InvalidInputError);
        CHECK_THROWS_AS(apply_design_adjoint(*design, I, 1.0, Eigen::VectorXd::Zero(25)), InvalidInputError);
    }
}

TEST_CASE("fast matvec path equals the naive path") {
    std::mt19937_64 rng(77);
    for (auto [n, m] : std::vector<std::pair<long, long>>{{5, 2}, {13, 4}, {29, 14}, {97, 8}, {257, 16}}) {
        const StructuredDesign plain = build_design(n, m);
        const StructuredDesign randomized = randomize_design(plain, 1234);
        for (const StructuredDesign* design : {&plain, &randomized}) {
            for (int rep = 0; rep < 100; ++rep) {
                const Eigen::VectorXd v = nok_test::random_gaussian(design->dim(), 1, rng);
                const Eigen::VectorXd fast = design->bt_times(v, MatvecMode::Fast);
                const Eigen::VectorXd naive = design->bt_times(v, MatvecMode::Naive);
                REQUIRE((fast - naive).norm() <= 1e-10 * std::max(1.0, naive.norm()));

                const Eigen::VectorXd y = nok_test::random_gaussian(design->samples(), 1, rng);
                const Eigen::VectorXd fast_b = design->b_times(y, MatvecMode::Fast);
                const Eigen::VectorXd naive_b = design->b_times(y, MatvecMode::Naive);
                REQUIRE((fast_b - naive_b).norm() <= 1e-10 * std::max(1.0, naive_b.norm()));
            }
        }
    }
}

TEST_CASE("assembled operator is exactly orthogonal after scaling") {
    std::mt19937_64 rng(5);
    for (auto [n, m] : std::vector<std::pair<long, long>>{{5, 2}, {13, 4}, {13, 6}, {29, 4}}) {
        const StructuredDesign design = build_design(n, m);
        const long d = design.dim();
        const double N = static_cast<double>(design.samples());
        for (int rep = 0; rep < 5; ++rep) {
            const RotationState R(nok_test::random_orthogonal(d, rng));
            const Eigen::MatrixXd W = std::sqrt(static_cast<double>(d)) * R.matrix().transpose() * design.matrix();
            CHECK((W * W.transpose() / N - Eigen::MatrixXd::Identity(d, d)).norm() < 1e-10);
        }
    }
}

TEST_CASE("diagonal rotation validation") {
    const StructuredDesign design = build_design(13, 4);
    DiagonalRotation bad = DiagonalRotation::identity(4);
    bad.permutation[0] = bad.permutation[1];
    CHECK_THROWS_AS(randomize_design(design, bad), InvalidInputError);

    DiagonalRotation short_perm = DiagonalRotation::identity(4);
    short_perm.permutation.pop_back();
    CHECK_THROWS_AS(randomize_design(design, short_perm), InvalidInputError);

    DiagonalRotation nan_phase = DiagonalRotation::identity(4);
    nan_phase.phases[2] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(randomize_design(design, nan_phase), InvalidInputError);
}

TEST_CASE("rotation state validates orthogonality") {
    CHECK_NOTHROW(RotationState::identity(6));
    Eigen::MatrixXd bad = Eigen::MatrixXd::Identity(4, 4);
    bad(0, 1) = 1e-6;
    CHECK_THROWS_AS(RotationState(bad), InvalidInputError);
    CHECK_THROWS_AS(RotationState(Eigen::MatrixXd::Ones(3, 4)), InvalidInputError);
}
