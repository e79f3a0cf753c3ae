#include <catch2/catch.hpp>

#include "semirandom/rng.hpp"
#include "semirandom/spectral.hpp"

using namespace semirandom;

namespace {

RowMajorMat random_rows(Index n, Index d, std::uint64_t seed) {
    CounterRng rng(seed);
    RowMajorMat m(n, d);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < d; ++j) m(i, j) = rng.next_gaussian();
    return m;
}

} // namespace

TEST_CASE("identity matrix has kappa 1 and tau d") {
    RowMatrix A(RowMajorMat(Mat::Identity(3, 3)));
    SpectralStats s = condition_stats(A, Vec::Ones(3), StatsMode::Exact);
    REQUIRE(s.kappa == Approx(1.0));
    REQUIRE(s.tau == Approx(3.0));
    REQUIRE(s.lambda_max == Approx(1.0));
    REQUIRE(s.lambda_min == Approx(1.0));
}

TEST_CASE("diagonal case: rows (2,0),(0,1)") {
    RowMajorMat m(2, 2);
    m << 2.0, 0.0, 0.0, 1.0;
    RowMatrix A(m);
    SpectralStats s = condition_stats(A, Vec::Ones(2), StatsMode::Exact);
    REQUIRE(s.kappa == Approx(4.0));
    REQUIRE(s.tau == Approx(5.0));
}

TEST_CASE("stats invariants d <= tau <= d kappa hold and are enforced") {
    for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
        RowMatrix A(random_rows(30, 8, seed));
        SpectralStats s = condition_stats(A, Vec::Ones(30), StatsMode::Exact);
        REQUIRE(s.kappa >= 1.0);
        REQUIRE(s.tau >= 8.0);
        REQUIRE(s.tau <= 8.0 * s.kappa * (1 + 1e-9));
        REQUIRE(s.trace >= s.lambda_max);
    }
    REQUIRE_THROWS_AS(SpectralStats::make(2.0, 1.0, 1.0, 3), Error); // tau < d
    REQUIRE_THROWS_AS(SpectralStats::make(1.0, 0.0, 3.0, 3), SingularMatrix);
}

TEST_CASE("estimated stats agree with exact within 1e-3") {
    for (std::uint64_t seed : {10, 20, 30}) {
        RowMatrix A(random_rows(50, 20, seed));
        SpectralStats exact = condition_stats(A, Vec::Ones(50), StatsMode::Exact);
        REQUIRE(exact.kappa <= 1e6);
        SpectralStats est = condition_stats(A, Vec::Ones(50), StatsMode::Estimated);
        REQUIRE(est.kappa == Approx(exact.kappa).epsilon(1e-3));
        REQUIRE(est.tau == Approx(exact.tau).epsilon(1e-3));
    }
}

TEST_CASE("scaling the weights leaves kappa and tau unchanged") {
    RowMatrix A(random_rows(25, 7, 77));
    Vec w = Vec::Ones(25);
    SpectralStats base = condition_stats(A, w, StatsMode::Exact);
    for (double c : {1e-6, 0.5, 3.0, 1e7}) {
        SpectralStats scaled = condition_stats(A, Vec(c * w), StatsMode::Exact);
        REQUIRE(scaled.kappa == Approx(base.kappa).epsilon(1e-11));
        REQUIRE(scaled.tau == Approx(base.tau).epsilon(1e-11));
    }
}

TEST_CASE("singular weighted gram raises SingularMatrix") {
    RowMajorMat m(2, 2);
    m << 1.0, 0.0, 1.0, 0.0; // rank one
    RowMatrix A(m);
    REQUIRE_THROWS_AS(condition_stats(A, Vec::Ones(2), StatsMode::Exact), SingularMatrix);
}

TEST_CASE("condition stats validates the weight length") {
    RowMatrix A(random_rows(5, 2, 3));
    REQUIRE_THROWS_AS(condition_stats(A, Vec::Ones(4)), DimensionMismatch);
}

TEST_CASE("exact mode refuses dimensions above the cap") {
    RowMatrix A(random_rows(5, 3, 3));
    REQUIRE_THROWS_AS(condition_stats(A, Vec::Ones(5), StatsMode::Exact, 2), InvalidArgument);
}

TEST_CASE("sym_exp matches scalar exponentials on diagonal input") {
    Mat M = Vec::LinSpaced(4, -1.0, 2.0).asDiagonal();
    Mat E = sym_exp(M);
    for (Index i = 0; i < 4; ++i) REQUIRE(E(i, i) == Approx(std::exp(M(i, i))));
}
