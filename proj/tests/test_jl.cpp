#include <catch2/catch.hpp>

#include "semirandom/jl.hpp"
#include "semirandom/spectral.hpp"

using namespace semirandom;

TEST_CASE("sketch entries are exactly +-1/sqrt(k)") {
    JlSketch s = jl_sketch(5, 200, 99);
    const double v = 1.0 / std::sqrt(5.0);
    for (Index l = 0; l < s.k; ++l)
        for (Index j = 0; j < s.d; ++j)
            REQUIRE((s.Q(l, j) == v || s.Q(l, j) == -v));
}

TEST_CASE("1x1 sketch is a single sign") {
    JlSketch s = jl_sketch(1, 1, 3);
    REQUIRE(std::abs(s.Q(0, 0)) == 1.0);
}

TEST_CASE("sketch is deterministic per seed and varies across seeds") {
    JlSketch a = jl_sketch(8, 33, 1234), b = jl_sketch(8, 33, 1234), c = jl_sketch(8, 33, 1235);
    REQUIRE(a.Q == b.Q);
    REQUIRE(a.Q != c.Q);
}

TEST_CASE("norm concentration: most seeds keep a unit vector within [0.5, 1.5]") {
    const Index d = 100, k = 64;
    Vec v(d);
    for (Index i = 0; i < d; ++i) v[i] = std::sin(static_cast<double>(i) + 1.0);
    v /= v.norm();
    int ok = 0;
    const int seeds = 1000;
    for (int s = 0; s < seeds; ++s) {
        const double q = (jl_sketch(k, d, static_cast<std::uint64_t>(s)).Q * v).squaredNorm();
        if (q >= 0.5 && q <= 1.5) ++ok;
    }
    REQUIRE(static_cast<double>(ok) / seeds > 0.99);
}

TEST_CASE("sketch_norms of a basis vector through the identity is 1") {
    JlSketch s = jl_sketch(16, 10, 5);
    auto out = sketch_norms(s, identity_op(10), {Vec(Vec::Unit(10, 0))});
    REQUIRE(out.size() == 1);
    REQUIRE(out[0] == Approx(1.0)); // column of k signs, each squared 1/k
}

TEST_CASE("sketch_norms of the zero operator vanishes") {
    JlSketch s = jl_sketch(8, 6, 5);
    LinOp zero{6, [](const Vec& v) { return Vec(Vec::Zero(v.size())); }};
    auto out = sketch_norms(s, zero, {Vec(Vec::Ones(6)), Vec(Vec::Unit(6, 2))});
    for (double x : out) REQUIRE(x == 0.0);
}

TEST_CASE("sketch_norms checks dimensions") {
    JlSketch s = jl_sketch(4, 6, 5);
    REQUIRE_THROWS_AS(sketch_norms(s, identity_op(7), {Vec(Vec::Ones(7))}), DimensionMismatch);
    REQUIRE_THROWS_AS(sketch_norms(s, identity_op(6), {Vec(Vec::Ones(5))}), DimensionMismatch);
}

TEST_CASE("sketch norms of exact exp(M/2) estimate exp-quadratics") {
    // random 10x10 PSD M, k=256: each estimate within 1 +- 0.3 of the exact
    // ||exp(M/2) v||^2
    const Index d = 10;
    CounterRng rng(42);
    Mat G(d, d);
    for (Index i = 0; i < d; ++i)
        for (Index j = 0; j < d; ++j) G(i, j) = rng.next_gaussian();
    Mat M = G * G.transpose() / static_cast<double>(d);
    Mat E = sym_exp(Mat(0.5 * M));
    LinOp expop = sym_matrix_op(E);
    JlSketch s = jl_sketch(256, d, 7);
    std::vector<Vec> vs;
    for (Index i = 0; i < d; ++i) vs.push_back(Vec(Vec::Unit(d, i)));
    auto est = sketch_norms(s, expop, vs);
    for (Index i = 0; i < d; ++i) {
        const double exact = (E * vs[static_cast<std::size_t>(i)]).squaredNorm();
        REQUIRE(est[static_cast<std::size_t>(i)] >= 0.7 * exact);
        REQUIRE(est[static_cast<std::size_t>(i)] <= 1.3 * exact);
    }
}
