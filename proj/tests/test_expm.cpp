#include <catch2/catch.hpp>

#include "semirandom/expm.hpp"
#include "semirandom/rng.hpp"
#include "semirandom/weights.hpp"

using namespace semirandom;

namespace {

Mat random_psd(Index d, double spectral_cap, std::uint64_t seed) {
    CounterRng rng(seed);
    Mat G(d, d);
    for (Index i = 0; i < d; ++i)
        for (Index j = 0; j < d; ++j) G(i, j) = rng.next_gaussian();
    Mat M = G * G.transpose();
    SymEig e = sym_eig(M);
    return M * (spectral_cap * rng.next_u01() / e.values(d - 1));
}

Vec random_vec(Index d, std::uint64_t seed) {
    CounterRng rng(seed);
    Vec v(d);
    for (Index i = 0; i < d; ++i) v[i] = rng.next_gaussian();
    return v;
}

RowMajorMat random_rows(Index n, Index d, std::uint64_t seed) {
    CounterRng rng(seed);
    RowMajorMat m(n, d);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < d; ++j) m(i, j) = rng.next_gaussian();
    return m;
}

InnerSolver cg_inner(const Mat& M) {
    LinOp op = sym_matrix_op(M);
    return [op](const Vec& rhs, double tol) {
        return cg_operator_solve(op, rhs, std::max(tol, 1e-15), 4000).x;
    };
}

} // namespace

// --- polynomial approximation (positive exponentials) ---

TEST_CASE("poly exp at zero is close to the identity") {
    PolyExpSpec spec = PolyExpSpec::make(4.0, 0.05);
    LinOp zero{3, [](const Vec& v) { return Vec(Vec::Zero(v.size())); }};
    Vec v = random_vec(3, 1);
    Vec out = poly_exp_apply(spec, zero, v);
    REQUIRE((out - v).norm() <= 0.05 * v.norm()); // |p(0) - 1| <= c
}

TEST_CASE("poly exp on diag(1,2) is within the sandwich") {
    PolyExpSpec spec = PolyExpSpec::make(2.0, 0.1);
    Mat M = Vec((Vec(2) << 1, 2).finished()).asDiagonal();
    Vec v = Vec::Ones(2);
    Vec out = poly_exp_apply(spec, sym_matrix_op(M), v);
    REQUIRE(out[0] >= 0.9 * std::exp(1.0));
    REQUIRE(out[0] <= 1.1 * std::exp(1.0));
    REQUIRE(out[1] >= 0.9 * std::exp(2.0));
    REQUIRE(out[1] <= 1.1 * std::exp(2.0));
}

TEST_CASE("poly exp scalar sandwich on the whole range [0, R]") {
    for (double c : {0.3, 0.1, 0.01}) {
        PolyExpSpec spec = PolyExpSpec::make(8.0, c);
        for (int i = 0; i <= 400; ++i) {
            const double lambda = 8.0 * i / 400.0;
            const double p = spec.eval_scalar(lambda);
            const double e = std::exp(lambda);
            REQUIRE(p >= (1 - c) * e);
            REQUIRE(p <= (1 + c) * e);
        }
    }
}

TEST_CASE("poly exp norm sandwich holds across 100 random PSD matrices") {
    const double c = 0.1;
    const double R = 8.0;
    PolyExpSpec spec = PolyExpSpec::make(R, c);
    for (std::uint64_t trial = 0; trial < 100; ++trial) {
        Mat M = random_psd(10, R, 1000 + trial);
        Vec v = random_vec(10, 2000 + trial);
        Vec approx = poly_exp_apply(spec, sym_matrix_op(M), v);
        Vec exact = sym_exp(M) * v;
        const double ratio = approx.squaredNorm() / exact.squaredNorm();
        REQUIRE(ratio >= 1.0 - 2.1 * c);
        REQUIRE(ratio <= 1.0 + 2.1 * c);
    }
}

// --- rational approximation (negative exponentials via inner solves) ---

TEST_CASE("rational spec satisfies its scalar invariant on [0, 10 Delta]") {
    for (double delta : {1e-2, 1e-4}) {
        RationalExpSpec spec = RationalExpSpec::from_delta(delta);
        const double D = static_cast<double>(spec.degree);
        for (int i = 0; i <= 2000; ++i) {
            const double lambda = 10.0 * D * i / 2000.0;
            REQUIRE(std::abs(spec.eval_scalar(lambda) - std::exp(-lambda)) <= spec.delta);
        }
    }
}

TEST_CASE("rational degree grows like log(1/delta) with bounded coefficients") {
    int last_degree = 0;
    for (double delta : {1e-2, 1e-3, 1e-4, 1e-5, 1e-6}) {
        RationalExpSpec spec = RationalExpSpec::from_delta(delta);
        REQUIRE(spec.delta <= delta);
        REQUIRE(spec.degree >= last_degree);
        REQUIRE(spec.degree <= static_cast<int>(3.0 * std::log(1.0 / delta)) + 6);
        last_degree = spec.degree;
        const double cap = std::pow(static_cast<double>(spec.degree),
                                    3.0 * static_cast<double>(spec.degree));
        for (double coef : spec.coeffs) REQUIRE(std::abs(coef) <= cap);
    }
}

TEST_CASE("rational exp apply at M = 0 returns v within delta") {
    RationalExpSpec spec = RationalExpSpec::from_delta(1e-3);
    Vec v = random_vec(4, 7);
    Vec out = rational_exp_apply(spec, cg_inner(Mat::Identity(4, 4)), v);
    REQUIRE((out - v).norm() <= 1.5 * spec.delta * v.norm());
}

TEST_CASE("rational exp apply on diag(ln 2, ln 4)") {
    RationalExpSpec spec = RationalExpSpec::from_delta(1e-3);
    Mat M = Vec((Vec(2) << std::log(2.0), std::log(4.0)).finished()).asDiagonal();
    Mat resolvent = Mat::Identity(2, 2) + M / static_cast<double>(spec.degree);
    Vec v = Vec::Ones(2);
    Vec out = rational_exp_apply(spec, cg_inner(resolvent), v);
    REQUIRE(out[0] == Approx(0.5).margin(1e-3));
    REQUIRE(out[1] == Approx(0.25).margin(1e-3));
}

TEST_CASE("rational exp apply additive error stays under 3 delta on 100 PSD matrices") {
    for (double delta : {1e-2, 1e-4}) {
        RationalExpSpec spec = RationalExpSpec::from_delta(delta);
        for (std::uint64_t trial = 0; trial < 100; ++trial) {
            Mat M = random_psd(10, 20.0, 3000 + trial);
            Vec v = random_vec(10, 4000 + trial);
            Mat resolvent = Mat::Identity(10, 10) + M / static_cast<double>(spec.degree);
            Vec out = rational_exp_apply(spec, cg_inner(resolvent), v);
            Vec exact = sym_exp(Mat(-M)) * v;
            REQUIRE((out - exact).norm() <= 3.0 * spec.delta * v.norm());
        }
    }
}

// --- packing gradient estimates ---

TEST_CASE("packing gradients at w = 0-ish return trace d and row norms") {
    RowMatrix A(random_rows(12, 4, 11));
    Vec w = Vec::Constant(12, 1e-14);
    JlSketch Q = jl_sketch(512, 4, 19);
    PolyExpSpec spec = PolyExpSpec::make(1.0, 0.05);
    GradientEstimates g = packing_gradients(A, w, PackingMode::RankOne, Q, spec);
    REQUIRE(g.trace_est == Approx(4.0).epsilon(0.25));
    for (Index i = 0; i < 12; ++i)
        REQUIRE(g.inner_est[i] == Approx(A.row_norms_sq()[i]).epsilon(0.3));
    GradientEstimates ge = exact_packing_gradients(A, w, PackingMode::RankOne);
    REQUIRE(ge.trace_est == Approx(4.0).epsilon(1e-9));
    for (Index i = 0; i < 12; ++i)
        REQUIRE(ge.inner_est[i] == Approx(A.row_norms_sq()[i]).epsilon(1e-9));
}

TEST_CASE("packing gradients on the identity with log weights") {
    RowMatrix A(RowMajorMat(Mat::Identity(2, 2)));
    Vec w(2);
    w << std::log(2.0), std::log(4.0);
    GradientEstimates g = exact_packing_gradients(A, w, PackingMode::RankOne);
    REQUIRE(g.trace_est == Approx(6.0));
    REQUIRE(g.inner_est[0] == Approx(2.0));
    REQUIRE(g.inner_est[1] == Approx(4.0));
}

TEST_CASE("scalar packing mode returns the exact constants") {
    RowMatrix A(random_rows(9, 3, 23));
    Vec w = random_vec(9, 24).cwiseAbs();
    JlSketch Q = jl_sketch(4, 3, 5);
    PolyExpSpec spec = PolyExpSpec::make(1.0, 0.1);
    GradientEstimates g = packing_gradients(A, w, PackingMode::Scalar, Q, spec);
    REQUIRE(g.trace_est == Approx(w.dot(A.row_norms_sq())));
    REQUIRE(g.inner_est == A.row_norms_sq());
}

TEST_CASE("rank-one packing estimates meet the eps/45 envelope") {
    const double eps = 9.0; // c = eps/95 ~ 0.095, envelope eps/45 = 0.2
    const double c = eps / 95.0;
    RowMatrix A(random_rows(30, 5, 33));
    Vec w = 0.05 * random_vec(30, 34).cwiseAbs();
    const double R = 8.0;
    PolyExpSpec spec = PolyExpSpec::make(R, c);
    JlSketch Q = jl_sketch(1024, 5, 35);
    GradientEstimates est = packing_gradients(A, w, PackingMode::RankOne, Q, spec);
    GradientEstimates exact = exact_packing_gradients(A, w, PackingMode::RankOne);
    REQUIRE(est.trace_est == Approx(exact.trace_est).epsilon(eps / 45.0));
    for (Index i = 0; i < 30; ++i)
        REQUIRE(est.inner_est[i] == Approx(exact.inner_est[i]).epsilon(eps / 45.0));
}

TEST_CASE("packing gradients verify the spectral bound") {
    RowMatrix A(random_rows(10, 3, 43));
    Vec w = Vec::Constant(10, 100.0);
    JlSketch Q = jl_sketch(8, 3, 44);
    PolyExpSpec spec = PolyExpSpec::make(0.05, 0.1); // R far below the true norm
    REQUIRE_THROWS_AS(packing_gradients(A, w, PackingMode::RankOne, Q, spec),
                      SpectralBoundViolated);
}

// --- covering gradient estimates ---

TEST_CASE("covering gradients at tiny w return trace d and scaled norms") {
    RowMatrix A(random_rows(12, 4, 53));
    Vec w = Vec::Constant(12, 1e-14);
    const double scale = 3.0;
    JlSketch Q = jl_sketch(512, 4, 54);
    RationalExpSpec spec = RationalExpSpec::from_delta(1e-4);
    SolverConfig inner;
    GradientEstimates g = covering_gradients(A, w, scale, Q, spec, inner);
    REQUIRE(g.trace_est == Approx(4.0).epsilon(0.25));
    for (Index i = 0; i < 12; ++i)
        REQUIRE(g.inner_est[i] == Approx(scale * A.row_norms_sq()[i]).epsilon(0.3));
}

TEST_CASE("covering gradients on a scalar instance") {
    RowMajorMat m(1, 1);
    m << 1.0;
    RowMatrix A(m);
    Vec w = Vec::Ones(1);
    GradientEstimates g = exact_covering_gradients(A, w, 2.0);
    REQUIRE(g.trace_est == Approx(std::exp(-2.0)));
    REQUIRE(g.inner_est[0] == Approx(2.0 * std::exp(-2.0)));
}

TEST_CASE("covering estimates meet the multiplicative-plus-additive envelope") {
    const double eps = 9.0;
    RowMatrix A(random_rows(30, 5, 63));
    // keep the covering spectrum O(1) so exp(-M) is far from underflow,
    // matching the estimator regime lambda_min(sum w C) <= R
    Vec w = 0.01 * random_vec(30, 64).cwiseAbs();
    const double scale = 10.0;
    RationalExpSpec spec = RationalExpSpec::from_delta(1e-5);
    JlSketch Q = jl_sketch(1024, 5, 65);
    SolverConfig inner;
    GradientEstimates est = covering_gradients(A, w, scale, Q, spec, inner);
    GradientEstimates exact = exact_covering_gradients(A, w, scale);
    const double floor = covering_additive_floor(30, scale, eps);
    REQUIRE(std::abs(est.trace_est - exact.trace_est) <= (eps / 45.0) * exact.trace_est);
    for (Index i = 0; i < 30; ++i) {
        const double additive = floor * scale * A.row_norms_sq()[i]; // Tr(C_i)
        REQUIRE(std::abs(est.inner_est[i] - exact.inner_est[i]) <=
                (eps / 45.0) * exact.inner_est[i] + additive);
    }
}

TEST_CASE("normalized covering gradients stay in [0, (1+eps) scale row-norm]") {
    RowMatrix A(random_rows(20, 6, 73));
    Vec w = 0.2 * random_vec(20, 74).cwiseAbs();
    const double scale = 5.0;
    JlSketch Q = jl_sketch(256, 6, 75);
    RationalExpSpec spec = RationalExpSpec::from_delta(1e-4);
    SolverConfig inner;
    GradientEstimates est = covering_gradients(A, w, scale, Q, spec, inner);
    REQUIRE(est.trace_est > 0.0);
    for (Index i = 0; i < 20; ++i) {
        const double normalized = est.inner_est[i] / est.trace_est;
        REQUIRE(normalized >= 0.0);
        REQUIRE(normalized <= 1.3 * scale * A.row_norms_sq()[i]);
    }
}

TEST_CASE("doubling k shrinks the trace estimator variance") {
    RowMatrix A(random_rows(15, 6, 83));
    Vec w = 0.1 * random_vec(15, 84).cwiseAbs();
    PolyExpSpec spec = PolyExpSpec::make(4.0, 0.05);
    auto variance_at = [&](Index k) {
        std::vector<double> vals;
        for (std::uint64_t seed = 0; seed < 200; ++seed) {
            JlSketch Q = jl_sketch(k, 6, seed);
            vals.push_back(packing_gradients(A, w, PackingMode::RankOne, Q, spec).trace_est);
        }
        double mean = 0;
        for (double v : vals) mean += v;
        mean /= static_cast<double>(vals.size());
        double var = 0;
        for (double v : vals) var += (v - mean) * (v - mean);
        return var / (static_cast<double>(vals.size()) - 1.0);
    };
    const double ratio = variance_at(8) / variance_at(16);
    REQUIRE(ratio >= 1.5);
    REQUIRE(ratio <= 3.0);
}

TEST_CASE("resolvent solvers built on AGD and SVRG match the CG path") {
    RowMatrix A(random_rows(25, 6, 93));
    Vec w = 0.2 * random_vec(25, 94).cwiseAbs();
    const double half_scale = 0.7;
    Vec rhs = random_vec(6, 95);
    SolverConfig cg_cfg;
    Vec x_cg = make_resolvent_solver(A, w, half_scale, cg_cfg)(rhs, 1e-10);
    SolverConfig agd_cfg;
    agd_cfg.method = SolveMethod::AGD;
    Vec x_agd = make_resolvent_solver(A, w, half_scale, agd_cfg)(rhs, 1e-10);
    SolverConfig svrg_cfg;
    svrg_cfg.method = SolveMethod::SVRG;
    svrg_cfg.seed = 3;
    Vec x_svrg = make_resolvent_solver(A, w, half_scale, svrg_cfg)(rhs, 1e-10);
    REQUIRE((x_cg - x_agd).norm() <= 1e-7 * x_cg.norm());
    REQUIRE((x_cg - x_svrg).norm() <= 1e-7 * x_cg.norm());
    SolverConfig kz;
    kz.method = SolveMethod::Kaczmarz;
    REQUIRE_THROWS_AS(make_resolvent_solver(A, w, half_scale, kz), InvalidArgument);
}

TEST_CASE("covering estimates agree across inner solvers") {
    RowMatrix A(random_rows(20, 5, 201));
    Vec w = 0.05 * random_vec(20, 202).cwiseAbs();
    JlSketch Q = jl_sketch(16, 5, 203);
    RationalExpSpec spec = RationalExpSpec::from_delta(1e-4);
    SolverConfig cg_cfg;
    SolverConfig agd_cfg;
    agd_cfg.method = SolveMethod::AGD;
    GradientEstimates via_cg = covering_gradients(A, w, 4.0, Q, spec, cg_cfg);
    GradientEstimates via_agd = covering_gradients(A, w, 4.0, Q, spec, agd_cfg);
    REQUIRE(via_cg.trace_est == Approx(via_agd.trace_est).epsilon(1e-6));
    REQUIRE((via_cg.inner_est - via_agd.inner_est).norm() <=
            1e-6 * via_cg.inner_est.norm());
    // the overload picks up the spec-embedded inner solver configuration
    GradientEstimates via_default = covering_gradients(A, w, 4.0, Q, spec);
    REQUIRE(via_default.trace_est == via_cg.trace_est);
}
