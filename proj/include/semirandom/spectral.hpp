#ifndef SEMIRANDOM_SPECTRAL_HPP
#define SEMIRANDOM_SPECTRAL_HPP

#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>

#include "semirandom/error.hpp"
#include "semirandom/operators.hpp"
#include "semirandom/rng.hpp"

namespace semirandom {

// kappa = lambda_max/lambda_min, tau = trace/lambda_min of A^T W A.
struct SpectralStats {
    double lambda_max = 0.0;
    double lambda_min = 0.0;
    double trace = 0.0;
    double kappa = 0.0;
    double tau = 0.0;

    // Validates d <= tau <= d*kappa, kappa >= 1, trace >= lambda_max,
    // lambda_min > 0 (with relative slack for estimated inputs).
    static SpectralStats make(double lmax, double lmin, double trace, Index d) {
        if (!(lmin > 0.0) || lmin <= 1e-12 * lmax)
            throw SingularMatrix("lambda_min " + std::to_string(lmin) +
                                 " is numerically zero relative to lambda_max " +
                                 std::to_string(lmax));
        SpectralStats s;
        s.lambda_max = lmax;
        s.lambda_min = lmin;
        s.trace = trace;
        s.kappa = lmax / lmin;
        s.tau = trace / lmin;
        const double slack = 1e-5;
        const double dd = static_cast<double>(d);
        if (s.kappa < 1.0 - slack || s.tau < dd * (1.0 - slack) ||
            s.tau > dd * s.kappa * (1.0 + slack) || trace < lmax * (1.0 - slack))
            throw Error("spectral stats violate d <= tau <= d*kappa: lmax=" +
                        std::to_string(lmax) + " lmin=" + std::to_string(lmin) +
                        " trace=" + std::to_string(trace) + " d=" + std::to_string(d));
        return s;
    }
};

struct SymEig {
    Vec values;  // ascending
    Mat vectors; // columns
};

inline SymEig sym_eig(const Mat& M) {
    Eigen::SelfAdjointEigenSolver<Mat> es(M);
    if (es.info() != Eigen::Success) throw Error("symmetric eigendecomposition failed");
    return SymEig{es.eigenvalues(), es.eigenvectors()};
}

// exp(M) for symmetric M.
inline Mat sym_exp(const Mat& M) {
    SymEig e = sym_eig(M);
    return e.vectors * e.values.array().exp().matrix().asDiagonal() * e.vectors.transpose();
}

// Deterministic unit start vector for the iterative estimators.
inline Vec power_start(Index d, std::uint64_t seed) {
    CounterRng rng(seed, 0x7077657221ull);
    Vec v(d);
    for (Index i = 0; i < d; ++i) v[i] = rng.next_gaussian();
    const double nrm = v.norm();
    return nrm > 0 ? Vec(v / nrm) : Vec(Vec::Unit(d, 0));
}

// Largest eigenvalue of an SPD operator by power iteration; stops once the
// Rayleigh quotient moves by less than rel_tol per step.
inline double power_iteration_lambda_max(const LinOp& M, double rel_tol = 1e-6,
                                         Index max_iters = 500,
                                         std::uint64_t seed = 0x5EEDULL) {
    Vec v = power_start(M.dim, seed);
    double ray = 0.0;
    for (Index it = 0; it < max_iters; ++it) {
        Vec Mv = M(v);
        const double r = v.dot(Mv);
        const double nrm = Mv.norm();
        if (nrm == 0.0) return 0.0;
        v = Mv / nrm;
        if (it > 0 && std::abs(r - ray) <= rel_tol * std::abs(r)) return r;
        ray = r;
    }
    return ray;
}

// Smallest eigenvalue via inverse power iteration (shift 0); each step solves
// M x = v with conjugate gradient.
inline double inverse_power_iteration_lambda_min(const LinOp& M, double rel_tol = 1e-6,
                                                 Index max_iters = 500,
                                                 std::uint64_t seed = 0x5EEDULL) {
    Vec v = power_start(M.dim, seed);
    double ray_prev = 0.0;
    const Index cg_cap = 8 * M.dim + 200;
    for (Index it = 0; it < max_iters; ++it) {
        OperatorSolveResult sol = cg_operator_solve(M, v, 1e-10, cg_cap);
        if (!sol.converged)
            throw SingularMatrix("inverse power iteration: inner solve stalled at residual " +
                                 std::to_string(sol.rel_residual));
        const double nrm = sol.x.norm();
        if (!(nrm > 0.0)) throw SingularMatrix("inverse power iteration produced zero vector");
        v = sol.x / nrm;
        const double ray = v.dot(M(v));
        if (it > 0 && std::abs(ray - ray_prev) <= rel_tol * std::abs(ray)) return ray;
        ray_prev = ray;
    }
    return ray_prev;
}

enum class StatsMode { Exact, Estimated, Auto };

inline constexpr Index kExactStatsCap = 2000;

// Spectral statistics of A^T W A. Exact mode eigendecomposes the weighted
// Gram matrix (permitted for d <= cap); estimated mode is matrix-free.
inline SpectralStats condition_stats(const RowMatrix& A, const Vec& w,
                                     StatsMode mode = StatsMode::Auto,
                                     Index exact_cap = kExactStatsCap) {
    A.check_weights(w);
    if (mode == StatsMode::Auto)
        mode = A.d() <= exact_cap ? StatsMode::Exact : StatsMode::Estimated;
    const double trace = w.dot(A.row_norms_sq());
    if (mode == StatsMode::Exact) {
        if (A.d() > exact_cap)
            throw InvalidArgument("exact spectral stats requested for d=" +
                                  std::to_string(A.d()) + " above cap " +
                                  std::to_string(exact_cap));
        SymEig e = sym_eig(A.weighted_gram(w));
        return SpectralStats::make(e.values(A.d() - 1), e.values(0), trace, A.d());
    }
    LinOp G = normal_op(A, w);
    const double lmax = power_iteration_lambda_max(G);
    const double lmin = inverse_power_iteration_lambda_min(G);
    return SpectralStats::make(lmax, lmin, trace, A.d());
}

} // namespace semirandom

#endif
