#ifndef SEMIRANDOM_REGRESSION_HPP
#define SEMIRANDOM_REGRESSION_HPP

#include <cstdint>
#include <string>
#include <utility>

#include "semirandom/rng.hpp"
#include "semirandom/solvers.hpp"
#include "semirandom/spectral.hpp"

namespace semirandom {

enum class NoiseKind { Homoskedastic, RowNorm, NoisyFeatures };

// b = A x_true + xi with xi ~ N(0, Sigma): sigma^2 I (homoskedastic),
// sigma^2 diag(||a_i||^2) (row-norm), or A Sigma' A^T (noisy features, i.e.
// exact observations of x_true + xi').
struct NoiseModel {
    NoiseKind kind = NoiseKind::Homoskedastic;
    double sigma = 0.0;
    Mat sigma_prime; // d x d PSD, NoisyFeatures only
    std::uint64_t seed = 0;

    static NoiseModel homoskedastic(double sigma, std::uint64_t seed) {
        if (!(sigma >= 0)) throw InvalidArgument("noise sigma must be nonnegative");
        return NoiseModel{NoiseKind::Homoskedastic, sigma, Mat(), seed};
    }
    static NoiseModel row_norm(double sigma, std::uint64_t seed) {
        if (!(sigma >= 0)) throw InvalidArgument("noise sigma must be nonnegative");
        return NoiseModel{NoiseKind::RowNorm, sigma, Mat(), seed};
    }
    static NoiseModel noisy_features(Mat sigma_prime, std::uint64_t seed) {
        if (sigma_prime.rows() != sigma_prime.cols())
            throw InvalidArgument("Sigma' must be square");
        if (!sigma_prime.isApprox(sigma_prime.transpose(), 1e-10))
            throw InvalidArgument("Sigma' must be symmetric");
        return NoiseModel{NoiseKind::NoisyFeatures, 0.0, std::move(sigma_prime), seed};
    }

    NoiseModel with_seed(std::uint64_t s) const {
        NoiseModel m = *this;
        m.seed = s;
        return m;
    }

    std::string name() const {
        switch (kind) {
            case NoiseKind::Homoskedastic: return "homo";
            case NoiseKind::RowNorm: return "rownorm";
            case NoiseKind::NoisyFeatures: return "features";
        }
        return "?";
    }
};

inline Vec gen_labels(const RowMatrix& A, const Vec& x_true, const NoiseModel& model) {
    if (x_true.size() != A.d()) throw DimensionMismatch("gen_labels: x_true must have length d");
    CounterRng rng(model.seed, 0x6E6F697365ULL);
    switch (model.kind) {
        case NoiseKind::Homoskedastic: {
            Vec b = A.apply(x_true);
            for (Index i = 0; i < A.n(); ++i) b[i] += model.sigma * rng.next_gaussian();
            return b;
        }
        case NoiseKind::RowNorm: {
            Vec b = A.apply(x_true);
            for (Index i = 0; i < A.n(); ++i)
                b[i] += model.sigma * std::sqrt(A.row_norms_sq()[i]) * rng.next_gaussian();
            return b;
        }
        case NoiseKind::NoisyFeatures: {
            if (model.sigma_prime.rows() != A.d())
                throw DimensionMismatch("gen_labels: Sigma' must be d x d");
            SymEig e = sym_eig(model.sigma_prime);
            if (e.values(0) < -1e-10 * std::abs(e.values(A.d() - 1)))
                throw InvalidArgument("Sigma' must be PSD");
            Vec g(A.d());
            for (Index i = 0; i < A.d(); ++i) g[i] = rng.next_gaussian();
            Vec xi = e.vectors *
                     (e.values.array().max(0.0).sqrt() * g.array()).matrix();
            return A.apply(x_true + xi);
        }
    }
    throw InvalidArgument("unknown noise kind");
}

// argmin ||W^{1/2}(A x - b)||^2 via the iterative solvers; the returned
// solution satisfies the normal-equation residual bound at the solver tol.
inline Vec weighted_regression(const RowMatrix& A, const Vec& b, const Vec& w,
                               const SolverConfig& cfg = {}) {
    if ((w.array() > 0.0).count() < A.d())
        throw SingularMatrix("fewer than d rows carry positive weight");
    SolveReport rep = solve_system(A, w, b, cfg, SolveForm::Regression);
    return rep.x;
}

inline double empirical_risk(const Vec& x_hat, const Vec& x_true) {
    if (x_hat.size() != x_true.size())
        throw DimensionMismatch("empirical_risk: length mismatch");
    return (x_hat - x_true).squaredNorm();
}

// Analytic risk upper bound for each model: sigma^2 tau(W^{1/2}A) under
// row-norm noise, sigma^2 d ||w||_inf / lambda_min(A^T W A) under
// homoskedastic noise, Tr(Sigma') (the exact risk) under noisy features.
inline double surrogate_bounds(const RowMatrix& A, const Vec& w, const NoiseModel& model,
                               StatsMode mode = StatsMode::Auto) {
    switch (model.kind) {
        case NoiseKind::RowNorm: {
            SpectralStats stats = condition_stats(A, w, mode);
            return model.sigma * model.sigma * stats.tau;
        }
        case NoiseKind::Homoskedastic: {
            SpectralStats stats = condition_stats(A, w, mode);
            return model.sigma * model.sigma * static_cast<double>(A.d()) * w.maxCoeff() /
                   stats.lambda_min;
        }
        case NoiseKind::NoisyFeatures:
            if (model.sigma_prime.rows() != A.d())
                throw DimensionMismatch("surrogate_bounds: Sigma' must be d x d");
            return model.sigma_prime.trace();
    }
    throw InvalidArgument("unknown noise kind");
}

struct RegressionResult {
    Vec x_hat;
    double mse = 0.0;             // ||x_hat - x_true||^2 when x_true is known
    double surrogate_bound = 0.0;
    StatsMode stats_mode = StatsMode::Auto;
};

inline RegressionResult run_regression(const RowMatrix& A, const Vec& b, const Vec& w,
                                       const Vec& x_true, const NoiseModel& model,
                                       const SolverConfig& cfg = {},
                                       StatsMode mode = StatsMode::Auto) {
    RegressionResult res;
    res.x_hat = weighted_regression(A, b, w, cfg);
    res.mse = empirical_risk(res.x_hat, x_true);
    res.surrogate_bound = surrogate_bounds(A, w, model, mode);
    res.stats_mode = mode == StatsMode::Auto
                         ? (A.d() <= kExactStatsCap ? StatsMode::Exact : StatsMode::Estimated)
                         : mode;
    return res;
}

} // namespace semirandom

#endif
