#ifndef SEMIRANDOM_SOLVERS_HPP
#define SEMIRANDOM_SOLVERS_HPP

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "semirandom/operators.hpp"
#include "semirandom/rng.hpp"
#include "semirandom/spectral.hpp"

namespace semirandom {

enum class SolveMethod { AGD, Kaczmarz, SVRG, CG };

// Inversion: apply (A^T W A)^{-1} to b in R^d.
// Regression: minimize ||W^{1/2}(A x - b)||_2^2 for b in R^n.
enum class SolveForm { Inversion, Regression };

struct SolverConfig {
    SolveMethod method = SolveMethod::CG;
    double tol = 1e-10;
    Index max_iters = 0; // 0 -> per-method default
    std::uint64_t seed = 0;
    bool accelerated = false;
    // Strong-convexity hint for AGD step sizes; estimated when 0. Inside the
    // exp oracle the resolvent has lambda_min >= 1 and the caller passes 1.
    double lambda_min_hint = 0.0;
};

struct SolveReport {
    Vec x;
    Index iters = 0;
    std::vector<double> residual_history;
    bool converged = false;
    double seconds = 0.0;
};

class NotConverged : public Error {
public:
    NotConverged(const std::string& what_arg, SolveReport report)
        : Error(what_arg), report_(std::move(report)) {}
    const SolveReport& report() const { return report_; }

private:
    SolveReport report_;
};

namespace detail {

class WallTimer {
public:
    WallTimer() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

// Both solve forms minimize f(x) = x^T G x / 2 - c^T x with G = A^T W A.
struct QuadraticProblem {
    const RowMatrix& A;
    const Vec& w;
    Vec c;           // rhs of the normal equations
    const Vec* b_n;  // original b in R^n when form == Regression
    double c_norm;
    double b_weighted_norm; // ||W^{1/2} b||, Regression only

    static QuadraticProblem make(const RowMatrix& A, const Vec& w, const Vec& b,
                                 SolveForm form) {
        A.check_weights(w);
        if (form == SolveForm::Inversion) {
            if (b.size() != A.d())
                throw DimensionMismatch("inversion form: b must have length d");
            return QuadraticProblem{A, w, b, nullptr, b.norm(), 0.0};
        }
        if (b.size() != A.n())
            throw DimensionMismatch("regression form: b must have length n");
        Vec c = A.normal_rhs(w, b);
        double bw = std::sqrt(b.dot((w.array() * b.array()).matrix()));
        return QuadraticProblem{A, w, std::move(c), &b, c.norm(), bw};
    }

    // Convergence metric: weighted residual for regression, gradient norm for
    // inversion. Both are reported relative to the scale of the rhs.
    double metric(const Vec& x, const Vec& grad) const {
        if (b_n) {
            Vec r = A.apply(x) - *b_n;
            double rw = std::sqrt(r.dot((w.array() * r.array()).matrix()));
            return b_weighted_norm > 0 ? rw / b_weighted_norm : rw;
        }
        return c_norm > 0 ? grad.norm() / c_norm : grad.norm();
    }

    // Stationarity criterion; convergence is declared when either this or the
    // primary metric reaches tol, so inconsistent regression still terminates.
    double grad_metric(const Vec& grad) const {
        return c_norm > 0 ? grad.norm() / c_norm : grad.norm();
    }
};

inline void throw_not_converged(const char* who, SolveReport report) {
    const double last = report.residual_history.empty() ? -1.0 : report.residual_history.back();
    throw NotConverged(std::string(who) + ": iteration cap " + std::to_string(report.iters) +
                           " reached at relative residual " + std::to_string(last),
                       std::move(report));
}

} // namespace detail

// Nesterov accelerated gradient descent on the normal-equation quadratic,
// with a monotone safeguard: a step that would increase f falls back to a
// plain 1/L gradient step, so the recorded residual is nonincreasing.
inline SolveReport agd_solve(const RowMatrix& A, const Vec& w, const Vec& b,
                             const SolverConfig& cfg,
                             SolveForm form = SolveForm::Regression) {
    detail::WallTimer timer;
    auto prob = detail::QuadraticProblem::make(A, w, b, form);
    LinOp G = normal_op(A, w);

    const double L = 1.01 * power_iteration_lambda_max(G, 1e-12, 50);
    if (!(L > 0)) throw SingularMatrix("agd_solve: zero smoothness estimate");
    double mu = cfg.lambda_min_hint;
    if (!(mu > 0)) mu = inverse_power_iteration_lambda_min(G);
    if (!(mu > 0) || mu <= 1e-12 * L)
        throw SingularMatrix("agd_solve: curvature estimate collapsed");
    const double kappa = L / mu;
    const double beta = (std::sqrt(L) - std::sqrt(mu)) / (std::sqrt(L) + std::sqrt(mu));

    Index max_iters = cfg.max_iters;
    if (max_iters == 0)
        max_iters = static_cast<Index>(40.0 * std::sqrt(kappa) *
                                       std::log(std::max(kappa, 10.0) / cfg.tol)) + 100;

    Vec x = Vec::Zero(A.d());
    Vec x_prev = x;
    Vec Gx = Vec::Zero(A.d());
    Vec Gx_prev = Gx;
    auto f_of = [&](const Vec& Gv, const Vec& v) { return 0.5 * v.dot(Gv) - prob.c.dot(v); };
    double f_x = 0.0;

    SolveReport report;
    for (Index it = 0; it < max_iters; ++it) {
        Vec y = x + beta * (x - x_prev);
        Vec Gy = Gx + beta * (Gx - Gx_prev);
        Vec grad_y = Gy - prob.c;
        Vec x_next = y - grad_y / L;
        Vec Gx_next = G(x_next);
        double f_next = f_of(Gx_next, x_next);
        if (f_next > f_x && it > 0) {
            // fall back to a guaranteed-descent step from x
            Vec grad_x = Gx - prob.c;
            x_next = x - grad_x / L;
            Gx_next = G(x_next);
            f_next = f_of(Gx_next, x_next);
        }
        x_prev = x;
        Gx_prev = Gx;
        x = x_next;
        Gx = Gx_next;
        f_x = f_next;
        report.iters = it + 1;
        Vec grad = Gx - prob.c;
        const double m = prob.metric(x, grad);
        report.residual_history.push_back(m);
        if (m <= cfg.tol || prob.grad_metric(grad) <= cfg.tol) {
            report.x = x;
            report.converged = true;
            report.seconds = timer.seconds();
            return report;
        }
    }
    report.x = x;
    report.seconds = timer.seconds();
    detail::throw_not_converged("agd_solve", std::move(report));
    return report; // unreachable
}

namespace detail {

// Cumulative distribution over rows proportional to w_i ||a_i||^2.
struct RowSampler {
    std::vector<double> cdf;
    double total = 0.0;

    RowSampler(const RowMatrix& A, const Vec& w) {
        cdf.resize(static_cast<std::size_t>(A.n()));
        double acc = 0.0;
        for (Index i = 0; i < A.n(); ++i) {
            acc += w[i] * A.row_norms_sq()[i];
            cdf[static_cast<std::size_t>(i)] = acc;
        }
        total = acc;
        if (!(total > 0)) throw SingularMatrix("row sampler: all weighted row norms vanish");
    }

    Index draw(CounterRng& rng) const {
        const double u = rng.next_u01() * total;
        auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        if (it == cdf.end()) --it;
        return static_cast<Index>(it - cdf.begin());
    }
};

} // namespace detail

// Randomized Kaczmarz with rows sampled proportional to w_i ||a_i||^2.
// Requires a consistent system (b in the image of the weighted matrix).
// The accelerated variant adds Nesterov momentum sized from an estimated
// tau; it is a practical scheme, monitored and damped if the residual grows.
inline SolveReport kaczmarz_solve(const RowMatrix& A, const Vec& w, const Vec& b,
                                  const SolverConfig& cfg) {
    detail::WallTimer timer;
    A.check_weights(w);
    if (b.size() != A.n()) throw DimensionMismatch("kaczmarz_solve: b must have length n");
    detail::RowSampler sampler(A, w);
    CounterRng rng(cfg.seed, 0x6B61637AULL);

    const double b_weighted_norm =
        std::sqrt(b.dot((w.array() * b.array()).matrix()));
    auto weighted_residual = [&](const Vec& x) {
        Vec r = A.apply(x) - b;
        double rw = std::sqrt(r.dot((w.array() * r.array()).matrix()));
        return b_weighted_norm > 0 ? rw / b_weighted_norm : rw;
    };

    double beta = 0.0;
    if (cfg.accelerated) {
        LinOp G = normal_op(A, w);
        const double lmin = inverse_power_iteration_lambda_min(G, 1e-4, 200);
        const double tau_hat = sampler.total / lmin;
        if (tau_hat > 1.0)
            beta = (std::sqrt(tau_hat) - 1.0) / (std::sqrt(tau_hat) + 1.0);
    }

    Index max_iters = cfg.max_iters;
    if (max_iters == 0) max_iters = 1000 * A.n();

    Vec x = Vec::Zero(A.d());
    Vec x_prev = x;
    SolveReport report;
    double last_epoch_res = weighted_residual(x);
    for (Index it = 0; it < max_iters; ++it) {
        const Index i = sampler.draw(rng);
        const double nrm2 = A.row_norms_sq()[i];
        if (cfg.accelerated) {
            Vec y = x + beta * (x - x_prev);
            x_prev = x;
            x = y + ((b[i] - A.row(i).dot(y)) / nrm2) * A.row(i).transpose();
        } else {
            x += ((b[i] - A.row(i).dot(x)) / nrm2) * A.row(i).transpose();
        }
        report.iters = it + 1;
        if ((it + 1) % A.n() == 0 || it + 1 == max_iters) {
            const double res = weighted_residual(x);
            report.residual_history.push_back(res);
            if (res <= cfg.tol) {
                report.x = x;
                report.converged = true;
                report.seconds = timer.seconds();
                return report;
            }
            if (cfg.accelerated && res > 1.2 * last_epoch_res) beta *= 0.5;
            last_epoch_res = res;
        }
    }
    report.x = x;
    report.seconds = timer.seconds();
    detail::throw_not_converged("kaczmarz_solve", std::move(report));
    return report; // unreachable
}

// SVRG on the finite sum, rows sampled proportional to w_i ||a_i||^2. The
// update works on the row-normalized components (each 1-smooth under this
// sampling), so the step size is a universal 1/4 and the epoch length 2n.
inline SolveReport svrg_solve(const RowMatrix& A, const Vec& w, const Vec& b,
                              const SolverConfig& cfg,
                              SolveForm form = SolveForm::Regression) {
    detail::WallTimer timer;
    auto prob = detail::QuadraticProblem::make(A, w, b, form);
    detail::RowSampler sampler(A, w);
    CounterRng rng(cfg.seed, 0x73767267ULL);
    const double S = sampler.total;

    Index max_iters = cfg.max_iters;
    if (max_iters == 0) max_iters = 2000 * A.n();
    const Index epoch_len = 2 * A.n();
    const double eta = 0.25;

    Vec x = Vec::Zero(A.d());
    Vec x_snap = x;
    Vec mu_snap = (A.normal_apply(w, x_snap) - prob.c) / S;
    SolveReport report;
    Index step_in_epoch = 0;
    for (Index it = 0; it < max_iters; ++it) {
        const Index i = sampler.draw(rng);
        const double corr = A.row(i).dot(x - x_snap) / A.row_norms_sq()[i];
        x -= eta * (corr * A.row(i).transpose() + mu_snap);
        report.iters = it + 1;
        if (++step_in_epoch == epoch_len || it + 1 == max_iters) {
            step_in_epoch = 0;
            x_snap = x;
            Vec grad = A.normal_apply(w, x) - prob.c;
            mu_snap = grad / S;
            const double m = prob.metric(x, grad);
            report.residual_history.push_back(m);
            if (m <= cfg.tol || prob.grad_metric(grad) <= cfg.tol) {
                report.x = x;
                report.converged = true;
                report.seconds = timer.seconds();
                return report;
            }
        }
    }
    report.x = x;
    report.seconds = timer.seconds();
    detail::throw_not_converged("svrg_solve", std::move(report));
    return report; // unreachable
}

// Conjugate gradient on the normal equations A^T W A x = A^T W b; the
// deterministic baseline solver.
inline SolveReport cg_solve(const RowMatrix& A, const Vec& w, const Vec& b,
                            const SolverConfig& cfg,
                            SolveForm form = SolveForm::Regression) {
    detail::WallTimer timer;
    auto prob = detail::QuadraticProblem::make(A, w, b, form);
    LinOp G = normal_op(A, w);

    Index max_iters = cfg.max_iters;
    if (max_iters == 0) max_iters = 8 * A.d() + 200;

    SolveReport report;
    Vec x = Vec::Zero(A.d());
    Vec r = prob.c; // residual of the normal equations, c - G x
    Vec p = r;
    double rs = r.squaredNorm();
    for (Index it = 0; it < max_iters; ++it) {
        Vec Gp = G(p);
        const double pGp = p.dot(Gp);
        if (!(pGp > 0)) break;
        const double alpha = rs / pGp;
        x += alpha * p;
        r -= alpha * Gp;
        report.iters = it + 1;
        const double m = prob.metric(x, -r);
        report.residual_history.push_back(m);
        if (m <= cfg.tol || prob.grad_metric(r) <= cfg.tol) {
            report.x = x;
            report.converged = true;
            report.seconds = timer.seconds();
            return report;
        }
        const double rs_new = r.squaredNorm();
        p = r + (rs_new / rs) * p;
        rs = rs_new;
    }
    report.x = x;
    report.seconds = timer.seconds();
    detail::throw_not_converged("cg_solve", std::move(report));
    return report; // unreachable
}

inline SolveReport solve_system(const RowMatrix& A, const Vec& w, const Vec& b,
                                const SolverConfig& cfg,
                                SolveForm form = SolveForm::Regression) {
    switch (cfg.method) {
        case SolveMethod::AGD: return agd_solve(A, w, b, cfg, form);
        case SolveMethod::Kaczmarz: return kaczmarz_solve(A, w, b, cfg);
        case SolveMethod::SVRG: return svrg_solve(A, w, b, cfg, form);
        case SolveMethod::CG: return cg_solve(A, w, b, cfg, form);
    }
    throw InvalidArgument("unknown solve method");
}

// An inner solver applies M^{-1} to rhs at a requested relative tolerance.
using InnerSolver = std::function<Vec(const Vec& rhs, double tol)>;

// All K sequential applications of M^{-1} for M >= I, each inner solve at
// tolerance delta/(3K), so that || v_k - M^{-k} b || <= delta ||b|| for every
// prefix k <= K.
inline std::vector<Vec> recursive_inverse_sequence(const InnerSolver& solver, const Vec& b,
                                                   Index K, double delta) {
    if (K < 0 || !(delta > 0)) throw InvalidArgument("recursive solve: K >= 0, delta > 0");
    if (static_cast<double>(K) * delta > 1.0 + 1e-12)
        throw InvalidArgument("recursive solve requires K * delta <= 1");
    std::vector<Vec> seq;
    seq.reserve(static_cast<std::size_t>(K) + 1);
    seq.push_back(b);
    if (K == 0) return seq;
    const double inner_tol = delta / (3.0 * static_cast<double>(K));
    for (Index k = 0; k < K; ++k) seq.push_back(solver(seq.back(), inner_tol));
    return seq;
}

inline Vec recursive_inverse_apply(const InnerSolver& solver, const Vec& b, Index K,
                                   double delta) {
    return recursive_inverse_sequence(solver, b, K, delta).back();
}

} // namespace semirandom

#endif
