#ifndef SEMIRANDOM_EXPM_HPP
#define SEMIRANDOM_EXPM_HPP

#include <cmath>
#include <map>
#include <mutex>
#include <vector>

#include "semirandom/jl.hpp"
#include "semirandom/solvers.hpp"
#include "semirandom/spectral.hpp"

namespace semirandom {

// ---------------------------------------------------------------------------
// Polynomial approximation of exp on [0, R]: truncated Taylor series, degree
// max(ceil(e*R) + ceil(ln(1/c)), 4). Satisfies the two-sided multiplicative
// sandwich (1-c) exp(M) <= p(M) <= (1+c) exp(M) for PSD M with ||M|| <= R.
// ---------------------------------------------------------------------------
struct PolyExpSpec {
    double R = 0.0;
    double c = 0.0;
    int degree = 0;
    std::vector<double> coeffs; // 1/j!

    static PolyExpSpec make(double R, double c) {
        if (!(R >= 0) || !(c > 0) || !(c < 1))
            throw InvalidArgument("poly exp spec requires R >= 0 and c in (0,1)");
        PolyExpSpec s;
        s.R = R;
        s.c = c;
        s.degree = std::max(static_cast<int>(std::ceil(std::exp(1.0) * R) +
                                             std::ceil(std::log(1.0 / c))),
                            4);
        s.coeffs.resize(static_cast<std::size_t>(s.degree) + 1);
        double f = 1.0;
        s.coeffs[0] = 1.0;
        for (int j = 1; j <= s.degree; ++j) {
            f /= static_cast<double>(j);
            s.coeffs[static_cast<std::size_t>(j)] = f;
        }
        return s;
    }

    double eval_scalar(double lambda) const {
        double r = 1.0;
        for (int j = degree; j >= 1; --j) r = r * lambda / static_cast<double>(j) + 1.0;
        return r;
    }
};

// p(M) v by Horner; costs `degree` operator applies.
inline Vec poly_exp_apply(const PolyExpSpec& spec, const LinOp& M, const Vec& v) {
    if (v.size() != M.dim) throw DimensionMismatch("poly_exp_apply: vector length");
    Vec r = v;
    for (int j = spec.degree; j >= 1; --j) r = M(r) / static_cast<double>(j) + v;
    return r;
}

// ---------------------------------------------------------------------------
// Rational approximation of exp(-M): a degree-Delta polynomial p in the
// resolvent z = (I + M/Delta)^{-1} with |p(z(lambda)) - exp(-lambda)| <= delta
// uniformly over lambda in [0, 10*Delta]. The coefficients are produced by a
// Lawson-reweighted least-squares fit in extended precision; the stored delta
// is the measured sup error of the double-precision evaluation (requests
// below that floor are raised to it).
// ---------------------------------------------------------------------------
namespace detail {

struct ResolventFit {
    std::vector<double> coeffs; // monomial in z, degree() = coeffs.size()-1
    double achieved = 0.0;      // measured sup error on [0, 10*Delta]
};

inline double eval_monomial(const std::vector<double>& coeffs, double z) {
    double r = 0.0;
    for (std::size_t j = coeffs.size(); j-- > 0;) r = r * z + coeffs[j];
    return r;
}

inline ResolventFit fit_resolvent_poly(int degree) {
    using LD = long double;
    using MatLD = Eigen::Matrix<LD, Eigen::Dynamic, Eigen::Dynamic>;
    using VecLD = Eigen::Matrix<LD, Eigen::Dynamic, 1>;

    const LD Delta = static_cast<LD>(degree);
    // Grid in z with the corresponding targets f = exp(-Delta (1-z)/z).
    std::vector<LD> zs, fs, ws;
    auto push = [&](LD z, LD weight) {
        LD f;
        if (z <= 0) {
            z = 0;
            f = 0;
        } else {
            f = std::exp(-Delta * (1 - z) / z);
        }
        zs.push_back(z);
        fs.push_back(f);
        ws.push_back(weight);
    };
    push(0, 4);
    const int ncheb = std::max(64, 12 * (degree + 1));
    for (int i = 0; i < ncheb; ++i) {
        const LD theta = (static_cast<LD>(i) + 0.5L) * 3.14159265358979323846L / ncheb;
        push((1 + std::cos(theta)) / 2, 1);
    }
    for (int i = 0; i < 200; ++i) { // small-lambda refinement
        const LD lam = std::pow(10.0L, -4 + 5.0L * i / 199);
        push(1 / (1 + lam / Delta), 1);
    }
    for (int i = 0; i < 60; ++i) { // tail control beyond the certified range
        const LD lam = 10 * Delta * (1 + 9.0L * i / 59);
        push(1 / (1 + lam / Delta), 1);
    }

    const int m = static_cast<int>(zs.size());
    const int ncoef = degree + 1;
    // Chebyshev basis on [0,1] for a well-conditioned solve.
    MatLD T(m, ncoef);
    for (int i = 0; i < m; ++i) {
        const LD x = 2 * zs[static_cast<std::size_t>(i)] - 1;
        T(i, 0) = 1;
        if (ncoef > 1) T(i, 1) = x;
        for (int j = 2; j < ncoef; ++j) T(i, j) = 2 * x * T(i, j - 1) - T(i, j - 2);
    }

    VecLD lawson = VecLD::Ones(m);
    VecLD coef(ncoef);
    for (int round = 0; round < 10; ++round) {
        MatLD Aw(m, ncoef);
        VecLD bw(m);
        for (int i = 0; i < m; ++i) {
            const LD s = std::sqrt(lawson(i) * ws[static_cast<std::size_t>(i)]);
            Aw.row(i) = T.row(i) * s;
            bw(i) = fs[static_cast<std::size_t>(i)] * s;
        }
        coef = Aw.householderQr().solve(bw);
        VecLD resid = T * coef;
        LD total = 0;
        for (int i = 0; i < m; ++i) {
            const LD e = std::abs(resid(i) - fs[static_cast<std::size_t>(i)]);
            lawson(i) *= (e + 1e-30L);
            total += lawson(i);
        }
        lawson *= m / total;
    }

    // Chebyshev -> monomial in z, still in extended precision.
    std::vector<std::vector<LD>> basis(static_cast<std::size_t>(ncoef));
    basis[0] = {1};
    if (ncoef > 1) basis[1] = {-1, 2}; // T_1(2z-1) = 2z - 1
    for (int j = 2; j < ncoef; ++j) {
        std::vector<LD> t(static_cast<std::size_t>(j) + 1, 0);
        const auto& p1 = basis[static_cast<std::size_t>(j - 1)];
        const auto& p2 = basis[static_cast<std::size_t>(j - 2)];
        for (std::size_t k = 0; k < p1.size(); ++k) {
            t[k + 1] += 4 * p1[k];
            t[k] -= 2 * p1[k];
        }
        for (std::size_t k = 0; k < p2.size(); ++k) t[k] -= p2[k];
        basis[static_cast<std::size_t>(j)] = std::move(t);
    }
    std::vector<LD> mono(static_cast<std::size_t>(ncoef), 0);
    for (int j = 0; j < ncoef; ++j)
        for (std::size_t k = 0; k < basis[static_cast<std::size_t>(j)].size(); ++k)
            mono[k] += coef(j) * basis[static_cast<std::size_t>(j)][k];

    ResolventFit fit;
    fit.coeffs.assign(mono.begin(), mono.end());

    // Measure the double-precision sup error over lambda in [0, 10*Delta].
    double sup = std::abs(eval_monomial(fit.coeffs, 1.0) - 1.0);
    const double D = static_cast<double>(degree);
    for (int i = 0; i <= 4000; ++i) {
        double lam;
        if (i <= 2000)
            lam = 10.0 * D * i / 2000.0;
        else
            lam = std::pow(10.0, -4.0 + 5.0 * (i - 2001) / 1999.0);
        const double z = 1.0 / (1.0 + lam / D);
        sup = std::max(sup, std::abs(eval_monomial(fit.coeffs, z) - std::exp(-lam)));
    }
    fit.achieved = sup;
    return fit;
}

inline const ResolventFit& cached_resolvent_fit(int degree) {
    static std::map<int, ResolventFit> cache;
    static std::mutex mutex;
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(degree);
    if (it == cache.end()) it = cache.emplace(degree, fit_resolvent_poly(degree)).first;
    return it->second;
}

} // namespace detail

struct RationalExpSpec {
    double delta = 0.0;         // additive accuracy of the polynomial itself
    int degree = 0;             // Delta; also the resolvent scale
    std::vector<double> coeffs; // monomial in z = (I + M/Delta)^{-1}
    SolverConfig inner_cfg;     // default solver for applying (I + M/Delta)^{-1}

    static constexpr int kMinDegree = 4;
    static constexpr int kMaxDegree = 24; // double-precision evaluation floor

    static RationalExpSpec from_degree(int degree) {
        if (degree < 1) throw InvalidArgument("rational exp spec requires degree >= 1");
        degree = std::clamp(degree, kMinDegree, kMaxDegree);
        const detail::ResolventFit& fit = detail::cached_resolvent_fit(degree);
        RationalExpSpec s;
        s.degree = degree;
        s.coeffs = fit.coeffs;
        s.delta = 1.2 * fit.achieved;
        return s;
    }

    static RationalExpSpec from_delta(double delta) {
        if (!(delta > 0)) throw InvalidArgument("rational exp spec requires delta > 0");
        for (int deg = kMinDegree; deg <= kMaxDegree; ++deg) {
            RationalExpSpec s = from_degree(deg);
            if (s.delta <= delta) {
                s.delta = std::max(s.delta, delta);
                return s;
            }
        }
        RationalExpSpec s = from_degree(kMaxDegree);
        // Requested accuracy is below the double-precision floor of the fit;
        // keep the measured delta so downstream error budgets stay honest.
        return s;
    }

    double eval_scalar(double lambda) const {
        const double z = 1.0 / (1.0 + lambda / static_cast<double>(degree));
        return detail::eval_monomial(coeffs, z);
    }

    // Per-monomial inner tolerance: delta * Delta^{-3 Delta}, clamped at 1e-14.
    double monomial_tolerance() const {
        const double d = static_cast<double>(degree);
        return std::max(delta * std::pow(d, -3.0 * d), 1e-14);
    }
};

// out ~ exp(-M) v, where inner_solver applies (I + M/Delta)^{-1}. The
// monomials z^K v are the prefixes of one recursive inverse chain, each
// accurate to the per-monomial tolerance by the recursive-solver schedule.
inline Vec rational_exp_apply(const RationalExpSpec& spec, const InnerSolver& inner_solver,
                              const Vec& v) {
    std::vector<Vec> seq = recursive_inverse_sequence(inner_solver, v,
                                                      static_cast<Index>(spec.degree),
                                                      spec.monomial_tolerance());
    Vec out = spec.coeffs[0] * v;
    for (int k = 1; k <= spec.degree; ++k)
        out += spec.coeffs[static_cast<std::size_t>(k)] * seq[static_cast<std::size_t>(k)];
    return out;
}

// Inner solver applying (I + half_scale * A^T W A)^{-1}. The CG path works on
// a cached d x d resolvent Gram matrix; AGD and SVRG solve against the
// augmented matrix B = [I; sqrt(half_scale w_i) a_i] with B^T B equal to the
// resolvent, matching how the covering solves are reduced to regression.
inline InnerSolver make_resolvent_solver(const RowMatrix& A, const Vec& w, double half_scale,
                                         const SolverConfig& cfg) {
    A.check_weights(w);
    if (!(half_scale >= 0)) throw InvalidArgument("resolvent scale must be nonnegative");
    if (cfg.method == SolveMethod::CG) {
        Mat R = half_scale * A.weighted_gram(w);
        R.diagonal().array() += 1.0;
        LinOp op = sym_matrix_op(std::move(R));
        const Index max_iters = cfg.max_iters > 0 ? cfg.max_iters : 8 * A.d() + 200;
        return [op, max_iters](const Vec& rhs, double tol) {
            OperatorSolveResult r = cg_operator_solve(op, rhs, std::max(tol, 1e-14), max_iters);
            if (!r.converged) {
                SolveReport rep;
                rep.x = r.x;
                rep.iters = r.iters;
                rep.residual_history.push_back(r.rel_residual);
                throw NotConverged("resolvent CG stalled at relative residual " +
                                       std::to_string(r.rel_residual),
                                   std::move(rep));
            }
            return r.x;
        };
    }
    if (cfg.method == SolveMethod::Kaczmarz)
        throw InvalidArgument("Kaczmarz cannot apply an inverse; pick CG, AGD or SVRG");
    const Index d = A.d();
    RowMajorMat B(A.n() + d, d);
    B.topRows(d) = Mat::Identity(d, d);
    for (Index i = 0; i < A.n(); ++i)
        B.row(d + i) = std::sqrt(half_scale * w[i]) * A.row(i);
    auto Bp = std::make_shared<RowMatrix>(std::move(B));
    SolverConfig inner = cfg;
    inner.lambda_min_hint = 1.0; // resolvent >= I
    return [Bp, inner](const Vec& rhs, double tol) {
        SolverConfig c = inner;
        c.tol = std::max(tol, 1e-14);
        Vec ones = Vec::Ones(Bp->n());
        SolveReport rep = solve_system(*Bp, ones, rhs, c, SolveForm::Inversion);
        return rep.x;
    };
}

// ---------------------------------------------------------------------------
// Gradient estimators for the mixed packing-covering instances.
// ---------------------------------------------------------------------------

// RankOne: P_i = a_i a_i^T. Scalar: P_i = ||a_i||^2 in R^{1x1}, for which the
// normalized gradients are the constants ||a_i||^2 and trace_est reports the
// exact packing value sum_i w_i ||a_i||^2.
enum class PackingMode { RankOne, Scalar };

struct GradientEstimates {
    double trace_est = 0.0;
    Vec inner_est;
    int clamped_negative = 0;
};

namespace detail {

inline void spot_check_packing_bound(const RowMatrix& A, const Vec& w, double R) {
    LinOp G = normal_op(A, w);
    const double lmax = power_iteration_lambda_max(G, 1e-4, 20);
    if (lmax > 1.5 * R)
        throw SpectralBoundViolated("packing sum spectral norm " + std::to_string(lmax) +
                                    " exceeds 1.5 * R = " + std::to_string(1.5 * R));
}

} // namespace detail

// Sketched estimates of Tr exp(sum_i w_i P_i) and <P_i, exp(sum w P)>. The
// k x d product Q p(M/2) is precomputed and applied to every row.
inline GradientEstimates packing_gradients(const RowMatrix& A, const Vec& w, PackingMode mode,
                                           const JlSketch& sketch, const PolyExpSpec& spec) {
    A.check_weights(w);
    GradientEstimates g;
    if (mode == PackingMode::Scalar) {
        g.trace_est = w.dot(A.row_norms_sq());
        g.inner_est = A.row_norms_sq();
        return g;
    }
    if (sketch.d != A.d()) throw DimensionMismatch("packing_gradients: sketch dimension");
    detail::spot_check_packing_bound(A, w, spec.R);
    Mat half_gram = 0.5 * A.weighted_gram(w);
    LinOp M = sym_matrix_op(std::move(half_gram));
    Mat S(sketch.k, A.d()); // rows: p(M/2) q_l
    for (Index l = 0; l < sketch.k; ++l) {
        Vec q = sketch.Q.row(l).transpose();
        S.row(l) = poly_exp_apply(spec, M, q).transpose();
    }
    g.trace_est = S.squaredNorm();
    g.inner_est = (S * A.rows().transpose()).colwise().squaredNorm().transpose();
    return g;
}

// Sketched estimates of Tr exp(-sum w_i C_i) and <C_i, exp(-sum w C)> for
// C_i = scale * a_i a_i^T, computed as scale ||Q ptilde a_i||^2 with ptilde
// the rational approximation applied through inner linear solves.
inline GradientEstimates covering_gradients(const RowMatrix& A, const Vec& w, double scale,
                                            const JlSketch& sketch, const RationalExpSpec& spec,
                                            const SolverConfig& inner_cfg) {
    A.check_weights(w);
    if (sketch.d != A.d()) throw DimensionMismatch("covering_gradients: sketch dimension");
    const double half_scale = scale / (2.0 * static_cast<double>(spec.degree));
    InnerSolver solver = make_resolvent_solver(A, w, half_scale, inner_cfg);
    Mat S(sketch.k, A.d()); // rows: ptilde q_l ~ exp(-M/2) q_l
    for (Index l = 0; l < sketch.k; ++l) {
        Vec q = sketch.Q.row(l).transpose();
        S.row(l) = rational_exp_apply(spec, solver, q).transpose();
    }
    GradientEstimates g;
    g.trace_est = S.squaredNorm();
    g.inner_est = scale * (S * A.rows().transpose()).colwise().squaredNorm().transpose();
    return g;
}

inline GradientEstimates covering_gradients(const RowMatrix& A, const Vec& w, double scale,
                                            const JlSketch& sketch,
                                            const RationalExpSpec& spec) {
    return covering_gradients(A, w, scale, sketch, spec, spec.inner_cfg);
}

// Exact oracles by symmetric eigendecomposition; these replace the sketched
// estimators in tests and on small instances.
inline GradientEstimates exact_packing_gradients(const RowMatrix& A, const Vec& w,
                                                 PackingMode mode) {
    A.check_weights(w);
    GradientEstimates g;
    if (mode == PackingMode::Scalar) {
        g.trace_est = w.dot(A.row_norms_sq());
        g.inner_est = A.row_norms_sq();
        return g;
    }
    SymEig e = sym_eig(A.weighted_gram(w));
    g.trace_est = e.values.array().exp().sum();
    Mat half = e.values.array().exp().sqrt().matrix().asDiagonal() * e.vectors.transpose();
    g.inner_est = (half * A.rows().transpose()).colwise().squaredNorm().transpose();
    return g;
}

inline GradientEstimates exact_covering_gradients(const RowMatrix& A, const Vec& w,
                                                  double scale) {
    A.check_weights(w);
    SymEig e = sym_eig(scale * A.weighted_gram(w));
    GradientEstimates g;
    g.trace_est = (-e.values.array()).exp().sum();
    Mat half = (-0.5 * e.values.array()).exp().matrix().asDiagonal() * e.vectors.transpose();
    g.inner_est = scale * (half * A.rows().transpose()).colwise().squaredNorm().transpose();
    return g;
}

} // namespace semirandom

#endif
