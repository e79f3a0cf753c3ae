#ifndef SEMIRANDOM_WEIGHTS_HPP
#define SEMIRANDOM_WEIGHTS_HPP

#include <cmath>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <utility>

#include "semirandom/expm.hpp"
#include "semirandom/mpc.hpp"
#include "semirandom/spectral.hpp"

namespace semirandom {

// Nonnegative per-row weights defining W = diag(w) and the reweighted matrix
// W^{1/2} A. Normalization is free: the kappa/tau ratios are scale-invariant.
struct WeightVector {
    Vec w;

    explicit WeightVector(Vec weights) : w(std::move(weights)) {
        if ((w.array() < 0.0).any())
            throw InvalidArgument("weight vector must be entrywise nonnegative");
    }

    Index size() const { return w.size(); }
    Index positive_count() const { return (w.array() > 0.0).count(); }
};

// "wvec v1" file: header `wvec 1 <n>`, then n lines of one float.
inline void write_wvec(const std::string& path, const Vec& w) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "wvec 1 " << w.size() << "\n";
    for (Index i = 0; i < w.size(); ++i) out << detail::format_float(w[i]) << "\n";
    if (!out) throw IoError("write failed: " + path);
}

inline Vec read_wvec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    std::string magic;
    int version = 0;
    Index n = 0;
    if (!(in >> magic >> version >> n) || magic != "wvec" || version != 1 || n < 1)
        throw IoError("bad wvec header in " + path);
    Vec w(n);
    for (Index i = 0; i < n; ++i)
        if (!(in >> w[i])) throw IoError("truncated wvec file: " + path);
    return w;
}

// Geometric grid of guesses for kappa_g or tau_g.
struct GuessSchedule {
    double lo = 0.0;
    double hi = 0.0;
    double growth = 0.0;

    GuessSchedule(double lo_, double hi_, double growth_) : lo(lo_), hi(hi_), growth(growth_) {
        if (!(lo > 0) || !(hi >= lo) || !(growth > 1))
            throw InvalidArgument("guess schedule requires 0 < lo <= hi and growth > 1");
    }
};

enum class LearnerKind { FullGradient, RowSample };
enum class CertificateKind { Kappa, Tau };

struct OracleConfig {
    bool exact = false;   // eigendecomposition oracles instead of sketches
    Index jl_k = 5;       // JL sketch directions
    std::uint64_t seed = 0;
    int rat_degree = 10;  // degree of the rational approximation
    // Per-stage multiplicative accuracy. The sketch and the exponential
    // approximation each contribute eps/95 and their product composes to
    // 1.05 * (2 eps/95) ~ eps/45 per estimate, pairing into the eps/20
    // gradient contract the solver needs.
    double poly_c = 0.0;  // 0 -> epsilon / 95
    // The additive-floor exponent of the covering estimates appears both as
    // exp(-log(n kappa_g)/eps) and exp(-10 log(n d rho)/eps) in different
    // accuracy analyses; the envelope used by verification multiplies the
    // exponent by this factor (default matches the stricter form).
    double exponent_multiplier = 1.0;
    SolverConfig inner;   // resolvent inner solver (CG by default)
    Index stats_exact_cap = kExactStatsCap;
};

// Additive floor of the covering inner-product estimates, relative to
// Tr(C_i); the envelope the verification suite checks against.
inline double covering_additive_floor(Index n, double scale, double epsilon,
                                      double exponent_multiplier = 1.0) {
    return std::exp(-10.0 * exponent_multiplier *
                    std::log(static_cast<double>(n) * std::max(scale, 1.0)) / epsilon);
}

// Largest usable solver threshold for sketched oracles: the covering
// trace lower bound exp(-R) must dominate the rational-approximation noise
// for the additive-to-multiplicative conversion to remain valid in double
// precision, which caps R near 2 ln(1/delta).
inline double precision_threshold_cap(double rat_delta) {
    return 1.8 * std::log(1.0 / std::max(rat_delta, 1e-300));
}

namespace detail {

inline MpcConfig resolve_threshold(const MpcConfig& cfg, Index n, Index d, double rho,
                                   const OracleConfig& oracle) {
    MpcConfig resolved = cfg;
    if (resolved.R <= 0) {
        double R = MpcConfig::default_threshold(n, d, rho, cfg.epsilon);
        if (!oracle.exact)
            R = std::min(R, precision_threshold_cap(
                                RationalExpSpec::from_degree(oracle.rat_degree).delta));
        resolved.R = R;
    }
    return resolved;
}

} // namespace detail

struct LearnResult {
    bool feasible = false;
    double guess = 0.0;
    std::optional<WeightVector> weights; // present unless the solver said Infeasible
    MpcOutcome outcome;
    std::optional<SpectralStats> stats_after; // of W^{1/2} A when weights present
    double certificate = 0.0;   // measured kappa or tau of the reweighted matrix
    double check_factor = 0.0;  // post-hoc acceptance factor applied to the guess
    double homoskedastic_certificate = 0.0; // ||w||_inf / lambda_min, Kappa/Tau-nu mode
    int clamped_negative = 0;
};

namespace detail {

struct OracleState {
    Index packing_calls = 0;
    Index covering_calls = 0;
    int clamped_negative = 0;
};

inline Vec normalized_ratio(const GradientEstimates& g, OracleState& state) {
    if (!(g.trace_est > 0.0)) return Vec::Zero(g.inner_est.size());
    Vec out = g.inner_est / g.trace_est;
    for (Index i = 0; i < out.size(); ++i)
        if (out[i] < 0.0) {
            out[i] = 0.0;
            ++state.clamped_negative;
        }
    return out;
}

// lambda_max and lambda_min of A^T W A, exact below the cap.
inline std::pair<double, double> gram_extremes(const RowMatrix& A, const Vec& w,
                                               Index exact_cap) {
    if (A.d() <= exact_cap) {
        SymEig e = sym_eig(A.weighted_gram(w));
        return {e.values(A.d() - 1), e.values(0)};
    }
    LinOp G = normal_op(A, w);
    return {power_iteration_lambda_max(G), inverse_power_iteration_lambda_min(G)};
}

} // namespace detail

// MPC instance of the full-gradient method: P_i = a_i a_i^T and
// C_i = kappa_g a_i a_i^T, so rho = kappa_g. A must outlive the instance.
inline MpcInstance make_full_gradient_instance(const RowMatrix& A, double kappa_g,
                                               const MpcConfig& cfg, const OracleConfig& oracle,
                                               std::shared_ptr<detail::OracleState> state) {
    if (!(kappa_g >= 1.0)) throw InvalidArgument("kappa_g estimate must be >= 1");
    MpcInstance inst;
    inst.n = A.n();
    inst.d = A.d();
    inst.rho = kappa_g;
    inst.initial_weights = (static_cast<double>(A.n()) * A.row_norms_sq().array()).inverse();
    const double R = cfg.R > 0 ? cfg.R
                               : MpcConfig::default_threshold(inst.n, inst.d, inst.rho,
                                                              cfg.epsilon);
    const double c = oracle.poly_c > 0 ? oracle.poly_c : cfg.epsilon / 95.0;
    if (oracle.exact) {
        inst.packing_gradients = [&A, state](const Vec& w) {
            ++state->packing_calls;
            return detail::normalized_ratio(exact_packing_gradients(A, w, PackingMode::RankOne),
                                            *state);
        };
        inst.covering_gradients = [&A, kappa_g, state](const Vec& w) {
            ++state->covering_calls;
            return detail::normalized_ratio(exact_covering_gradients(A, w, kappa_g), *state);
        };
    } else {
        auto poly = std::make_shared<PolyExpSpec>(PolyExpSpec::make(R, c));
        auto rat = std::make_shared<RationalExpSpec>(RationalExpSpec::from_degree(oracle.rat_degree));
        const Index k = oracle.jl_k;
        const std::uint64_t seed = oracle.seed;
        const SolverConfig inner = oracle.inner;
        inst.packing_gradients = [&A, state, poly, k, seed](const Vec& w) {
            JlSketch Q = jl_sketch(k, A.d(), hash2(seed, static_cast<std::uint64_t>(state->packing_calls)));
            ++state->packing_calls;
            return detail::normalized_ratio(
                packing_gradients(A, w, PackingMode::RankOne, Q, *poly), *state);
        };
        inst.covering_gradients = [&A, state, rat, inner, kappa_g, k, seed](const Vec& w) {
            JlSketch Q = jl_sketch(k, A.d(), hash2(seed, static_cast<std::uint64_t>(state->covering_calls)));
            ++state->covering_calls;
            return detail::normalized_ratio(
                covering_gradients(A, w, kappa_g, Q, *rat, inner), *state);
        };
    }
    const Index cap = oracle.stats_exact_cap;
    inst.packing_lambda_max = [&A, cap](const Vec& w) {
        return detail::gram_extremes(A, w, cap).first;
    };
    inst.covering_lambda_min = [&A, kappa_g, cap](const Vec& w) {
        return kappa_g * detail::gram_extremes(A, w, cap).second;
    };
    return inst;
}

// MPC instance of the row-sampling method: P_i = ||a_i||^2 (scalars) and
// C_i = tau_g a_i a_i^T, so rho = tau_g and the packing gradients are the
// constants ||a_i||^2.
inline MpcInstance make_row_sample_instance(const RowMatrix& A, double tau_g,
                                            const MpcConfig& cfg, const OracleConfig& oracle,
                                            std::shared_ptr<detail::OracleState> state) {
    if (!(tau_g >= 1.0)) throw InvalidArgument("tau_g estimate must be >= 1");
    (void)cfg;
    MpcInstance inst;
    inst.n = A.n();
    inst.d = A.d();
    inst.rho = tau_g;
    inst.initial_weights = (static_cast<double>(A.n()) * A.row_norms_sq().array()).inverse();
    inst.packing_gradients = [&A, state](const Vec& w) {
        ++state->packing_calls;
        (void)w;
        return Vec(A.row_norms_sq());
    };
    if (oracle.exact) {
        inst.covering_gradients = [&A, tau_g, state](const Vec& w) {
            ++state->covering_calls;
            return detail::normalized_ratio(exact_covering_gradients(A, w, tau_g), *state);
        };
    } else {
        auto rat = std::make_shared<RationalExpSpec>(RationalExpSpec::from_degree(oracle.rat_degree));
        const Index k = oracle.jl_k;
        const std::uint64_t seed = oracle.seed;
        const SolverConfig inner = oracle.inner;
        inst.covering_gradients = [&A, state, rat, inner, tau_g, k, seed](const Vec& w) {
            JlSketch Q = jl_sketch(k, A.d(), hash2(seed, static_cast<std::uint64_t>(state->covering_calls)));
            ++state->covering_calls;
            return detail::normalized_ratio(
                covering_gradients(A, w, tau_g, Q, *rat, inner), *state);
        };
    }
    inst.packing_lambda_max = [&A](const Vec& w) { return w.dot(A.row_norms_sq()); };
    const Index cap = oracle.stats_exact_cap;
    inst.covering_lambda_min = [&A, tau_g, cap](const Vec& w) {
        return tau_g * detail::gram_extremes(A, w, cap).second;
    };
    return inst;
}

namespace detail {

inline LearnResult finish_learn(const RowMatrix& A, double guess, CertificateKind kind,
                                const MpcConfig& cfg, const OracleConfig& oracle,
                                MpcOutcome outcome, const OracleState& state,
                                double nu_g = 0.0) {
    LearnResult res;
    res.guess = guess;
    res.outcome = std::move(outcome);
    res.clamped_negative = state.clamped_negative;
    res.check_factor = oracle.exact ? 1.0 + 3.0 * cfg.epsilon : 3.0;
    if (res.outcome.verdict == MpcVerdict::Infeasible) return res;
    Vec w = res.outcome.weights;
    res.weights = WeightVector(w);
    SpectralStats stats = condition_stats(A, w, StatsMode::Auto, oracle.stats_exact_cap);
    res.stats_after = stats;
    res.certificate = kind == CertificateKind::Kappa ? stats.kappa : stats.tau;
    res.feasible = res.certificate <= res.check_factor * guess;
    if (nu_g > 0.0) {
        res.homoskedastic_certificate = w.maxCoeff() / stats.lambda_min;
        res.feasible = res.feasible &&
                       res.homoskedastic_certificate <= res.check_factor * nu_g;
    }
    return res;
}

} // namespace detail

// Full-gradient learner: returns weights with kappa(W^{1/2} A) = O(kappa_g),
// or an infeasible result when the guess is below what any reweighting
// achieves.
inline LearnResult learn_weights_full_gradient(const RowMatrix& A, double kappa_g_est,
                                               const MpcConfig& cfg = {},
                                               const OracleConfig& oracle = {}) {
    auto state = std::make_shared<detail::OracleState>();
    MpcConfig resolved = detail::resolve_threshold(cfg, A.n(), A.d(), kappa_g_est, oracle);
    MpcInstance inst = make_full_gradient_instance(A, kappa_g_est, resolved, oracle, state);
    MpcOutcome outcome = mpc_solve(inst, resolved);
    return detail::finish_learn(A, kappa_g_est, CertificateKind::Kappa, resolved, oracle,
                                std::move(outcome), *state);
}

// Row-sampling learner: tau(W^{1/2} A) = O(tau_g).
inline LearnResult learn_weights_row_sample(const RowMatrix& A, double tau_g_est,
                                            const MpcConfig& cfg = {},
                                            const OracleConfig& oracle = {}) {
    auto state = std::make_shared<detail::OracleState>();
    MpcConfig resolved = detail::resolve_threshold(cfg, A.n(), A.d(), tau_g_est, oracle);
    MpcInstance inst = make_row_sample_instance(A, tau_g_est, resolved, oracle, state);
    MpcOutcome outcome = mpc_solve(inst, resolved);
    return detail::finish_learn(A, tau_g_est, CertificateKind::Tau, resolved, oracle,
                                std::move(outcome), *state);
}

inline LearnResult learn_weights(const RowMatrix& A, LearnerKind kind, double guess,
                                 const MpcConfig& cfg = {}, const OracleConfig& oracle = {}) {
    return kind == LearnerKind::FullGradient
               ? learn_weights_full_gradient(A, guess, cfg, oracle)
               : learn_weights_row_sample(A, guess, cfg, oracle);
}

// Multiplicative grid search over guesses; returns the smallest feasible one.
inline std::pair<double, LearnResult> grid_search_weights(const RowMatrix& A,
                                                          const GuessSchedule& schedule,
                                                          LearnerKind kind,
                                                          const MpcConfig& cfg = {},
                                                          const OracleConfig& oracle = {}) {
    for (double g = schedule.lo; g <= schedule.hi * (1.0 + 1e-12); g *= schedule.growth) {
        LearnResult res = learn_weights(A, kind, std::max(g, 1.0), cfg, oracle);
        if (res.feasible) return {g, std::move(res)};
    }
    throw AllGuessesInfeasible("no guess in [" + std::to_string(schedule.lo) + ", " +
                               std::to_string(schedule.hi) + "] was feasible");
}

// Diagonal-augmented instance: each packing matrix gains one diagonal
// coordinate (guess/nu_g) e_i. The diagonal block is handled analytically
// (its exponential is separable), never materialized: the packing lambda_max
// becomes max(lambda_max(sum w P), (guess/nu_g) max_i w_i) and the gradients
// gain the term (guess/nu_g) exp((guess/nu_g) w_i) in numerator and
// denominator. Feasible exits certify both the conditioning bound O(guess)
// and ||w||_inf / lambda_min(A^T W A) <= O(nu_g).
inline LearnResult learn_weights_homoskedastic(const RowMatrix& A, double guess, double nu_g,
                                               CertificateKind mode, const MpcConfig& cfg = {},
                                               const OracleConfig& oracle = {}) {
    if (!(nu_g > 0)) throw InvalidArgument("nu_g must be positive");
    if (!(guess >= 1.0)) throw InvalidArgument("conditioning guess must be >= 1");
    auto state = std::make_shared<detail::OracleState>();
    const double ratio = guess / nu_g;

    MpcInstance base = mode == CertificateKind::Kappa
                           ? make_full_gradient_instance(A, guess, cfg, oracle, state)
                           : make_row_sample_instance(A, guess, cfg, oracle, state);
    MpcInstance inst;
    inst.n = A.n();
    inst.d = A.d() + A.n(); // diagonal block enlarges the packing dimension
    inst.initial_weights.resize(A.n());
    double rho = 0.0;
    for (Index i = 0; i < A.n(); ++i) {
        const double lmax_p = std::max(A.row_norms_sq()[i], ratio);
        inst.initial_weights[i] = 1.0 / (static_cast<double>(A.n()) * lmax_p);
        rho = std::max(rho, guess * A.row_norms_sq()[i] / lmax_p);
    }
    inst.rho = rho;
    MpcConfig resolved = detail::resolve_threshold(cfg, inst.n, inst.d, rho, oracle);
    inst.covering_gradients = base.covering_gradients;
    inst.covering_lambda_min = base.covering_lambda_min;
    inst.packing_lambda_max = [&A, ratio, base](const Vec& w) {
        return std::max(base.packing_lambda_max(w), ratio * w.maxCoeff());
    };

    // The normalized augmented gradient needs the raw d-block trace and inner
    // products, so it is assembled here rather than through the base callable.
    const bool scalar_block = mode == CertificateKind::Tau;
    std::function<GradientEstimates(const Vec&)> block;
    if (scalar_block) {
        block = nullptr; // packing sum is fully diagonal, handled below
    } else if (oracle.exact) {
        block = [&A](const Vec& w) {
            return exact_packing_gradients(A, w, PackingMode::RankOne);
        };
    } else {
        const double R = resolved.R;
        const double c = oracle.poly_c > 0 ? oracle.poly_c : cfg.epsilon / 95.0;
        auto poly = std::make_shared<PolyExpSpec>(PolyExpSpec::make(R, c));
        const Index k = oracle.jl_k;
        const std::uint64_t seed = oracle.seed;
        block = [&A, state, poly, k, seed](const Vec& w) {
            JlSketch Q = jl_sketch(k, A.d(), hash2(seed, static_cast<std::uint64_t>(state->packing_calls)));
            return packing_gradients(A, w, PackingMode::RankOne, Q, *poly);
        };
    }
    inst.packing_gradients = [&A, state, block, ratio, scalar_block](const Vec& w) {
        // Softmax numerators of the block-diagonal exponential, shifted for
        // stability: the d-block (or the 1x1 norm slot in Tau mode) plus one
        // analytic diagonal term per row.
        const double shift = std::max(ratio * w.maxCoeff(),
                                      scalar_block ? w.dot(A.row_norms_sq()) : 0.0);
        double trace;
        Vec numer(A.n());
        if (scalar_block) {
            const double d0 = w.dot(A.row_norms_sq());
            trace = std::exp(d0 - shift);
            numer = A.row_norms_sq() * std::exp(d0 - shift);
        } else {
            GradientEstimates g = block(w);
            trace = g.trace_est * std::exp(-shift);
            numer = g.inner_est * std::exp(-shift);
        }
        ++state->packing_calls;
        for (Index i = 0; i < A.n(); ++i) {
            const double diag_term = ratio * std::exp(ratio * w[i] - shift);
            numer[i] += diag_term;
            trace += std::exp(ratio * w[i] - shift);
        }
        GradientEstimates combined;
        combined.trace_est = trace;
        combined.inner_est = std::move(numer);
        return detail::normalized_ratio(combined, *state);
    };

    MpcOutcome outcome = mpc_solve(inst, resolved);
    return detail::finish_learn(A, guess, mode, resolved, oracle, std::move(outcome), *state,
                                nu_g);
}

} // namespace semirandom

#endif
