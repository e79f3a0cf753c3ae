#ifndef SEMIRANDOM_MPC_HPP
#define SEMIRANDOM_MPC_HPP

#include <cmath>
#include <fstream>
#include <functional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "semirandom/error.hpp"
#include "semirandom/matrix.hpp"

namespace semirandom {

// Oracle-style description of a mixed packing-covering instance. The oracles
// return the normalized matrix-multiplicative-weights gradients
//   grad_P_i = <P_i, exp(sum w P) / Tr exp(sum w P)>
//   grad_C_i = <C_i, exp(-sum w C) / Tr exp(-sum w C)>
// at the given weights; the lambda callables evaluate the while-condition.
struct MpcInstance {
    Index n = 0;
    Index d = 1;         // max(d_p, d_c), enters the default threshold
    double rho = 0.0;    // max_i lambda_max(C_i) / lambda_max(P_i)
    Vec initial_weights; // w_i^(0) = 1 / (n lambda_max(P_i))
    std::function<Vec(const Vec&)> packing_gradients;
    std::function<Vec(const Vec&)> covering_gradients;
    std::function<double(const Vec&)> packing_lambda_max;
    std::function<double(const Vec&)> covering_lambda_min;
};

// Threshold terminates on the eigenvalue while-condition (needs
// per-iteration eigenvalue estimates); FixedIterations is the experimental
// mode.
enum class MpcTermination { Threshold, FixedIterations };

struct MpcConfig {
    double epsilon = 0.2;
    double alpha = 1.0;
    double R = 0.0; // 0 -> log(n d rho) / epsilon
    Index max_iters = 64;
    MpcTermination termination = MpcTermination::FixedIterations;
    bool record_history = false;

    static double default_threshold(Index n, Index d, double rho, double epsilon) {
        const double r = std::log(static_cast<double>(n) * static_cast<double>(d) *
                                  std::max(rho, 1.0)) /
                         epsilon;
        return std::max(r, 1e-2);
    }
};

enum class MpcVerdict { Feasible, Infeasible, IterationCapReached };

struct MpcHistoryRow {
    Index iter = 0;
    double lambda_max_p = 0.0;
    double lambda_min_c = 0.0;
    double delta_l1 = 0.0;
};

struct MpcOutcome {
    MpcVerdict verdict = MpcVerdict::IterationCapReached;
    Vec weights;
    Index iters = 0;
    std::vector<MpcHistoryRow> history;
};

// One multiplicative-weights update: delta_i = max(0, 1 - grad_P_i/grad_C_i)
// with delta_i = 0 whenever grad_C_i = 0 (including 0/0), and
// w_next = w o (1 + alpha delta).
inline std::tuple<Vec, Vec, bool> mpc_step(const Vec& w, const Vec& grads_p,
                                           const Vec& grads_c, double alpha) {
    if (w.size() != grads_p.size() || w.size() != grads_c.size())
        throw DimensionMismatch("mpc_step: gradient lengths differ from weight length");
    const Index n = w.size();
    Vec delta = Vec::Zero(n);
    bool is_zero = true;
    for (Index i = 0; i < n; ++i) {
        if (grads_c[i] > 0.0) {
            const double d = 1.0 - grads_p[i] / grads_c[i];
            if (d > 0.0) {
                delta[i] = d;
                is_zero = false;
            }
        }
    }
    Vec w_next = w.array() * (1.0 + alpha * delta.array());
    return {std::move(w_next), std::move(delta), is_zero};
}

// Algorithm: loop while lambda_max(sum w P) and lambda_min(sum w C) are below
// the threshold R, updating w multiplicatively along the gradient gap.
//
// Threshold mode returns as soon as the while-condition trips. The
// fixed-iteration (experimental) mode keeps the while-condition as a freeze:
// once an eigenvalue crosses R the weights stop updating and the remaining
// iterations only extend the recorded trajectory. Without the freeze an
// overestimated guess keeps every gradient gap positive at the balanced
// point, so the weights grow geometrically until the covering exponentials
// sink below the oracle's precision floor.
//
// A zero update direction means no weighting can make lambda_max strictly
// smaller than lambda_min; the current weights are kept if they already
// satisfy the (1+epsilon)-relaxed feasibility (covers instances feasible
// only with equality), otherwise the verdict is Infeasible.
inline MpcOutcome mpc_solve(const MpcInstance& instance, const MpcConfig& cfg) {
    if (!(cfg.epsilon > 0) || !(cfg.epsilon < 1)) throw InvalidArgument("mpc: epsilon in (0,1)");
    if (!(cfg.alpha > 0)) throw InvalidArgument("mpc: alpha > 0");
    if (cfg.max_iters < 1) throw InvalidArgument("mpc: max_iters >= 1");
    if (!(instance.rho > 0)) throw InvalidArgument("mpc: rho must be positive");
    if ((instance.initial_weights.array() <= 0.0).any())
        throw InvalidArgument("mpc: initial weights must be strictly positive");
    const double R = cfg.R > 0 ? cfg.R : MpcConfig::default_threshold(
                                             instance.n, instance.d, instance.rho, cfg.epsilon);

    MpcOutcome out;
    Vec w = instance.initial_weights;
    bool frozen = false;
    double lp = 0.0, lc = 0.0;
    for (Index t = 0; t < cfg.max_iters; ++t) {
        if (!frozen) {
            lp = instance.packing_lambda_max(w);
            lc = instance.covering_lambda_min(w);
            if (lp > R || lc > R) {
                if (cfg.termination == MpcTermination::Threshold) {
                    out.verdict = MpcVerdict::Feasible;
                    out.weights = w;
                    out.iters = t;
                    return out;
                }
                frozen = true;
            }
        }
        if (frozen) {
            if (cfg.record_history) out.history.push_back({t, lp, lc, 0.0});
            out.iters = t + 1;
            continue;
        }
        Vec gp, gc;
        try {
            gp = instance.packing_gradients(w);
            gc = instance.covering_gradients(w);
        } catch (const Error& e) {
            throw OracleFailure(std::string("gradient oracle failed at iteration ") +
                                std::to_string(t) + ": " + e.what());
        }
        auto [w_next, delta, is_zero] = mpc_step(w, gp, gc, cfg.alpha);
        if (cfg.record_history)
            out.history.push_back({t, lp, lc, delta.lpNorm<1>()});
        if (is_zero) {
            out.iters = t + 1;
            if (lp <= (1.0 + cfg.epsilon) * lc * (1.0 + 1e-9)) {
                out.verdict = MpcVerdict::Feasible;
                out.weights = w;
            } else {
                out.verdict = MpcVerdict::Infeasible;
            }
            return out;
        }
        w = std::move(w_next);
        out.iters = t + 1;
    }
    out.verdict = frozen ? MpcVerdict::Feasible : MpcVerdict::IterationCapReached;
    out.weights = w;
    return out;
}

// Per-iteration history CSV: `iter,lambda_max_P,lambda_min_C,delta_l1`.
inline void write_mpc_history_csv(const std::string& path,
                                  const std::vector<MpcHistoryRow>& history) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "iter,lambda_max_P,lambda_min_C,delta_l1\n";
    for (const auto& row : history)
        out << row.iter << "," << detail::format_float(row.lambda_max_p) << ","
            << detail::format_float(row.lambda_min_c) << ","
            << detail::format_float(row.delta_l1) << "\n";
    if (!out) throw IoError("write failed: " + path);
}

} // namespace semirandom

#endif
