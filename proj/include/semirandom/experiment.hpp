#ifndef SEMIRANDOM_EXPERIMENT_HPP
#define SEMIRANDOM_EXPERIMENT_HPP

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "semirandom/instances.hpp"
#include "semirandom/regression.hpp"
#include "semirandom/weights.hpp"

namespace semirandom {

inline Index thread_budget() {
    if (const char* env = std::getenv("SEMIRANDOM_THREADS")) {
        const long v = std::atol(env);
        if (v >= 1) return static_cast<Index>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<Index>(hw) : 1;
}

// Runs body(i) for i in [0, count) on a small worker pool. Tasks write to
// disjoint slots, so results do not depend on scheduling.
template <typename F>
inline void parallel_for(Index count, F&& body) {
    const Index workers = std::min<Index>(thread_budget(), count);
    if (workers <= 1) {
        for (Index i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<Index> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr first_error;
    std::mutex error_mutex;
    for (Index t = 0; t < workers; ++t)
        pool.emplace_back([&] {
            for (;;) {
                const Index i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

// One row of experiment CSV output. Wall time stays out of the data CSVs so
// repeated runs are byte-identical; it is reported in the run manifest.
struct ExperimentRecord {
    std::string experiment_id;
    std::uint64_t seed = 0;
    Index d = 0, t = 0, n1 = 0, n2 = 0, n3 = 0;
    double s = 0.0;
    std::string sweep_var;
    double sweep_value = 0.0;
    Index trial = 0;
    double mse_unweighted = 0.0;
    double mse_reweighted = 0.0;
    double tau_before = 0.0;
    double tau_after = 0.0;
    Index iters = 0;
    double seconds = 0.0;
    bool anomaly = false; // tau_after > tau_before on a feasible exit
};

inline void write_records_csv(const std::string& path,
                              const std::vector<ExperimentRecord>& records) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "experiment_id,seed,d,t,n1,n2,n3,s,sweep_var,sweep_value,trial,"
           "mse_unweighted,mse_reweighted,tau_before,tau_after,iters,anomaly\n";
    for (const auto& r : records)
        out << r.experiment_id << "," << r.seed << "," << r.d << "," << r.t << "," << r.n1
            << "," << r.n2 << "," << r.n3 << "," << detail::format_float(r.s) << ","
            << r.sweep_var << "," << detail::format_float(r.sweep_value) << "," << r.trial
            << "," << detail::format_float(r.mse_unweighted) << ","
            << detail::format_float(r.mse_reweighted) << ","
            << detail::format_float(r.tau_before) << "," << detail::format_float(r.tau_after)
            << "," << r.iters << "," << (r.anomaly ? 1 : 0) << "\n";
    if (!out) throw IoError("write failed: " + path);
}

struct SweepPointSummary {
    Index d = 0;
    std::string sweep_var;
    double sweep_value = 0.0;
    Index trials = 0;
    double mean_unweighted = 0.0, std_unweighted = 0.0;
    double mean_reweighted = 0.0, std_reweighted = 0.0;
    double tau_before = 0.0, tau_after = 0.0;
};

inline std::vector<SweepPointSummary> summarize_records(
    const std::vector<ExperimentRecord>& records) {
    std::map<std::pair<Index, double>, std::vector<const ExperimentRecord*>> groups;
    for (const auto& r : records) groups[{r.d, r.sweep_value}].push_back(&r);
    std::vector<SweepPointSummary> out;
    for (const auto& [key, rows] : groups) {
        SweepPointSummary s;
        s.d = key.first;
        s.sweep_value = key.second;
        s.sweep_var = rows.front()->sweep_var;
        s.trials = static_cast<Index>(rows.size());
        s.tau_before = rows.front()->tau_before;
        s.tau_after = rows.front()->tau_after;
        double su = 0, sw = 0;
        for (const auto* r : rows) {
            su += r->mse_unweighted;
            sw += r->mse_reweighted;
        }
        const double n = static_cast<double>(rows.size());
        s.mean_unweighted = su / n;
        s.mean_reweighted = sw / n;
        double vu = 0, vw = 0;
        for (const auto* r : rows) {
            vu += (r->mse_unweighted - s.mean_unweighted) * (r->mse_unweighted - s.mean_unweighted);
            vw += (r->mse_reweighted - s.mean_reweighted) * (r->mse_reweighted - s.mean_reweighted);
        }
        if (rows.size() > 1) {
            s.std_unweighted = std::sqrt(vu / (n - 1));
            s.std_reweighted = std::sqrt(vw / (n - 1));
        }
        out.push_back(std::move(s));
    }
    return out;
}

inline void write_summary_csv(const std::string& path,
                              const std::vector<SweepPointSummary>& summaries) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "d,sweep_var,sweep_value,trials,mean_mse_unweighted,std_mse_unweighted,"
           "mean_mse_reweighted,std_mse_reweighted,tau_before,tau_after\n";
    for (const auto& s : summaries)
        out << s.d << "," << s.sweep_var << "," << detail::format_float(s.sweep_value) << ","
            << s.trials << "," << detail::format_float(s.mean_unweighted) << ","
            << detail::format_float(s.std_unweighted) << ","
            << detail::format_float(s.mean_reweighted) << ","
            << detail::format_float(s.std_reweighted) << ","
            << detail::format_float(s.tau_before) << "," << detail::format_float(s.tau_after)
            << "\n";
    if (!out) throw IoError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// MSE sweep runner shared by the regression experiments.
// ---------------------------------------------------------------------------
struct SweepLearnerConfig {
    double guess = 0.0; // 0 -> 5d
    Index iters = 8;
    double alpha = 1.0;
    double epsilon = 0.2;
    Index jl_k = 5;
    int rat_degree = 10;
};

namespace detail {

// Per-trial regression arm with the Gram matrix cached across trials.
struct RegressionArm {
    Vec w;
    LinOp gram_op;
    double tau = 0.0;

    RegressionArm(const RowMatrix& A, Vec weights, Index exact_cap)
        : w(std::move(weights)), gram_op(sym_matrix_op(A.weighted_gram(w))) {
        tau = condition_stats(A, w, StatsMode::Auto, exact_cap).tau;
    }

    Vec solve(const RowMatrix& A, const Vec& b, double tol) const {
        Vec rhs = A.normal_rhs(w, b);
        OperatorSolveResult r = cg_operator_solve(gram_op, rhs, tol, 8 * A.d() + 200);
        if (!r.converged) {
            SolveReport rep;
            rep.x = r.x;
            rep.iters = r.iters;
            throw NotConverged("regression solve stalled at relative residual " +
                                   std::to_string(r.rel_residual),
                               std::move(rep));
        }
        return r.x;
    }
};

} // namespace detail

// One sweep point: generate the instance, learn row-sampling weights with the
// experimental fixed-iteration settings, then run paired regression trials.
inline std::vector<ExperimentRecord> run_mse_point(const PlantedInstance& inst,
                                                   const std::string& experiment_id,
                                                   const std::string& sweep_var,
                                                   double sweep_value, double sigma,
                                                   Index trials, std::uint64_t seed,
                                                   const SweepLearnerConfig& lc,
                                                   Index t_param, Index n1, Index n2, Index n3,
                                                   double s_param) {
    const RowMatrix& A = inst.A;
    const double guess = lc.guess > 0 ? lc.guess : 5.0 * static_cast<double>(A.d());
    MpcConfig mpc;
    mpc.epsilon = lc.epsilon;
    mpc.alpha = lc.alpha;
    mpc.max_iters = lc.iters;
    mpc.termination = MpcTermination::FixedIterations;
    OracleConfig oracle;
    oracle.jl_k = lc.jl_k;
    oracle.rat_degree = lc.rat_degree;
    oracle.seed = hash2(seed, 0x6C6561726EULL);
    LearnResult learned = learn_weights_row_sample(A, guess, mpc, oracle);
    if (!learned.weights)
        throw OracleFailure("weight learning returned infeasible on a sweep point");

    detail::WallTimer timer;
    detail::RegressionArm unweighted(A, Vec::Ones(A.n()), kExactStatsCap);
    detail::RegressionArm reweighted(A, learned.weights->w, kExactStatsCap);
    const double tau_before = unweighted.tau;
    const double tau_after = reweighted.tau;

    std::vector<ExperimentRecord> records(static_cast<std::size_t>(trials));
    for (Index trial = 0; trial < trials; ++trial) {
        NoiseModel model = NoiseModel::row_norm(sigma, hash3(seed, 0x747269616CULL,
                                                             static_cast<std::uint64_t>(trial)));
        Vec b = gen_labels(A, inst.x_true, model);
        Vec xu = unweighted.solve(A, b, 1e-10);
        Vec xw = reweighted.solve(A, b, 1e-10);
        ExperimentRecord r;
        r.experiment_id = experiment_id;
        r.seed = seed;
        r.d = A.d();
        r.t = t_param;
        r.n1 = n1;
        r.n2 = n2;
        r.n3 = n3;
        r.s = s_param;
        r.sweep_var = sweep_var;
        r.sweep_value = sweep_value;
        r.trial = trial;
        r.mse_unweighted = empirical_risk(xu, inst.x_true);
        r.mse_reweighted = empirical_risk(xw, inst.x_true);
        r.tau_before = tau_before;
        r.tau_after = tau_after;
        r.iters = learned.outcome.iters;
        r.seconds = timer.seconds();
        r.anomaly = learned.feasible && tau_after > tau_before;
        records[static_cast<std::size_t>(trial)] = std::move(r);
    }
    return records;
}

} // namespace semirandom

#endif
