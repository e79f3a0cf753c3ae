#ifndef SEMIRANDOM_CLI_COMMANDS_HPP
#define SEMIRANDOM_CLI_COMMANDS_HPP

#include <array>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "semirandom/experiment.hpp"

namespace semirandom {

namespace detail {

// Output argument "dir/" or "dir" -> dir/<stem>.rmx; "path/stem" -> stem files.
inline std::pair<std::string, std::string> instance_paths(const std::string& out,
                                                          const std::string& stem) {
    namespace fs = std::filesystem;
    fs::path p(out.empty() ? "." : out);
    if (out.empty() || out.back() == '/' || fs::is_directory(p)) {
        fs::create_directories(p);
        p /= stem;
    } else if (p.has_parent_path()) {
        fs::create_directories(p.parent_path());
    }
    return {p.string() + ".rmx", p.string() + ".meta"};
}

} // namespace detail

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------
struct GenerateOptions {
    std::string kind = "hard"; // hard | harder
    Index t = 10, n1 = 1000, n2 = 100, n3 = 0, d = 200;
    double s = 200.0;
    std::uint64_t seed = 1;
    std::string out = ".";
};

struct GenerateOutput {
    std::string rmx_path;
    std::string meta_path;
    PlantedInstance instance;
};

inline GenerateOutput cmd_generate(const GenerateOptions& opt) {
    PlantedInstance inst = [&] {
        if (opt.kind == "hard")
            return gen_hard_instance({opt.t, opt.n1, opt.n2, opt.d, opt.s, opt.seed});
        if (opt.kind == "harder")
            return gen_harder_instance({opt.t, opt.n1, opt.n2, opt.n3, opt.d, opt.seed});
        throw InvalidArgument("unknown instance kind '" + opt.kind + "' (hard|harder)");
    }();
    std::ostringstream stem;
    stem << opt.kind << "_d" << opt.d << "_seed" << opt.seed;
    auto [rmx, meta] = detail::instance_paths(opt.out, stem.str());
    write_rmx(rmx, inst.A);
    write_instance_metadata(meta, inst);
    return {rmx, meta, std::move(inst)};
}

// ---------------------------------------------------------------------------
// reweight
// ---------------------------------------------------------------------------
struct ReweightOptions {
    std::string in_path;
    std::string out_path; // weight file; history lands next to it
    std::string method = "row"; // row | full
    double guess = 0.0;         // 0 -> 5d (row) or 4 (full)
    Index iters = 8;
    double alpha = 1.0;
    double epsilon = 0.2;
    Index jl_k = 5;
    int rat_degree = 10;
    bool threshold_termination = false;
    bool exact_oracles = false;
    std::uint64_t seed = 0;
};

struct ReweightOutput {
    std::string wvec_path;
    std::string history_path;
    Index d = 0;
    double tau_before = 0.0;
    double tau_after = 0.0;
    double kappa_after = 0.0;
    bool feasible = false;
    Index iters = 0;
};

inline ReweightOutput cmd_reweight(const ReweightOptions& opt) {
    RowMatrix A = read_rmx(opt.in_path);
    const double guess = opt.guess > 0
                             ? opt.guess
                             : (opt.method == "row" ? 5.0 * static_cast<double>(A.d()) : 4.0);
    MpcConfig mpc;
    mpc.epsilon = opt.epsilon;
    mpc.alpha = opt.alpha;
    mpc.max_iters = opt.iters;
    mpc.termination = opt.threshold_termination ? MpcTermination::Threshold
                                                : MpcTermination::FixedIterations;
    mpc.record_history = true;
    OracleConfig oracle;
    oracle.jl_k = opt.jl_k;
    oracle.rat_degree = opt.rat_degree;
    oracle.exact = opt.exact_oracles;
    oracle.seed = hash2(opt.seed, 0x7265776569676874ULL);

    LearnResult res = [&] {
        if (opt.method == "row") return learn_weights_row_sample(A, guess, mpc, oracle);
        if (opt.method == "full") return learn_weights_full_gradient(A, guess, mpc, oracle);
        throw InvalidArgument("unknown method '" + opt.method + "' (row|full)");
    }();
    if (!res.weights)
        throw AllGuessesInfeasible("guess " + std::to_string(guess) +
                                   " was declared infeasible by the solver");

    std::string wvec_path = opt.out_path.empty() ? opt.in_path + ".wvec" : opt.out_path;
    write_wvec(wvec_path, res.weights->w);
    std::string history_path = wvec_path + ".history.csv";
    write_mpc_history_csv(history_path, res.outcome.history);

    ReweightOutput out;
    out.wvec_path = wvec_path;
    out.history_path = history_path;
    out.d = A.d();
    out.tau_before = condition_stats(A, Vec::Ones(A.n())).tau;
    out.tau_after = res.stats_after->tau;
    out.kappa_after = res.stats_after->kappa;
    out.feasible = res.feasible;
    out.iters = res.outcome.iters;
    return out;
}

// ---------------------------------------------------------------------------
// regress
// ---------------------------------------------------------------------------
struct RegressOptions {
    std::string in_path;      // rmx; <in_path minus .rmx>.meta must exist
    std::string weights_path; // optional wvec
    std::string noise = "rownorm"; // rownorm | homo | features
    double sigma = 0.1;
    double feature_variance = 0.01; // Sigma' = this * I for the features model
    Index trials = 15;
    std::string solver = "cg"; // cg | agd | svrg | kaczmarz
    std::string sweep;         // e.g. "n1:4d:40d:10"
    std::string out_path = "regress.csv";
    std::uint64_t seed = 0;
};

namespace detail {

inline SolveMethod parse_method(const std::string& name) {
    if (name == "cg") return SolveMethod::CG;
    if (name == "agd") return SolveMethod::AGD;
    if (name == "svrg") return SolveMethod::SVRG;
    if (name == "kaczmarz") return SolveMethod::Kaczmarz;
    throw InvalidArgument("unknown solver '" + name + "'");
}

inline NoiseModel parse_noise(const std::string& name, double sigma, double feature_variance,
                              Index d) {
    if (name == "rownorm") return NoiseModel::row_norm(sigma, 0);
    if (name == "homo") return NoiseModel::homoskedastic(sigma, 0);
    if (name == "features")
        return NoiseModel::noisy_features(feature_variance * Mat::Identity(d, d), 0);
    throw InvalidArgument("unknown noise model '" + name + "' (rownorm|homo|features)");
}

inline std::string meta_path_for(const std::string& rmx_path) {
    if (rmx_path.size() > 4 && rmx_path.substr(rmx_path.size() - 4) == ".rmx")
        return rmx_path.substr(0, rmx_path.size() - 4) + ".meta";
    return rmx_path + ".meta";
}

// "<var>:<lo>:<hi>:<count>" where lo/hi may be multiples of d like "4d".
struct SweepSpec {
    std::string var;
    double lo = 0.0, hi = 0.0;
    Index count = 0;
};

inline std::optional<SweepSpec> parse_sweep(const std::string& text, Index d) {
    if (text.empty()) return std::nullopt;
    std::stringstream ss(text);
    std::string var, lo_s, hi_s, count_s;
    if (!std::getline(ss, var, ':') || !std::getline(ss, lo_s, ':') ||
        !std::getline(ss, hi_s, ':') || !std::getline(ss, count_s))
        throw InvalidArgument("sweep spec must be var:lo:hi:count");
    auto parse_bound = [d](const std::string& s) {
        if (!s.empty() && (s.back() == 'd' || s.back() == 'D'))
            return std::stod(s.substr(0, s.size() - 1)) * static_cast<double>(d);
        return std::stod(s);
    };
    SweepSpec spec;
    spec.var = var;
    spec.lo = parse_bound(lo_s);
    spec.hi = parse_bound(hi_s);
    spec.count = std::stol(count_s);
    if (spec.count < 1 || !(spec.lo > 0) || spec.hi < spec.lo)
        throw InvalidArgument("bad sweep range");
    return spec;
}

} // namespace detail

// Without --sweep: per-trial rows `trial,model,sigma,weighted,mse,surrogate`
// plus a mean/std summary footer. With --sweep: regenerated instances per
// point and the experiment-shaped CSV.
inline void cmd_regress(const RegressOptions& opt) {
    RowMatrix A = read_rmx(opt.in_path);
    InstanceMetadata meta = read_instance_metadata(detail::meta_path_for(opt.in_path));
    if (meta.x_true.size() != A.d())
        throw IoError("metadata x_true missing or of wrong length");
    SolverConfig solver_cfg;
    solver_cfg.method = detail::parse_method(opt.solver);
    solver_cfg.tol = 1e-10;

    auto sweep = detail::parse_sweep(opt.sweep, A.d());
    if (!sweep) {
        std::optional<Vec> w;
        if (!opt.weights_path.empty()) {
            w = read_wvec(opt.weights_path);
            if (w->size() != A.n()) throw DimensionMismatch("weight file length != n");
        }
        NoiseModel base = detail::parse_noise(opt.noise, opt.sigma, opt.feature_variance, A.d());
        std::ofstream out(opt.out_path);
        if (!out) throw IoError("cannot open for writing: " + opt.out_path);
        out << "trial,model,sigma,weighted,mse,surrogate\n";
        std::vector<std::array<double, 2>> mses; // per trial: unweighted, weighted
        Vec ones = Vec::Ones(A.n());
        const double surrogate_u = surrogate_bounds(A, ones, base);
        const double surrogate_w = w ? surrogate_bounds(A, *w, base) : 0.0;
        // The default CG path caches the Gram matrix across trials; other
        // solvers go through the generic per-trial solve.
        const bool cached = solver_cfg.method == SolveMethod::CG;
        std::optional<detail::RegressionArm> arm_u, arm_w;
        if (cached) {
            arm_u.emplace(A, ones, kExactStatsCap);
            if (w) arm_w.emplace(A, *w, kExactStatsCap);
        }
        auto solve_arm = [&](const Vec& b, bool weighted) {
            SolverConfig cfg = solver_cfg;
            cfg.seed = hash2(opt.seed, weighted ? 2 : 1);
            const Vec& wv = weighted ? *w : ones;
            try {
                if (cached) return (weighted ? *arm_w : *arm_u).solve(A, b, cfg.tol);
                return weighted_regression(A, b, wv, cfg);
            } catch (const NotConverged& e) {
                return e.report().x; // recorded per-row, not fatal
            }
        };
        for (Index trial = 0; trial < opt.trials; ++trial) {
            NoiseModel model = base.with_seed(hash3(opt.seed, 0x726567ULL,
                                                    static_cast<std::uint64_t>(trial)));
            Vec b = gen_labels(A, meta.x_true, model);
            double mse_u = empirical_risk(solve_arm(b, false), meta.x_true);
            double mse_w = 0.0;
            out << trial << "," << model.name() << "," << detail::format_float(opt.sigma)
                << ",0," << detail::format_float(mse_u) << ","
                << detail::format_float(surrogate_u) << "\n";
            if (w) {
                mse_w = empirical_risk(solve_arm(b, true), meta.x_true);
                out << trial << "," << model.name() << "," << detail::format_float(opt.sigma)
                    << ",1," << detail::format_float(mse_w) << ","
                    << detail::format_float(surrogate_w) << "\n";
            }
            mses.push_back({mse_u, mse_w});
        }
        // summary footer
        for (int arm = 0; arm < (w ? 2 : 1); ++arm) {
            double sum = 0;
            for (const auto& m : mses) sum += m[static_cast<std::size_t>(arm)];
            const double mean = sum / static_cast<double>(mses.size());
            double var = 0;
            for (const auto& m : mses) {
                const double dlt = m[static_cast<std::size_t>(arm)] - mean;
                var += dlt * dlt;
            }
            const double sd = mses.size() > 1 ? std::sqrt(var / (static_cast<double>(mses.size()) - 1)) : 0.0;
            out << "# " << (arm ? "weighted" : "unweighted")
                << " mean=" << detail::format_float(mean) << " std=" << detail::format_float(sd)
                << "\n";
        }
        if (!out) throw IoError("write failed: " + opt.out_path);
        return;
    }

    // Sweep mode: regenerate instances from the metadata params, varying one
    // count, and emit the experiment-shaped CSV with per-point reweighting.
    if (sweep->var != "n1" && sweep->var != "n2")
        throw InvalidArgument("sweep variable must be n1 or n2");
    if (meta.kind != "hard" && meta.kind != "harder") throw InvalidArgument("unknown instance kind in metadata");
    std::vector<ExperimentRecord> records;
    SweepLearnerConfig lc;
    lc.iters = meta.kind == "hard" ? 8 : 20;
    std::vector<std::vector<ExperimentRecord>> per_point(static_cast<std::size_t>(sweep->count));
    parallel_for(sweep->count, [&](Index p) {
        const double frac = sweep->count > 1
                                ? static_cast<double>(p) / static_cast<double>(sweep->count - 1)
                                : 0.0;
        const Index value = static_cast<Index>(sweep->lo + frac * (sweep->hi - sweep->lo));
        const std::uint64_t pt_seed = hash3(opt.seed, 0x7377656570ULL,
                                            static_cast<std::uint64_t>(p));
        PlantedInstance inst =
            meta.kind == "hard"
                ? gen_hard_instance({meta.t, sweep->var == "n1" ? value : meta.n1,
                                     sweep->var == "n2" ? value : meta.n2, meta.d, meta.s,
                                     pt_seed})
                : gen_harder_instance({meta.t, sweep->var == "n1" ? value : meta.n1,
                                       sweep->var == "n2" ? value : meta.n2, meta.n3, meta.d,
                                       pt_seed});
        per_point[static_cast<std::size_t>(p)] = run_mse_point(
            inst, "regress_sweep", sweep->var, static_cast<double>(value), opt.sigma,
            opt.trials, pt_seed, lc, meta.t,
            sweep->var == "n1" ? value : meta.n1, sweep->var == "n2" ? value : meta.n2,
            meta.n3, meta.s);
    });
    for (auto& pt : per_point)
        for (auto& r : pt) records.push_back(std::move(r));
    write_records_csv(opt.out_path, records);
}

// ---------------------------------------------------------------------------
// experiment
// ---------------------------------------------------------------------------
struct ExperimentOptions {
    std::string name;          // fig1 | fig2 | fig3 | fig4
    std::string scale = "desk"; // full | desk
    std::uint64_t seed = 5;
    std::string outdir = "experiments";
    Index trials_override = 0; // 0 -> figure default
    std::vector<Index> dims_override;
};

namespace detail {

inline std::vector<Index> linspace_counts(double lo, double hi, Index count) {
    std::vector<Index> out;
    for (Index i = 0; i < count; ++i) {
        const double frac = count > 1 ? static_cast<double>(i) / static_cast<double>(count - 1)
                                      : 0.0;
        out.push_back(static_cast<Index>(lo + frac * (hi - lo)));
    }
    return out;
}

} // namespace detail

inline void cmd_experiment(const ExperimentOptions& opt) {
    namespace fs = std::filesystem;
    if (opt.scale != "full" && opt.scale != "desk")
        throw InvalidArgument("scale must be full or desk");
    const bool desk = opt.scale == "desk";
    fs::create_directories(opt.outdir);
    detail::WallTimer timer;
    std::ostringstream manifest;
    manifest << "experiment=" << opt.name << "\nscale=" << opt.scale << "\nseed=" << opt.seed
             << "\n";
    if (desk)
        manifest << "desk_reduction=row counts / 4 (clipped at the harder-instance "
                    "validity floor n2 >= 4d), trials / 3 relative to full scale\n";

    auto run_sweep_figure = [&](const std::string& fig, const std::vector<Index>& dims,
                                const std::string& var, double lo_mult, double hi_mult,
                                Index points, Index trials_full, bool harder,
                                Index learner_iters) {
        const Index trials = opt.trials_override > 0 ? opt.trials_override
                                                     : (desk ? trials_full / 3 : trials_full);
        manifest << "trials=" << trials << "\npoints=" << points << "\n";
        for (Index d : dims) {
            const double reduction = desk ? 0.25 : 1.0;
            double lo = lo_mult * reduction, hi = hi_mult * reduction;
            if (harder) {
                // the harder construction needs n2 >= 4d for the masking
                // block to span the complement
                lo = std::max(lo, 4.0);
                hi = std::max(hi, 6.0);
            }
            std::vector<Index> values = detail::linspace_counts(
                lo * static_cast<double>(d), hi * static_cast<double>(d), points);
            std::vector<std::vector<ExperimentRecord>> per_point(
                static_cast<std::size_t>(points));
            parallel_for(points, [&](Index p) {
                const Index value = values[static_cast<std::size_t>(p)];
                const std::uint64_t pt_seed =
                    hash3(hash2(opt.seed, static_cast<std::uint64_t>(d)), 0x666967ULL,
                          static_cast<std::uint64_t>(p));
                SweepLearnerConfig lc;
                lc.iters = learner_iters;
                if (!harder) {
                    HardInstanceParams hp{10, value, d / 2, d, static_cast<double>(d), pt_seed};
                    PlantedInstance inst = gen_hard_instance(hp);
                    per_point[static_cast<std::size_t>(p)] = run_mse_point(
                        inst, fig, var, static_cast<double>(value), 0.1, trials, pt_seed, lc,
                        hp.t, hp.n1, hp.n2, 0, hp.s);
                } else {
                    HarderInstanceParams hp{4, 16, value, d / 2, d, pt_seed};
                    PlantedInstance inst = gen_harder_instance(hp);
                    per_point[static_cast<std::size_t>(p)] = run_mse_point(
                        inst, fig, var, static_cast<double>(value), 0.1, trials, pt_seed, lc,
                        hp.t, hp.n1, hp.n2, hp.n3, 0.0);
                }
            });
            std::vector<ExperimentRecord> records;
            for (auto& pt : per_point)
                for (auto& r : pt) records.push_back(std::move(r));
            const std::string base = opt.outdir + "/" + fig + "_d" + std::to_string(d);
            write_records_csv(base + ".csv", records);
            write_summary_csv(base + "_summary.csv", summarize_records(records));
            manifest << "file=" << base << ".csv\nfile=" << base << "_summary.csv\n";
        }
    };

    std::vector<Index> dims = opt.dims_override;
    if (opt.name == "fig1") {
        if (dims.empty()) dims = {100, 200, 300};
        run_sweep_figure("fig1", dims, "n1", 4.0, 40.0, 10, 15, false, 8);
    } else if (opt.name == "fig2") {
        if (dims.empty()) dims = {100, 200, 300};
        run_sweep_figure("fig2", dims, "n2", 4.0, 24.0, 6, 15, true, 20);
    } else if (opt.name == "fig3") {
        const Index n2 = desk ? 1600 : 6000; // desk clipped at the 4d floor
        const Index trials_seeds = 3;
        manifest << "n2=" << n2 << "\nseeds=" << trials_seeds << "\n";
        std::vector<std::string> paths(trials_seeds);
        std::vector<double> finals(trials_seeds);
        parallel_for(trials_seeds, [&](Index i) {
            const std::uint64_t s = hash3(opt.seed, 0x66696733ULL, static_cast<std::uint64_t>(i));
            HarderInstanceParams hp{4, 16, n2, 200, 400, s};
            PlantedInstance inst = gen_harder_instance(hp);
            MpcConfig mpc;
            mpc.max_iters = 20;
            mpc.record_history = true;
            OracleConfig oracle;
            oracle.seed = hash2(s, 2);
            const double guess = 2000.0;
            LearnResult res = learn_weights_row_sample(inst.A, guess, mpc, oracle);
            const std::string path = opt.outdir + "/fig3_seed" + std::to_string(i) + ".csv";
            std::ofstream out(path);
            if (!out) throw IoError("cannot open for writing: " + path);
            out << "iter,tau\n";
            for (const auto& row : res.outcome.history)
                out << row.iter << ","
                    << detail::format_float(row.lambda_max_p * guess / row.lambda_min_c) << "\n";
            out << res.outcome.history.size() << ","
                << detail::format_float(res.stats_after->tau) << "\n";
            paths[static_cast<std::size_t>(i)] = path;
            finals[static_cast<std::size_t>(i)] = res.stats_after->tau;
        });
        for (Index i = 0; i < trials_seeds; ++i)
            manifest << "file=" << paths[static_cast<std::size_t>(i)]
                     << " final_tau=" << detail::format_float(finals[static_cast<std::size_t>(i)])
                     << "\n";
    } else if (opt.name == "fig4") {
        if (dims.empty()) dims = detail::linspace_counts(50, 500, 10);
        const Index trials = opt.trials_override > 0 ? opt.trials_override : (desk ? 5 : 15);
        manifest << "trials=" << trials << "\n";
        std::vector<std::vector<ExperimentRecord>> per_d(dims.size());
        parallel_for(static_cast<Index>(dims.size()), [&](Index i) {
            const Index d = dims[static_cast<std::size_t>(i)];
            const Index n2 = desk ? 4 * d : 10 * d; // desk clipped at the 4d floor
            const std::uint64_t pt_seed = hash3(opt.seed, 0x66696734ULL,
                                                static_cast<std::uint64_t>(d));
            HarderInstanceParams hp{4, 16, n2, d / 2, d, pt_seed};
            PlantedInstance inst = gen_harder_instance(hp);
            SweepLearnerConfig lc;
            lc.iters = 20;
            per_d[static_cast<std::size_t>(i)] =
                run_mse_point(inst, "fig4", "d", static_cast<double>(d), 0.1, trials, pt_seed,
                              lc, hp.t, hp.n1, hp.n2, hp.n3, 0.0);
        });
        std::vector<ExperimentRecord> records;
        for (auto& pt : per_d)
            for (auto& r : pt) records.push_back(std::move(r));
        const std::string base = opt.outdir + "/fig4";
        write_records_csv(base + ".csv", records);
        write_summary_csv(base + "_summary.csv", summarize_records(records));
        manifest << "file=" << base << ".csv\nfile=" << base << "_summary.csv\n";
    } else {
        throw InvalidArgument("unknown experiment '" + opt.name + "' (fig1|fig2|fig3|fig4)");
    }

    manifest << "wall_seconds=" << timer.seconds() << "\n";
    std::ofstream mf(opt.outdir + "/manifest.txt");
    if (!mf) throw IoError("cannot open for writing: " + opt.outdir + "/manifest.txt");
    mf << manifest.str();
}

} // namespace semirandom

#endif
