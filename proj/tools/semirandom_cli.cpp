// Command-line harness: instance generation, weight learning, regression
// experiments, and the canned figure sweeps, all emitting CSV.
//
// Exit codes: 0 ok, 2 usage error, 3 infeasible, 4 numerical failure.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "semirandom/semirandom.hpp"

using namespace semirandom;

int main(int argc, char** argv) {
    CLI::App app{"semirandom: row reweighting that robustifies first-order solvers"};
    app.require_subcommand(1);

    GenerateOptions gen;
    auto* generate = app.add_subcommand("generate", "generate a planted instance (rmx + metadata)");
    generate->add_option("kind", gen.kind, "hard | harder")->required();
    generate->add_option("--t", gen.t);
    generate->add_option("--n1", gen.n1);
    generate->add_option("--n2", gen.n2);
    generate->add_option("--n3", gen.n3);
    generate->add_option("--d", gen.d);
    generate->add_option("--s", gen.s);
    generate->add_option("--seed", gen.seed);
    generate->add_option("-o,--out", gen.out, "output directory or file stem");

    ReweightOptions rw;
    auto* reweight = app.add_subcommand("reweight", "learn row weights for an rmx instance");
    reweight->add_option("input", rw.in_path, "rmx file")->required();
    reweight->add_option("-o,--out", rw.out_path, "weight file (wvec)");
    reweight->add_option("--method", rw.method, "row | full");
    reweight->add_option("--guess", rw.guess, "tau_g or kappa_g estimate (0 -> default)");
    reweight->add_option("--iters", rw.iters);
    reweight->add_option("--alpha", rw.alpha);
    reweight->add_option("--eps", rw.epsilon);
    reweight->add_option("--jl-k", rw.jl_k);
    reweight->add_option("--rat-degree", rw.rat_degree);
    reweight->add_flag("--threshold", rw.threshold_termination,
                       "terminate on the eigenvalue threshold instead of fixed iterations");
    reweight->add_flag("--exact-oracles", rw.exact_oracles);
    reweight->add_option("--seed", rw.seed);

    RegressOptions rg;
    auto* regress = app.add_subcommand("regress", "noise trials / MSE experiments on an instance");
    regress->add_option("input", rg.in_path, "rmx file (metadata sidecar required)")->required();
    regress->add_option("--weights", rg.weights_path, "wvec file for the reweighted arm");
    regress->add_option("--noise", rg.noise, "rownorm | homo | features");
    regress->add_option("--sigma", rg.sigma);
    regress->add_option("--feature-variance", rg.feature_variance);
    regress->add_option("--trials", rg.trials);
    regress->add_option("--solver", rg.solver, "cg | agd | svrg | kaczmarz");
    regress->add_option("--sweep", rg.sweep, "var:lo:hi:count, bounds may be like 4d");
    regress->add_option("-o,--out", rg.out_path);
    regress->add_option("--seed", rg.seed);

    ExperimentOptions ex;
    auto* experiment = app.add_subcommand("experiment", "canned figure reproductions");
    experiment->add_option("name", ex.name, "fig1 | fig2 | fig3 | fig4")->required();
    experiment->add_option("--scale", ex.scale, "full | desk");
    experiment->add_option("--seed", ex.seed);
    experiment->add_option("-o,--out", ex.outdir);
    experiment->add_option("--trials", ex.trials_override, "override the per-point trial count");
    experiment->add_option("--dims", ex.dims_override, "override the d grid");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*generate) {
            GenerateOutput out = cmd_generate(gen);
            std::printf("wrote %s\nwrote %s\n", out.rmx_path.c_str(), out.meta_path.c_str());
            std::printf("tau=%.6g tau_over_d=%.6g kappa=%.6g tau_planted=%.6g\n",
                        out.instance.tau_raw,
                        out.instance.tau_raw / static_cast<double>(out.instance.A.d()),
                        out.instance.kappa_raw, out.instance.tau_planted);
        } else if (*reweight) {
            ReweightOutput out = cmd_reweight(rw);
            std::printf("wrote %s\nwrote %s\n", out.wvec_path.c_str(), out.history_path.c_str());
            std::printf("iters=%ld feasible=%d\n", static_cast<long>(out.iters),
                        out.feasible ? 1 : 0);
            const double d = static_cast<double>(out.d);
            std::printf("tau_before=%.6g tau_before_over_d=%.6g\n", out.tau_before,
                        out.tau_before / d);
            std::printf("tau_after=%.6g tau_after_over_d=%.6g kappa_after=%.6g\n",
                        out.tau_after, out.tau_after / d, out.kappa_after);
        } else if (*regress) {
            cmd_regress(rg);
            std::printf("wrote %s\n", rg.out_path.c_str());
        } else if (*experiment) {
            cmd_experiment(ex);
            std::printf("wrote %s/manifest.txt\n", ex.outdir.c_str());
        }
    } catch (const InvalidArgument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const AllGuessesInfeasible& e) {
        std::fprintf(stderr, "infeasible: %s\n", e.what());
        return 3;
    } catch (const Error& e) {
        std::fprintf(stderr, "failure: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "failure: %s\n", e.what());
        return 4;
    }
    return 0;
}
