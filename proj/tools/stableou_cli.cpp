// stableou: simulate, estimate, mc and density subcommands.
// Exit codes: 0 success, 2 input/validation error, 3 estimation failure.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stableou/stableou.hpp"

namespace so = stableou;
namespace fs = std::filesystem;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_validation = 2;
constexpr int exit_estimation = 3;

struct SimulateArgs {
    std::string params, covariate, out, sidecar = "integrals";
    std::size_t n = 0;
    double T = 1.0;
    std::uint64_t seed = 0;
};

struct EstimateArgs {
    std::string path, pipeline = "one-step", information = "fisher", out;
    std::optional<double> fix_r;
    int refine_steps = 20;
};

struct McArgs {
    std::string config, out;
    unsigned threads = 0;
    bool quiet = false;
};

struct DensityArgs {
    double beta = 0.0;
    std::vector<double> y;
};

int run_simulate(const SimulateArgs& a) {
    const so::io::ParamsFile pf = so::io::params_file_from_json(so::io::read_json(a.params, "params"));
    const so::CovariateSpec cov =
        a.covariate.empty() ? so::CovariateSpec::constant(pf.theta.q()) : so::io::read_covariate(a.covariate, a.T);
    if (cov.q() != pf.theta.q()) throw so::ValidationError("covariate", "dimension must match params.mu");
    so::io::SidecarForm form;
    if (a.sidecar == "integrals") form = so::io::SidecarForm::integrals;
    else if (a.sidecar == "trajectory") form = so::io::SidecarForm::trajectory;
    else throw so::ValidationError("sidecar", "must be integrals or trajectory");
    so::Engine rng(a.seed);
    const so::ObservedPath path = so::simulate_path(pf.theta, cov, pf.y0, a.n, a.T, rng);
    const so::io::PathFiles f = so::io::write_path(path, a.out, form);
    std::cout << f.manifest.string() << "\n";
    return exit_ok;
}

int run_estimate(const EstimateArgs& a) {
    const so::ObservedPath path = so::io::read_path(a.path);
    so::EstimateOptions opts;
    opts.pipeline = so::io::parse_pipeline(a.pipeline);
    opts.information = so::io::parse_information(a.information);
    opts.preliminary.fix_r = a.fix_r;
    if (a.refine_steps < 1) throw so::ValidationError("refine-steps", "must be >= 1");
    opts.refine_steps = a.refine_steps;
    const so::EstimationResult res = so::estimate(path, opts);
    so::Json j = so::result_json(res, opts.pipeline);
    j["covariate_form"] = path.form() == so::CovariateForm::full_trajectory ? "full_trajectory" : "integrals_only";
    const std::string text = so::io::dump_json(j);
    if (a.out.empty()) std::cout << text;
    else so::io::write_text(a.out, text);
    return exit_ok;
}

int run_mc(const McArgs& a) {
    so::McConfig cfg = so::io::read_mc_config(a.config);
    if (!a.out.empty()) cfg.outputs = a.out;
    so::ProgressCallback progress;
    if (!a.quiet) {
        progress = [](std::size_t n, std::size_t done, std::size_t total) {
            if (done % 50 == 0 || done == total) std::fprintf(stderr, "n=%zu: %zu/%zu replications\n", n, done, total);
        };
    }
    const so::McReport rep = so::run_experiment(cfg, a.threads, progress);
    if (cfg.outputs.empty()) {
        std::cout << so::io::dump_json(so::report_json(rep, cfg));
    } else {
        so::io::write_report(rep, cfg, cfg.outputs);
        std::cout << (fs::path(cfg.outputs) / "report.json").string() << "\n";
    }
    return exit_ok;
}

int run_density(const DensityArgs& a) {
    const so::StabilityIndex beta(a.beta);
    const so::StableKernel kernel(beta);
    std::cout << "y,pdf,cdf,score_y,score_beta\n";
    for (double y : a.y) {
        const so::ScorePoint s = kernel.scores(y);
        std::cout << so::io::format_double(y) << "," << so::io::format_double(kernel.pdf(y)) << ","
                  << so::io::format_double(kernel.cdf(y)) << "," << so::io::format_double(s.g) << ","
                  << so::io::format_double(s.f) << "\n";
    }
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulation and estimation for stable-driven Ornstein-Uhlenbeck regression"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* s = app.add_subcommand("simulate", "Simulate a path and write path CSV, covariate sidecar and manifest");
    s->add_option("--params", sim.params, "Parameter JSON {lambda, mu, beta, sigma, y0?, box?}")->required();
    s->add_option("--covariate", sim.covariate, "Covariate spec JSON (default: constant, q = len(mu))");
    s->add_option("--n", sim.n, "Number of observation intervals")->required();
    s->add_option("--t", sim.T, "Time horizon T")->default_val(1.0);
    s->add_option("--seed", sim.seed, "Random seed")->required();
    s->add_option("--out", sim.out, "Manifest file name (stem.json)")->required();
    s->add_option("--sidecar", sim.sidecar, "Covariate sidecar content: integrals | trajectory")->default_val("integrals");

    EstimateArgs est;
    auto* e = app.add_subcommand("estimate", "Estimate theta from a path manifest");
    e->add_option("--path", est.path, "Path manifest JSON")->required();
    e->add_option("--pipeline", est.pipeline, "prelim | one-step | refined")->default_val("one-step");
    e->add_option("--fix-r", est.fix_r, "Power-variation exponent (skips the pilot)");
    e->add_option("--information", est.information, "Information used by the one-step update: fisher | observed")
        ->default_val("fisher");
    e->add_option("--refine-steps", est.refine_steps, "Maximum Newton iterations for the refined pipeline")->default_val(20);
    e->add_option("--out", est.out, "Result JSON file (default: standard output)");

    McArgs mc;
    auto* m = app.add_subcommand("mc", "Run a Monte Carlo experiment");
    m->add_option("--config", mc.config, "Experiment config JSON")->required();
    m->add_option("--threads", mc.threads, "Worker threads (0 = hardware concurrency)")->default_val(0);
    m->add_option("--out", mc.out, "Output directory (overrides config.outputs)");
    m->add_flag("--quiet", mc.quiet, "No progress lines");

    DensityArgs den;
    auto* d = app.add_subcommand("density", "Tabulate the standard symmetric stable density");
    d->add_option("--beta", den.beta, "Stability index in (0, 2)")->required();
    d->add_option("--y", den.y, "Evaluation points")->required()->expected(1, -1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? exit_ok : exit_validation;
    }

    try {
        if (*s) return run_simulate(sim);
        if (*e) return run_estimate(est);
        if (*m) return run_mc(mc);
        if (*d) return run_density(den);
    } catch (const so::ValidationError& err) {
        std::fprintf(stderr, "error: %s\n", err.what());
        return exit_validation;
    } catch (const so::DomainError& err) {
        std::fprintf(stderr, "error: %s\n", err.what());
        return exit_validation;
    } catch (const so::EstimationError& err) {
        std::fprintf(stderr, "estimation failed: reason \"%s\" at stage %s\n%s\n", so::to_string(err.reason()),
                     err.stage().c_str(), err.what());
        return exit_estimation;
    } catch (const so::AccuracyError& err) {
        std::fprintf(stderr, "estimation failed: reason \"%s\"\n%s\n", so::to_string(so::FailureReason::accuracy_not_reached),
                     err.what());
        return exit_estimation;
    } catch (const std::exception& err) {
        std::fprintf(stderr, "error: %s\n", err.what());
        return exit_validation;
    }
    return exit_validation;
}
