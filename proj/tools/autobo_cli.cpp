// Command-line driver: run experiments, meta-optimize weights, verify summaries.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "autobo/autobo.hpp"

namespace {

enum ExitCode { ok = 0, spec_error = 2, run_error = 3, protocol_error = 4 };

// "lo:hi,lo:hi,..."
autobo::Bounds parse_bounds(const std::string& text) {
    autobo::Bounds out;
    for (const auto& part : autobo::split_csv_line(text)) {
        const auto colon = part.find(':');
        if (colon == std::string::npos) throw autobo::ArgumentError("bounds must look like lo:hi,lo:hi");
        out.emplace_back(autobo::parse_csv_double(part.substr(0, colon)), autobo::parse_csv_double(part.substr(colon + 1)));
    }
    autobo::validate_bounds(out);
    return out;
}

int cmd_run(autobo::ExperimentSpec spec, const std::vector<std::string>& policy_texts, const std::string& bounds_text) {
    for (const auto& p : policy_texts) spec.policies.push_back(autobo::parse_policy(p));
    if (spec.policies.empty()) spec.policies.push_back(autobo::PolicySpec::fixed(autobo::AcquisitionKind::ei()));
    if (!bounds_text.empty()) spec.bounds = parse_bounds(bounds_text);
    if (spec.is_external() && spec.dim == 0) spec.dim = static_cast<int>(spec.bounds.size());
    spec.validate();

    const auto result = autobo::run_experiment(spec);
    for (const auto& p : result.report.policies) {
        std::printf("%-24s final mean %s = %.4f (std %.4f)\n", p.name.c_str(),
                    result.report.metric == "log10_abs_regret" ? "log10 regret" : "best", p.stats.mean.back(),
                    p.stats.std.back());
    }
    std::printf("wrote %s, %s, %s\n", result.csv_path.c_str(), result.json_path.c_str(), result.svg_path.c_str());
    bool protocol = false;
    for (const auto& f : result.failures) {
        std::fprintf(stderr, "policy %s failed at rep %zu: %s\n", f.name.c_str(), f.rep, f.message.c_str());
        protocol = protocol || f.protocol;
    }
    if (result.failures.empty()) return ok;
    return protocol ? protocol_error : run_error;
}

struct MetaArgs {
    std::string objective = "branin";
    double noise_std = 0.0;
    std::string out = "meta-out";
};

int cmd_meta(const MetaArgs& args, autobo::MetaConfig meta) {
    const auto bench = autobo::benchmark(args.objective);
    const auto objective = autobo::with_noise(autobo::make_objective(bench), args.noise_std,
                                              autobo::make_rng(meta.seed, autobo::Stream::observation_noise));
    const auto result = autobo::meta_optimize(objective, meta);

    std::filesystem::create_directories(args.out);
    {
        std::ofstream csv(std::filesystem::path(args.out) / "outer_trace.csv", std::ios::binary);
        autobo::write_trace_csv(csv, result.outer_trace, 0, true);
    }
    nlohmann::json j{{"objective", args.objective},
                     {"weights", result.weights},
                     {"raw_weights", result.raw_weights},
                     {"meta_objective", result.value},
                     {"recommended_weights", result.recommended_weights},
                     {"seeds", nlohmann::json::array()}};
    for (const auto& s : meta.seeds) j["seeds"].push_back(autobo::to_json(s));
    std::ofstream(std::filesystem::path(args.out) / "meta.json", std::ios::binary) << j.dump(2) << '\n';

    std::printf("weights:");
    for (double w : result.weights) std::printf(" %.4f", w);
    std::printf("\nmean final best: %.6g\n", result.value);
    return ok;
}

int cmd_verify(const std::string& out) {
    const auto v = autobo::verify_summary(out);
    std::printf("%s\n", v.message.c_str());
    return v.identical ? ok : run_error;
}

int cmd_list() {
    for (const auto& name : autobo::benchmark_names()) {
        const auto b = autobo::benchmark(name);
        std::printf("%-12s dim=%d f_star=%.10g bounds=", name.c_str(), b.dim, b.f_star);
        for (std::size_t j = 0; j < b.bounds.size(); ++j)
            std::printf("%s%g:%g", j ? "," : "", b.bounds[j].first, b.bounds[j].second);
        std::printf("\n");
    }
    return ok;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian optimization with acquisition-function generator policies"};
    app.require_subcommand(1);

    autobo::ExperimentSpec spec;
    std::vector<std::string> policies;
    std::string bounds_text;
    auto* run = app.add_subcommand("run", "Run repeated BO experiments and write raw.csv, summary.json, regret.svg");
    run->add_option("--objective", spec.objective_name, "Benchmark name (see list-benchmarks)");
    run->add_option("--external-cmd", spec.external_cmd, "Command speaking the line-delimited JSON objective protocol");
    run->add_option("--dim", spec.dim, "Dimension of an external objective");
    run->add_option("--bounds", bounds_text, "Bounds of an external objective, lo:hi,lo:hi,...");
    run->add_option("--policy", policies, "Policy (repeatable): ei, pi, lcb[:kappa], random, sequential, weighted[:w/w/w], "
                                          "hedge[:eta], noised:<scale>:<base>, random-search, or a JSON object");
    run->add_option("--reps", spec.reps, "Repetitions per policy")->capture_default_str();
    run->add_option("--iters", spec.n_iters, "BO iterations after the initial design")->capture_default_str();
    run->add_option("--init", spec.n_init, "Initial design size")->capture_default_str();
    run->add_option("--noise-std", spec.noise_std, "Observation noise standard deviation")->capture_default_str();
    run->add_option("--grid-size", spec.grid_size, "Acquisition grid candidates per iteration")->capture_default_str();
    run->add_option("--seed", spec.seed, "Base seed; repetition r uses seed + r")->capture_default_str();
    run->add_option("--out", spec.out_dir, "Output directory")->capture_default_str();
    run->add_option("--bootstrap-samples", spec.bootstrap_samples, "Bootstrap resamples")->capture_default_str();
    run->add_option("--gp-restarts", spec.gp_restarts, "Hyperparameter restarts per fit")->capture_default_str();
    run->add_flag("--refine-local", spec.refine_local, "Polish the grid argmax with a pattern search");
    run->add_option("--workers", spec.workers, "Worker threads (0 = hardware concurrency)")->capture_default_str();
    run->add_option("--timeout", spec.external_timeout, "Per-evaluation timeout for external objectives, seconds")
        ->capture_default_str();
    run->add_flag("--concurrent-safe", spec.external_concurrent_safe, "External command may run in parallel instances");

    MetaArgs meta_args;
    autobo::MetaConfig meta;
    meta.inner_config.n_iters = 25;
    auto* meta_cmd = app.add_subcommand("meta", "Meta-optimize the weighted policy's weights with an outer BO loop");
    meta_cmd->add_option("--objective", meta_args.objective, "Benchmark name")->capture_default_str();
    meta_cmd->add_option("--noise-std", meta_args.noise_std, "Observation noise standard deviation")->capture_default_str();
    meta_cmd->add_option("--outer-init", meta.outer_init, "Outer initial design size")->capture_default_str();
    meta_cmd->add_option("--outer-iters", meta.outer_iters, "Outer BO iterations")->capture_default_str();
    meta_cmd->add_option("--inner-reps", meta.inner_reps, "Inner runs averaged per weight vector")->capture_default_str();
    meta_cmd->add_option("--iters", meta.inner_config.n_iters, "Inner BO iterations")->capture_default_str();
    meta_cmd->add_option("--init", meta.inner_config.n_init, "Inner initial design size")->capture_default_str();
    meta_cmd->add_option("--grid-size", meta.inner_config.grid_size, "Inner grid size")->capture_default_str();
    meta_cmd->add_option("--gp-restarts", meta.inner_config.gp_restarts, "Inner hyperparameter restarts")->capture_default_str();
    meta_cmd->add_option("--seed", meta.seed, "Seed")->capture_default_str();
    meta_cmd->add_option("--out", meta_args.out, "Output directory")->capture_default_str();

    std::string verify_dir = "out";
    auto* verify = app.add_subcommand("verify", "Recompute summary.json from raw.csv and compare byte for byte");
    verify->add_option("--out", verify_dir, "Experiment output directory")->capture_default_str();

    auto* list = app.add_subcommand("list-benchmarks", "List built-in benchmark objectives");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : spec_error;
    }

    try {
        if (*run) return cmd_run(spec, policies, bounds_text);
        if (*meta_cmd) return cmd_meta(meta_args, meta);
        if (*verify) return cmd_verify(verify_dir);
        if (*list) return cmd_list();
    } catch (const autobo::ArgumentError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return spec_error;
    } catch (const autobo::RunError& e) {
        std::fprintf(stderr, "run failed: %s\n", e.what());
        return e.protocol_failure() ? protocol_error : run_error;
    } catch (const autobo::ProtocolError& e) {
        std::fprintf(stderr, "protocol error: %s\n", e.what());
        return protocol_error;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "run failed: %s\n", e.what());
        return run_error;
    }
    return ok;
}
