#ifndef AUTOBO_HARNESS_HPP
#define AUTOBO_HARNESS_HPP
#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "autobo/benchmarks.hpp"
#include "autobo/bo_loop.hpp"
#include "autobo/csv.hpp"
#include "autobo/errors.hpp"
#include "autobo/external_objective.hpp"
#include "autobo/objective.hpp"
#include "autobo/policies.hpp"
#include "autobo/random.hpp"

namespace autobo {

inline constexpr double regret_floor = 1e-12;

/// log10 of the absolute simple regret of the incumbent, floored at 1e-12.
inline std::vector<double> regret_curve(const Trace& trace, double f_star) {
    std::vector<double> out;
    out.reserve(trace.records.size());
    for (const auto& r : trace.records) out.push_back(std::log10(std::max(std::abs(r.best_so_far - f_star), regret_floor)));
    return out;
}

struct BootstrapStats {
    std::vector<double> mean;
    std::vector<double> std;
};

/// Resamples whole rows (repetitions) with replacement B times. Mean and
/// (population) standard deviation are taken over the B resample means.
inline BootstrapStats bootstrap_stats(const Eigen::MatrixXd& curves, int samples, Rng& rng) {
    if (curves.rows() < 1) throw ArgumentError("bootstrap_stats: need at least one curve");
    if (samples < 1) throw ArgumentError("bootstrap_stats: need at least one resample");
    const auto reps = curves.rows();
    const auto t = curves.cols();
    Eigen::MatrixXd means(samples, t);
    std::uniform_int_distribution<Eigen::Index> pick(0, reps - 1);
    // Means are accumulated as offsets from a reference row so that identical
    // rows reproduce their value exactly.
    const Eigen::RowVectorXd ref = curves.row(0);
    for (int b = 0; b < samples; ++b) {
        Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(t);
        for (Eigen::Index i = 0; i < reps; ++i) acc += curves.row(pick(rng)) - ref;
        means.row(b) = ref + acc / static_cast<double>(reps);
    }
    BootstrapStats out;
    out.mean.resize(static_cast<std::size_t>(t));
    out.std.resize(static_cast<std::size_t>(t));
    for (Eigen::Index c = 0; c < t; ++c) {
        const double m0 = means(0, c);
        const double m = m0 + (means.col(c).array() - m0).sum() / samples;
        out.mean[static_cast<std::size_t>(c)] = m;
        out.std[static_cast<std::size_t>(c)] = std::sqrt((means.col(c).array() - m).square().sum() / samples);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Experiment description

struct ExperimentSpec {
    std::string objective_name;
    std::string external_cmd;
    int dim = 0;
    Bounds bounds;
    std::vector<PolicySpec> policies;
    int reps = 100;
    int n_iters = 30;
    int n_init = 5;
    double noise_std = 0.0;
    std::uint64_t seed = 0;
    std::string out_dir = "out";
    int bootstrap_samples = 200;
    int grid_size = 1000;
    int gp_restarts = 10;
    bool refine_local = false;
    /// 0 means one worker per hardware thread.
    int workers = 0;
    bool external_concurrent_safe = false;
    double external_timeout = 600.0;

    [[nodiscard]] bool is_external() const { return !external_cmd.empty(); }

    [[nodiscard]] std::optional<double> f_star() const {
        if (is_external()) return std::nullopt;
        return benchmark(objective_name).f_star;
    }

    [[nodiscard]] int problem_dim() const { return is_external() ? dim : benchmark(objective_name).dim; }

    void validate() const {
        if (is_external() == !objective_name.empty())
            throw ArgumentError("exactly one of an objective name or an external command is required");
        if (is_external()) {
            validate_bounds(bounds);
            if (static_cast<std::size_t>(dim) != bounds.size()) throw ArgumentError("--dim does not match --bounds");
        } else {
            (void)benchmark(objective_name);
        }
        if (policies.empty()) throw ArgumentError("at least one policy is required");
        for (const auto& p : policies) p.validate();
        if (reps < 1) throw ArgumentError("reps must be positive");
        if (bootstrap_samples < 1) throw ArgumentError("bootstrap_samples must be positive");
        if (!(noise_std >= 0.0)) throw ArgumentError("noise_std must be non-negative");
        if (workers < 0) throw ArgumentError("workers must be non-negative");
        run_config(0).validate();
    }

    [[nodiscard]] RunConfig run_config(std::size_t rep) const {
        RunConfig c;
        c.n_init = n_init;
        c.n_iters = n_iters;
        c.grid_size = grid_size;
        c.gp_restarts = gp_restarts;
        c.refine_local = refine_local;
        c.seed = seed + rep;
        return c;
    }

    /// A fresh objective instance for one repetition.
    [[nodiscard]] Objective objective_for_rep(std::size_t rep) const {
        Objective base = is_external() ? external_objective(external_cmd, dim, bounds, external_timeout)
                                       : make_objective(benchmark(objective_name));
        if (is_external() && external_concurrent_safe) base.concurrent_safe = true;
        return with_noise(std::move(base), noise_std, make_rng(seed + rep, Stream::observation_noise));
    }
};

/// Distinct, comma-free names for the policies of an experiment.
inline std::vector<std::string> policy_names(const std::vector<PolicySpec>& policies) {
    std::vector<std::string> names;
    std::map<std::string, int> seen;
    for (const auto& p : policies) {
        std::string n = policy_name(p);
        if (const int k = seen[n]++; k > 0) n += "#" + std::to_string(k + 1);
        names.push_back(n);
    }
    return names;
}

/// The part of the spec recorded in the summary; excludes scheduling and paths.
inline nlohmann::json spec_to_json(const ExperimentSpec& s) {
    nlohmann::json j;
    if (s.is_external()) {
        j["external_cmd"] = s.external_cmd;
        nlohmann::json b = nlohmann::json::array();
        for (const auto& [lo, hi] : s.bounds) b.push_back({lo, hi});
        j["bounds"] = b;
        j["dim"] = s.dim;
    } else {
        j["objective"] = s.objective_name;
        j["dim"] = s.problem_dim();
    }
    const auto names = policy_names(s.policies);
    nlohmann::json ps = nlohmann::json::array();
    for (std::size_t i = 0; i < s.policies.size(); ++i) ps.push_back({{"name", names[i]}, {"policy", to_json(s.policies[i])}});
    j["policies"] = ps;
    j["reps"] = s.reps;
    j["n_iters"] = s.n_iters;
    j["n_init"] = s.n_init;
    j["noise_std"] = s.noise_std;
    j["seed"] = s.seed;
    j["bootstrap_samples"] = s.bootstrap_samples;
    j["grid_size"] = s.grid_size;
    j["gp_restarts"] = s.gp_restarts;
    j["refine_local"] = s.refine_local;
    if (const auto f = s.f_star()) j["f_star"] = *f;
    else j["f_star"] = nullptr;
    return j;
}

// ---------------------------------------------------------------------------
// Reports

struct PolicyReport {
    std::string name;
    /// reps × T matrix of the plotted metric.
    Eigen::MatrixXd curves;
    BootstrapStats stats;
};

struct RegretReport {
    /// "log10_abs_regret" when f* is known, otherwise "best_so_far".
    std::string metric;
    std::vector<PolicyReport> policies;
};

struct PolicyFailure {
    std::string name;
    std::size_t rep = 0;
    std::string message;
    bool protocol = false;
};

struct ExperimentResult {
    RegretReport report;
    std::vector<PolicyFailure> failures;
    std::filesystem::path csv_path, json_path, svg_path;
};

namespace detail {

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline Eigen::MatrixXd metric_curves(const std::vector<std::vector<double>>& best_so_far, std::optional<double> f_star) {
    const auto reps = static_cast<Eigen::Index>(best_so_far.size());
    const auto t = reps ? static_cast<Eigen::Index>(best_so_far.front().size()) : 0;
    Eigen::MatrixXd m(reps, t);
    for (Eigen::Index r = 0; r < reps; ++r) {
        if (static_cast<Eigen::Index>(best_so_far[static_cast<std::size_t>(r)].size()) != t)
            throw ArgumentError("repetitions have different lengths");
        for (Eigen::Index c = 0; c < t; ++c) {
            const double b = best_so_far[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
            m(r, c) = f_star ? std::log10(std::max(std::abs(b - *f_star), regret_floor)) : b;
        }
    }
    return m;
}

inline PolicyReport summarize_policy(const std::string& name, const std::vector<std::vector<double>>& best_so_far,
                                     std::optional<double> f_star, std::uint64_t seed, int bootstrap_samples) {
    PolicyReport p;
    p.name = name;
    p.curves = metric_curves(best_so_far, f_star);
    auto rng = make_rng(seed ^ fnv1a(name), Stream::bootstrap);
    p.stats = bootstrap_stats(p.curves, bootstrap_samples, rng);
    return p;
}

inline nlohmann::json summary_json(const nlohmann::json& spec, const RegretReport& report,
                                   const nlohmann::json& failures) {
    const bool log_regret = report.metric == "log10_abs_regret";
    nlohmann::json ps = nlohmann::json::array();
    for (const auto& p : report.policies) {
        nlohmann::json e{{"name", p.name}};
        e[log_regret ? "mean_log_regret" : "mean_best_so_far"] = p.stats.mean;
        e[log_regret ? "std_log_regret" : "std_best_so_far"] = p.stats.std;
        ps.push_back(e);
    }
    return {{"spec", spec}, {"metric", report.metric}, {"policies", ps}, {"failures", failures}};
}

inline std::string csv_header(int dim) {
    std::string h = "policy,rep,iter,label";
    for (int j = 0; j < dim; ++j) h += ",x_" + std::to_string(j);
    return h + ",y,best_so_far";
}

template <typename F>
void parallel_for(std::size_t n, std::size_t workers, F&& fn) {
    workers = std::max<std::size_t>(1, std::min(workers, n));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) fn(i);
        });
    for (auto& t : pool) t.join();
}

} // namespace detail

/// Draws the mean curve of each policy with a ±1 std band.
inline std::string render_svg(const RegretReport& report) {
    constexpr double width = 800, height = 600, left = 70, right = 160, top = 40, bottom = 60;
    static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    std::size_t t_max = 1;
    for (const auto& p : report.policies)
        for (std::size_t i = 0; i < p.stats.mean.size(); ++i) {
            lo = std::min(lo, p.stats.mean[i] - p.stats.std[i]);
            hi = std::max(hi, p.stats.mean[i] + p.stats.std[i]);
            t_max = std::max(t_max, p.stats.mean.size());
        }
    if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
    if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
    const double pw = width - left - right, ph = height - top - bottom;
    auto sx = [&](std::size_t i) { return left + pw * (t_max > 1 ? static_cast<double>(i) / static_cast<double>(t_max - 1) : 0.0); };
    auto sy = [&](double v) { return top + ph * (hi - v) / (hi - lo); };
    auto num = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", v);
        return std::string(buf);
    };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 800 600\" width=\"800\" height=\"600\">\n";
    svg << "<rect x=\"0\" y=\"0\" width=\"800\" height=\"600\" fill=\"white\"/>\n";
    svg << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
        << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double v = lo + (hi - lo) * k / 4.0;
        svg << "<text x=\"" << left - 8 << "\" y=\"" << num(sy(v) + 4) << "\" font-size=\"12\" text-anchor=\"end\">"
            << num(v) << "</text>\n";
        const auto i = static_cast<std::size_t>(std::lround(static_cast<double>(t_max - 1) * k / 4.0));
        svg << "<text x=\"" << num(sx(i)) << "\" y=\"" << top + ph + 18 << "\" font-size=\"12\" text-anchor=\"middle\">"
            << i << "</text>\n";
    }
    svg << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 15
        << "\" font-size=\"14\" text-anchor=\"middle\">iteration</text>\n";
    svg << "<text x=\"18\" y=\"" << top + ph / 2 << "\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
        << top + ph / 2 << ")\">"
        << (report.metric == "log10_abs_regret" ? "log10 absolute regret" : "best so far") << "</text>\n";

    for (std::size_t k = 0; k < report.policies.size(); ++k) {
        const auto& p = report.policies[k];
        const char* color = palette[k % std::size(palette)];
        std::ostringstream band, line;
        for (std::size_t i = 0; i < p.stats.mean.size(); ++i) band << num(sx(i)) << ',' << num(sy(p.stats.mean[i] + p.stats.std[i])) << ' ';
        for (std::size_t i = p.stats.mean.size(); i-- > 0;) band << num(sx(i)) << ',' << num(sy(p.stats.mean[i] - p.stats.std[i])) << ' ';
        for (std::size_t i = 0; i < p.stats.mean.size(); ++i) line << num(sx(i)) << ',' << num(sy(p.stats.mean[i])) << ' ';
        svg << "<polygon points=\"" << band.str() << "\" fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
        svg << "<polyline points=\"" << line.str() << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        const double ly = top + 10 + 20.0 * static_cast<double>(k);
        svg << "<line x1=\"" << width - right + 15 << "\" y1=\"" << ly << "\" x2=\"" << width - right + 40 << "\" y2=\"" << ly
            << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        svg << "<text x=\"" << width - right + 45 << "\" y=\"" << ly + 4 << "\" font-size=\"12\">" << p.name << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

/// Runs every policy for `reps` repetitions (seed + rep), then writes
/// raw.csv, summary.json and regret.svg into spec.out_dir.
inline ExperimentResult run_experiment(const ExperimentSpec& spec) {
    spec.validate();
    const auto names = policy_names(spec.policies);
    const auto f_star = spec.f_star();
    const int dim = spec.problem_dim();
    const auto reps = static_cast<std::size_t>(spec.reps);

    std::size_t workers = spec.workers > 0 ? static_cast<std::size_t>(spec.workers)
                                           : std::max(1u, std::thread::hardware_concurrency());
    if (spec.is_external() && !spec.external_concurrent_safe) workers = 1;

    ExperimentResult result;
    result.report.metric = f_star ? "log10_abs_regret" : "best_so_far";
    std::ostringstream csv;
    csv << detail::csv_header(dim) << '\n';

    for (std::size_t k = 0; k < spec.policies.size(); ++k) {
        std::vector<std::optional<Trace>> traces(reps);
        std::vector<std::optional<PolicyFailure>> errors(reps);
        detail::parallel_for(reps, workers, [&](std::size_t rep) {
            try {
                traces[rep] = run_bo(spec.objective_for_rep(rep), spec.run_config(rep), spec.policies[k]);
            } catch (const RunError& e) {
                errors[rep] = PolicyFailure{names[k], rep, e.what(), e.protocol_failure()};
            } catch (const ProtocolError& e) {
                errors[rep] = PolicyFailure{names[k], rep, e.what(), true};
            } catch (const std::exception& e) {
                errors[rep] = PolicyFailure{names[k], rep, e.what(), false};
            }
        });
        if (auto first = std::find_if(errors.begin(), errors.end(), [](const auto& e) { return e.has_value(); });
            first != errors.end()) {
            result.failures.push_back(**first);
            continue;
        }
        std::vector<std::vector<double>> best(reps);
        for (std::size_t rep = 0; rep < reps; ++rep) {
            for (const auto& r : traces[rep]->records) {
                csv << names[k] << ',' << rep << ',' << r.iter << ',' << r.policy_label;
                for (Eigen::Index j = 0; j < r.x.size(); ++j) csv << ',' << format_double(r.x(j));
                csv << ',' << format_double(r.y) << ',' << format_double(r.best_so_far) << '\n';
                best[rep].push_back(r.best_so_far);
            }
        }
        result.report.policies.push_back(
            detail::summarize_policy(names[k], best, f_star, spec.seed, spec.bootstrap_samples));
    }

    nlohmann::json failures = nlohmann::json::array();
    for (const auto& f : result.failures)
        failures.push_back({{"policy", f.name}, {"rep", f.rep}, {"message", f.message}, {"protocol", f.protocol}});

    std::filesystem::create_directories(spec.out_dir);
    result.csv_path = std::filesystem::path(spec.out_dir) / "raw.csv";
    result.json_path = std::filesystem::path(spec.out_dir) / "summary.json";
    result.svg_path = std::filesystem::path(spec.out_dir) / "regret.svg";
    std::ofstream(result.csv_path, std::ios::binary) << csv.str();
    std::ofstream(result.json_path, std::ios::binary)
        << detail::summary_json(spec_to_json(spec), result.report, failures).dump(2) << '\n';
    std::ofstream(result.svg_path, std::ios::binary) << render_svg(result.report);
    return result;
}

struct VerifyResult {
    bool identical = false;
    std::string regenerated;
    std::string message;
};

/// Rebuilds summary.json from raw.csv and the recorded spec block and
/// compares it byte for byte with the emitted file.
inline VerifyResult verify_summary(const std::filesystem::path& out_dir) {
    const auto json_path = out_dir / "summary.json";
    const auto csv_path = out_dir / "raw.csv";
    std::ifstream jin(json_path, std::ios::binary);
    if (!jin) throw ArgumentError("cannot read " + json_path.string());
    const std::string original((std::istreambuf_iterator<char>(jin)), std::istreambuf_iterator<char>());
    nlohmann::json summary;
    try {
        summary = nlohmann::json::parse(original);
    } catch (const nlohmann::json::exception& e) {
        throw ArgumentError("summary.json is not valid JSON: " + std::string(e.what()));
    }
    const auto& spec = summary.at("spec");
    std::optional<double> f_star;
    if (!spec.at("f_star").is_null()) f_star = spec.at("f_star").get<double>();
    const auto seed = spec.at("seed").get<std::uint64_t>();
    const int samples = spec.at("bootstrap_samples").get<int>();

    std::ifstream cin(csv_path, std::ios::binary);
    if (!cin) throw ArgumentError("cannot read " + csv_path.string());
    std::string line;
    std::getline(cin, line);
    const auto header = split_csv_line(line);
    if (header.size() < 6 || header[0] != "policy" || header[header.size() - 1] != "best_so_far")
        throw ArgumentError("raw.csv has an unexpected header");

    std::vector<std::string> order;
    std::map<std::string, std::map<std::size_t, std::vector<double>>> curves;
    while (std::getline(cin, line)) {
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != header.size()) throw ArgumentError("raw.csv row has the wrong number of fields");
        if (!curves.contains(f[0])) order.push_back(f[0]);
        const auto rep = static_cast<std::size_t>(std::stoull(f[1]));
        curves[f[0]][rep].push_back(parse_csv_double(f.back()));
    }

    RegretReport report;
    report.metric = f_star ? "log10_abs_regret" : "best_so_far";
    for (const auto& name : order) {
        std::vector<std::vector<double>> best;
        for (auto& [rep, c] : curves[name]) best.push_back(std::move(c));
        report.policies.push_back(detail::summarize_policy(name, best, f_star, seed, samples));
    }
    VerifyResult v;
    v.regenerated = detail::summary_json(spec, report, summary.at("failures")).dump(2) + "\n";
    v.identical = v.regenerated == original;
    v.message = v.identical ? "summary.json reproduced exactly from raw.csv"
                            : "summary.json differs from the summary recomputed from raw.csv";
    return v;
}

} // namespace autobo

#endif // AUTOBO_HARNESS_HPP
