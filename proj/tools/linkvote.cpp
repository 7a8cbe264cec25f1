#include <fmt/format.h>

#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "linkvote/cover.hpp"
#include "linkvote/errors.hpp"
#include "linkvote/experiment.hpp"
#include "linkvote/matrix.hpp"
#include "linkvote/theory.hpp"

using namespace linkvote;

namespace {

constexpr int kConfigError = 2;
constexpr int kBudgetExceeded = 3;

void print_summary(const ExperimentConfig& config, const MetricsReport& report) {
    fmt::print("{:>12}  {:<14} {:>18} {:>18} {:>18}\n", "x", "engine", "accuracy", "precision", "recall");
    for (const auto& p : report.points)
        for (const auto& e : p.engines) {
            const std::string acc = e.accuracy.n ? fmt::format("{:.4f}±{:.4f}", e.accuracy.mean, e.accuracy.ci) : "-";
            fmt::print("{:>12g}  {:<14} {:>18} {:>18} {:>18}\n", p.x, to_string(e.engine), acc,
                       fmt::format("{:.4f}±{:.4f}", e.precision.mean, e.precision.ci),
                       fmt::format("{:.4f}±{:.4f}", e.recall.mean, e.recall.ci));
        }
    fmt::print("outputs in {}\n", config.output.dir);
}

int run(const std::string& path, std::optional<std::uint64_t> seed, const std::string& out, unsigned workers,
        bool require_sweep) {
    ExperimentConfig config = load_config(path);
    if (require_sweep && config.sweep_axis.empty()) throw ValidationError("sweep", "config has no sweep block");
    if (seed) config.seed = *seed;
    if (!out.empty()) config.output.dir = out;
    RunOptions opts;
    opts.workers = workers;
    const MetricsReport report = run_experiment(config, opts);
    write_outputs(config, report, config.output.dir);
    print_summary(config, report);
    if (report.budget_exceeded_everywhere) {
        std::cerr << "solver node budget exceeded on every sweep point\n";
        return kBudgetExceeded;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Link-failure localization by flow voting: simulator, solvers and bounds"};
    app.require_subcommand(1);

    std::string config_path, out_dir, params_path, in_dir, matrix_path, status_path, engine = "exact_binary";
    std::uint64_t seed_value = 0;
    unsigned workers = 0;
    std::uint64_t node_limit = SolverLimits{}.node_limit;
    std::uint32_t k_cap = 0;

    auto* simulate = app.add_subcommand("simulate", "Run an experiment config");
    simulate->add_option("--config", config_path, "Experiment JSON")->required()->check(CLI::ExistingFile);
    auto* seed_opt = simulate->add_option("--seed", seed_value, "Override the config seed");
    simulate->add_option("--out", out_dir, "Output directory");
    simulate->add_option("--workers", workers, "Worker threads (default: LINKVOTE_WORKERS or all cores)");

    auto* sweep = app.add_subcommand("sweep", "Run an experiment config that has a sweep block");
    sweep->add_option("--config", config_path, "Experiment JSON")->required()->check(CLI::ExistingFile);
    auto* sweep_seed_opt = sweep->add_option("--seed", seed_value, "Override the config seed");
    sweep->add_option("--out", out_dir, "Output directory");
    sweep->add_option("--workers", workers, "Worker threads");

    auto* theory = app.add_subcommand("theory", "Print the bound report for a parameter file");
    theory->add_option("--params", params_path, "Parameter JSON")->required()->check(CLI::ExistingFile);

    auto* report = app.add_subcommand("report", "Re-render chart.svg from plotdata.csv");
    report->add_option("--in", in_dir, "Experiment output directory")->required()->check(CLI::ExistingDirectory);

    auto* solve = app.add_subcommand("solve", "Solve a routing matrix exported as CSV");
    solve->add_option("--matrix", matrix_path, "Triplets CSV (flow_id,link_id)")->required()->check(CLI::ExistingFile);
    solve->add_option("--status", status_path, "Status CSV (flow_id,status,drops)")->required()->check(CLI::ExistingFile);
    solve->add_option("--engine", engine, "greedy, exact_binary or exact_integer")
        ->check(CLI::IsMember({"greedy", "exact_binary", "exact_integer"}));
    solve->add_option("--node-limit", node_limit, "Search node budget");
    solve->add_option("--k-cap", k_cap, "Largest support searched (0 = none)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kConfigError;
    }

    try {
        if (*simulate)
            return run(config_path, *seed_opt ? std::optional(seed_value) : std::nullopt, out_dir, workers, false);
        if (*sweep)
            return run(config_path, *sweep_seed_opt ? std::optional(seed_value) : std::nullopt, out_dir, workers,
                       true);
        if (*theory) {
            std::ifstream in(params_path);
            nlohmann::json doc;
            try {
                doc = nlohmann::json::parse(in);
            } catch (const nlohmann::json::parse_error& e) {
                throw ValidationError("params", std::string("invalid JSON: ") + e.what());
            }
            std::cout << to_json(theory::bound_report(theory::bound_inputs_from_json(doc))).dump(2) << '\n';
            return 0;
        }
        if (*report) {
            const std::filesystem::path dir(in_dir);
            std::ifstream in(dir / "plotdata.csv");
            if (!in) throw std::runtime_error("no plotdata.csv in " + in_dir);
            const auto rows = read_plotdata(in);
            std::string title = dir.filename().string(), axis = "x";
            if (std::ifstream cfg(dir / "config.json"); cfg) {
                const auto doc = nlohmann::json::parse(cfg, nullptr, false);
                if (doc.is_object()) {
                    title = doc.value("name", title);
                    if (doc.contains("sweep") && doc["sweep"].is_object()) axis = doc["sweep"].value("axis", axis);
                }
            }
            std::ofstream(dir / "chart.svg") << render_svg(rows, title, axis);
            for (const auto& r : rows) fmt::print("{:>12g}  {:<24} {:.4f} ± {:.4f}\n", r.x, r.series, r.mean, r.ci);
            return 0;
        }
        if (*solve) {
            std::ifstream t(matrix_path), s(status_path);
            const RoutingMatrix m = read_routing_matrix(t, s);
            const SolverLimits limits{k_cap, node_limit};
            CoverSolution sol;
            if (engine == "greedy")
                sol = greedy_cover(m);
            else if (engine == "exact_binary")
                sol = exact_binary(m, limits);
            else
                sol = exact_integer(m, limits);
            std::cout << to_json(sol).dump(2) << '\n';
            return sol.budget_exceeded ? kBudgetExceeded : 0;
        }
    } catch (const ValidationError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const ConditionFailed& e) {
        std::cerr << "condition failed: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
