#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "linkvote/cover.hpp"
#include "linkvote/simulator.hpp"
#include "linkvote/topology.hpp"
#include "linkvote/voting.hpp"

namespace linkvote {

enum class Engine : std::uint8_t { Voting, Greedy, ExactBinary, ExactInteger };

const char* to_string(Engine e);
Engine engine_from_string(const std::string& s);

/// Named topology presets: "desk2pod" and "paper2pod".
ClosParams topology_preset(const std::string& name);

/// One fully resolved sweep point.
struct RunSpec {
    double x = 0.0;
    nlohmann::json value;  // the swept value, null without a sweep
    ClosParams topology;
    ScenarioSpec scenario;
    TrafficConfig traffic;
    std::uint32_t epochs = 1;
    std::uint32_t trials = 10;
    std::vector<Engine> engines{Engine::Voting};
    Algorithm1Options algorithm1;
    SolverLimits solver;
};

struct OutputSpec {
    std::string dir = "out";
    bool flows = false;
    bool icmp = false;
    bool votes = true;
    bool blame = true;
    bool timing = false;  // wall-clock seconds, not reproducible
};

struct ExperimentConfig {
    std::string name = "experiment";
    nlohmann::json document;  // as given, with the preset resolved
    std::uint64_t seed = 1;
    std::string sweep_axis;   // JSON pointer, empty without a sweep
    std::vector<RunSpec> points;
    OutputSpec output;
};

/// Parses and validates a config document. Errors are ValidationError
/// naming the offending field.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& file);

struct Counts {
    std::uint64_t evaluated = 0;
    std::uint64_t correct = 0;
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    std::uint32_t optimal = 0;          // epochs solved to optimality
    std::uint32_t budget_exceeded = 0;  // epochs whose solve hit the node budget
    double seconds = 0.0;

    std::optional<double> accuracy() const;
    double precision() const;  // 1 when nothing was flagged
    bool precision_undefined() const { return tp + fp == 0; }
    double recall() const;     // 1 when nothing failed
};

struct TrialResult {
    std::uint32_t point = 0;
    std::uint32_t trial = 0;
    std::uint64_t seed = 0;
    std::vector<LinkId> failed;
    std::uint64_t flows = 0;
    std::uint64_t retransmitted = 0;
    std::uint64_t traced = 0;
    double max_icmp_rate = 0.0;
    std::uint32_t icmp_violations = 0;
    std::uint32_t fidelity_epochs = 0;  // epochs where every failed link outvotes every good link
    std::vector<Engine> engines;
    std::vector<Counts> counts;  // parallel to engines

    // Artifact text, filled only for the outputs that are enabled.
    std::string flows_csv, icmp_csv, votes_csv, blame_csv;
    nlohmann::json solutions = nlohmann::json::array();

    const Counts* find(Engine e) const;
};

struct Stat {
    double mean = 0.0;
    double ci = 0.0;  // 95% normal half-width over trial values
    std::uint32_t n = 0;
};

Stat summarize(const std::vector<double>& values);

struct EngineSummary {
    Engine engine;
    Stat accuracy;
    Stat precision;
    Stat recall;
    std::uint32_t budget_exceeded = 0;
};

struct PointSummary {
    double x = 0.0;
    nlohmann::json value;
    std::vector<EngineSummary> engines;
    Stat fidelity;  // fraction of epochs with perfect bad-above-good ranking

    const EngineSummary* find(Engine e) const;
};

struct MetricsReport {
    std::vector<TrialResult> trials;  // ordered by (point, trial)
    std::vector<PointSummary> points;
    bool budget_exceeded_everywhere = false;
};

struct RunOptions {
    unsigned workers = 0;  // 0 = LINKVOTE_WORKERS or hardware concurrency
    bool keep_artifacts = true;
};

unsigned default_workers();

/// Deterministic per-(point, trial) seed.
std::uint64_t trial_seed(std::uint64_t seed, std::uint32_t point, std::uint32_t trial);

TrialResult run_trial(const RunSpec& spec, std::uint32_t point, std::uint32_t trial, std::uint64_t seed,
                      const OutputSpec& output, bool keep_artifacts);

MetricsReport run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

/// Writes metrics.csv, plotdata.csv, chart.svg, config.json and the enabled
/// artifact files (votes, blame, flows, icmp, timing) into `dir`.
void write_outputs(const ExperimentConfig& config, const MetricsReport& report, const std::filesystem::path& dir);

struct PlotRow {
    double x = 0.0;
    std::string series;
    double mean = 0.0;
    double ci = 0.0;
};

std::vector<PlotRow> plot_rows(const MetricsReport& report);
void write_plotdata(std::ostream& out, const std::vector<PlotRow>& rows);
std::vector<PlotRow> read_plotdata(std::istream& in);
std::string render_svg(const std::vector<PlotRow>& rows, const std::string& title, const std::string& x_label);

}  // namespace linkvote
