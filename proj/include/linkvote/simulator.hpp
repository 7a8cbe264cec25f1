#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "linkvote/flow.hpp"
#include "linkvote/routing.hpp"
#include "linkvote/topology.hpp"

namespace linkvote {

struct RateInterval {
    double lo = 0.0;
    double hi = 0.0;
};

enum class Placement : std::uint8_t { Uniform, Switch, Level1, Level2, Host, Fixed };

const char* to_string(Placement placement);
Placement placement_from_string(const std::string& name);

/// How failed links and their drop rates are drawn for one trial.
struct ScenarioSpec {
    std::uint32_t failed_links = 1;
    RateInterval failed_rate{1e-4, 1e-2};
    RateInterval good_rate{0.0, 1e-6};
    /// When set, the first failed link draws from this interval instead.
    bool has_heavy_rate = false;
    RateInterval heavy_rate{0.1, 1.0};
    /// All failed links share a single draw from `failed_rate`.
    bool shared_failed_rate = false;
    Placement placement = Placement::Uniform;
    std::vector<LinkId> fixed_links;
};

void validate(const ScenarioSpec& spec, const Topology& topology);

/// Per-link packet drop probabilities. Good and failed links partition all
/// links; `failed` is in placement order.
struct FailureScenario {
    std::vector<double> rates;
    std::vector<LinkId> failed;
    std::vector<std::uint8_t> failed_mask;
    std::vector<double> log_keep;  // log1p(-rate), cached for the binomial sampler

    FailureScenario() = default;
    FailureScenario(std::vector<double> rates, std::vector<LinkId> failed);

    bool is_failed(LinkId id) const { return failed_mask[id] != 0; }
    std::size_t k() const { return failed.size(); }
};

FailureScenario draw_scenario(const Topology& topology, const ScenarioSpec& spec, Rng& rng);

/// Inclusive integer range; lo == hi means a fixed value.
struct CountRange {
    std::uint32_t lo = 0;
    std::uint32_t hi = 0;

    std::uint32_t draw(Rng& rng) const;
};

enum class BudgetMode : std::uint8_t { Unlimited, Theorem, Fixed };

struct TraceBudget {
    BudgetMode mode = BudgetMode::Theorem;
    double t_max = 100.0;
    double c_t = 0.0;  // used when mode == Fixed
};

struct TrafficConfig {
    TrafficPattern pattern = UniformTraffic{};
    CountRange flows_per_host{60, 60};
    CountRange packets_per_flow{100, 100};
    double epoch_seconds = 30.0;
    TraceBudget budget;
};

struct EpochTrace {
    std::uint32_t epoch = 0;
    double epoch_seconds = 30.0;
    std::vector<FlowRecord> flows;
    std::vector<std::uint32_t> icmp;         // ICMP responses per switch
    std::vector<std::uint32_t> traceroutes;  // traceroutes sent per host
    std::shared_ptr<const FailureScenario> scenario;
};

struct BudgetResult {
    double c_t = 0.0;
    bool single_pod = false;  // inter-pod term undefined, n1-only bound used
};

/// Host traceroute rate bound that keeps every switch under `t_max` ICMP/s.
BudgetResult traceroute_budget(const ClosParams& params, double t_max);

/// Traceroutes a host may send in one epoch under `traffic.budget`.
std::uint64_t traces_per_epoch(const ClosParams& params, const TrafficConfig& traffic);

/// Simulates one epoch: each host opens its flows, packets cross the path
/// and are dropped at the first link whose Bernoulli trial fails.
/// Retransmitting flows are traced while the host budget lasts.
EpochTrace run_epoch(const Topology& topology, std::shared_ptr<const FailureScenario> scenario,
                     const TrafficConfig& traffic, Rng& rng, std::uint32_t epoch = 0);

/// Draws per-link drops for `packets` packets along `path` into `drops`.
void simulate_drops(const Path& path, std::uint32_t packets, const FailureScenario& scenario, Rng& rng,
                    std::array<std::uint32_t, kMaxPathLinks>& drops);

std::uint32_t sample_binomial(std::uint32_t n, double p, double log_keep, Rng& rng);

struct IcmpReport {
    std::vector<double> rates;  // per switch, responses per second
    double max_rate = 0.0;
    SwitchId max_switch = 0;
    bool violation = false;
};

IcmpReport account_icmp(const EpochTrace& trace, double t_max);

enum class DropClass : std::uint8_t { None, Noise, Failure };

const char* to_string(DropClass c);

struct GroundTruth {
    std::vector<DropClass> flow_class;         // indexed like trace.flows
    std::vector<std::uint32_t> link_drops;     // total drops per link this epoch
};

/// Flows whose culprit link dropped a single packet in the whole epoch are
/// noise; other retransmitting flows are failures.
GroundTruth ground_truth(const EpochTrace& trace, std::uint32_t link_count);

void write_flows_csv_header(std::ostream& out, const std::string& prefix_columns = "");
void write_flows_csv(std::ostream& out, const EpochTrace& trace, const std::string& prefix_values = "");
void write_icmp_csv_header(std::ostream& out, const std::string& prefix_columns = "");
void write_icmp_csv(std::ostream& out, const EpochTrace& trace, const std::string& prefix_values = "");

}  // namespace linkvote
