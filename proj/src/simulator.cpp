#include "linkvote/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "linkvote/errors.hpp"

namespace linkvote {

const char* to_string(Placement placement) {
    switch (placement) {
    case Placement::Uniform: return "uniform";
    case Placement::Switch: return "switch";
    case Placement::Level1: return "level1";
    case Placement::Level2: return "level2";
    case Placement::Host: return "host";
    case Placement::Fixed: return "fixed";
    }
    return "?";
}

Placement placement_from_string(const std::string& name) {
    for (auto p : {Placement::Uniform, Placement::Switch, Placement::Level1, Placement::Level2, Placement::Host,
                   Placement::Fixed})
        if (name == to_string(p)) return p;
    throw ValidationError("scenario.placement", "unknown placement '" + name + "'");
}

namespace {

void check_interval(const RateInterval& r, const char* field) {
    if (!(r.lo >= 0.0 && r.hi <= 1.0 && r.lo <= r.hi))
        throw ValidationError(field, "expected 0 <= lo <= hi <= 1");
}

// Level2 links carry no traffic in a single-pod fabric, so random
// placements leave them out there.
std::vector<LinkId> candidates(const Topology& t, const ScenarioSpec& spec) {
    const bool level2 = t.params().n_pod > 1;
    std::vector<LinkId> out;
    auto add = [&](LinkLevel level) {
        const auto ids = links_by_level(t, level);
        out.insert(out.end(), ids.begin(), ids.end());
    };
    switch (spec.placement) {
    case Placement::Uniform:
        add(LinkLevel::Host);
        add(LinkLevel::Level1);
        if (level2) add(LinkLevel::Level2);
        break;
    case Placement::Switch:
        add(LinkLevel::Level1);
        if (level2) add(LinkLevel::Level2);
        break;
    case Placement::Level1: add(LinkLevel::Level1); break;
    case Placement::Level2: add(LinkLevel::Level2); break;
    case Placement::Host: add(LinkLevel::Host); break;
    case Placement::Fixed: out = spec.fixed_links; break;
    }
    return out;
}

double draw_rate(const RateInterval& r, Rng& rng) {
    if (r.hi <= r.lo) return r.lo;
    return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}

}  // namespace

void validate(const ScenarioSpec& spec, const Topology& topology) {
    check_interval(spec.failed_rate, "scenario.failed_rate");
    check_interval(spec.good_rate, "scenario.good_rate");
    if (spec.has_heavy_rate) check_interval(spec.heavy_rate, "scenario.heavy_rate");
    if (spec.placement == Placement::Fixed) {
        for (LinkId l : spec.fixed_links)
            if (l >= topology.link_count()) throw ValidationError("scenario.fixed_links", "link " + std::to_string(l) + " out of range");
        auto sorted = spec.fixed_links;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw ValidationError("scenario.fixed_links", "duplicate link");
    }
    const auto pool = candidates(topology, spec);
    if (spec.failed_links > pool.size())
        throw ValidationError("scenario.failed_links", "more failed links than candidate links (" + std::to_string(pool.size()) + ")");
}

FailureScenario::FailureScenario(std::vector<double> r, std::vector<LinkId> f)
    : rates(std::move(r)), failed(std::move(f)), failed_mask(rates.size(), 0), log_keep(rates.size()) {
    for (LinkId l : failed) failed_mask.at(l) = 1;
    for (std::size_t i = 0; i < rates.size(); ++i) {
        if (!(rates[i] >= 0.0 && rates[i] <= 1.0)) throw std::invalid_argument("drop rate outside [0,1]");
        log_keep[i] = rates[i] >= 1.0 ? -std::numeric_limits<double>::infinity() : std::log1p(-rates[i]);
    }
}

FailureScenario draw_scenario(const Topology& topology, const ScenarioSpec& spec, Rng& rng) {
    validate(spec, topology);
    std::vector<double> rates(topology.link_count());
    for (auto& r : rates) r = draw_rate(spec.good_rate, rng);

    auto pool = candidates(topology, spec);
    std::vector<LinkId> failed;
    if (spec.placement == Placement::Fixed) {
        failed.assign(pool.begin(), pool.begin() + spec.failed_links);
    } else {
        for (std::uint32_t i = 0; i < spec.failed_links; ++i) {
            const auto j = std::uniform_int_distribution<std::size_t>(i, pool.size() - 1)(rng);
            std::swap(pool[i], pool[j]);
            failed.push_back(pool[i]);
        }
    }
    const double shared = spec.shared_failed_rate ? draw_rate(spec.failed_rate, rng) : 0.0;
    for (std::size_t i = 0; i < failed.size(); ++i) {
        double r = spec.shared_failed_rate ? shared : draw_rate(spec.failed_rate, rng);
        if (i == 0 && spec.has_heavy_rate) r = draw_rate(spec.heavy_rate, rng);
        rates[failed[i]] = r;
    }
    return FailureScenario(std::move(rates), std::move(failed));
}

std::uint32_t CountRange::draw(Rng& rng) const {
    if (hi <= lo) return lo;
    return std::uniform_int_distribution<std::uint32_t>(lo, hi)(rng);
}

BudgetResult traceroute_budget(const ClosParams& p, double t_max) {
    if (t_max < 0.0) throw ValidationError("t_max", "must be >= 0");
    const double n0 = p.n0, n1 = p.n1, n2 = p.n2, npod = p.n_pod, h = p.hosts_per_tor;
    BudgetResult out;
    if (h == 0.0) throw ValidationError("hosts_per_tor", "budget needs at least one host per ToR");
    double m = n1;
    if (p.n_pod < 2) {
        out.single_pod = true;
    } else {
        m = std::min(n1, n2 * (n0 * npod - 1.0) / (n0 * (npod - 1.0)));
    }
    out.c_t = t_max / (n0 * h) * m;
    return out;
}

std::uint64_t traces_per_epoch(const ClosParams& params, const TrafficConfig& traffic) {
    double rate = 0.0;
    switch (traffic.budget.mode) {
    case BudgetMode::Unlimited: return std::numeric_limits<std::uint64_t>::max();
    case BudgetMode::Theorem: rate = traceroute_budget(params, traffic.budget.t_max).c_t; break;
    case BudgetMode::Fixed: rate = traffic.budget.c_t; break;
    }
    return static_cast<std::uint64_t>(std::floor(rate * traffic.epoch_seconds + 1e-9));
}

std::uint32_t sample_binomial(std::uint32_t n, double p, double log_keep, Rng& rng) {
    if (n == 0 || p <= 0.0) return 0;
    if (p >= 1.0) return n;
    const double p0 = std::exp(n * log_keep);
    if (n * p < 10.0 && p0 > 1e-100) {
        // Inversion: most calls terminate on the first comparison.
        const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        double pk = p0;
        double cdf = p0;
        const double ratio = p / (1.0 - p);
        std::uint32_t k = 0;
        while (u >= cdf && k < n) {
            pk *= double(n - k) / double(k + 1) * ratio;
            ++k;
            cdf += pk;
        }
        return k;
    }
    return std::binomial_distribution<std::uint32_t>(n, p)(rng);
}

void simulate_drops(const Path& path, std::uint32_t packets, const FailureScenario& scenario, Rng& rng,
                    std::array<std::uint32_t, kMaxPathLinks>& drops) {
    std::uint32_t survivors = packets;
    for (std::size_t i = 0; i < path.link_count; ++i) {
        drops[i] = 0;
        if (survivors == 0) continue;
        const LinkId l = path.link_ids[i];
        const std::uint32_t d = sample_binomial(survivors, scenario.rates[l], scenario.log_keep[l], rng);
        drops[i] = d;
        survivors -= d;
    }
}

EpochTrace run_epoch(const Topology& topology, std::shared_ptr<const FailureScenario> scenario,
                     const TrafficConfig& traffic, Rng& rng, std::uint32_t epoch) {
    if (!scenario || scenario->rates.size() != topology.link_count())
        throw std::invalid_argument("scenario does not cover every link");
    const auto& p = topology.params();
    if (p.hosts_per_tor == 0) throw ValidationError("hosts_per_tor", "simulation needs hosts");
    const DestinationSampler destination(topology, traffic.pattern);
    const std::uint64_t allowance = traces_per_epoch(p, traffic);

    EpochTrace trace;
    trace.epoch = epoch;
    trace.epoch_seconds = traffic.epoch_seconds;
    trace.scenario = scenario;
    trace.icmp.assign(topology.switch_count(), 0);
    trace.traceroutes.assign(p.host_count(), 0);
    trace.flows.reserve(std::size_t(p.host_count()) * traffic.flows_per_host.hi);

    std::uint32_t next_id = 0;
    for (HostId host = 0; host < p.host_count(); ++host) {
        const std::uint32_t n = traffic.flows_per_host.draw(rng);
        for (std::uint32_t i = 0; i < n; ++i) {
            FlowRecord f;
            f.id = next_id++;
            f.src = host;
            f.dst = destination(host, rng);
            f.path = sample_path(topology, f.src, f.dst, rng);
            f.packets = traffic.packets_per_flow.draw(rng);
            simulate_drops(f.path, f.packets, *scenario, rng, f.drops);
            f.finalize();
            if (f.retransmitted && trace.traceroutes[host] < allowance) {
                f.traced = true;
                ++trace.traceroutes[host];
                for (SwitchId s : f.path.switches()) ++trace.icmp[s];
            }
            trace.flows.push_back(f);
        }
    }
    return trace;
}

IcmpReport account_icmp(const EpochTrace& trace, double t_max) {
    IcmpReport r;
    r.rates.resize(trace.icmp.size());
    for (std::size_t s = 0; s < trace.icmp.size(); ++s) {
        r.rates[s] = trace.icmp[s] / trace.epoch_seconds;
        if (r.rates[s] > r.max_rate) {
            r.max_rate = r.rates[s];
            r.max_switch = static_cast<SwitchId>(s);
        }
    }
    r.violation = r.max_rate > t_max;
    return r;
}

const char* to_string(DropClass c) {
    switch (c) {
    case DropClass::None: return "none";
    case DropClass::Noise: return "noise";
    case DropClass::Failure: return "failure";
    }
    return "?";
}

GroundTruth ground_truth(const EpochTrace& trace, std::uint32_t link_count) {
    GroundTruth g;
    g.link_drops.assign(link_count, 0);
    for (const auto& f : trace.flows)
        for (std::size_t i = 0; i < f.path.link_count; ++i) g.link_drops.at(f.path.link_ids[i]) += f.drops[i];
    g.flow_class.resize(trace.flows.size(), DropClass::None);
    for (std::size_t i = 0; i < trace.flows.size(); ++i) {
        const auto& f = trace.flows[i];
        if (!f.retransmitted) continue;
        g.flow_class[i] = g.link_drops[f.culprit] == 1 ? DropClass::Noise : DropClass::Failure;
    }
    return g;
}

void write_flows_csv_header(std::ostream& out, const std::string& prefix) {
    out << prefix << "flow_id,src,dst,h,packets,drops,retransmitted,culprit_link,traced\n";
}

void write_flows_csv(std::ostream& out, const EpochTrace& trace, const std::string& prefix) {
    for (const auto& f : trace.flows) {
        out << prefix << f.id << ',' << f.src << ',' << f.dst << ',' << f.path.h() << ',' << f.packets << ','
            << f.total_drops() << ',' << int(f.retransmitted) << ',';
        if (f.culprit == kNoLink)
            out << -1;
        else
            out << f.culprit;
        out << ',' << int(f.traced) << '\n';
    }
}

void write_icmp_csv_header(std::ostream& out, const std::string& prefix) { out << prefix << "switch_id,rate\n"; }

void write_icmp_csv(std::ostream& out, const EpochTrace& trace, const std::string& prefix) {
    for (std::size_t s = 0; s < trace.icmp.size(); ++s)
        out << prefix << s << ',' << trace.icmp[s] / trace.epoch_seconds << '\n';
}

}  // namespace linkvote
