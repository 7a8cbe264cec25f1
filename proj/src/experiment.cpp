#include "linkvote/experiment.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "linkvote/errors.hpp"
#include "linkvote/matrix.hpp"

namespace linkvote {

using nlohmann::json;

const char* to_string(Engine e) {
    switch (e) {
    case Engine::Voting: return "voting";
    case Engine::Greedy: return "greedy";
    case Engine::ExactBinary: return "exact_binary";
    case Engine::ExactInteger: return "exact_integer";
    }
    return "?";
}

Engine engine_from_string(const std::string& s) {
    for (auto e : {Engine::Voting, Engine::Greedy, Engine::ExactBinary, Engine::ExactInteger})
        if (s == to_string(e)) return e;
    throw ValidationError("engines", "unknown engine '" + s + "'");
}

ClosParams topology_preset(const std::string& name) {
    ClosParams p;
    if (name == "desk2pod") {
        p.n_pod = 2;
        p.n0 = 8;
        p.n1 = 8;
        p.n2 = 4;
        p.hosts_per_tor = 120;
    } else if (name == "paper2pod") {
        p.n_pod = 2;
        p.n0 = 20;
        p.n1 = 10;
        p.n2 = 10;
        p.hosts_per_tor = 40;
    } else {
        throw ValidationError("preset", "unknown preset '" + name + "'");
    }
    return p;
}

namespace {

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ValidationError(where, "expected an object");
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) throw ValidationError(where.empty() ? key : where + "." + key, "unknown field");
    }
}

double get_number(const json& j, const std::string& field) {
    if (!j.is_number()) throw ValidationError(field, "expected a number");
    return j.get<double>();
}

std::uint32_t get_count(const json& j, const std::string& field) {
    if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0))
        throw ValidationError(field, "expected a non-negative integer");
    const auto v = j.get<std::uint64_t>();
    if (v > 0xffffffffu) throw ValidationError(field, "too large");
    return static_cast<std::uint32_t>(v);
}

bool get_bool(const json& j, const std::string& field) {
    if (!j.is_boolean()) throw ValidationError(field, "expected true or false");
    return j.get<bool>();
}

std::string get_string(const json& j, const std::string& field) {
    if (!j.is_string()) throw ValidationError(field, "expected a string");
    return j.get<std::string>();
}

RateInterval get_interval(const json& j, const std::string& field) {
    if (j.is_number()) {
        const double v = j.get<double>();
        return {v, v};
    }
    if (!j.is_array() || j.size() != 2) throw ValidationError(field, "expected a number or [lo, hi]");
    RateInterval r{get_number(j[0], field), get_number(j[1], field)};
    if (!(r.lo >= 0.0 && r.lo <= r.hi && r.hi <= 1.0)) throw ValidationError(field, "expected 0 <= lo <= hi <= 1");
    return r;
}

CountRange get_range(const json& j, const std::string& field) {
    if (j.is_array()) {
        if (j.size() != 2) throw ValidationError(field, "expected an integer or [lo, hi]");
        CountRange r{get_count(j[0], field), get_count(j[1], field)};
        if (r.lo > r.hi) throw ValidationError(field, "lo exceeds hi");
        return r;
    }
    const auto v = get_count(j, field);
    return {v, v};
}

ScenarioSpec parse_scenario(const json& j) {
    check_keys(j, "scenario",
               {"failed_links", "failed_rate", "good_rate", "heavy_rate", "shared_failed_rate", "placement",
                "fixed_links"});
    ScenarioSpec s;
    if (j.contains("failed_links")) s.failed_links = get_count(j["failed_links"], "scenario.failed_links");
    if (j.contains("failed_rate")) s.failed_rate = get_interval(j["failed_rate"], "scenario.failed_rate");
    if (j.contains("good_rate")) s.good_rate = get_interval(j["good_rate"], "scenario.good_rate");
    if (j.contains("heavy_rate") && !j["heavy_rate"].is_null()) {
        s.has_heavy_rate = true;
        s.heavy_rate = get_interval(j["heavy_rate"], "scenario.heavy_rate");
    }
    if (j.contains("shared_failed_rate"))
        s.shared_failed_rate = get_bool(j["shared_failed_rate"], "scenario.shared_failed_rate");
    if (j.contains("placement")) s.placement = placement_from_string(get_string(j["placement"], "scenario.placement"));
    if (j.contains("fixed_links")) {
        if (!j["fixed_links"].is_array()) throw ValidationError("scenario.fixed_links", "expected an array");
        for (const auto& v : j["fixed_links"]) s.fixed_links.push_back(get_count(v, "scenario.fixed_links"));
    }
    if (s.placement == Placement::Fixed && !j.contains("failed_links"))
        s.failed_links = static_cast<std::uint32_t>(s.fixed_links.size());
    if (s.placement == Placement::Fixed && s.failed_links != s.fixed_links.size())
        throw ValidationError("scenario.failed_links", "must equal the number of fixed links");
    return s;
}

TrafficPattern parse_pattern(const json& j, const ClosParams& topo) {
    if (j.is_string()) {
        if (j.get<std::string>() == "uniform") return UniformTraffic{};
        throw ValidationError("traffic.pattern", "unknown pattern '" + j.get<std::string>() + "'");
    }
    check_keys(j, "traffic.pattern", {"type", "tors", "tor_fraction", "weight", "tor", "fraction"});
    const std::string type = get_string(j.value("type", json("uniform")), "traffic.pattern.type");
    if (type == "uniform") return UniformTraffic{};
    if (type == "skewed") {
        SkewedToRSet s;
        if (j.contains("tors")) {
            if (!j["tors"].is_array()) throw ValidationError("traffic.pattern.tors", "expected an array");
            for (const auto& t : j["tors"]) s.tors.push_back(get_count(t, "traffic.pattern.tors"));
        } else {
            const double f = get_number(j.value("tor_fraction", json(0.1)), "traffic.pattern.tor_fraction");
            if (!(f > 0.0 && f < 1.0)) throw ValidationError("traffic.pattern.tor_fraction", "must lie in (0,1)");
            const auto n = std::max<std::uint32_t>(1, static_cast<std::uint32_t>(std::ceil(f * topo.tor_count() - 1e-9)));
            for (std::uint32_t t = 0; t < n; ++t) s.tors.push_back(t);
        }
        if (j.contains("weight")) s.weight = get_number(j["weight"], "traffic.pattern.weight");
        return s;
    }
    if (type == "hot_tor") {
        HotToR h;
        if (j.contains("tor")) h.tor = get_count(j["tor"], "traffic.pattern.tor");
        if (j.contains("fraction")) h.fraction = get_number(j["fraction"], "traffic.pattern.fraction");
        return h;
    }
    throw ValidationError("traffic.pattern.type", "unknown pattern '" + type + "'");
}

TrafficConfig parse_traffic(const json& j, const ClosParams& topo) {
    check_keys(j, "traffic", {"pattern", "flows_per_host", "packets_per_flow", "epoch_seconds", "trace_budget"});
    TrafficConfig t;
    if (j.contains("pattern")) t.pattern = parse_pattern(j["pattern"], topo);
    if (j.contains("flows_per_host")) t.flows_per_host = get_range(j["flows_per_host"], "traffic.flows_per_host");
    if (j.contains("packets_per_flow")) {
        t.packets_per_flow = get_range(j["packets_per_flow"], "traffic.packets_per_flow");
        if (t.packets_per_flow.lo == 0) throw ValidationError("traffic.packets_per_flow", "must be positive");
    }
    if (j.contains("epoch_seconds")) {
        t.epoch_seconds = get_number(j["epoch_seconds"], "traffic.epoch_seconds");
        if (!(t.epoch_seconds > 0.0)) throw ValidationError("traffic.epoch_seconds", "must be positive");
    }
    if (j.contains("trace_budget")) {
        const auto& b = j["trace_budget"];
        check_keys(b, "traffic.trace_budget", {"mode", "t_max", "c_t"});
        const std::string mode = get_string(b.value("mode", json("theorem")), "traffic.trace_budget.mode");
        if (mode == "theorem")
            t.budget.mode = BudgetMode::Theorem;
        else if (mode == "fixed")
            t.budget.mode = BudgetMode::Fixed;
        else if (mode == "unlimited")
            t.budget.mode = BudgetMode::Unlimited;
        else
            throw ValidationError("traffic.trace_budget.mode", "expected theorem, fixed or unlimited");
        if (b.contains("t_max")) t.budget.t_max = get_number(b["t_max"], "traffic.trace_budget.t_max");
        if (b.contains("c_t")) t.budget.c_t = get_number(b["c_t"], "traffic.trace_budget.c_t");
        if (t.budget.t_max < 0.0) throw ValidationError("traffic.trace_budget.t_max", "must be >= 0");
        if (t.budget.c_t < 0.0) throw ValidationError("traffic.trace_budget.c_t", "must be >= 0");
        if (t.budget.mode == BudgetMode::Fixed && !b.contains("c_t"))
            throw ValidationError("traffic.trace_budget.c_t", "required in fixed mode");
    }
    return t;
}

ClosParams resolve_topology(const json& doc) {
    json base = json::object();
    if (doc.contains("preset")) base = to_json(topology_preset(get_string(doc["preset"], "preset")));
    if (doc.contains("topology")) {
        if (!doc["topology"].is_object()) throw ValidationError("topology", "expected an object");
        base.merge_patch(doc["topology"]);
    }
    try {
        return clos_params_from_json(base);
    } catch (const ValidationError& e) {
        throw ValidationError("topology." + e.field(), e.what());
    }
}

RunSpec parse_point(const json& doc) {
    RunSpec r;
    r.topology = resolve_topology(doc);
    validate(r.topology);
    const Topology topo(r.topology);
    if (doc.contains("scenario")) r.scenario = parse_scenario(doc["scenario"]);
    validate(r.scenario, topo);
    if (doc.contains("traffic")) r.traffic = parse_traffic(doc["traffic"], r.topology);
    validate(r.traffic.pattern, topo);
    if (r.topology.hosts_per_tor == 0) throw ValidationError("topology.hosts_per_tor", "simulation needs hosts");
    if (r.topology.tor_count() < 2) throw ValidationError("topology", "simulation needs at least two ToRs");
    if (doc.contains("epochs")) r.epochs = get_count(doc["epochs"], "epochs");
    if (doc.contains("trials")) r.trials = get_count(doc["trials"], "trials");
    if (r.epochs == 0) throw ValidationError("epochs", "must be positive");
    if (r.trials == 0) throw ValidationError("trials", "must be positive");
    if (doc.contains("engines")) {
        const auto& e = doc["engines"];
        if (!e.is_array() || e.empty()) throw ValidationError("engines", "expected a non-empty array");
        r.engines.clear();
        for (const auto& v : e) {
            const Engine eng = engine_from_string(get_string(v, "engines"));
            if (std::find(r.engines.begin(), r.engines.end(), eng) != r.engines.end())
                throw ValidationError("engines", "duplicate engine");
            r.engines.push_back(eng);
        }
    }
    if (doc.contains("algorithm1")) {
        const auto& a = doc["algorithm1"];
        check_keys(a, "algorithm1", {"threshold", "adjust", "denominator", "max_links"});
        if (a.contains("threshold")) r.algorithm1.threshold = get_number(a["threshold"], "algorithm1.threshold");
        if (!(r.algorithm1.threshold >= 0.0 && r.algorithm1.threshold <= 1.0))
            throw ValidationError("algorithm1.threshold", "must lie in [0,1]");
        if (a.contains("adjust")) r.algorithm1.adjust = adjust_mode_from_string(get_string(a["adjust"], "algorithm1.adjust"));
        if (a.contains("denominator"))
            r.algorithm1.denominator = denominator_from_string(get_string(a["denominator"], "algorithm1.denominator"));
        if (a.contains("max_links")) r.algorithm1.max_links = get_count(a["max_links"], "algorithm1.max_links");
    }
    if (doc.contains("solver")) {
        const auto& s = doc["solver"];
        check_keys(s, "solver", {"k_cap", "node_limit"});
        if (s.contains("k_cap")) r.solver.k_cap = get_count(s["k_cap"], "solver.k_cap");
        if (s.contains("node_limit")) {
            const auto& n = s["node_limit"];
            if (!n.is_number_unsigned()) throw ValidationError("solver.node_limit", "expected a positive integer");
            r.solver.node_limit = n.get<std::uint64_t>();
        }
    }
    return r;
}

double sweep_x(const json& value, std::size_t index) {
    if (value.is_number()) return value.get<double>();
    if (value.is_array() && !value.empty() && value.back().is_number()) return value.back().get<double>();
    return static_cast<double>(index);
}

}  // namespace

ExperimentConfig parse_config(const json& doc) {
    check_keys(doc, "",
               {"name", "preset", "topology", "scenario", "traffic", "epochs", "trials", "seed", "engines",
                "algorithm1", "solver", "sweep", "output"});
    ExperimentConfig c;
    c.document = doc;
    if (doc.contains("name")) c.name = get_string(doc["name"], "name");
    if (doc.contains("seed")) {
        if (!doc["seed"].is_number_unsigned()) throw ValidationError("seed", "expected a non-negative integer");
        c.seed = doc["seed"].get<std::uint64_t>();
    }
    if (doc.contains("output")) {
        const auto& o = doc["output"];
        check_keys(o, "output", {"dir", "flows", "icmp", "votes", "blame", "timing"});
        if (o.contains("dir")) c.output.dir = get_string(o["dir"], "output.dir");
        if (o.contains("flows")) c.output.flows = get_bool(o["flows"], "output.flows");
        if (o.contains("icmp")) c.output.icmp = get_bool(o["icmp"], "output.icmp");
        if (o.contains("votes")) c.output.votes = get_bool(o["votes"], "output.votes");
        if (o.contains("blame")) c.output.blame = get_bool(o["blame"], "output.blame");
        if (o.contains("timing")) c.output.timing = get_bool(o["timing"], "output.timing");
    }
    if (!doc.contains("sweep")) {
        c.points.push_back(parse_point(doc));
        return c;
    }
    const auto& sw = doc["sweep"];
    check_keys(sw, "sweep", {"axis", "values", "x"});
    c.sweep_axis = get_string(sw.value("axis", json(nullptr)), "sweep.axis");
    json::json_pointer ptr;
    try {
        ptr = json::json_pointer(c.sweep_axis);
    } catch (const json::exception& e) {
        throw ValidationError("sweep.axis", std::string("not a JSON pointer: ") + e.what());
    }
    const std::string head = c.sweep_axis.substr(1, c.sweep_axis.find('/', 1) - 1);
    for (const char* banned : {"sweep", "seed", "output", "name"})
        if (head == banned) throw ValidationError("sweep.axis", std::string("cannot sweep ") + banned);
    if (!sw.contains("values") || !sw["values"].is_array() || sw["values"].empty())
        throw ValidationError("sweep.values", "expected a non-empty array");
    const auto& values = sw["values"];
    if (sw.contains("x") && (!sw["x"].is_array() || sw["x"].size() != values.size()))
        throw ValidationError("sweep.x", "expected one number per value");
    for (std::size_t i = 0; i < values.size(); ++i) {
        json point_doc = doc;
        point_doc.erase("sweep");
        try {
            point_doc[ptr] = values[i];
        } catch (const json::exception& e) {
            throw ValidationError("sweep.axis", e.what());
        }
        RunSpec r;
        try {
            r = parse_point(point_doc);
        } catch (const ValidationError& e) {
            throw ValidationError(e.field(), fmt::format("sweep value {}: {}", i, e.what()));
        }
        r.value = values[i];
        r.x = sw.contains("x") ? get_number(sw["x"][i], "sweep.x") : sweep_x(values[i], i);
        c.points.push_back(std::move(r));
    }
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ValidationError("config", "cannot open " + file.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError("config", std::string("invalid JSON: ") + e.what());
    }
    return parse_config(doc);
}

std::optional<double> Counts::accuracy() const {
    if (evaluated == 0) return std::nullopt;
    return double(correct) / double(evaluated);
}

double Counts::precision() const { return tp + fp == 0 ? 1.0 : double(tp) / double(tp + fp); }
double Counts::recall() const { return tp + fn == 0 ? 1.0 : double(tp) / double(tp + fn); }

const Counts* TrialResult::find(Engine e) const {
    for (std::size_t i = 0; i < engines.size(); ++i)
        if (engines[i] == e) return &counts[i];
    return nullptr;
}

const EngineSummary* PointSummary::find(Engine e) const {
    for (const auto& s : engines)
        if (s.engine == e) return &s;
    return nullptr;
}

Stat summarize(const std::vector<double>& v) {
    Stat s;
    s.n = static_cast<std::uint32_t>(v.size());
    if (v.empty()) return s;
    double sum = 0.0;
    for (double x : v) sum += x;
    s.mean = sum / v.size();
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - s.mean) * (x - s.mean);
        s.ci = 1.96 * std::sqrt(ss / (v.size() - 1)) / std::sqrt(double(v.size()));
    }
    return s;
}

unsigned default_workers() {
    if (const char* env = std::getenv("LINKVOTE_WORKERS")) {
        const int n = std::atoi(env);
        if (n > 0) return static_cast<unsigned>(n);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

std::uint64_t trial_seed(std::uint64_t seed, std::uint32_t point, std::uint32_t trial) {
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    };
    return mix(mix(mix(seed) ^ point) ^ (std::uint64_t(trial) << 32));
}

namespace {

using Clock = std::chrono::steady_clock;

void score_links(const std::vector<LinkId>& flagged, const FailureScenario& sc, Counts& c) {
    std::set<LinkId> f(flagged.begin(), flagged.end());
    for (LinkId l : f) (sc.is_failed(l) ? c.tp : c.fp) += 1;
    for (LinkId l : sc.failed) c.fn += !f.count(l);
}

bool bad_above_good(const VoteTally& t, const FailureScenario& sc) {
    if (sc.failed.empty()) return true;
    double lowest_bad = INFINITY, highest_good = 0.0;
    for (LinkId l = 0; l < t.votes.size(); ++l) {
        if (sc.is_failed(l))
            lowest_bad = std::min(lowest_bad, t.votes[l]);
        else
            highest_good = std::max(highest_good, t.votes[l]);
    }
    return lowest_bad > highest_good;
}

}  // namespace

TrialResult run_trial(const RunSpec& spec, std::uint32_t point, std::uint32_t trial, std::uint64_t seed,
                      const OutputSpec& output, bool keep) {
    TrialResult res;
    res.point = point;
    res.trial = trial;
    res.seed = seed;
    res.engines = spec.engines;
    res.counts.resize(spec.engines.size());

    const Topology topo(spec.topology);
    Rng rng(seed);
    auto scenario = std::make_shared<const FailureScenario>(draw_scenario(topo, spec.scenario, rng));
    res.failed = scenario->failed;
    const double t_max = spec.traffic.budget.t_max;
    const std::string prefix = fmt::format("{},{},", point, trial);
    const bool voting = std::find(spec.engines.begin(), spec.engines.end(), Engine::Voting) != spec.engines.end();

    std::ostringstream flows_out, icmp_out, votes_out, blame_out;
    for (std::uint32_t e = 0; e < spec.epochs; ++e) {
        const EpochTrace trace = run_epoch(topo, scenario, spec.traffic, rng, e);
        const GroundTruth gt = ground_truth(trace, topo.link_count());
        const IcmpReport icmp = account_icmp(trace, t_max);
        res.max_icmp_rate = std::max(res.max_icmp_rate, icmp.max_rate);
        res.icmp_violations += icmp.violation;
        res.flows += trace.flows.size();
        for (const auto& f : trace.flows) {
            res.retransmitted += f.retransmitted;
            res.traced += f.traced;
        }
        if (keep && output.flows) write_flows_csv(flows_out, trace, fmt::format("{}{},", prefix, e));
        if (keep && output.icmp) write_icmp_csv(icmp_out, trace, fmt::format("{}{},", prefix, e));

        // Flows on which every engine is judged.
        std::vector<std::uint8_t> judged(trace.flows.size(), 0);
        std::optional<EpochAnalysis> analysis;
        if (voting) {
            const auto t0 = Clock::now();
            analysis = analyze_epoch(trace, topo, spec.algorithm1);
            const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
            for (std::size_t i = 0; i < trace.flows.size(); ++i) judged[i] = analysis->classes[i] == DropClass::Failure;
            res.fidelity_epochs += bad_above_good(analysis->tally, *scenario);
            if (keep && output.votes) write_votes_csv(votes_out, *analysis, prefix);
            if (keep && output.blame) write_blame_csv(blame_out, trace, *analysis, fmt::format("{}{},", prefix, e));
            for (std::size_t k = 0; k < spec.engines.size(); ++k) {
                if (spec.engines[k] != Engine::Voting) continue;
                auto& c = res.counts[k];
                c.seconds += secs;
                for (std::size_t i = 0; i < trace.flows.size(); ++i) {
                    if (!judged[i]) continue;
                    ++c.evaluated;
                    c.correct += analysis->blame[i] == trace.flows[i].culprit;
                }
                score_links(analysis->bad.links, *scenario, c);
            }
        } else {
            for (std::size_t i = 0; i < trace.flows.size(); ++i)
                judged[i] = trace.flows[i].traced && gt.flow_class[i] == DropClass::Failure;
        }

        bool need_matrix = false;
        for (auto eng : spec.engines) need_matrix = need_matrix || eng != Engine::Voting;
        if (!need_matrix) continue;
        std::vector<FlowRecord> traced;
        std::vector<std::size_t> index;
        for (std::size_t i = 0; i < trace.flows.size(); ++i)
            if (trace.flows[i].traced && trace.flows[i].retransmitted) {
                traced.push_back(trace.flows[i]);
                index.push_back(i);
            }
        const RoutingMatrix m = build_routing_matrix(traced, topo.link_count());
        for (std::size_t k = 0; k < spec.engines.size(); ++k) {
            const Engine eng = spec.engines[k];
            if (eng == Engine::Voting) continue;
            CoverSolution sol;
            if (eng == Engine::Greedy)
                sol = greedy_cover(m);
            else if (eng == Engine::ExactBinary)
                sol = exact_binary(m, spec.solver);
            else
                sol = exact_integer(m, spec.solver);
            auto& c = res.counts[k];
            c.seconds += sol.wall_seconds;
            c.optimal += sol.optimal;
            c.budget_exceeded += sol.budget_exceeded;
            const Ranking ranking = solution_ranking(m, sol);
            for (std::size_t j = 0; j < traced.size(); ++j) {
                if (!judged[index[j]]) continue;
                ++c.evaluated;
                c.correct += blame_flow(traced[j], ranking) == traced[j].culprit;
            }
            score_links(sol.links, *scenario, c);
            if (keep) {
                json s = to_json(sol);
                s["point"] = point;
                s["trial"] = trial;
                s["epoch"] = e;
                s["engine"] = to_string(eng);
                res.solutions.push_back(std::move(s));
            }
        }
    }
    if (keep) {
        res.flows_csv = flows_out.str();
        res.icmp_csv = icmp_out.str();
        res.votes_csv = votes_out.str();
        res.blame_csv = blame_out.str();
    }
    return res;
}

MetricsReport run_experiment(const ExperimentConfig& config, const RunOptions& options) {
    struct Job {
        std::uint32_t point, trial;
    };
    std::vector<Job> jobs;
    for (std::uint32_t p = 0; p < config.points.size(); ++p)
        for (std::uint32_t t = 0; t < config.points[p].trials; ++t) jobs.push_back({p, t});

    MetricsReport report;
    report.trials.resize(jobs.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= jobs.size()) return;
            try {
                const auto& j = jobs[i];
                report.trials[i] = run_trial(config.points[j.point], j.point, j.trial,
                                             trial_seed(config.seed, j.point, j.trial), config.output,
                                             options.keep_artifacts);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = jobs.size();
            }
        }
    };
    const unsigned workers = std::min<std::size_t>(options.workers ? options.workers : default_workers(),
                                                   std::max<std::size_t>(1, jobs.size()));
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    bool any_solver = false;
    report.budget_exceeded_everywhere = true;
    for (std::uint32_t p = 0; p < config.points.size(); ++p) {
        const auto& spec = config.points[p];
        PointSummary ps;
        ps.x = spec.x;
        ps.value = spec.value;
        std::vector<double> fidelity;
        bool point_exceeded = false;
        for (std::size_t k = 0; k < spec.engines.size(); ++k) {
            std::vector<double> acc, prec, rec;
            EngineSummary es{spec.engines[k], {}, {}, {}, 0};
            for (const auto& t : report.trials) {
                if (t.point != p) continue;
                const auto& c = t.counts[k];
                if (auto a = c.accuracy()) acc.push_back(*a);
                prec.push_back(c.precision());
                rec.push_back(c.recall());
                es.budget_exceeded += c.budget_exceeded;
            }
            es.accuracy = summarize(acc);
            es.precision = summarize(prec);
            es.recall = summarize(rec);
            if (spec.engines[k] != Engine::Voting) any_solver = true;
            point_exceeded = point_exceeded || es.budget_exceeded > 0;
            ps.engines.push_back(es);
        }
        for (const auto& t : report.trials)
            if (t.point == p) fidelity.push_back(double(t.fidelity_epochs) / spec.epochs);
        ps.fidelity = summarize(fidelity);
        report.budget_exceeded_everywhere = report.budget_exceeded_everywhere && point_exceeded;
        report.points.push_back(std::move(ps));
    }
    report.budget_exceeded_everywhere = report.budget_exceeded_everywhere && any_solver;
    return report;
}

std::vector<PlotRow> plot_rows(const MetricsReport& report) {
    std::vector<PlotRow> rows;
    for (const auto& p : report.points) {
        for (const auto& e : p.engines) {
            const std::string name = to_string(e.engine);
            if (e.accuracy.n > 0) rows.push_back({p.x, name + "_accuracy", e.accuracy.mean, e.accuracy.ci});
            rows.push_back({p.x, name + "_precision", e.precision.mean, e.precision.ci});
            rows.push_back({p.x, name + "_recall", e.recall.mean, e.recall.ci});
        }
    }
    return rows;
}

void write_plotdata(std::ostream& out, const std::vector<PlotRow>& rows) {
    out << "x,series,mean,ci\n";
    for (const auto& r : rows) out << fmt::format("{},{},{:.6f},{:.6f}\n", r.x, r.series, r.mean, r.ci);
}

std::vector<PlotRow> read_plotdata(std::istream& in) {
    std::vector<PlotRow> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (lineno == 1 || line.empty()) continue;
        std::stringstream ss(line);
        std::string x, series, mean, ci;
        if (!std::getline(ss, x, ',') || !std::getline(ss, series, ',') || !std::getline(ss, mean, ',') ||
            !std::getline(ss, ci, ','))
            throw std::runtime_error(fmt::format("plotdata line {}: expected 4 fields", lineno));
        try {
            rows.push_back({std::stod(x), series, std::stod(mean), std::stod(ci)});
        } catch (const std::exception&) {
            throw std::runtime_error(fmt::format("plotdata line {}: bad number", lineno));
        }
    }
    return rows;
}

std::string render_svg(const std::vector<PlotRow>& rows, const std::string& title, const std::string& x_label) {
    const double W = 720, H = 420, L = 70, R = 200, T = 40, B = 60;
    std::vector<std::string> series;
    double xmin = INFINITY, xmax = -INFINITY, ymax = 1.0;
    for (const auto& r : rows) {
        if (std::find(series.begin(), series.end(), r.series) == series.end()) series.push_back(r.series);
        xmin = std::min(xmin, r.x);
        xmax = std::max(xmax, r.x);
        ymax = std::max(ymax, r.mean + r.ci);
    }
    const bool logx = xmin > 0.0 && xmax / xmin >= 100.0;
    auto tx = [&](double x) {
        if (!(xmax > xmin)) return L + (W - L - R) / 2;
        const double f = logx ? (std::log10(x) - std::log10(xmin)) / (std::log10(xmax) - std::log10(xmin))
                              : (x - xmin) / (xmax - xmin);
        return L + f * (W - L - R);
    };
    auto ty = [&](double y) { return H - B - y / ymax * (H - T - B); };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                   "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

    std::string s = fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" font-family=\"sans-serif\" "
        "font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
        W, H);
    s += fmt::format("<text x=\"{}\" y=\"24\" font-size=\"15\">{}</text>\n", L, title);
    s += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n", L, H - B, W - R);
    s += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n", L, T, H - B);
    for (int i = 0; i <= 5; ++i) {
        const double y = ymax * i / 5;
        s += fmt::format("<text x=\"{}\" y=\"{:.1f}\" text-anchor=\"end\">{:.2f}</text>\n", L - 6, ty(y) + 4, y);
        s += fmt::format("<line x1=\"{}\" y1=\"{:.1f}\" x2=\"{}\" y2=\"{:.1f}\" stroke=\"#ddd\"/>\n", L, ty(y), W - R,
                         ty(y));
    }
    std::vector<double> xs;
    for (const auto& r : rows)
        if (std::find(xs.begin(), xs.end(), r.x) == xs.end()) xs.push_back(r.x);
    for (double x : xs)
        s += fmt::format("<text x=\"{:.1f}\" y=\"{}\" text-anchor=\"middle\">{:g}</text>\n", tx(x), H - B + 18, x);
    s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", L + (W - L - R) / 2, H - 15,
                     x_label);
    for (std::size_t k = 0; k < series.size(); ++k) {
        const char* c = colors[k % 10];
        std::string pts;
        for (const auto& r : rows) {
            if (r.series != series[k]) continue;
            pts += fmt::format("{:.1f},{:.1f} ", tx(r.x), ty(r.mean));
            s += fmt::format("<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{0:.1f}\" y2=\"{2:.1f}\" stroke=\"{3}\"/>\n",
                             tx(r.x), ty(r.mean - r.ci), ty(r.mean + r.ci), c);
            s += fmt::format("<circle cx=\"{:.1f}\" cy=\"{:.1f}\" r=\"3\" fill=\"{}\"/>\n", tx(r.x), ty(r.mean), c);
        }
        s += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"2\" points=\"{}\"/>\n", c, pts);
        const double ly = T + 10 + 18 * k;
        s += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"{3}\" stroke-width=\"2\"/>\n",
                         W - R + 15, ly, W - R + 35, c);
        s += fmt::format("<text x=\"{}\" y=\"{}\">{}</text>\n", W - R + 40, ly + 4, series[k]);
    }
    s += "</svg>\n";
    return s;
}

void write_outputs(const ExperimentConfig& config, const MetricsReport& report, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto open = [&](const char* name) {
        std::ofstream f(dir / name, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
        return f;
    };
    auto opt = [](std::optional<double> v) { return v ? fmt::format("{:.6f}", *v) : std::string(); };

    {
        auto f = open("metrics.csv");
        f << "point,x,trial,engine,flows,retransmitted,traced,max_icmp_rate,fidelity_epochs,evaluated,correct,"
             "accuracy,tp,fp,fn,precision,precision_undefined,recall,optimal_epochs,budget_exceeded_epochs\n";
        for (const auto& t : report.trials) {
            const double x = config.points[t.point].x;
            for (std::size_t k = 0; k < t.engines.size(); ++k) {
                const auto& c = t.counts[k];
                f << fmt::format("{},{},{},{},{},{},{},{:.4f},{},{},{},{},{},{},{},{:.6f},{},{:.6f},{},{}\n", t.point, x,
                                 t.trial, to_string(t.engines[k]), t.flows, t.retransmitted, t.traced,
                                 t.max_icmp_rate, t.fidelity_epochs, c.evaluated, c.correct, opt(c.accuracy()), c.tp,
                                 c.fp, c.fn, c.precision(), int(c.precision_undefined()), c.recall(), c.optimal,
                                 c.budget_exceeded);
            }
        }
    }
    if (config.output.timing) {
        auto f = open("timing.csv");
        f << "point,trial,engine,seconds\n";
        for (const auto& t : report.trials)
            for (std::size_t k = 0; k < t.engines.size(); ++k)
                f << fmt::format("{},{},{},{:.6f}\n", t.point, t.trial, to_string(t.engines[k]), t.counts[k].seconds);
    }
    const auto rows = plot_rows(report);
    {
        auto f = open("plotdata.csv");
        write_plotdata(f, rows);
    }
    {
        auto f = open("chart.svg");
        f << render_svg(rows, config.name, config.sweep_axis.empty() ? "x" : config.sweep_axis);
    }
    {
        auto f = open("config.json");
        f << config.document.dump(2) << '\n';
    }
    if (config.output.votes) {
        auto f = open("votes.csv");
        write_votes_csv_header(f, "point,trial,");
        for (const auto& t : report.trials) f << t.votes_csv;
    }
    if (config.output.blame) {
        auto f = open("blame.csv");
        write_blame_csv_header(f, "point,trial,epoch,");
        for (const auto& t : report.trials) f << t.blame_csv;
    }
    if (config.output.flows) {
        auto f = open("flows.csv");
        write_flows_csv_header(f, "point,trial,epoch,");
        for (const auto& t : report.trials) f << t.flows_csv;
    }
    if (config.output.icmp) {
        auto f = open("icmp.csv");
        write_icmp_csv_header(f, "point,trial,epoch,");
        for (const auto& t : report.trials) f << t.icmp_csv;
    }
    bool solvers = false;
    for (const auto& p : config.points)
        for (auto e : p.engines) solvers = solvers || e != Engine::Voting;
    if (solvers) {
        json all = json::array();
        for (const auto& t : report.trials)
            for (const auto& s : t.solutions) all.push_back(s);
        auto f = open("solutions.json");
        f << all.dump(1) << '\n';
    }
}

}  // namespace linkvote
