#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include <fmt/core.h>

#include "linkvote/cover.hpp"
#include "linkvote/experiment.hpp"
#include "linkvote/theory.hpp"

using namespace linkvote;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

MetricsReport run(const json& doc, unsigned workers = 0) {
    return run_experiment(parse_config(doc), {workers, false});
}

const EngineSummary& voting(const PointSummary& p) { return *p.find(Engine::Voting); }

// 1. ICMP load with every host tracing at the budget.
Outcome icmp_budget() {
    const ClosParams p = topology_preset("paper2pod");
    const Topology t(p);
    std::vector<double> rates(t.link_count(), 0.0);
    for (LinkId l : links_by_level(t, LinkLevel::Host)) rates[l] = 1.0;
    auto saturated = std::make_shared<const FailureScenario>(rates, std::vector<LinkId>{});
    TrafficConfig tc;
    Rng rng(1);
    double worst = 0.0;
    std::uint32_t over = 0;
    std::vector<double> tier_max(3, 0.0);
    for (std::uint32_t e = 0; e < 1000; ++e) {
        const auto tr = run_epoch(t, saturated, tc, rng, e);
        const auto rep = account_icmp(tr, 100.0);
        worst = std::max(worst, rep.max_rate);
        over += rep.violation;
        for (SwitchId s = 0; s < t.switch_count(); ++s) {
            const auto tier = static_cast<int>(t.switch_node(s).tier) - 1;
            tier_max[tier] = std::max(tier_max[tier], rep.rates[s]);
        }
    }

    ScenarioSpec spec;
    spec.failed_rate = {1e-3, 1e-2};
    spec.placement = Placement::Switch;
    double ordinary = 0.0;
    for (std::uint32_t e = 0; e < 50; ++e) {
        auto sc = std::make_shared<const FailureScenario>(draw_scenario(t, spec, rng));
        ordinary = std::max(ordinary, account_icmp(run_epoch(t, sc, tc, rng, e), 100.0).max_rate);
    }
    return {over == 0,
            fmt::format("C_t={:.3f}, all flows retransmit: max {:.1f}/s (tor {:.1f}, tier1 {:.1f}, tier2 {:.1f}), "
                        "{} of 1000 epochs over 100; ordinary demand max {:.2f}/s",
                        traceroute_budget(p, 100).c_t, worst, tier_max[0], tier_max[1], tier_max[2], over, ordinary)};
}

json desk(const json& extra) {
    json doc = json::parse(R"({
        "preset": "desk2pod",
        "scenario": {"failed_links": 1, "failed_rate": [0.001, 0.01], "good_rate": [0, 1e-6], "placement": "switch"},
        "traffic": {"flows_per_host": 60},
        "epochs": 1, "trials": 50, "engines": ["voting"]
    })");
    doc.merge_patch(extra);
    return doc;
}

// 2. Per-flow accuracy with 1, 3 and 5 failures.
Outcome multi_failure_accuracy() {
    const auto rep = run(desk(json::parse(R"({
        "seed": 2,
        "scenario": {"failed_rate": [0.0005, 0.01]},
        "sweep": {"axis": "/scenario/failed_links", "values": [1, 3, 5]}
    })")));
    bool ok = true;
    std::string d;
    for (const auto& pt : rep.points) {
        const double a = voting(pt).accuracy.mean;
        ok &= a >= 0.90;
        d += fmt::format("k={} acc {:.4f}  ", pt.x, a);
    }
    return {ok, d + "(need >= 0.90)"};
}

// 3. Algorithm 1 on a single failure.
Outcome single_failure() {
    const auto rep = run(desk(json::parse(R"({"seed": 3})")));
    const auto& v = voting(rep.points.at(0));
    return {v.precision.mean >= 0.90 && v.recall.mean >= 0.90,
            fmt::format("precision {:.4f}, recall {:.4f} (need >= 0.90)", v.precision.mean, v.recall.mean)};
}

// 4. Failed links outrank good links more often as connections grow.
Outcome ranking_fidelity() {
    const auto rep = run(desk(json::parse(R"({
        "seed": 4, "trials": 200, "epochs": 2,
        "scenario": {"failed_links": 3, "failed_rate": [0.0005, 0.01], "shared_failed_rate": true},
        "sweep": {"axis": "/traffic/flows_per_host", "values": [1, 2, 4]}
    })")));
    std::vector<double> eps;
    std::string d;
    const double hosts = topology_preset("desk2pod").host_count();
    for (const auto& pt : rep.points) {
        eps.push_back(1.0 - pt.fidelity.mean);
        d += fmt::format("N={:.0f} eps_emp {:.4f}  ", hosts * pt.x, eps.back());
    }
    const bool ok = eps.size() == 3 && eps[0] > eps[1] && eps[1] > eps[2];
    return {ok, d + "(need strictly decreasing)"};
}

// 5. Monte Carlo vote probabilities against the closed-form bounds.
Outcome vote_bounds() {
    Rng gen(5);
    auto pick = [&](std::uint32_t lo, std::uint32_t hi) { return std::uniform_int_distribution<std::uint32_t>(lo, hi)(gen); };
    bool ok = true;
    std::string d;
    for (int made = 0; made < 5;) {
        ClosParams p;
        p.n0 = pick(2, 8);
        p.n2 = pick(1, p.n0 - 1);
        p.n1 = pick(1, 6);
        p.hosts_per_tor = 1;
        p.include_host_links = false;
        p.n_pod = 2;
        const double need = theory::pod_condition(p).required_pods;
        if (!std::isfinite(need) || need > 8) continue;
        p.n_pod = static_cast<std::uint32_t>(std::ceil(need)) + pick(0, 1);
        if (!theory::pod_condition(p).holds) continue;
        const double kb = theory::k_bound(p);
        const std::uint32_t kmax = std::min<std::uint32_t>(p.n0, static_cast<std::uint32_t>(std::ceil(kb)) - 1);
        if (kmax < 1) continue;
        const std::uint32_t k = pick(1, kmax);
        ++made;

        const Topology t(p);
        const double r_b = 0.2 + 0.6 * std::uniform_real_distribution<double>()(gen);
        const double r_g = 1e-3 * std::uniform_real_distribution<double>()(gen);
        std::vector<double> r(t.link_count(), r_g);
        std::vector<LinkId> bad;
        for (std::uint32_t i = 0; i < k; ++i) bad.push_back(t.level1_link(t.tor_global(0, i), 0));
        for (LinkId l : bad) r[l] = r_b;
        std::vector<LinkId> watch = bad;
        for (LinkId l = 0; l < t.link_count(); ++l)
            if (std::find(bad.begin(), bad.end(), l) == bad.end()) watch.push_back(l);

        Rng mc(100 + made);
        const auto est = theory::estimate_vote_probabilities(t, r, watch, 1'000'000, mc);
        const auto b = theory::vote_prob_bounds(p, k, r_b, r_g);
        double min_bad = 1.0, max_good = 0.0;
        bool this_ok = true;
        for (std::size_t i = 0; i < watch.size(); ++i) {
            const double v = est.probability(i), s = est.sigma(i);
            if (i < k) {
                min_bad = std::min(min_bad, v);
                this_ok &= v >= b.v_b_lower - 3 * s;
            } else {
                max_good = std::max(max_good, v);
                this_ok &= v <= b.v_g_upper + 3 * s;
            }
        }
        ok &= this_ok;
        d += fmt::format("[({},{},{},{}) k={} v_b {:.2e}>={:.2e} v_g {:.2e}<={:.2e}{}] ", p.n_pod, p.n0, p.n1, p.n2, k,
                         min_bad, b.v_b_lower, max_good, b.v_g_upper, this_ok ? "" : " FAIL");
    }
    return {ok, d};
}

// 6. Solvers against power-set enumeration.
bool covers(const RoutingMatrix& m, std::uint32_t mask) {
    for (std::size_t i = 0; i < m.flow_count(); ++i) {
        if (!m.status[i]) continue;
        bool hit = false;
        for (LinkId l : m.rows[i]) hit |= (mask >> l) & 1u;
        if (!hit) return false;
    }
    return true;
}

bool split_ok(const RoutingMatrix& m, const std::vector<LinkId>& sup, std::vector<std::uint64_t>& p, std::size_t at,
              std::uint64_t left) {
    if (at + 1 == sup.size()) {
        p[at] = left;
        for (std::size_t i = 0; i < m.flow_count(); ++i) {
            std::uint64_t got = 0;
            for (std::size_t s = 0; s < sup.size(); ++s)
                if (std::find(m.rows[i].begin(), m.rows[i].end(), sup[s]) != m.rows[i].end()) got += p[s];
            if (got < m.drops[i]) return false;
        }
        return true;
    }
    for (std::uint64_t v = 0; v <= left; ++v) {
        p[at] = v;
        if (split_ok(m, sup, p, at + 1, left - v)) return true;
    }
    return false;
}

std::pair<std::size_t, std::size_t> enumerate_optima(const RoutingMatrix& m) {
    std::size_t binary = m.link_count + 1, integer = m.link_count + 1;
    std::uint64_t total = 0;
    for (auto c : m.drops) total += c;
    for (std::uint32_t mask = 0; mask < (1u << m.link_count); ++mask) {
        const std::size_t size = std::popcount(mask);
        if (!covers(m, mask)) continue;
        binary = std::min(binary, size);
        if (size >= integer) continue;
        if (total == 0) {
            integer = 0;
            continue;
        }
        std::vector<LinkId> sup;
        for (LinkId l = 0; l < m.link_count; ++l)
            if ((mask >> l) & 1u) sup.push_back(l);
        std::vector<std::uint64_t> p(sup.size());
        if (split_ok(m, sup, p, 0, total)) integer = size;
    }
    return {binary, integer};
}

Outcome solver_oracle() {
    Rng rng(6);
    int mismatches = 0, greedy_worse = 0;
    for (int it = 0; it < 200; ++it) {
        RoutingMatrix m;
        m.link_count = 2 + rng() % 11;
        const std::uint32_t failed = 1 + rng() % 10, healthy = rng() % 4;
        for (std::uint32_t i = 0; i < failed + healthy; ++i) {
            std::vector<LinkId> row;
            const std::uint32_t len = 1 + rng() % 4;
            for (std::uint32_t j = 0; j < len; ++j) {
                const LinkId l = rng() % m.link_count;
                if (std::find(row.begin(), row.end(), l) == row.end()) row.push_back(l);
            }
            m.add_row(i, row, i < failed ? 1 + rng() % 3 : 0);
        }
        const auto [bin, integer] = enumerate_optima(m);
        const auto g = greedy_cover(m), b = exact_binary(m), q = exact_integer(m);
        mismatches += b.links.size() != bin || q.links.size() != integer || !b.optimal || !q.optimal;
        mismatches += g.links.size() < b.links.size();
        greedy_worse += g.links.size() > b.links.size();
    }

    RoutingMatrix toy;
    toy.link_count = 3;  // 0 = (1,4), 1 = (2,4), 2 = (3,4)
    toy.add_row(0, std::vector<LinkId>{0, 1}, 2);
    toy.add_row(1, std::vector<LinkId>{2, 1}, 1);
    toy.add_row(2, std::vector<LinkId>{0, 2}, 0);
    const std::vector<LinkId> want{1};
    std::vector<FlowRecord> flows(3);
    for (std::uint32_t i = 0; i < 3; ++i) {
        flows[i].path = Path::from_links(toy.rows[i]);
        flows[i].drops[0] = toy.drops[i];
        flows[i].finalize();
        flows[i].traced = flows[i].retransmitted;
    }
    const auto ranking = rank_links(tally_votes(flows, 3).votes);
    const bool toy_ok = greedy_cover(toy).links == want && exact_binary(toy).links == want &&
                        exact_integer(toy).links == want && exact_integer(toy).counts.at(1) == 3 &&
                        blame_flow(flows[0], ranking) == 1 && blame_flow(flows[1], ranking) == 1;
    return {mismatches == 0 && toy_ok,
            fmt::format("200 instances, {} mismatches vs enumeration, greedy strictly larger on {}; toy {}", mismatches,
                        greedy_worse, toy_ok ? "{link 1}" : "wrong")};
}

// 7. Binomial race against the large-deviation bound.
Outcome large_deviation() {
    Rng rng(7);
    bool ok = true;
    std::string d;
    double prev = 2.0;
    for (double n : {1e4, 2e4, 4e4}) {
        const double v_b = 2e-3, v_g = 5e-4;
        const double eps = theory::epsilon_bound(n, v_g, v_b);
        const double win = theory::bad_outvotes_good(static_cast<std::uint64_t>(n), v_b, v_g, 1000, rng);
        ok &= win >= 1.0 - eps && eps < prev;
        prev = eps;
        d += fmt::format("N={:.0f}: Pr(B>=G) {:.3f} >= {:.4f}  ", n, win, 1.0 - eps);
    }
    return {ok, d};
}

// 8. Byte-identical outputs regardless of worker count.
std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome determinism() {
    const json doc = json::parse(R"({
        "name": "det",
        "topology": {"n_pod": 2, "n0": 4, "n1": 4, "n2": 2, "hosts_per_tor": 10},
        "scenario": {"failed_links": 2, "failed_rate": [0.001, 0.01], "placement": "switch"},
        "traffic": {"flows_per_host": 30},
        "epochs": 2, "trials": 6, "seed": 8,
        "engines": ["voting", "greedy", "exact_binary", "exact_integer"],
        "sweep": {"axis": "/scenario/failed_links", "values": [1, 2]},
        "output": {"flows": true, "icmp": true}
    })");
    const auto cfg = parse_config(doc);
    const fs::path base = fs::temp_directory_path() / "linkvote_acceptance";
    fs::remove_all(base);
    std::vector<fs::path> dirs{base / "w1a", base / "w1b", base / "w4"};
    const unsigned workers[] = {1, 1, 4};
    for (int i = 0; i < 3; ++i) write_outputs(cfg, run_experiment(cfg, {workers[i], true}), dirs[i]);
    int compared = 0, differ = 0;
    for (const auto& entry : fs::directory_iterator(dirs[0])) {
        const auto name = entry.path().filename();
        for (int i = 1; i < 3; ++i) {
            ++compared;
            differ += slurp(dirs[0] / name) != slurp(dirs[i] / name);
        }
    }
    fs::remove_all(base);
    return {differ == 0 && compared >= 18, fmt::format("{} file comparisons, {} differ", compared, differ)};
}

// 9. Accuracy under growing background loss.
Outcome noise() {
    const auto rep = run(desk(json::parse(R"({
        "seed": 9,
        "scenario": {"failed_rate": 0.001},
        "sweep": {"axis": "/scenario/good_rate", "values": [[0, 0], [0, 2.5e-7], [0, 5e-7], [0, 1e-6]]}
    })")));
    double lo = 1.0, hi = 0.0;
    std::string d;
    for (const auto& pt : rep.points) {
        const double a = voting(pt).accuracy.mean;
        lo = std::min(lo, a);
        hi = std::max(hi, a);
        d += fmt::format("p_g<={:g}: {:.4f}  ", pt.x, a);
    }
    return {hi - lo <= 0.05, d + fmt::format("spread {:.4f} (need <= 0.05)", hi - lo)};
}

// 10. Precision and recall from one to four pods.
Outcome pods() {
    const auto rep = run(desk(json::parse(R"({
        "seed": 10,
        "sweep": {"axis": "/topology/n_pod", "values": [1, 2, 3, 4]}
    })")));
    bool ok = true;
    std::string d;
    for (const auto& pt : rep.points) {
        const auto& v = voting(pt);
        ok &= v.precision.mean >= 0.95 && v.recall.mean >= 0.90;
        d += fmt::format("{} pods: P {:.3f} R {:.3f}  ", pt.x, v.precision.mean, v.recall.mean);
    }
    return {ok, d + "(need P >= 0.95, R >= 0.90)"};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"icmp budget", icmp_budget},          {"multi-failure accuracy", multi_failure_accuracy},
        {"single failure", single_failure},    {"ranking fidelity", ranking_fidelity},
        {"vote probability bounds", vote_bounds}, {"solver oracle", solver_oracle},
        {"large deviation", large_deviation},  {"determinism", determinism},
        {"noise robustness", noise},           {"pod sweep", pods},
    };
    std::vector<int> only;
    for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        failed += !o.pass;
        fmt::print("{} {:>2} {:<24} {:6.1f}s  {}\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, secs, o.detail);
        std::fflush(stdout);
    }
    return failed ? 1 : 0;
}
