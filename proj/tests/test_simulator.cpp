#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "doctest.h"
#include "linkvote/errors.hpp"
#include "linkvote/simulator.hpp"

using namespace linkvote;

namespace {

std::shared_ptr<const FailureScenario> uniform_rates(const Topology& t, double rate, std::vector<LinkId> failed = {},
                                                     double failed_rate = 0.0) {
    std::vector<double> r(t.link_count(), rate);
    for (LinkId l : failed) r[l] = failed_rate;
    return std::make_shared<FailureScenario>(std::move(r), std::move(failed));
}

std::size_t count_lines(const std::string& s) { return std::count(s.begin(), s.end(), '\n'); }

}  // namespace

TEST_CASE("binomial sampler moments") {
    Rng rng(9);
    for (auto [n, p] : {std::pair{100u, 0.01}, std::pair{100u, 0.3}, std::pair{5000u, 1e-3}}) {
        const int trials = 20000;
        double sum = 0, sq = 0;
        for (int i = 0; i < trials; ++i) {
            const double x = sample_binomial(n, p, std::log1p(-p), rng);
            sum += x;
            sq += x * x;
        }
        const double mean = sum / trials, var = sq / trials - mean * mean;
        const double want = n * p, want_var = n * p * (1 - p);
        CHECK(std::abs(mean - want) < 5 * std::sqrt(want_var / trials));
        CHECK(var == doctest::Approx(want_var).epsilon(0.1));
    }
    CHECK(sample_binomial(0, 0.5, std::log1p(-0.5), rng) == 0);
    CHECK(sample_binomial(7, 1.0, 0.0, rng) == 7);
}

TEST_CASE("drops stop at a dead link") {
    Topology t({2, 2, 2, 2, 1, true});
    const Path path = make_path(t, 0, 3, {0, 0, 0});
    auto sc = uniform_rates(t, 0.0, {path.link_ids[2]}, 1.0);
    Rng rng(1);
    std::array<std::uint32_t, kMaxPathLinks> drops{};
    simulate_drops(path, 100, *sc, rng, drops);
    CHECK(drops[2] == 100);
    CHECK(drops[0] + drops[1] + drops[3] + drops[4] + drops[5] == 0);
}

TEST_CASE("culprit ties go to the lowest id") {
    FlowRecord f;
    const std::vector<LinkId> ids{9, 4, 7};
    f.path = Path::from_links(ids);
    f.drops = {2, 1, 2};
    f.finalize();
    CHECK(f.retransmitted);
    CHECK(f.culprit == 7);
    f.drops = {0, 0, 0};
    f.finalize();
    CHECK_FALSE(f.retransmitted);
    CHECK(f.culprit == kNoLink);
}

TEST_CASE("traceroute budget") {
    const auto b = traceroute_budget({2, 20, 10, 10, 40, true}, 100);
    CHECK(b.c_t == doctest::Approx(1.25));
    CHECK_FALSE(b.single_pod);
    const auto single = traceroute_budget({1, 4, 2, 2, 10, true}, 100);
    CHECK(single.single_pod);
    CHECK(single.c_t == doctest::Approx(100.0 / 40 * 2));
    TrafficConfig tc;
    CHECK(traces_per_epoch({2, 20, 10, 10, 40, true}, tc) == 37);
    tc.budget.mode = BudgetMode::Unlimited;
    CHECK(traces_per_epoch({2, 20, 10, 10, 40, true}, tc) == UINT64_MAX);
}

TEST_CASE("scenario draws respect the spec") {
    Topology t({2, 4, 4, 2, 4, true});
    Rng rng(21);
    ScenarioSpec spec;
    spec.failed_links = 3;
    spec.failed_rate = {1e-3, 1e-2};
    spec.placement = Placement::Switch;
    for (int i = 0; i < 100; ++i) {
        const auto sc = draw_scenario(t, spec, rng);
        CHECK(sc.k() == 3);
        CHECK(std::set<LinkId>(sc.failed.begin(), sc.failed.end()).size() == 3);
        for (LinkId l = 0; l < t.link_count(); ++l) {
            if (sc.is_failed(l)) {
                CHECK(t.link(l).level != LinkLevel::Host);
                CHECK(sc.rates[l] >= 1e-3);
                CHECK(sc.rates[l] <= 1e-2);
            } else {
                CHECK(sc.rates[l] <= 1e-6);
            }
        }
    }
    spec.shared_failed_rate = true;
    const auto shared = draw_scenario(t, spec, rng);
    CHECK(shared.rates[shared.failed[0]] == shared.rates[shared.failed[2]]);

    spec.failed_links = 1000;
    CHECK_THROWS_AS(validate(spec, t), ValidationError);
    spec.failed_links = 1;
    spec.placement = Placement::Fixed;
    spec.fixed_links = {t.link_count()};
    CHECK_THROWS_AS(validate(spec, t), ValidationError);
}

TEST_CASE("epoch bookkeeping") {
    Topology t({2, 4, 2, 2, 3, true});
    TrafficConfig tc;
    tc.flows_per_host = {10, 10};
    Rng rng(4);
    SUBCASE("clean fabric") {
        const auto tr = run_epoch(t, uniform_rates(t, 0.0), tc, rng);
        CHECK(tr.flows.size() == t.params().host_count() * 10u);
        for (const auto& f : tr.flows) {
            CHECK_FALSE(f.retransmitted);
            CHECK_FALSE(f.traced);
        }
    }
    SUBCASE("traces stay within the allowance and charge each switch once") {
        const auto tr = run_epoch(t, uniform_rates(t, 0.02), tc, rng);
        const auto allowance = traces_per_epoch(t.params(), tc);
        std::vector<std::uint32_t> icmp(t.switch_count(), 0);
        for (const auto& f : tr.flows) {
            if (f.traced) {
                CHECK(f.retransmitted);
                for (SwitchId s : f.path.switches()) ++icmp[s];
            }
        }
        CHECK(icmp == tr.icmp);
        for (auto n : tr.traceroutes) CHECK(n <= allowance);
        for (HostId h = 0; h < t.params().host_count(); ++h) {
            std::uint32_t retrans = 0;
            for (const auto& f : tr.flows) retrans += f.src == h && f.retransmitted;
            CHECK(tr.traceroutes[h] == std::min<std::uint64_t>(retrans, allowance));
        }
    }
}

TEST_CASE("icmp stays under the cap at ordinary demand") {
    Topology t({2, 20, 10, 10, 40, true});
    ScenarioSpec spec;
    spec.failed_rate = {1e-3, 1e-2};
    spec.placement = Placement::Switch;
    TrafficConfig tc;
    Rng rng(2);
    auto sc = std::make_shared<const FailureScenario>(draw_scenario(t, spec, rng));
    for (std::uint32_t e = 0; e < 5; ++e) CHECK_FALSE(account_icmp(run_epoch(t, sc, tc, rng, e), 100).violation);
}

TEST_CASE("noise is a single drop on the culprit link") {
    Topology t({2, 2, 2, 2, 1, true});
    EpochTrace tr;
    tr.scenario = uniform_rates(t, 0.0);
    FlowRecord a;
    a.path = make_path(t, 0, 3, {0, 0, 0});
    a.drops[2] = 1;
    a.finalize();
    FlowRecord b = a;
    b.path = make_path(t, 1, 2, {0, 0, 0});
    b.drops = {};
    b.drops[1] = 3;
    b.finalize();
    FlowRecord c = b;
    c.drops = {};
    c.finalize();
    tr.flows = {a, b, c};
    const auto g = ground_truth(tr, t.link_count());
    CHECK(g.flow_class[0] == DropClass::Noise);
    CHECK(g.flow_class[1] == DropClass::Failure);
    CHECK(g.flow_class[2] == DropClass::None);
    CHECK(g.link_drops[a.path.link_ids[2]] == 1);
}

TEST_CASE("csv rows match flows and switches") {
    Topology t({2, 4, 2, 2, 3, true});
    TrafficConfig tc;
    tc.flows_per_host = {5, 5};
    Rng rng(8);
    const auto tr = run_epoch(t, uniform_rates(t, 0.01), tc, rng);
    std::ostringstream flows, icmp;
    write_flows_csv_header(flows, "trial,");
    write_flows_csv(flows, tr, "0,");
    write_icmp_csv_header(icmp);
    write_icmp_csv(icmp, tr);
    CHECK(count_lines(flows.str()) == tr.flows.size() + 1);
    CHECK(count_lines(icmp.str()) == t.switch_count() + 1);
    CHECK(flows.str().rfind("trial,", 0) == 0);
}

TEST_CASE("placement names") {
    for (auto p : {Placement::Uniform, Placement::Switch, Placement::Level1, Placement::Level2, Placement::Host,
                   Placement::Fixed})
        CHECK(placement_from_string(to_string(p)) == p);
    CHECK_THROWS_AS(placement_from_string("nowhere"), ValidationError);
}
