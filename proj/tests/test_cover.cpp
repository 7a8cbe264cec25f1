#include <algorithm>
#include <bit>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "linkvote/cover.hpp"

using namespace linkvote;

namespace {

RoutingMatrix toy(std::vector<std::uint32_t> c = {1, 1, 0}) {
    RoutingMatrix m;
    m.link_count = 3;
    const std::vector<std::vector<LinkId>> rows{{0, 1}, {2, 1}, {0, 2}};
    for (std::uint32_t i = 0; i < 3; ++i) m.add_row(i, rows[i], c[i]);
    return m;
}

RoutingMatrix random_instance(Rng& rng) {
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
        m.add_row(i, row, i < failed ? 1 + rng() % 2 : 0);
    }
    return m;
}

bool covers(const RoutingMatrix& m, std::uint32_t mask) {
    for (std::size_t i = 0; i < m.flow_count(); ++i) {
        if (!m.status[i]) continue;
        bool hit = false;
        for (LinkId l : m.rows[i]) hit |= (mask >> l) & 1u;
        if (!hit) return false;
    }
    return true;
}

std::size_t brute_binary(const RoutingMatrix& m) {
    std::size_t best = m.link_count + 1;
    for (std::uint32_t mask = 0; mask < (1u << m.link_count); ++mask)
        if (covers(m, mask)) best = std::min<std::size_t>(best, std::popcount(mask));
    return best;
}

// Tries every split of sum(c) over the support.
bool split_feasible(const RoutingMatrix& m, const std::vector<LinkId>& support, std::vector<std::uint64_t>& p,
                    std::size_t at, std::uint64_t left) {
    if (at + 1 == support.size()) {
        p[at] = left;
        for (std::size_t i = 0; i < m.flow_count(); ++i) {
            std::uint64_t got = 0;
            for (std::size_t s = 0; s < support.size(); ++s)
                if (std::find(m.rows[i].begin(), m.rows[i].end(), support[s]) != m.rows[i].end()) got += p[s];
            if (got < m.drops[i]) return false;
        }
        return true;
    }
    for (std::uint64_t v = 0; v <= left; ++v) {
        p[at] = v;
        if (split_feasible(m, support, p, at + 1, left - v)) return true;
    }
    return false;
}

std::size_t brute_integer(const RoutingMatrix& m) {
    const std::uint64_t total = std::accumulate(m.drops.begin(), m.drops.end(), std::uint64_t(0));
    if (total == 0) return 0;
    for (std::uint32_t size = 1; size <= m.link_count; ++size) {
        for (std::uint32_t mask = 0; mask < (1u << m.link_count); ++mask) {
            if (std::popcount(mask) != int(size) || !covers(m, mask)) continue;
            std::vector<LinkId> support;
            for (LinkId l = 0; l < m.link_count; ++l)
                if ((mask >> l) & 1u) support.push_back(l);
            std::vector<std::uint64_t> p(size);
            if (split_feasible(m, support, p, 0, total)) return size;
        }
    }
    return m.link_count + 1;
}

}  // namespace

TEST_CASE("toy network") {
    const auto m = toy();
    CHECK(greedy_cover(m).links == std::vector<LinkId>{1});
    const auto b = exact_binary(m);
    CHECK(b.links == std::vector<LinkId>{1});
    CHECK(b.optimal);
    const auto i = exact_integer(toy({2, 1, 0}));
    CHECK(i.links == std::vector<LinkId>{1});
    CHECK(i.counts == std::map<LinkId, std::uint64_t>{{1, 3}});
    CHECK(satisfies_integer(toy({2, 1, 0}), i));
    CHECK(to_json(i) == nlohmann::json::parse(R"({"links":[1],"counts":{"1":3},"optimal":true})"));
}

TEST_CASE("degenerate instances") {
    RoutingMatrix one;
    one.link_count = 5;
    one.add_row(0, std::vector<LinkId>{3, 1, 4}, 1);
    CHECK(greedy_cover(one).links == std::vector<LinkId>{1});
    CHECK(exact_binary(one).links.size() == 1);

    RoutingMatrix clean;
    clean.link_count = 4;
    clean.add_row(0, std::vector<LinkId>{0, 1}, 0);
    CHECK(greedy_cover(clean).links.empty());
    CHECK(exact_binary(clean).links.empty());
    CHECK(exact_integer(clean).links.empty());

    RoutingMatrix bad;
    bad.link_count = 2;
    CHECK_THROWS(bad.add_row(0, std::vector<LinkId>{}, 1));
    CHECK_THROWS(bad.add_row(0, std::vector<LinkId>{2}, 1));
}

TEST_CASE("greedy can be beaten") {
    // X = {r1,r2,r3}, Y = {r4,r5,r6}, decoy Z = {r1,r2,r4,r5}.
    RoutingMatrix m;
    m.link_count = 3;
    const std::vector<std::vector<LinkId>> rows{{0, 2}, {0, 2}, {0}, {1, 2}, {1, 2}, {1}};
    for (std::uint32_t i = 0; i < rows.size(); ++i) m.add_row(i, rows[i], 1);
    const auto g = greedy_cover(m);
    CHECK(g.links.size() == 3);
    CHECK(g.links.front() == 2);
    const auto e = exact_binary(m);
    CHECK(e.links == std::vector<LinkId>{0, 1});
    CHECK(e.optimal);

    SolverLimits tight;
    tight.node_limit = 1;
    const auto capped = exact_binary(m, tight);
    CHECK(capped.budget_exceeded);
    CHECK_FALSE(capped.optimal);
    CHECK(satisfies_binary(m, capped));
}

TEST_CASE("solvers match power-set enumeration") {
    Rng rng(2024);
    for (int it = 0; it < 200; ++it) {
        const auto m = random_instance(rng);
        const auto g = greedy_cover(m);
        const auto b = exact_binary(m);
        const auto i = exact_integer(m);
        CAPTURE(it);
        CHECK(b.optimal);
        CHECK(b.links.size() == brute_binary(m));
        CHECK(i.links.size() == brute_integer(m));
        CHECK(g.links.size() >= b.links.size());
        CHECK(satisfies_binary(m, g));
        CHECK(satisfies_binary(m, b));
        CHECK(satisfies_integer(m, i));
    }
}

TEST_CASE("relabelling links keeps the optimum size") {
    Rng rng(99);
    for (int it = 0; it < 50; ++it) {
        const auto m = random_instance(rng);
        std::vector<LinkId> perm(m.link_count);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        RoutingMatrix q;
        q.link_count = m.link_count;
        for (std::size_t r = 0; r < m.flow_count(); ++r) {
            std::vector<LinkId> row;
            for (LinkId l : m.rows[r]) row.push_back(perm[l]);
            q.add_row(m.flow_ids[r], row, m.drops[r]);
        }
        CHECK(exact_binary(q).links.size() == exact_binary(m).links.size());
    }
}

TEST_CASE("solution ranking puts chosen links first") {
    const auto m = toy({2, 1, 0});
    const auto r = solution_ranking(m, exact_integer(m));
    CHECK(r.order.front() == 1);
}

TEST_CASE("matrix text round trip") {
    Rng rng(3);
    const auto m = random_instance(rng);
    std::stringstream trip, status;
    write_triplets(trip, m);
    write_status(status, m);
    const auto back = read_routing_matrix(trip, status, m.link_count);
    CHECK(back.link_count == m.link_count);
    CHECK(back.status == m.status);
    CHECK(back.drops == m.drops);
    CHECK(back.flow_ids == m.flow_ids);
    for (std::size_t r = 0; r < m.flow_count(); ++r) {
        auto a = m.rows[r], b = back.rows[r];
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        CHECK(a == b);
    }
}

TEST_CASE("routing matrix from flows") {
    Topology t({2, 2, 2, 2, 1, true});
    FlowRecord a;
    a.path = make_path(t, 0, 3, {0, 0, 0});
    a.drops[1] = 2;
    a.finalize();
    a.traced = true;
    FlowRecord b;
    b.path = make_path(t, 1, 2, {1, 1, 1});
    b.finalize();
    const std::vector<FlowRecord> flows{a, b};
    const auto m = build_routing_matrix(flows, t.link_count());
    CHECK(m.flow_count() == 2);
    CHECK(m.status == std::vector<std::uint8_t>{1, 0});
    CHECK(m.drops == std::vector<std::uint32_t>{2, 0});
}
