#include "linkvote/cover.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>

namespace linkvote {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<std::size_t> failed_rows(const RoutingMatrix& m) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < m.rows.size(); ++i)
        if (m.status[i]) out.push_back(i);
    return out;
}

/// Set-cover instance over failed rows with candidate links reindexed
/// 0..n-1 after dominance pruning.
struct Instance {
    std::vector<LinkId> link_of;                   // candidate -> link id
    std::vector<std::vector<std::uint32_t>> rows;  // failed row -> candidates
    std::vector<std::vector<std::uint32_t>> covers;  // candidate -> failed rows
};

Instance reduce(const RoutingMatrix& m) {
    const auto fr = failed_rows(m);
    std::map<LinkId, std::vector<std::uint32_t>> incidence;
    for (std::uint32_t r = 0; r < fr.size(); ++r) {
        auto row = m.rows[fr[r]];
        std::sort(row.begin(), row.end());
        row.erase(std::unique(row.begin(), row.end()), row.end());
        for (LinkId l : row) incidence[l].push_back(r);
    }
    std::vector<LinkId> ids;
    std::vector<const std::vector<std::uint32_t>*> sets;
    for (const auto& [l, rs] : incidence) {
        ids.push_back(l);
        sets.push_back(&rs);
    }
    // Drop links whose rows are a subset of another link's rows; among
    // equal sets the lowest id survives.
    std::vector<std::uint8_t> keep(ids.size(), 1);
    for (std::size_t a = 0; a < ids.size(); ++a) {
        for (std::size_t b = 0; b < ids.size() && keep[a]; ++b) {
            if (a == b || !keep[b]) continue;
            const auto& sa = *sets[a];
            const auto& sb = *sets[b];
            if (sa.size() > sb.size()) continue;
            if (!std::includes(sb.begin(), sb.end(), sa.begin(), sa.end())) continue;
            if (sa.size() < sb.size() || b < a) keep[a] = 0;
        }
    }
    Instance inst;
    inst.rows.resize(fr.size());
    for (std::size_t a = 0; a < ids.size(); ++a) {
        if (!keep[a]) continue;
        const auto c = static_cast<std::uint32_t>(inst.link_of.size());
        inst.link_of.push_back(ids[a]);
        inst.covers.push_back(*sets[a]);
        for (auto r : *sets[a]) inst.rows[r].push_back(c);
    }
    return inst;
}

class Search {
public:
    Search(const Instance& inst, std::uint64_t node_limit)
        : inst_(inst), limit_(node_limit), covered_(inst.rows.size(), 0), excluded_(inst.link_of.size(), 0) {}

    /// Looks for a cover of at most `depth` candidates.
    bool run(std::uint32_t depth) { return dfs(depth); }

    std::uint32_t lower_bound() const {
        std::vector<std::uint8_t> used(inst_.link_of.size(), 0);
        std::vector<std::uint32_t> order;
        for (std::uint32_t r = 0; r < inst_.rows.size(); ++r)
            if (!covered_[r]) order.push_back(r);
        std::stable_sort(order.begin(), order.end(),
                         [&](auto a, auto b) { return inst_.rows[a].size() < inst_.rows[b].size(); });
        std::uint32_t n = 0;
        for (auto r : order) {
            bool disjoint = true;
            for (auto c : inst_.rows[r])
                if (used[c]) disjoint = false;
            if (!disjoint) continue;
            ++n;
            for (auto c : inst_.rows[r]) used[c] = 1;
        }
        return n;
    }

    std::vector<std::uint32_t> chosen;
    std::uint64_t nodes = 0;
    bool exhausted = false;

private:
    bool dfs(std::uint32_t depth) {
        if (++nodes > limit_) {
            exhausted = true;
            return false;
        }
        // Branch on the uncovered row with fewest available candidates; a
        // row with a single candidate is a forced (unit) choice.
        std::int64_t pick = -1;
        std::size_t fewest = SIZE_MAX;
        for (std::uint32_t r = 0; r < inst_.rows.size(); ++r) {
            if (covered_[r]) continue;
            std::size_t avail = 0;
            for (auto c : inst_.rows[r]) avail += !excluded_[c];
            if (avail < fewest) {
                fewest = avail;
                pick = r;
            }
        }
        if (pick < 0) return true;
        if (fewest == 0 || depth == 0) return false;
        if (lower_bound() > depth) return false;

        std::vector<std::uint32_t> cands;
        for (auto c : inst_.rows[pick])
            if (!excluded_[c]) cands.push_back(c);
        std::vector<std::uint32_t> gain(cands.size(), 0);
        for (std::size_t i = 0; i < cands.size(); ++i)
            for (auto r : inst_.covers[cands[i]]) gain[i] += !covered_[r];
        std::vector<std::size_t> idx(cands.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return gain[a] > gain[b]; });

        std::vector<std::uint32_t> tried;
        bool found = false;
        for (auto i : idx) {
            const auto c = cands[i];
            for (auto r : inst_.covers[c]) ++covered_[r];
            chosen.push_back(c);
            found = dfs(depth - 1);
            if (found) break;
            chosen.pop_back();
            for (auto r : inst_.covers[c]) --covered_[r];
            if (exhausted) break;
            // Any cover using c has been ruled out at this depth.
            excluded_[c] = 1;
            tried.push_back(c);
        }
        for (auto c : tried) excluded_[c] = 0;
        return found;
    }

    const Instance& inst_;
    std::uint64_t limit_;
    std::vector<std::uint32_t> covered_;
    std::vector<std::uint8_t> excluded_;
};

CoverSolution solve_support(const RoutingMatrix& m, const SolverLimits& limits) {
    const auto t0 = Clock::now();
    CoverSolution best = greedy_cover(m);
    best.optimal = false;
    best.nodes = 0;
    const Instance inst = reduce(m);
    Search search(inst, limits.node_limit);
    const std::uint32_t lb = search.lower_bound();
    const auto greedy_size = static_cast<std::uint32_t>(best.links.size());
    std::uint32_t last = greedy_size;  // depths [lb, last) are searched
    if (limits.k_cap > 0) last = std::min(last, limits.k_cap + 1);

    bool found = false;
    for (std::uint32_t d = lb; d < last; ++d) {
        if (search.run(d)) {
            best.links.clear();
            for (auto c : search.chosen) best.links.push_back(inst.link_of[c]);
            found = true;
            break;
        }
        if (search.exhausted) break;
    }
    best.nodes = search.nodes;
    best.budget_exceeded = search.exhausted;
    // Without a hit below the greedy size, greedy was already minimal,
    // unless the cap or the node budget cut the search short.
    best.optimal = !search.exhausted && (found || last == greedy_size);
    std::sort(best.links.begin(), best.links.end());
    best.wall_seconds = seconds_since(t0);
    return best;
}

}  // namespace

CoverSolution greedy_cover(const RoutingMatrix& m) {
    const auto t0 = Clock::now();
    CoverSolution s;
    const auto fr = failed_rows(m);
    std::vector<std::vector<std::uint32_t>> covers(m.link_count);
    for (std::uint32_t r = 0; r < fr.size(); ++r) {
        auto row = m.rows[fr[r]];
        std::sort(row.begin(), row.end());
        row.erase(std::unique(row.begin(), row.end()), row.end());
        for (LinkId l : row) covers[l].push_back(r);
    }
    std::vector<std::uint8_t> covered(fr.size(), 0);
    std::size_t remaining = fr.size();
    while (remaining > 0) {
        LinkId best = kNoLink;
        std::size_t best_gain = 0;
        for (LinkId l = 0; l < m.link_count; ++l) {
            std::size_t g = 0;
            for (auto r : covers[l]) g += !covered[r];
            if (g > best_gain) {
                best_gain = g;
                best = l;
            }
        }
        ++s.nodes;
        s.links.push_back(best);
        for (auto r : covers[best])
            if (!covered[r]) {
                covered[r] = 1;
                --remaining;
            }
    }
    s.optimal = s.links.size() <= 1;
    s.wall_seconds = seconds_since(t0);
    return s;
}

CoverSolution exact_binary(const RoutingMatrix& m, const SolverLimits& limits) { return solve_support(m, limits); }

CoverSolution exact_integer(const RoutingMatrix& m, const SolverLimits& limits) {
    // Any support covering every failed row is feasible: giving each row's
    // count to one support link on its path meets A p >= c with
    // sum(p) = sum(c). So the minimum support is the minimum cover, and the
    // counts go to the support link carrying the most count mass per row.
    CoverSolution s = solve_support(m, limits);
    const auto t0 = Clock::now();
    std::map<LinkId, std::uint64_t> mass;
    for (std::size_t i = 0; i < m.rows.size(); ++i) {
        if (!m.status[i]) continue;
        for (LinkId l : m.rows[i])
            if (std::binary_search(s.links.begin(), s.links.end(), l)) mass[l] += m.drops[i];
    }
    for (LinkId l : s.links) s.counts[l] = 0;
    for (std::size_t i = 0; i < m.rows.size(); ++i) {
        if (!m.status[i]) continue;
        LinkId best = kNoLink;
        for (LinkId l : m.rows[i]) {
            if (!std::binary_search(s.links.begin(), s.links.end(), l)) continue;
            if (best == kNoLink || mass[l] > mass[best] || (mass[l] == mass[best] && l < best)) best = l;
        }
        s.counts[best] += m.drops[i];
    }
    s.wall_seconds += seconds_since(t0);
    return s;
}

bool satisfies_binary(const RoutingMatrix& m, const CoverSolution& s) {
    for (std::size_t i = 0; i < m.rows.size(); ++i) {
        if (!m.status[i]) continue;
        bool hit = false;
        for (LinkId l : m.rows[i])
            if (std::find(s.links.begin(), s.links.end(), l) != s.links.end()) hit = true;
        if (!hit) return false;
    }
    return true;
}

bool satisfies_integer(const RoutingMatrix& m, const CoverSolution& s) {
    std::uint64_t need = 0, have = 0;
    for (std::size_t i = 0; i < m.rows.size(); ++i) {
        need += m.drops[i];
        std::uint64_t row = 0;
        for (LinkId l : m.rows[i]) {
            const auto it = s.counts.find(l);
            if (it != s.counts.end()) row += it->second;
        }
        if (row < m.drops[i]) return false;
    }
    for (const auto& [l, c] : s.counts) have += c;
    return have == need;
}

Ranking solution_ranking(const RoutingMatrix& m, const CoverSolution& s) {
    std::vector<double> w(m.link_count, 0.0);
    if (!s.counts.empty()) {
        for (const auto& [l, c] : s.counts) w.at(l) = static_cast<double>(c) + 1e-9;
    } else {
        for (LinkId l : s.links) w.at(l) = 1e-9;
        for (std::size_t i = 0; i < m.rows.size(); ++i)
            if (m.status[i])
                for (LinkId l : m.rows[i])
                    if (w[l] > 0.0) w[l] += 1.0;
    }
    return rank_links(w);
}

nlohmann::json to_json(const CoverSolution& s) {
    nlohmann::json counts = nlohmann::json::object();
    for (const auto& [l, c] : s.counts) counts[std::to_string(l)] = c;
    return {{"links", s.links}, {"counts", counts}, {"optimal", s.optimal}};
}

}  // namespace linkvote
