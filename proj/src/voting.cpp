#include "linkvote/voting.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "linkvote/errors.hpp"
#include "linkvote/routing.hpp"

namespace linkvote {

VoteTally tally_votes(std::span<const FlowRecord> flows, std::uint32_t link_count, std::uint32_t epoch) {
    VoteTally t;
    t.epoch = epoch;
    // Counted in units of 1/60 so equal tallies compare equal (h <= 6).
    static_assert(60 % 4 == 0 && 60 % 5 == 0 && 60 % 6 == 0 && kMaxPathLinks <= 6);
    std::vector<std::uint64_t> units(link_count, 0);
    for (const auto& f : flows) {
        if (!f.traced || !f.retransmitted || f.path.link_count == 0) continue;
        const std::uint64_t w = 60 / f.path.h();
        for (LinkId l : f.path.links()) units.at(l) += w;
        t.total += 1.0;
    }
    t.votes.resize(link_count);
    for (LinkId l = 0; l < link_count; ++l) t.votes[l] = double(units[l]) / 60.0;
    return t;
}

VoteTally tally_votes(const EpochTrace& trace, std::uint32_t link_count) {
    return tally_votes(trace.flows, link_count, trace.epoch);
}

Ranking rank_links(std::span<const double> votes) {
    Ranking r;
    r.order.resize(votes.size());
    std::iota(r.order.begin(), r.order.end(), LinkId{0});
    std::stable_sort(r.order.begin(), r.order.end(), [&](LinkId a, LinkId b) { return votes[a] > votes[b]; });
    r.rank.resize(votes.size());
    for (std::uint32_t i = 0; i < r.order.size(); ++i) r.rank[r.order[i]] = i;
    return r;
}

const char* to_string(AdjustMode mode) { return mode == AdjustMode::Analytic ? "analytic" : "exact-path"; }
const char* to_string(Denominator d) { return d == Denominator::Frozen ? "frozen" : "recomputed"; }

AdjustMode adjust_mode_from_string(const std::string& s) {
    if (s == "analytic") return AdjustMode::Analytic;
    if (s == "exact-path") return AdjustMode::ExactPath;
    throw ValidationError("algorithm1.adjust", "expected analytic or exact-path, got '" + s + "'");
}

Denominator denominator_from_string(const std::string& s) {
    if (s == "frozen") return Denominator::Frozen;
    if (s == "recomputed") return Denominator::Recomputed;
    throw ValidationError("algorithm1.denominator", "expected frozen or recomputed, got '" + s + "'");
}

bool BadLinkSet::contains(LinkId id) const { return std::find(links.begin(), links.end(), id) != links.end(); }

void adjust_votes(AdjustState& s, LinkId l_max, std::span<const FlowRecord> flows, const Topology& topology,
                  AdjustMode mode) {
    if (mode == AdjustMode::ExactPath) {
        for (std::size_t i = 0; i < flows.size(); ++i) {
            const auto& f = flows[i];
            if (s.explained[i] || !f.traced || !f.retransmitted || !f.path.contains(l_max)) continue;
            // Tallies stay on the 1/60 grid, so subtract there.
            const auto w = static_cast<long long>(60 / f.path.h());
            for (LinkId l : f.path.links())
                if (l != l_max && !s.flagged[l]) s.votes[l] = double(std::llround(s.votes[l] * 60.0) - w) / 60.0;
            s.explained[i] = 1;
        }
    } else {
        std::size_t n = 0;
        double inv_h = 0.0;
        for (std::size_t i = 0; i < flows.size(); ++i) {
            const auto& f = flows[i];
            if (s.explained[i] || !f.traced || !f.retransmitted || !f.path.contains(l_max)) continue;
            ++n;
            inv_h += 1.0 / f.path.h();
            s.explained[i] = 1;
        }
        if (n == 0) return;
        const double mass = inv_h;  // n * mean(1/h)
        for (LinkId k = 0; k < s.votes.size(); ++k) {
            if (k == l_max || s.flagged[k] || s.votes[k] <= 0.0) continue;
            s.votes[k] -= mass * cooccurrence_probability(topology, l_max, k);
        }
    }
    for (auto& v : s.votes) v = std::max(v, 0.0);
}

BadLinkSet algorithm1(const VoteTally& tally, std::span<const FlowRecord> flows, const Topology& topology,
                      const Algorithm1Options& opt) {
    if (!(opt.threshold >= 0.0 && opt.threshold <= 1.0))
        throw ValidationError("algorithm1.threshold", "must lie in [0,1]");
    BadLinkSet out;
    const std::size_t n = tally.votes.size();
    AdjustState s{tally.votes, std::vector<std::uint8_t>(n, 0), std::vector<std::uint8_t>(flows.size(), 0)};
    const double original = std::accumulate(tally.votes.begin(), tally.votes.end(), 0.0);
    if (original <= 0.0) return out;

    while (opt.max_links == 0 || out.links.size() < opt.max_links) {
        LinkId best = kNoLink;
        double best_v = -1.0;
        for (LinkId l = 0; l < n; ++l)
            if (!s.flagged[l] && s.votes[l] > best_v) {
                best_v = s.votes[l];
                best = l;
            }
        if (best == kNoLink || best_v <= 0.0) break;
        const double total =
            opt.denominator == Denominator::Frozen ? original : std::accumulate(s.votes.begin(), s.votes.end(), 0.0);
        if (best_v < opt.threshold * total) break;
        s.flagged[best] = 1;
        out.links.push_back(best);
        out.picked_votes.push_back(best_v);
        adjust_votes(s, best, flows, topology, opt.adjust);
        out.tallies.push_back(s.votes);
    }
    return out;
}

LinkId blame_flow(const FlowRecord& flow, const Ranking& ranking) {
    if (!flow.retransmitted || !flow.traced)
        throw UnblamedError("flow " + std::to_string(flow.id) + " has no traced retransmission");
    LinkId best = kNoLink;
    std::uint32_t best_rank = 0xffffffffu;
    for (LinkId l : flow.path.links())
        if (ranking.rank.at(l) < best_rank) {
            best_rank = ranking.rank[l];
            best = l;
        }
    return best;
}

DropClass classify_noise(const FlowRecord& flow, const BadLinkSet& bad) {
    for (LinkId l : flow.path.links())
        if (bad.contains(l)) return DropClass::Failure;
    return DropClass::Noise;
}

EpochAnalysis analyze_epoch(const EpochTrace& trace, const Topology& topology, const Algorithm1Options& options) {
    EpochAnalysis a;
    a.tally = tally_votes(trace, topology.link_count());
    a.ranking = rank_links(a.tally.votes);
    a.bad = algorithm1(a.tally, trace.flows, topology, options);
    a.blame.assign(trace.flows.size(), kNoLink);
    a.classes.assign(trace.flows.size(), DropClass::None);
    for (std::size_t i = 0; i < trace.flows.size(); ++i) {
        const auto& f = trace.flows[i];
        if (!f.traced || !f.retransmitted) continue;
        a.blame[i] = blame_flow(f, a.ranking);
        a.classes[i] = classify_noise(f, a.bad);
    }
    return a;
}

void write_votes_csv_header(std::ostream& out, const std::string& prefix) {
    out << prefix << "epoch,link_id,votes,rank,flagged\n";
}

void write_votes_csv(std::ostream& out, const EpochAnalysis& a, const std::string& prefix) {
    // Only links that received votes; zero-vote links share the tail.
    for (LinkId l : a.ranking.order) {
        if (a.tally.votes[l] <= 0.0) break;
        out << prefix << a.tally.epoch << ',' << l << ',' << a.tally.votes[l] << ',' << a.ranking.rank[l] << ','
            << int(a.bad.contains(l)) << '\n';
    }
}

void write_blame_csv_header(std::ostream& out, const std::string& prefix) {
    out << prefix << "flow_id,blamed_link,class\n";
}

void write_blame_csv(std::ostream& out, const EpochTrace& trace, const EpochAnalysis& a, const std::string& prefix) {
    for (std::size_t i = 0; i < trace.flows.size(); ++i) {
        if (a.blame[i] == kNoLink) continue;
        out << prefix << trace.flows[i].id << ',' << a.blame[i] << ',' << to_string(a.classes[i]) << '\n';
    }
}

}  // namespace linkvote
