#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "linkvote/flow.hpp"
#include "linkvote/simulator.hpp"
#include "linkvote/topology.hpp"

namespace linkvote {

struct VoteTally {
    std::uint32_t epoch = 0;
    std::vector<double> votes;  // indexed by LinkId
    double total = 0.0;
};

/// Each traced retransmitting flow adds 1/h to every link on its path.
VoteTally tally_votes(std::span<const FlowRecord> flows, std::uint32_t link_count, std::uint32_t epoch = 0);
VoteTally tally_votes(const EpochTrace& trace, std::uint32_t link_count);

/// Links by votes descending, ties by id ascending. `rank[id]` is the
/// position of link `id` in `order` (0 = most voted).
struct Ranking {
    std::vector<LinkId> order;
    std::vector<std::uint32_t> rank;
};

Ranking rank_links(std::span<const double> votes);

enum class AdjustMode : std::uint8_t { Analytic, ExactPath };
enum class Denominator : std::uint8_t { Frozen, Recomputed };

const char* to_string(AdjustMode mode);
const char* to_string(Denominator d);
AdjustMode adjust_mode_from_string(const std::string& s);
Denominator denominator_from_string(const std::string& s);

struct Algorithm1Options {
    double threshold = 0.01;
    AdjustMode adjust = AdjustMode::Analytic;
    Denominator denominator = Denominator::Frozen;
    std::uint32_t max_links = 0;  // 0 = no cap
};

struct BadLinkSet {
    std::vector<LinkId> links;                  // pick order
    std::vector<double> picked_votes;           // votes of each pick when flagged
    std::vector<std::vector<double>> tallies;   // tally after each adjustment

    bool contains(LinkId id) const;
};

/// Working state of one Algorithm 1 run; exposed so the adjustment step can
/// be exercised on its own.
struct AdjustState {
    std::vector<double> votes;
    std::vector<std::uint8_t> flagged;    // by link
    std::vector<std::uint8_t> explained;  // by flow index
};

/// Removes from every unflagged link the votes attributed to `l_max`.
/// Only flows not yet explained by an earlier pick are counted; they are
/// marked explained afterwards. Votes are clamped at zero.
void adjust_votes(AdjustState& state, LinkId l_max, std::span<const FlowRecord> flows, const Topology& topology,
                  AdjustMode mode);

BadLinkSet algorithm1(const VoteTally& tally, std::span<const FlowRecord> flows, const Topology& topology,
                      const Algorithm1Options& options = {});

/// Highest-ranked link on the flow's path. Throws UnblamedError if the flow
/// did not retransmit or was not traced.
LinkId blame_flow(const FlowRecord& flow, const Ranking& ranking);

/// Failure iff the flow's path crosses a flagged link.
DropClass classify_noise(const FlowRecord& flow, const BadLinkSet& bad);

struct EpochAnalysis {
    VoteTally tally;
    Ranking ranking;
    BadLinkSet bad;
    std::vector<LinkId> blame;        // by flow index, kNoLink if not blamed
    std::vector<DropClass> classes;   // by flow index, None if not blamed
};

EpochAnalysis analyze_epoch(const EpochTrace& trace, const Topology& topology, const Algorithm1Options& options = {});

void write_votes_csv_header(std::ostream& out, const std::string& prefix_columns = "");
void write_votes_csv(std::ostream& out, const EpochAnalysis& a, const std::string& prefix_values = "");
void write_blame_csv_header(std::ostream& out, const std::string& prefix_columns = "");
void write_blame_csv(std::ostream& out, const EpochTrace& trace, const EpochAnalysis& a,
                     const std::string& prefix_values = "");

}  // namespace linkvote
