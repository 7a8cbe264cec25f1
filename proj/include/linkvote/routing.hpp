#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <variant>
#include <vector>

#include "linkvote/topology.hpp"

namespace linkvote {

using Rng = std::mt19937_64;

inline constexpr std::size_t kMaxPathLinks = 6;
inline constexpr std::size_t kMaxPathSwitches = 5;

/// Links of one flow in traversal order, plus the switches visited. The
/// switch list is empty for paths built outside a Clos topology.
struct Path {
    std::array<LinkId, kMaxPathLinks> link_ids{};
    std::array<SwitchId, kMaxPathSwitches> switch_ids{};
    std::uint8_t link_count = 0;
    std::uint8_t switch_count = 0;
    bool intra_pod = false;

    std::span<const LinkId> links() const { return {link_ids.data(), link_count}; }
    std::span<const SwitchId> switches() const { return {switch_ids.data(), switch_count}; }
    /// Vote weight denominator: every link on the path, host links included.
    std::uint32_t h() const { return link_count; }
    bool contains(LinkId id) const;
    void push(LinkId id);

    static Path from_links(std::span<const LinkId> ids);
};

struct UniformTraffic {};

/// A fixed share of flows is sent to hosts under a chosen set of ToRs.
struct SkewedToRSet {
    std::vector<std::uint32_t> tors;
    double weight = 0.8;
};

/// A fixed share of all flows is sent to a single ToR.
struct HotToR {
    std::uint32_t tor = 0;
    double fraction = 0.5;
};

using TrafficPattern = std::variant<UniformTraffic, SkewedToRSet, HotToR>;

bool is_uniform(const TrafficPattern& pattern);
void validate(const TrafficPattern& pattern, const Topology& topology);

/// Draws destination hosts for a traffic pattern. Skewed patterns keep
/// "fraction of all flows" semantics: the share of flows landing in the
/// target ToR set equals the configured weight.
class DestinationSampler {
public:
    DestinationSampler(const Topology& topology, TrafficPattern pattern);

    HostId operator()(HostId src, Rng& rng) const;
    std::uint32_t tor(std::uint32_t src_tor, Rng& rng) const;

private:
    const Topology* topology_;
    TrafficPattern pattern_;
    std::vector<std::uint32_t> in_set_;
    std::vector<std::uint32_t> out_set_;
};

/// Destination host for a flow opened by `src`, always under a different ToR.
HostId sample_destination(const Topology& topology, const TrafficPattern& pattern, HostId src, Rng& rng);

struct Endpoints {
    HostId src;
    HostId dst;
};

Endpoints sample_endpoints(const Topology& topology, const TrafficPattern& pattern, Rng& rng);

/// ECMP choices for one flow. `up` and `down` are pod-local tier-1 indices;
/// intra-pod flows use `up` for both directions and ignore `tier2`.
struct EcmpChoice {
    std::uint32_t up = 0;
    std::uint32_t tier2 = 0;
    std::uint32_t down = 0;
};

Path make_path(const Topology& topology, HostId src, HostId dst, const EcmpChoice& choice);
Path sample_path(const Topology& topology, HostId src, HostId dst, Rng& rng);
EcmpChoice sample_choice(const ClosParams& params, bool intra_pod, Rng& rng);

/// Probability that a uniformly random inter-ToR flow crosses a fixed link
/// of `level` in one given direction. The undirected probability is twice
/// this. Throws std::domain_error for non-uniform traffic.
double link_traversal_probability(const ClosParams& params, LinkLevel level,
                                  const TrafficPattern& pattern = UniformTraffic{});

/// Probability that a uniform flow crosses `link` in either direction.
double traversal_probability(const Topology& topology, LinkId link);

/// Probability that a uniform flow crosses both links.
double joint_traversal_probability(const Topology& topology, LinkId a, LinkId b);

/// P(b on path | a on path) under uniform endpoints and uniform ECMP.
double cooccurrence_probability(const Topology& topology, LinkId a, LinkId b);

}  // namespace linkvote
