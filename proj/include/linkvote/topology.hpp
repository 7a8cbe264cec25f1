#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace linkvote {

using LinkId = std::uint32_t;
using SwitchId = std::uint32_t;
using HostId = std::uint32_t;

inline constexpr LinkId kNoLink = 0xffffffffu;

enum class LinkLevel : std::uint8_t { Host = 0, Level1 = 1, Level2 = 2 };
enum class Tier : std::uint8_t { Host = 0, Tor = 1, Tier1 = 2, Tier2 = 3 };

const char* to_string(LinkLevel level);

/// A switch or host. `index` is global within its tier: ToRs and tier-1
/// switches are numbered pod-major, hosts are numbered ToR-major.
struct NodeRef {
    Tier tier;
    std::uint32_t index;

    friend bool operator==(const NodeRef&, const NodeRef&) = default;
};

std::string to_string(const NodeRef& node);

struct ClosParams {
    std::uint32_t n_pod = 2;
    std::uint32_t n0 = 20;  // ToRs per pod
    std::uint32_t n1 = 10;  // tier-1 switches per pod
    std::uint32_t n2 = 10;  // tier-2 switches, shared by all pods
    std::uint32_t hosts_per_tor = 40;
    bool include_host_links = true;

    std::uint32_t tor_count() const { return n_pod * n0; }
    std::uint32_t tier1_count() const { return n_pod * n1; }
    std::uint32_t host_count() const { return tor_count() * hosts_per_tor; }

    friend bool operator==(const ClosParams&, const ClosParams&) = default;
};

/// Throws ValidationError naming the first zero count.
void validate(const ClosParams& params);

struct Link {
    LinkId id;
    LinkLevel level;
    NodeRef lower;
    NodeRef upper;
    std::uint32_t pod;  // pod of the lower endpoint (tier-1 for Level2)
};

/// Immutable Clos fabric. Link ids are dense and ordered by
/// (level, pod, lower-tier index, upper-tier index), so every lookup is
/// arithmetic on the parameters.
class Topology {
public:
    explicit Topology(ClosParams params);

    const ClosParams& params() const { return params_; }
    std::span<const Link> links() const { return links_; }
    const Link& link(LinkId id) const { return links_.at(id); }
    std::uint32_t link_count() const { return static_cast<std::uint32_t>(links_.size()); }
    std::uint32_t switch_count() const { return params_.tor_count() + params_.tier1_count() + params_.n2; }

    std::uint32_t count(LinkLevel level) const;
    LinkId first_link(LinkLevel level) const;

    std::uint32_t tor_of_host(HostId host) const { return host / params_.hosts_per_tor; }
    std::uint32_t pod_of_tor(std::uint32_t tor) const { return tor / params_.n0; }
    std::uint32_t pod_of_tier1(std::uint32_t t1) const { return t1 / params_.n1; }
    std::uint32_t tor_global(std::uint32_t pod, std::uint32_t local) const { return pod * params_.n0 + local; }
    std::uint32_t tier1_global(std::uint32_t pod, std::uint32_t local) const { return pod * params_.n1 + local; }

    /// Unchecked id arithmetic; callers guarantee adjacency.
    LinkId host_link(HostId host) const { return host; }
    LinkId level1_link(std::uint32_t tor, std::uint32_t t1_local) const {
        return base1_ + tor * params_.n1 + t1_local;
    }
    LinkId level2_link(std::uint32_t t1, std::uint32_t t2) const { return base2_ + t1 * params_.n2 + t2; }

    SwitchId switch_id(const NodeRef& node) const;
    NodeRef switch_node(SwitchId id) const;

    nlohmann::json to_json() const;

private:
    ClosParams params_;
    LinkId base1_ = 0;
    LinkId base2_ = 0;
    std::vector<Link> links_;
};

Topology build_topology(const ClosParams& params);

/// The unique link joining two adjacent nodes, in either order.
/// Throws NotAdjacentError otherwise.
LinkId link_lookup(const Topology& topology, const NodeRef& a, const NodeRef& b);

std::vector<LinkId> links_by_level(const Topology& topology, LinkLevel level);

nlohmann::json to_json(const ClosParams& params);
ClosParams clos_params_from_json(const nlohmann::json& j);

}  // namespace linkvote
