#include "linkvote/topology.hpp"

#include "linkvote/errors.hpp"

namespace linkvote {

const char* to_string(LinkLevel level) {
    switch (level) {
    case LinkLevel::Host: return "host";
    case LinkLevel::Level1: return "level1";
    case LinkLevel::Level2: return "level2";
    }
    return "?";
}

std::string to_string(const NodeRef& node) {
    const char* prefix = "";
    switch (node.tier) {
    case Tier::Host: prefix = "host"; break;
    case Tier::Tor: prefix = "tor"; break;
    case Tier::Tier1: prefix = "t1_"; break;
    case Tier::Tier2: prefix = "t2_"; break;
    }
    return prefix + std::to_string(node.index);
}

void validate(const ClosParams& p) {
    if (p.n_pod == 0) throw ValidationError("n_pod", "must be >= 1");
    if (p.n0 == 0) throw ValidationError("n0", "must be >= 1");
    if (p.n1 == 0) throw ValidationError("n1", "must be >= 1");
    if (p.n2 == 0) throw ValidationError("n2", "must be >= 1");
    if (p.hosts_per_tor == 0 && p.include_host_links)
        throw ValidationError("hosts_per_tor", "must be >= 1 when host links are modeled");
}

Topology::Topology(ClosParams params) : params_(params) {
    validate(params_);
    const auto& p = params_;
    const std::uint32_t hosts = p.include_host_links ? p.host_count() : 0;
    base1_ = hosts;
    base2_ = base1_ + p.n_pod * p.n0 * p.n1;
    links_.reserve(base2_ + p.n_pod * p.n1 * p.n2);

    for (std::uint32_t h = 0; h < hosts; ++h) {
        const std::uint32_t tor = h / p.hosts_per_tor;
        links_.push_back({h, LinkLevel::Host, {Tier::Host, h}, {Tier::Tor, tor}, tor / p.n0});
    }
    for (std::uint32_t tor = 0; tor < p.tor_count(); ++tor) {
        const std::uint32_t pod = tor / p.n0;
        for (std::uint32_t j = 0; j < p.n1; ++j) {
            const LinkId id = static_cast<LinkId>(links_.size());
            links_.push_back({id, LinkLevel::Level1, {Tier::Tor, tor}, {Tier::Tier1, pod * p.n1 + j}, pod});
        }
    }
    for (std::uint32_t t1 = 0; t1 < p.tier1_count(); ++t1) {
        for (std::uint32_t l = 0; l < p.n2; ++l) {
            const LinkId id = static_cast<LinkId>(links_.size());
            links_.push_back({id, LinkLevel::Level2, {Tier::Tier1, t1}, {Tier::Tier2, l}, t1 / p.n1});
        }
    }
}

std::uint32_t Topology::count(LinkLevel level) const {
    switch (level) {
    case LinkLevel::Host: return base1_;
    case LinkLevel::Level1: return base2_ - base1_;
    case LinkLevel::Level2: return link_count() - base2_;
    }
    return 0;
}

LinkId Topology::first_link(LinkLevel level) const {
    switch (level) {
    case LinkLevel::Host: return 0;
    case LinkLevel::Level1: return base1_;
    case LinkLevel::Level2: return base2_;
    }
    return 0;
}

SwitchId Topology::switch_id(const NodeRef& node) const {
    switch (node.tier) {
    case Tier::Tor: return node.index;
    case Tier::Tier1: return params_.tor_count() + node.index;
    case Tier::Tier2: return params_.tor_count() + params_.tier1_count() + node.index;
    case Tier::Host: break;
    }
    throw std::invalid_argument("hosts have no switch id");
}

NodeRef Topology::switch_node(SwitchId id) const {
    const std::uint32_t tors = params_.tor_count();
    const std::uint32_t t1s = params_.tier1_count();
    if (id < tors) return {Tier::Tor, id};
    if (id < tors + t1s) return {Tier::Tier1, id - tors};
    if (id < tors + t1s + params_.n2) return {Tier::Tier2, id - tors - t1s};
    throw std::out_of_range("switch id " + std::to_string(id));
}

nlohmann::json Topology::to_json() const {
    nlohmann::json links = nlohmann::json::array();
    for (const auto& l : links_) {
        links.push_back({{"id", l.id}, {"level", to_string(l.level)}, {"a", to_string(l.lower)}, {"b", to_string(l.upper)}});
    }
    return {{"params", linkvote::to_json(params_)}, {"links", std::move(links)}};
}

Topology build_topology(const ClosParams& params) { return Topology(params); }

namespace {

bool in_range(const Topology& t, const NodeRef& n) {
    const auto& p = t.params();
    switch (n.tier) {
    case Tier::Host: return n.index < p.host_count();
    case Tier::Tor: return n.index < p.tor_count();
    case Tier::Tier1: return n.index < p.tier1_count();
    case Tier::Tier2: return n.index < p.n2;
    }
    return false;
}

}  // namespace

LinkId link_lookup(const Topology& topology, const NodeRef& a, const NodeRef& b) {
    NodeRef lo = a;
    NodeRef hi = b;
    if (static_cast<int>(lo.tier) > static_cast<int>(hi.tier)) std::swap(lo, hi);
    auto fail = [&] {
        return NotAdjacentError(to_string(a) + " and " + to_string(b) + " are not adjacent");
    };
    if (!in_range(topology, lo) || !in_range(topology, hi)) throw fail();
    const auto& p = topology.params();

    if (lo.tier == Tier::Host && hi.tier == Tier::Tor) {
        if (!p.include_host_links || topology.tor_of_host(lo.index) != hi.index) throw fail();
        return topology.host_link(lo.index);
    }
    if (lo.tier == Tier::Tor && hi.tier == Tier::Tier1) {
        if (topology.pod_of_tor(lo.index) != topology.pod_of_tier1(hi.index)) throw fail();
        return topology.level1_link(lo.index, hi.index % p.n1);
    }
    if (lo.tier == Tier::Tier1 && hi.tier == Tier::Tier2) return topology.level2_link(lo.index, hi.index);
    throw fail();
}

std::vector<LinkId> links_by_level(const Topology& topology, LinkLevel level) {
    std::vector<LinkId> out(topology.count(level));
    const LinkId first = topology.first_link(level);
    for (std::uint32_t i = 0; i < out.size(); ++i) out[i] = first + i;
    return out;
}

nlohmann::json to_json(const ClosParams& p) {
    return {{"n_pod", p.n_pod},
            {"n0", p.n0},
            {"n1", p.n1},
            {"n2", p.n2},
            {"hosts_per_tor", p.hosts_per_tor},
            {"include_host_links", p.include_host_links}};
}

ClosParams clos_params_from_json(const nlohmann::json& j) {
    ClosParams p;
    auto read = [&](const char* key, std::uint32_t& dst) {
        if (!j.contains(key)) return;
        const auto& v = j.at(key);
        if (!v.is_number_integer() || v.get<long long>() < 0)
            throw ValidationError(key, "expected a non-negative integer");
        dst = v.get<std::uint32_t>();
    };
    if (!j.is_object()) throw ValidationError("topology", "expected an object");
    read("n_pod", p.n_pod);
    read("n0", p.n0);
    read("n1", p.n1);
    read("n2", p.n2);
    read("hosts_per_tor", p.hosts_per_tor);
    if (j.contains("include_host_links")) {
        if (!j.at("include_host_links").is_boolean())
            throw ValidationError("include_host_links", "expected a boolean");
        p.include_host_links = j.at("include_host_links").get<bool>();
    }
    validate(p);
    return p;
}

}  // namespace linkvote
