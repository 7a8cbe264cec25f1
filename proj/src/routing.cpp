#include "linkvote/routing.hpp"

#include <algorithm>
#include <stdexcept>

#include "linkvote/errors.hpp"

namespace linkvote {

bool Path::contains(LinkId id) const {
    const auto l = links();
    return std::find(l.begin(), l.end(), id) != l.end();
}

void Path::push(LinkId id) {
    if (link_count == kMaxPathLinks) throw std::length_error("path longer than " + std::to_string(kMaxPathLinks));
    link_ids[link_count++] = id;
}

Path Path::from_links(std::span<const LinkId> ids) {
    Path p;
    for (LinkId id : ids) p.push(id);
    return p;
}

bool is_uniform(const TrafficPattern& pattern) { return std::holds_alternative<UniformTraffic>(pattern); }

void validate(const TrafficPattern& pattern, const Topology& topology) {
    const std::uint32_t tors = topology.params().tor_count();
    if (tors < 2) throw ValidationError("topology", "at least two ToRs are needed to route flows");
    if (const auto* skew = std::get_if<SkewedToRSet>(&pattern)) {
        if (skew->tors.empty()) throw ValidationError("traffic.skew_tors", "empty ToR set");
        for (auto t : skew->tors)
            if (t >= tors) throw ValidationError("traffic.skew_tors", "ToR " + std::to_string(t) + " out of range");
        if (!(skew->weight >= 0.0 && skew->weight <= 1.0)) throw ValidationError("traffic.skew_weight", "must be in [0,1]");
    } else if (const auto* hot = std::get_if<HotToR>(&pattern)) {
        if (hot->tor >= tors) throw ValidationError("traffic.hot_tor", "out of range");
        if (!(hot->fraction >= 0.0 && hot->fraction <= 1.0)) throw ValidationError("traffic.hot_fraction", "must be in [0,1]");
    }
}

namespace {

std::uint32_t uniform_index(std::uint32_t n, Rng& rng) {
    return std::uniform_int_distribution<std::uint32_t>(0, n - 1)(rng);
}

bool coin(double p, Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; }

/// Uniform ToR in [0, tors) other than `exclude`.
std::uint32_t other_tor(std::uint32_t tors, std::uint32_t exclude, Rng& rng) {
    const std::uint32_t r = uniform_index(tors - 1, rng);
    return r < exclude ? r : r + 1;
}

/// Uniform member of `set` other than `exclude`; `set` is sorted.
std::uint32_t pick_excluding(const std::vector<std::uint32_t>& set, std::uint32_t exclude, Rng& rng) {
    const auto it = std::lower_bound(set.begin(), set.end(), exclude);
    const bool present = it != set.end() && *it == exclude;
    if (!present) return set[uniform_index(static_cast<std::uint32_t>(set.size()), rng)];
    const auto pos = static_cast<std::uint32_t>(it - set.begin());
    const std::uint32_t r = uniform_index(static_cast<std::uint32_t>(set.size()) - 1, rng);
    return set[r < pos ? r : r + 1];
}

std::size_t size_excluding(const std::vector<std::uint32_t>& set, std::uint32_t exclude) {
    return set.size() - (std::binary_search(set.begin(), set.end(), exclude) ? 1 : 0);
}

}  // namespace

DestinationSampler::DestinationSampler(const Topology& topology, TrafficPattern pattern)
    : topology_(&topology), pattern_(std::move(pattern)) {
    validate(pattern_, topology);
    if (const auto* skew = std::get_if<SkewedToRSet>(&pattern_)) {
        in_set_ = skew->tors;
        std::sort(in_set_.begin(), in_set_.end());
        in_set_.erase(std::unique(in_set_.begin(), in_set_.end()), in_set_.end());
        for (std::uint32_t t = 0; t < topology.params().tor_count(); ++t)
            if (!std::binary_search(in_set_.begin(), in_set_.end(), t)) out_set_.push_back(t);
    }
}

std::uint32_t DestinationSampler::tor(std::uint32_t src_tor, Rng& rng) const {
    const std::uint32_t tors = topology_->params().tor_count();
    if (const auto* skew = std::get_if<SkewedToRSet>(&pattern_)) {
        const bool has_in = size_excluding(in_set_, src_tor) > 0;
        const bool has_out = size_excluding(out_set_, src_tor) > 0;
        const bool want_in = coin(skew->weight, rng);
        if ((want_in && has_in) || !has_out) return pick_excluding(in_set_, src_tor, rng);
        return pick_excluding(out_set_, src_tor, rng);
    }
    if (const auto* hot = std::get_if<HotToR>(&pattern_)) {
        if (src_tor == hot->tor) return other_tor(tors, src_tor, rng);
        // Hot-ToR sources cannot target themselves, so the other sources
        // over-weight the hot ToR to keep its share of all flows at `fraction`.
        const double q = std::min(1.0, hot->fraction * tors / (tors - 1.0));
        if (coin(q, rng) || tors == 2) return hot->tor;
        std::uint32_t r = uniform_index(tors - 2, rng);
        const std::uint32_t lo = std::min(src_tor, hot->tor);
        const std::uint32_t hi = std::max(src_tor, hot->tor);
        if (r >= lo) ++r;
        if (r >= hi) ++r;
        return r;
    }
    return other_tor(tors, src_tor, rng);
}

HostId DestinationSampler::operator()(HostId src, Rng& rng) const {
    const std::uint32_t h = topology_->params().hosts_per_tor;
    return tor(topology_->tor_of_host(src), rng) * h + uniform_index(h, rng);
}

HostId sample_destination(const Topology& topology, const TrafficPattern& pattern, HostId src, Rng& rng) {
    return DestinationSampler(topology, pattern)(src, rng);
}

Endpoints sample_endpoints(const Topology& topology, const TrafficPattern& pattern, Rng& rng) {
    const HostId src = uniform_index(topology.params().host_count(), rng);
    return {src, DestinationSampler(topology, pattern)(src, rng)};
}

EcmpChoice sample_choice(const ClosParams& params, bool intra_pod, Rng& rng) {
    EcmpChoice c;
    c.up = uniform_index(params.n1, rng);
    if (!intra_pod) {
        c.tier2 = uniform_index(params.n2, rng);
        c.down = uniform_index(params.n1, rng);
    }
    return c;
}

Path make_path(const Topology& topology, HostId src, HostId dst, const EcmpChoice& choice) {
    const auto& p = topology.params();
    const std::uint32_t s = topology.tor_of_host(src);
    const std::uint32_t d = topology.tor_of_host(dst);
    if (s == d) throw std::invalid_argument("source and destination share a ToR");
    const std::uint32_t ps = topology.pod_of_tor(s);
    const std::uint32_t pd = topology.pod_of_tor(d);

    Path path;
    path.intra_pod = ps == pd;
    auto sw = [&](Tier tier, std::uint32_t index) {
        path.switch_ids[path.switch_count++] = topology.switch_id({tier, index});
    };
    if (p.include_host_links) path.push(topology.host_link(src));
    path.push(topology.level1_link(s, choice.up));
    sw(Tier::Tor, s);
    sw(Tier::Tier1, topology.tier1_global(ps, choice.up));
    if (path.intra_pod) {
        path.push(topology.level1_link(d, choice.up));
    } else {
        path.push(topology.level2_link(topology.tier1_global(ps, choice.up), choice.tier2));
        path.push(topology.level2_link(topology.tier1_global(pd, choice.down), choice.tier2));
        path.push(topology.level1_link(d, choice.down));
        sw(Tier::Tier2, choice.tier2);
        sw(Tier::Tier1, topology.tier1_global(pd, choice.down));
    }
    sw(Tier::Tor, d);
    if (p.include_host_links) path.push(topology.host_link(dst));
    return path;
}

Path sample_path(const Topology& topology, HostId src, HostId dst, Rng& rng) {
    const bool intra = topology.pod_of_tor(topology.tor_of_host(src)) == topology.pod_of_tor(topology.tor_of_host(dst));
    return make_path(topology, src, dst, sample_choice(topology.params(), intra, rng));
}

double link_traversal_probability(const ClosParams& p, LinkLevel level, const TrafficPattern& pattern) {
    if (!is_uniform(pattern)) throw std::domain_error("traversal probability is only defined for uniform traffic");
    const double n0 = p.n0, n1 = p.n1, n2 = p.n2, npod = p.n_pod;
    switch (level) {
    case LinkLevel::Host: return 1.0 / (n0 * npod * p.hosts_per_tor);
    case LinkLevel::Level1: return 1.0 / (n0 * n1 * npod);
    case LinkLevel::Level2:
        if (p.n_pod < 2) return 0.0;
        return 1.0 / (n1 * n2 * npod) * (n0 * (npod - 1.0) / (n0 * npod - 1.0));
    }
    return 0.0;
}

// Joint probabilities by slot decomposition. A path has six slots (source
// host link, up level-1, up level-2, down level-2, down level-1, destination
// host link) and each link can only ever occupy one slot per path, so
// P(a and b) is a sum over slot pairs of the probability that both slot
// constraints hold. Each such probability reduces to counting admissible
// (source ToR, destination ToR) pairs times independent ECMP factors.
namespace {

struct TorSet {
    enum Kind : std::uint8_t { Any, Pod, Tor, Empty } kind = Any;
    std::uint32_t value = 0;
};

struct SlotCond {
    TorSet src;
    TorSet dst;
    bool need_inter = false;
    std::int64_t up = -1;  // global tier-1 ids
    std::int64_t down = -1;
    std::int64_t tier2 = -1;
    std::int64_t src_host = -1;
    std::int64_t dst_host = -1;
    bool impossible = false;
};

TorSet intersect(const TorSet& a, const TorSet& b, const Topology& t) {
    if (a.kind == TorSet::Empty || b.kind == TorSet::Empty) return {TorSet::Empty, 0};
    if (a.kind == TorSet::Any) return b;
    if (b.kind == TorSet::Any) return a;
    if (a.kind == TorSet::Pod && b.kind == TorSet::Pod) return a.value == b.value ? a : TorSet{TorSet::Empty, 0};
    if (a.kind == TorSet::Tor && b.kind == TorSet::Tor) return a.value == b.value ? a : TorSet{TorSet::Empty, 0};
    const TorSet& tor = a.kind == TorSet::Tor ? a : b;
    const TorSet& pod = a.kind == TorSet::Pod ? a : b;
    return t.pod_of_tor(tor.value) == pod.value ? tor : TorSet{TorSet::Empty, 0};
}

std::uint32_t size_in_pod(const TorSet& s, std::uint32_t pod, const Topology& t) {
    switch (s.kind) {
    case TorSet::Any: return t.params().n0;
    case TorSet::Pod: return s.value == pod ? t.params().n0 : 0;
    case TorSet::Tor: return t.pod_of_tor(s.value) == pod ? 1 : 0;
    case TorSet::Empty: return 0;
    }
    return 0;
}

void merge_choice(std::int64_t& dst, std::int64_t src, bool& impossible) {
    if (src < 0) return;
    if (dst >= 0 && dst != src) impossible = true;
    dst = src;
}

SlotCond merge(const SlotCond& a, const SlotCond& b, const Topology& t) {
    SlotCond m;
    m.impossible = a.impossible || b.impossible;
    m.src = intersect(a.src, b.src, t);
    m.dst = intersect(a.dst, b.dst, t);
    m.need_inter = a.need_inter || b.need_inter;
    m.up = a.up;
    m.down = a.down;
    m.tier2 = a.tier2;
    m.src_host = a.src_host;
    m.dst_host = a.dst_host;
    merge_choice(m.up, b.up, m.impossible);
    merge_choice(m.down, b.down, m.impossible);
    merge_choice(m.tier2, b.tier2, m.impossible);
    merge_choice(m.src_host, b.src_host, m.impossible);
    merge_choice(m.dst_host, b.dst_host, m.impossible);
    return m;
}

double probability(const SlotCond& c, const Topology& t) {
    if (c.impossible || c.src.kind == TorSet::Empty || c.dst.kind == TorSet::Empty) return 0.0;
    const auto& p = t.params();
    const double tors = p.tor_count();
    if (tors < 2) return 0.0;

    double same_pod = 0.0;
    double total = 0.0;
    for (std::uint32_t pod = 0; pod < p.n_pod; ++pod) same_pod += double(size_in_pod(c.src, pod, t)) * size_in_pod(c.dst, pod, t);
    double src_size = 0.0, dst_size = 0.0;
    for (std::uint32_t pod = 0; pod < p.n_pod; ++pod) {
        src_size += size_in_pod(c.src, pod, t);
        dst_size += size_in_pod(c.dst, pod, t);
    }
    total = src_size * dst_size;
    const TorSet both = intersect(c.src, c.dst, t);
    double overlap = 0.0;
    for (std::uint32_t pod = 0; pod < p.n_pod; ++pod) overlap += size_in_pod(both, pod, t);
    const double intra_pairs = same_pod - overlap;
    const double inter_pairs = total - same_pod;

    double host_factor = 1.0;
    if (c.src_host >= 0) host_factor /= p.hosts_per_tor;
    if (c.dst_host >= 0) host_factor /= p.hosts_per_tor;

    double intra_factor = 0.0;
    if (!c.need_inter && c.tier2 < 0) {
        if (c.up >= 0 && c.down >= 0)
            intra_factor = c.up == c.down ? 1.0 / p.n1 : 0.0;
        else if (c.up >= 0 || c.down >= 0)
            intra_factor = 1.0 / p.n1;
        else
            intra_factor = 1.0;
    }
    double inter_factor = 1.0;
    if (c.up >= 0) inter_factor /= p.n1;
    if (c.down >= 0) inter_factor /= p.n1;
    if (c.tier2 >= 0) inter_factor /= p.n2;

    return host_factor * (intra_pairs * intra_factor + inter_pairs * inter_factor) / (tors * (tors - 1.0));
}

std::vector<SlotCond> slots(const Topology& t, LinkId id) {
    const Link& l = t.link(id);
    std::vector<SlotCond> out(2);
    switch (l.level) {
    case LinkLevel::Host: {
        const std::uint32_t tor = l.upper.index;
        out[0].src = {TorSet::Tor, tor};
        out[0].src_host = l.lower.index;
        out[1].dst = {TorSet::Tor, tor};
        out[1].dst_host = l.lower.index;
        break;
    }
    case LinkLevel::Level1:
        out[0].src = {TorSet::Tor, l.lower.index};
        out[0].up = l.upper.index;
        out[1].dst = {TorSet::Tor, l.lower.index};
        out[1].down = l.upper.index;
        break;
    case LinkLevel::Level2:
        out[0].src = {TorSet::Pod, l.pod};
        out[0].need_inter = true;
        out[0].up = l.lower.index;
        out[0].tier2 = l.upper.index;
        out[1].dst = {TorSet::Pod, l.pod};
        out[1].need_inter = true;
        out[1].down = l.lower.index;
        out[1].tier2 = l.upper.index;
        break;
    }
    return out;
}

}  // namespace

double traversal_probability(const Topology& topology, LinkId link) {
    double p = 0.0;
    for (const auto& s : slots(topology, link)) p += probability(s, topology);
    return p;
}

double joint_traversal_probability(const Topology& topology, LinkId a, LinkId b) {
    if (a == b) return traversal_probability(topology, a);
    double p = 0.0;
    for (const auto& sa : slots(topology, a))
        for (const auto& sb : slots(topology, b)) p += probability(merge(sa, sb, topology), topology);
    return p;
}

double cooccurrence_probability(const Topology& topology, LinkId a, LinkId b) {
    if (a == b) return 1.0;
    const double pa = traversal_probability(topology, a);
    if (pa <= 0.0) return 0.0;
    return joint_traversal_probability(topology, a, b) / pa;
}

}  // namespace linkvote
