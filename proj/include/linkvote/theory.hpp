#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "json.hpp"
#include "linkvote/errors.hpp"
#include "linkvote/routing.hpp"
#include "linkvote/topology.hpp"

// Closed-form bounds on traceroute budgets and vote probabilities. The
// rational-arithmetic templates accept any field type (double or
// boost::rational) so small cases can be checked exactly.

namespace linkvote::theory {

template <class T>
double to_double(const T& v) {
    if constexpr (std::is_arithmetic_v<T>)
        return static_cast<double>(v);
    else
        return static_cast<double>(v.numerator()) / static_cast<double>(v.denominator());
}

/// n0(n_pod-1)/(n0 n_pod-1): probability that a uniform inter-ToR flow
/// leaves its pod.
template <class T = double>
T inter_pod_fraction(const ClosParams& p) {
    const T n0(p.n0), np(p.n_pod);
    return n0 * (np - T(1)) / (n0 * np - T(1));
}

/// Largest k (exclusive) for which alpha is defined.
template <class T = double>
T k_bound(const ClosParams& p) {
    if (p.n_pod < 2) return T(std::numeric_limits<std::int32_t>::max());
    const T n0(p.n0), n2(p.n2), np(p.n_pod);
    return n2 * (n0 * np - T(1)) / (n0 * (np - T(1)));
}

template <class T = double>
T alpha(const ClosParams& p, std::uint32_t k) {
    const T n0(p.n0), n2(p.n2), np(p.n_pod), kk(static_cast<std::int64_t>(k));
    const T den = n2 * (n0 * np - T(1)) - n0 * (np - T(1)) * kk;
    if (!(den > T(0)))
        throw ConditionFailed("k-condition", "k must be below n2(n0 n_pod-1)/(n0(n_pod-1))",
                              static_cast<double>(to_double(k_bound<T>(p))));
    return n0 * (T(4) * n0 - kk) * (np - T(1)) / den;
}

template <class T = double>
struct VoteBounds {
    T v_b_lower{};
    T v_g_upper{};
    bool premise = false;     // r_b >= alpha r_g
    bool conclusion = false;  // v_b_lower >= v_g_upper
};

/// Worst-case bound on the vote probability of a good Level2 link.
template <class T = double>
T bound_sg2(const ClosParams& p, std::uint32_t k, T r_g, T r_b) {
    const T n0(p.n0), n1(p.n1), n2(p.n2), np(p.n_pod), kk(static_cast<std::int64_t>(k));
    return T(1) / (n1 * n2 * np) * inter_pod_fraction<T>(p) * ((T(4) - kk / n0) * r_g + (kk / n0) * r_b);
}

/// Worst-case bound on the vote probability of a good Level1 link.
template <class T = double>
T bound_sg1(const ClosParams& p, std::uint32_t k, T r_g, T r_b) {
    const T n0(p.n0), n1(p.n1), n2(p.n2), np(p.n_pod), kk(static_cast<std::int64_t>(k));
    const T spill = T(2) * (n0 - T(1)) / (n0 * (np - T(1)));
    return T(1) / (n0 * n1 * np) * inter_pod_fraction<T>(p) * ((T(4) - kk / n2 + spill) * r_g + (kk / n2) * r_b);
}

/// Per-event probabilities for a switch-to-switch link traversed upward.
/// Level1 links use A0..A5, Level2 links B0..B4; `terms[0]` is the
/// traversal probability and the rest are conditional retransmission
/// masses, so the vote probability is at most terms[0] * sum(terms[1..]).
template <class T = double>
struct EventTable {
    LinkLevel level = LinkLevel::Level1;
    std::vector<T> terms;

    T union_bound() const {
        T s(0);
        for (std::size_t i = 1; i < terms.size(); ++i) s += terms[i];
        return terms.at(0) * s;
    }
};

template <class T = double>
EventTable<T> event_probabilities(const Topology& topo, LinkId link, std::span<const T> r) {
    const auto& p = topo.params();
    if (p.n_pod < 2) throw ConditionFailed("n_pod", "event table needs at least two pods", 2.0);
    if (r.size() != topo.link_count()) throw std::invalid_argument("need one retransmission probability per link");
    const Link& ln = topo.link(link);
    const T n0(p.n0), n1(p.n1), n2(p.n2), np(p.n_pod);
    const T ip = inter_pod_fraction<T>(p);
    EventTable<T> t;
    t.level = ln.level;
    if (ln.level == LinkLevel::Level1) {
        const std::uint32_t tor = ln.lower.index, j1 = ln.upper.index, s = topo.pod_of_tor(tor);
        const std::uint32_t j1_local = j1 - s * p.n1;
        T a2(0), a3(0), a4(0), a5(0);
        for (std::uint32_t k0 = 0; k0 < p.n0; ++k0) {
            const std::uint32_t other = topo.tor_global(s, k0);
            if (other != tor) a2 += r[topo.level1_link(other, j1_local)];
        }
        for (std::uint32_t l = 0; l < p.n2; ++l) a3 += r[topo.level2_link(j1, l)];
        for (std::uint32_t pod = 0; pod < p.n_pod; ++pod) {
            if (pod == s) continue;
            for (std::uint32_t m = 0; m < p.n1; ++m) {
                for (std::uint32_t l = 0; l < p.n2; ++l) a4 += r[topo.level2_link(topo.tier1_global(pod, m), l)];
                for (std::uint32_t u = 0; u < p.n0; ++u) a5 += r[topo.level1_link(topo.tor_global(pod, u), m)];
            }
        }
        t.terms = {T(1) / (n0 * n1 * np),
                   r[link],
                   a2 / (n0 * np - T(1)),
                   ip / n2 * a3,
                   n0 / (n0 * np - T(1)) / (n1 * n2) * a4,
                   T(1) / (n0 * np - T(1)) / n1 * a5};
    } else if (ln.level == LinkLevel::Level2) {
        const std::uint32_t j = ln.lower.index, l2 = ln.upper.index, s = topo.pod_of_tier1(j);
        const std::uint32_t j_local = j - s * p.n1;
        T b2(0), b3(0), b4(0);
        for (std::uint32_t i0 = 0; i0 < p.n0; ++i0) b2 += r[topo.level1_link(topo.tor_global(s, i0), j_local)];
        for (std::uint32_t pod = 0; pod < p.n_pod; ++pod) {
            if (pod == s) continue;
            for (std::uint32_t m = 0; m < p.n1; ++m) {
                b3 += r[topo.level2_link(topo.tier1_global(pod, m), l2)];
                for (std::uint32_t u = 0; u < p.n0; ++u) b4 += r[topo.level1_link(topo.tor_global(pod, u), m)];
            }
        }
        t.terms = {T(1) / np * ip / (n1 * n2),
                   r[link],
                   b2 / n0,
                   b3 / (n1 * (np - T(1))),
                   b4 / (n0 * n1 * (np - T(1)))};
    } else {
        throw std::invalid_argument("event table is defined for switch-to-switch links only");
    }
    return t;
}

// ---- double-precision API ----

struct TracerouteRates {
    double r1 = 0.0;
    double r2 = 0.0;
    double switch_bound = 0.0;  // max(n0 R1, n1 R2)
    bool single_pod = false;
};

TracerouteRates traceroute_rates(const ClosParams& params, double c_t);

/// Budget C_t keeping every switch at or below t_max ICMP responses/s.
double max_traceroute_rate(const ClosParams& params, double t_max);

double pg_threshold(double p_b, double c_l, double c_u, double alpha);
double retransmission_prob(double p, double c);

struct PodCondition {
    bool holds = false;
    double required_pods = 0.0;  // 1 + max[...]
    std::string failing;         // empty when it holds
};

PodCondition pod_condition(const ClosParams& params);

/// Throws ConditionFailed when the pod condition fails.
VoteBounds<double> vote_prob_bounds(const ClosParams& params, std::uint32_t k, double r_b, double r_g);

/// Bernoulli relative entropy; +inf when undefined at the boundary.
double kl_bernoulli(double q, double r);

/// Two-term tail bound for B <= G after N connections; `delta` defaults to
/// (v_b - v_g)/(v_b + v_g). Terms whose tail lies outside [0,1] are 0.
double epsilon_bound(double n, double v_g, double v_b, std::optional<double> delta = std::nullopt);

struct BoundInputs {
    ClosParams params;
    double t_max = 100.0;
    std::uint32_t k = 1;
    double p_b = 1e-3;
    double p_g = 1e-6;
    double c_l = 100.0;
    double c_u = 100.0;
    double connections = 0.0;  // N; 0 = hosts x 60
    std::optional<double> delta;
};

BoundInputs bound_inputs_from_json(const nlohmann::json& j);

struct BoundReport {
    BoundInputs in;
    double c_t = 0.0;
    TracerouteRates rates;
    double inter_pod = 0.0;
    double k_bound = 0.0;
    bool k_condition = false;
    std::optional<double> alpha;
    std::optional<double> pg_threshold;
    double r_b = 0.0;
    double r_g = 0.0;
    PodCondition pods;
    std::optional<double> v_b_lower;
    std::optional<double> v_g_upper;
    std::optional<double> delta;
    std::optional<double> kl_good;
    std::optional<double> kl_bad;
    std::optional<double> epsilon;
};

BoundReport bound_report(const BoundInputs& in);
nlohmann::json to_json(const BoundReport& r);

// ---- Monte Carlo checks ----

struct VoteEstimate {
    std::uint64_t flows = 0;
    std::vector<std::uint64_t> votes;  // per watched link
    double probability(std::size_t i) const { return flows ? double(votes[i]) / double(flows) : 0.0; }
    double sigma(std::size_t i) const;
};

/// Uniform ToR-to-ToR flows on a switch-only fabric; link l causes a
/// retransmission with probability r[l]. Counts flows that cross each
/// watched link upward and retransmit.
VoteEstimate estimate_vote_probabilities(const Topology& topology, std::span<const double> r,
                                         std::span<const LinkId> watch, std::uint64_t flows, Rng& rng);

/// Fraction of `trials` in which B >= G for B ~ Bin(N, v_b), G ~ Bin(N, v_g).
double bad_outvotes_good(std::uint64_t n, double v_b, double v_g, std::uint32_t trials, Rng& rng);

}  // namespace linkvote::theory
