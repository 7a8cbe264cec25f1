#include "linkvote/theory.hpp"

#include <cmath>

#include "linkvote/simulator.hpp"

namespace linkvote::theory {

TracerouteRates traceroute_rates(const ClosParams& p, double c_t) {
    if (c_t < 0.0) throw ValidationError("c_t", "must be >= 0");
    TracerouteRates out;
    const double h = p.hosts_per_tor;
    out.r1 = c_t * h / p.n1;
    if (p.n_pod < 2) {
        out.single_pod = true;
        out.r2 = 0.0;
    } else {
        out.r2 = double(p.n0) / (double(p.n1) * p.n2) * inter_pod_fraction(p) * c_t * h;
    }
    out.switch_bound = std::max(p.n0 * out.r1, p.n1 * out.r2);
    return out;
}

double max_traceroute_rate(const ClosParams& params, double t_max) { return traceroute_budget(params, t_max).c_t; }

double pg_threshold(double p_b, double c_l, double c_u, double a) {
    if (!(a > 0.0)) throw ConditionFailed("alpha", "alpha must be positive", a);
    if (c_u <= 0.0) throw ValidationError("c_u", "must be positive");
    return retransmission_prob(p_b, c_l) / (a * c_u);
}

double retransmission_prob(double p, double c) {
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("p", "must lie in [0,1]");
    if (c < 0.0) throw ValidationError("c", "must be >= 0");
    if (p >= 1.0) return c > 0.0 ? 1.0 : 0.0;
    return -std::expm1(c * std::log1p(-p));
}

PodCondition pod_condition(const ClosParams& p) {
    PodCondition out;
    const double n0 = p.n0, n1 = p.n1, n2 = p.n2;
    if (p.n0 < p.n2) {
        out.failing = "n0 >= n2";
        out.required_pods = std::numeric_limits<double>::infinity();
        return out;
    }
    const double t_tier1 = n0 / n1;
    double t_tier2 = 0.0;
    if (p.n0 > p.n2)
        t_tier2 = n2 * (n0 - 1.0) / (n0 * (n0 - n2));
    else if (p.n0 > 1)
        t_tier2 = std::numeric_limits<double>::infinity();
    out.required_pods = 1.0 + std::max({t_tier1, t_tier2, 1.0});
    out.holds = p.n_pod >= out.required_pods;
    if (!out.holds) {
        if (t_tier2 >= t_tier1 && t_tier2 >= 1.0)
            out.failing = "n_pod >= 1 + n2(n0-1)/(n0(n0-n2))";
        else if (t_tier1 >= 1.0)
            out.failing = "n_pod >= 1 + n0/n1";
        else
            out.failing = "n_pod >= 2";
    }
    return out;
}

VoteBounds<double> vote_prob_bounds(const ClosParams& p, std::uint32_t k, double r_b, double r_g) {
    const auto pc = pod_condition(p);
    if (!pc.holds) throw ConditionFailed("pod-condition", pc.failing, pc.required_pods);
    VoteBounds<double> b;
    b.v_b_lower = r_b / (double(p.n0) * p.n1 * p.n_pod);
    b.v_g_upper = bound_sg2(p, k, r_g, r_b);
    b.conclusion = b.v_b_lower >= b.v_g_upper;
    try {
        b.premise = r_b >= alpha(p, k) * r_g;
    } catch (const ConditionFailed&) {
        b.premise = false;
    }
    return b;
}

double kl_bernoulli(double q, double r) {
    if (!(q >= 0.0 && q <= 1.0 && r >= 0.0 && r <= 1.0)) throw ValidationError("kl", "arguments must lie in [0,1]");
    auto term = [](double a, double b) {
        if (a == 0.0) return 0.0;
        if (b == 0.0) return std::numeric_limits<double>::infinity();
        return a * std::log(a / b);
    };
    return term(q, r) + term(1.0 - q, 1.0 - r);
}

double epsilon_bound(double n, double v_g, double v_b, std::optional<double> delta) {
    if (n < 0.0) throw ValidationError("N", "must be >= 0");
    if (!(v_g >= 0.0 && v_b <= 1.0 && v_g < v_b)) throw ValidationError("v", "need 0 <= v_g < v_b <= 1");
    const double d = delta.value_or((v_b - v_g) / (v_b + v_g));
    if (!(d > 0.0 && d <= 1.0)) throw ValidationError("delta", "must lie in (0,1]");
    double eps = 0.0;
    const double hi = (1.0 + d) * v_g;
    if (hi <= 1.0) eps += std::exp(-n * kl_bernoulli(hi, v_g));
    eps += std::exp(-n * kl_bernoulli((1.0 - d) * v_b, v_b));
    return eps;
}

BoundInputs bound_inputs_from_json(const nlohmann::json& j) {
    BoundInputs in;
    if (!j.is_object()) throw ValidationError("params", "expected a JSON object");
    if (j.contains("topology")) in.params = clos_params_from_json(j.at("topology"));
    auto num = [&](const char* key, double& dst) {
        if (!j.contains(key)) return;
        if (!j.at(key).is_number()) throw ValidationError(key, "expected a number");
        dst = j.at(key).get<double>();
    };
    num("t_max", in.t_max);
    num("p_b", in.p_b);
    num("p_g", in.p_g);
    num("c_l", in.c_l);
    num("c_u", in.c_u);
    num("connections", in.connections);
    if (j.contains("k")) {
        if (!j.at("k").is_number_unsigned()) throw ValidationError("k", "expected a non-negative integer");
        in.k = j.at("k").get<std::uint32_t>();
    }
    if (j.contains("delta")) {
        if (!j.at("delta").is_number()) throw ValidationError("delta", "expected a number");
        in.delta = j.at("delta").get<double>();
    }
    if (in.c_l > in.c_u) throw ValidationError("c_l", "must not exceed c_u");
    validate(in.params);
    return in;
}

BoundReport bound_report(const BoundInputs& in) {
    BoundReport r;
    r.in = in;
    const auto& p = in.params;
    if (p.hosts_per_tor > 0) {
        r.c_t = max_traceroute_rate(p, in.t_max);
        r.rates = traceroute_rates(p, r.c_t);
    }
    r.inter_pod = p.n_pod >= 2 ? inter_pod_fraction(p) : 0.0;
    r.k_bound = k_bound(p);
    r.k_condition = p.n_pod >= 2 && in.k < r.k_bound;
    if (r.k_condition) {
        r.alpha = alpha(p, in.k);
        r.pg_threshold = pg_threshold(in.p_b, in.c_l, in.c_u, *r.alpha);
    }
    r.r_b = retransmission_prob(in.p_b, in.c_l);
    r.r_g = retransmission_prob(in.p_g, in.c_u);
    r.pods = pod_condition(p);
    if (r.pods.holds) {
        const auto b = vote_prob_bounds(p, in.k, r.r_b, r.r_g);
        r.v_b_lower = b.v_b_lower;
        r.v_g_upper = b.v_g_upper;
        if (b.v_b_lower > b.v_g_upper && b.v_b_lower <= 1.0) {
            const double n = in.connections > 0.0 ? in.connections : double(p.host_count()) * 60.0;
            r.delta = in.delta.value_or((b.v_b_lower - b.v_g_upper) / (b.v_b_lower + b.v_g_upper));
            if ((1.0 + *r.delta) * b.v_g_upper <= 1.0) r.kl_good = kl_bernoulli((1.0 + *r.delta) * b.v_g_upper, b.v_g_upper);
            r.kl_bad = kl_bernoulli((1.0 - *r.delta) * b.v_b_lower, b.v_b_lower);
            r.epsilon = epsilon_bound(n, b.v_g_upper, b.v_b_lower, r.delta);
        }
    }
    return r;
}

nlohmann::json to_json(const BoundReport& r) {
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    const double n = r.in.connections > 0.0 ? r.in.connections : double(r.in.params.host_count()) * 60.0;
    return {
        {"topology", to_json(r.in.params)},
        {"inputs",
         {{"t_max", r.in.t_max}, {"k", r.in.k}, {"p_b", r.in.p_b}, {"p_g", r.in.p_g}, {"c_l", r.in.c_l},
          {"c_u", r.in.c_u}, {"connections", n}}},
        {"c_t", r.c_t},
        {"r1", r.rates.r1},
        {"r2", r.rates.r2},
        {"switch_rate_bound", r.rates.switch_bound},
        {"single_pod", r.rates.single_pod},
        {"inter_pod_probability", r.inter_pod},
        {"k_bound", r.k_bound},
        {"k_condition", r.k_condition},
        {"alpha", opt(r.alpha)},
        {"pg_threshold", opt(r.pg_threshold)},
        {"r_b", r.r_b},
        {"r_g", r.r_g},
        {"pod_condition", r.pods.holds},
        {"pod_condition_required", r.pods.required_pods},
        {"pod_condition_failing", r.pods.failing},
        {"v_b_lower", opt(r.v_b_lower)},
        {"v_g_upper", opt(r.v_g_upper)},
        {"delta", opt(r.delta)},
        {"kl_good", opt(r.kl_good)},
        {"kl_bad", opt(r.kl_bad)},
        {"epsilon", opt(r.epsilon)},
    };
}

double VoteEstimate::sigma(std::size_t i) const {
    const double p = probability(i);
    return flows ? std::sqrt(p * (1.0 - p) / double(flows)) : 0.0;
}

VoteEstimate estimate_vote_probabilities(const Topology& topo, std::span<const double> r,
                                         std::span<const LinkId> watch, std::uint64_t flows, Rng& rng) {
    const auto& p = topo.params();
    if (r.size() != topo.link_count()) throw std::invalid_argument("need one retransmission probability per link");
    if (p.hosts_per_tor == 0) throw ValidationError("hosts_per_tor", "need at least one host per ToR");
    VoteEstimate est;
    est.flows = flows;
    est.votes.assign(watch.size(), 0);
    const std::uint32_t tors = p.tor_count();
    if (tors < 2) throw ValidationError("n0", "need at least two ToRs");
    std::uniform_int_distribution<std::uint32_t> pick_src(0, tors - 1), pick_dst(0, tors - 2);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (std::uint64_t n = 0; n < flows; ++n) {
        const std::uint32_t s = pick_src(rng);
        std::uint32_t d = pick_dst(rng);
        if (d >= s) ++d;
        const bool intra = topo.pod_of_tor(s) == topo.pod_of_tor(d);
        const Path path =
            make_path(topo, s * p.hosts_per_tor, d * p.hosts_per_tor, sample_choice(p, intra, rng));
        bool retransmit = false;
        for (LinkId l : path.links())
            if (r[l] > 0.0 && u01(rng) < r[l]) retransmit = true;
        if (!retransmit) continue;
        const std::size_t up = path.link_count / 2;
        for (std::size_t w = 0; w < watch.size(); ++w)
            for (std::size_t i = 0; i < up; ++i)
                if (path.link_ids[i] == watch[w]) ++est.votes[w];
    }
    return est;
}

double bad_outvotes_good(std::uint64_t n, double v_b, double v_g, std::uint32_t trials, Rng& rng) {
    if (trials == 0) return 0.0;
    std::binomial_distribution<std::uint64_t> bad(n, v_b), good(n, v_g);
    std::uint32_t wins = 0;
    for (std::uint32_t t = 0; t < trials; ++t) {
        const auto b = bad(rng);
        const auto g = good(rng);
        wins += b >= g;
    }
    return double(wins) / trials;
}

}  // namespace linkvote::theory
