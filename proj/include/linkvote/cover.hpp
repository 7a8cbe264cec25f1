#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "json.hpp"
#include "linkvote/matrix.hpp"
#include "linkvote/voting.hpp"

namespace linkvote {

struct CoverSolution {
    std::vector<LinkId> links;               // greedy: pick order; exact: ascending id
    std::map<LinkId, std::uint64_t> counts;  // integer program only
    std::uint64_t nodes = 0;
    bool optimal = false;
    bool budget_exceeded = false;
    double wall_seconds = 0.0;
};

struct SolverLimits {
    std::uint32_t k_cap = 0;                 // 0 = no cap on support size
    std::uint64_t node_limit = 5'000'000;
};

/// Repeatedly adds the link covering most still-uncovered failed rows,
/// ties to the lowest id.
CoverSolution greedy_cover(const RoutingMatrix& m);

/// Minimum-cardinality link set covering every failed row.
CoverSolution exact_binary(const RoutingMatrix& m, const SolverLimits& limits = {});

/// Minimum-support drop counts p with A p >= c and sum(p) = sum(c).
CoverSolution exact_integer(const RoutingMatrix& m, const SolverLimits& limits = {});

bool satisfies_binary(const RoutingMatrix& m, const CoverSolution& s);
bool satisfies_integer(const RoutingMatrix& m, const CoverSolution& s);

/// Ranking implied by a solution: integer counts when present, else the
/// number of failed rows each chosen link covers. Links outside the
/// solution share the tail.
Ranking solution_ranking(const RoutingMatrix& m, const CoverSolution& s);

/// {"links":[...],"counts":{...},"optimal":bool}; solver stats are kept
/// out so the document is reproducible.
nlohmann::json to_json(const CoverSolution& s);

}  // namespace linkvote
