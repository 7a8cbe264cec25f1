#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "linkvote/flow.hpp"

namespace linkvote {

/// Sparse C x L flow/link incidence matrix with the per-flow status vector
/// (1 if the flow retransmitted) and drop-count vector.
struct RoutingMatrix {
    std::uint32_t link_count = 0;
    std::vector<std::vector<LinkId>> rows;
    std::vector<std::uint32_t> flow_ids;
    std::vector<std::uint8_t> status;
    std::vector<std::uint32_t> drops;

    std::size_t flow_count() const { return rows.size(); }

    /// Appends a row; `drops > 0` marks the flow failed. Throws if a failed
    /// row is empty or references a link outside [0, link_count).
    void add_row(std::uint32_t flow_id, std::span<const LinkId> links, std::uint32_t drops);
};

RoutingMatrix build_routing_matrix(std::span<const FlowRecord> flows, std::uint32_t link_count);

/// Sparse triplet export: header "flow_id,link_id", one line per nonzero.
void write_triplets(std::ostream& out, const RoutingMatrix& m);
/// Companion status export: "flow_id,status,drops".
void write_status(std::ostream& out, const RoutingMatrix& m);
/// Inverse of write_triplets + write_status. Link count is taken as
/// max(link_id)+1 unless `link_count` is larger.
RoutingMatrix read_routing_matrix(std::istream& triplets, std::istream& status, std::uint32_t link_count = 0);

}  // namespace linkvote
