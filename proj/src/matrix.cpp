#include "linkvote/matrix.hpp"

#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>

namespace linkvote {

void RoutingMatrix::add_row(std::uint32_t flow_id, std::span<const LinkId> links, std::uint32_t row_drops) {
    if (row_drops > 0 && links.empty())
        throw std::invalid_argument("failed flow " + std::to_string(flow_id) + " has an empty path");
    for (LinkId l : links)
        if (l >= link_count) throw std::out_of_range("link " + std::to_string(l) + " outside routing matrix");
    rows.emplace_back(links.begin(), links.end());
    flow_ids.push_back(flow_id);
    status.push_back(row_drops > 0 ? 1 : 0);
    drops.push_back(row_drops);
}

RoutingMatrix build_routing_matrix(std::span<const FlowRecord> flows, std::uint32_t link_count) {
    RoutingMatrix m;
    m.link_count = link_count;
    m.rows.reserve(flows.size());
    for (const auto& f : flows) m.add_row(f.id, f.path.links(), f.total_drops());
    return m;
}

void write_triplets(std::ostream& out, const RoutingMatrix& m) {
    out << "flow_id,link_id\n";
    for (std::size_t i = 0; i < m.rows.size(); ++i)
        for (LinkId l : m.rows[i]) out << m.flow_ids[i] << ',' << l << '\n';
}

void write_status(std::ostream& out, const RoutingMatrix& m) {
    out << "flow_id,status,drops\n";
    for (std::size_t i = 0; i < m.rows.size(); ++i)
        out << m.flow_ids[i] << ',' << int(m.status[i]) << ',' << m.drops[i] << '\n';
}

namespace {

std::vector<std::uint32_t> parse_line(const std::string& line, std::size_t expected, std::size_t lineno) {
    std::vector<std::uint32_t> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        try {
            std::size_t used = 0;
            const unsigned long v = std::stoul(cell, &used);
            if (used != cell.size() && cell.find_first_not_of(" \r", used) != std::string::npos) throw std::invalid_argument(cell);
            out.push_back(static_cast<std::uint32_t>(v));
        } catch (const std::exception&) {
            throw std::runtime_error("line " + std::to_string(lineno) + ": bad integer '" + cell + "'");
        }
    }
    if (out.size() != expected)
        throw std::runtime_error("line " + std::to_string(lineno) + ": expected " + std::to_string(expected) + " fields");
    return out;
}

}  // namespace

RoutingMatrix read_routing_matrix(std::istream& triplets, std::istream& status, std::uint32_t link_count) {
    std::vector<std::array<std::uint32_t, 3>> flows;
    std::unordered_map<std::uint32_t, std::size_t> index;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(status, line)) {
        ++lineno;
        if (lineno == 1 || line.empty() || line == "\r") continue;
        const auto v = parse_line(line, 3, lineno);
        if (!index.emplace(v[0], flows.size()).second) throw std::runtime_error("duplicate flow " + std::to_string(v[0]));
        flows.push_back({v[0], v[1], v[2]});
    }

    std::vector<std::vector<LinkId>> rows(flows.size());
    lineno = 0;
    std::uint32_t max_link = 0;
    bool any = false;
    while (std::getline(triplets, line)) {
        ++lineno;
        if (lineno == 1 || line.empty() || line == "\r") continue;
        const auto v = parse_line(line, 2, lineno);
        const auto it = index.find(v[0]);
        if (it == index.end()) throw std::runtime_error("triplet references unknown flow " + std::to_string(v[0]));
        rows[it->second].push_back(v[1]);
        max_link = std::max(max_link, v[1]);
        any = true;
    }

    RoutingMatrix m;
    m.link_count = std::max(link_count, any ? max_link + 1 : 0u);
    for (std::size_t i = 0; i < flows.size(); ++i) {
        // status column is redundant with drops but a file may carry status
        // without counts; treat a set status as at least one drop.
        std::uint32_t d = flows[i][2];
        if (flows[i][1] != 0 && d == 0) d = 1;
        m.add_row(flows[i][0], rows[i], d);
    }
    return m;
}

}  // namespace linkvote
