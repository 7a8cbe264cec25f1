#pragma once

#include <array>
#include <cstdint>

#include "linkvote/routing.hpp"

namespace linkvote {

/// One simulated connection. `drops[i]` counts packets lost on the i-th
/// link of the path.
struct FlowRecord {
    std::uint32_t id = 0;
    HostId src = 0;
    HostId dst = 0;
    Path path;
    std::uint32_t packets = 0;
    std::array<std::uint32_t, kMaxPathLinks> drops{};
    bool retransmitted = false;
    bool traced = false;
    LinkId culprit = kNoLink;

    std::uint32_t total_drops() const {
        std::uint32_t n = 0;
        for (std::size_t i = 0; i < path.link_count; ++i) n += drops[i];
        return n;
    }

    /// Recomputes `retransmitted` and `culprit` from the drop counts:
    /// the link with most drops, ties to the lowest id.
    void finalize() {
        retransmitted = total_drops() > 0;
        culprit = kNoLink;
        if (!retransmitted) return;
        std::uint32_t best = 0;
        for (std::size_t i = 0; i < path.link_count; ++i) {
            const LinkId id = path.link_ids[i];
            if (drops[i] > best || (drops[i] == best && best > 0 && id < culprit)) {
                best = drops[i];
                culprit = id;
            }
        }
    }
};

}  // namespace linkvote
