#pragma once

#include <optional>
#include <string>
#include <vector>

#include "disco/model/types.hpp"

namespace disco::ctrl {

/// Directed edge of the layered path-computation graph. Nodes are opaque
/// names; the controller uses switch ids ("A.1"), remote peering points
/// ("C.2:3") and "host:<addr>" for the destination.
struct PathEdge {
    std::string from;
    std::string to;
    double latency_ms = 0.0;
    double residual_mbps = 0.0;
    std::optional<LinkKey> link;  // physical link, when the edge is one
};

struct PathGraph {
    std::vector<PathEdge> edges;

    void add(PathEdge edge) { edges.push_back(std::move(edge)); }
};

struct PathResult {
    std::vector<std::string> nodes;
    std::vector<PathEdge> hops;
    double total_latency_ms = 0.0;
    double bottleneck_residual_mbps = 0.0;
    std::vector<DomainId> domain_sequence;
};

/// Least-latency path among edges whose residual covers `demand_mbps`.
/// Equal latencies are broken by fewer hops, then by the lexicographically
/// smaller node sequence. Returns nullopt when no path exists or the best
/// one exceeds `max_latency_ms`.
std::optional<PathResult> shortest_feasible_path(const PathGraph& graph, const std::string& src,
                                                 const std::string& dst, double demand_mbps,
                                                 std::optional<double> max_latency_ms = std::nullopt);

}  // namespace disco::ctrl
