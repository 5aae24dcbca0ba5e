#include "disco/ctrl/path.hpp"

#include <limits>
#include <map>
#include <memory>
#include <queue>
#include <set>

namespace disco::ctrl {

namespace {

constexpr double kEpsilon = 1e-9;

struct Label {
    double latency = 0.0;
    std::size_t hops = 0;
    std::vector<std::string> nodes;
    std::vector<std::size_t> edges;
    double bottleneck = std::numeric_limits<double>::infinity();
};

bool better(const Label& a, const Label& b) {
    if (a.latency != b.latency) {
        return a.latency < b.latency;
    }
    if (a.hops != b.hops) {
        return a.hops < b.hops;
    }
    return a.nodes < b.nodes;
}

}  // namespace

std::optional<PathResult> shortest_feasible_path(const PathGraph& graph, const std::string& src,
                                                 const std::string& dst, double demand_mbps,
                                                 std::optional<double> max_latency_ms) {
    std::map<std::string, std::vector<std::size_t>> out;
    for (std::size_t i = 0; i < graph.edges.size(); ++i) {
        const auto& e = graph.edges[i];
        if (e.residual_mbps + kEpsilon >= demand_mbps && e.from != e.to) {
            out[e.from].push_back(i);
        }
    }

    std::map<std::string, Label> best;
    std::set<std::string> settled;
    auto worse = [](const Label* a, const Label* b) { return better(*b, *a); };
    std::priority_queue<const Label*, std::vector<const Label*>, decltype(worse)> frontier(worse);
    std::vector<std::unique_ptr<Label>> arena;

    auto push = [&](Label label) {
        arena.push_back(std::make_unique<Label>(std::move(label)));
        frontier.push(arena.back().get());
    };
    push(Label{0.0, 0, {src}, {}, std::numeric_limits<double>::infinity()});

    while (!frontier.empty()) {
        const Label* cur = frontier.top();
        frontier.pop();
        const std::string& at = cur->nodes.back();
        if (settled.count(at)) {
            continue;
        }
        settled.insert(at);
        best[at] = *cur;
        if (at == dst) {
            break;
        }
        for (std::size_t idx : out[at]) {
            const auto& e = graph.edges[idx];
            if (settled.count(e.to)) {
                continue;
            }
            Label next = *cur;
            next.latency += e.latency_ms;
            next.hops += 1;
            next.nodes.push_back(e.to);
            next.edges.push_back(idx);
            next.bottleneck = std::min(next.bottleneck, e.residual_mbps);
            push(std::move(next));
        }
    }

    auto it = best.find(dst);
    if (it == best.end()) {
        return std::nullopt;
    }
    const Label& label = it->second;
    if (max_latency_ms && label.latency > *max_latency_ms + kEpsilon) {
        return std::nullopt;
    }
    PathResult result;
    result.nodes = label.nodes;
    result.total_latency_ms = label.latency;
    result.bottleneck_residual_mbps = label.bottleneck;
    for (std::size_t idx : label.edges) {
        result.hops.push_back(graph.edges[idx]);
    }
    return result;
}

}  // namespace disco::ctrl
