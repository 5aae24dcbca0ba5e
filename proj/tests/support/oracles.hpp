#pragma once

// Independent reference computations used by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "disco/ctrl/path.hpp"

namespace disco::oracle {

struct BrutePath {
    std::vector<std::string> nodes;
    double latency = 0.0;
};

/// Enumerates every simple path over edges with enough residual and keeps
/// the one with least latency, then fewest hops, then smallest node list.
inline std::optional<BrutePath> brute_force_path(const ctrl::PathGraph& g, const std::string& src,
                                                 const std::string& dst, double demand,
                                                 std::optional<double> max_latency = std::nullopt) {
    std::optional<BrutePath> best;
    std::vector<std::string> stack{src};
    auto visit = [&](auto&& self, double latency) -> void {
        const std::string at = stack.back();
        if (at == dst) {
            BrutePath p{stack, latency};
            auto key = [](const BrutePath& x) { return std::make_tuple(x.latency, x.nodes.size(), x.nodes); };
            if (!best || key(p) < key(*best)) {
                best = p;
            }
            return;
        }
        for (const auto& e : g.edges) {
            if (e.from != at || e.residual_mbps + 1e-9 < demand) {
                continue;
            }
            if (std::find(stack.begin(), stack.end(), e.to) != stack.end()) {
                continue;
            }
            stack.push_back(e.to);
            self(self, latency + e.latency_ms);
            stack.pop_back();
        }
    };
    visit(visit, 0.0);
    if (best && max_latency && best->latency > *max_latency + 1e-9) {
        return std::nullopt;
    }
    return best;
}

/// Random directed graph on nodes "n0".."n{size-1}" with integer latencies
/// (so sums compare exactly) and capacities reduced by random reservations.
inline ctrl::PathGraph random_graph(std::mt19937& rng, int size) {
    ctrl::PathGraph g;
    std::uniform_int_distribution<int> lat(1, 12);
    std::uniform_int_distribution<int> cap(1, 20);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    const double density = std::uniform_real_distribution<double>(0.15, 0.6)(rng);
    for (int i = 0; i < size; ++i) {
        for (int j = 0; j < size; ++j) {
            if (i == j || coin(rng) > density) {
                continue;
            }
            double capacity = cap(rng);
            double reserved = std::floor(coin(rng) * capacity);
            g.add({"n" + std::to_string(i), "n" + std::to_string(j), static_cast<double>(lat(rng)),
                   capacity - reserved, std::nullopt});
        }
    }
    return g;
}

}  // namespace disco::oracle
