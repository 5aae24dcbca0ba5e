#include "disco/ctrl/events.hpp"

#include <algorithm>

namespace disco::ctrl {

namespace {

constexpr double kEpsilon = 1e-9;

}  // namespace

double EventEvaluator::value_of(const ThresholdEvent& event, SimTime now, double current) const {
    if (event.mode == ThresholdMode::absolute) {
        return current;
    }
    double base = 0.0;
    auto it = history_.find(event.subject);
    if (it != history_.end()) {
        for (const auto& [at, value] : it->second) {
            if (at > now - event.window_ms) {
                break;
            }
            base = value;
        }
    }
    return current - base;
}

bool EventEvaluator::above(const std::string& id) const {
    auto it = above_.find(id);
    return it != above_.end() && it->second;
}

std::vector<std::string> EventEvaluator::evaluate(std::map<std::string, ThresholdEvent>& events, SimTime now,
                                                  const CounterFn& counter) {
    std::map<std::string, double> current;
    SimTime longest = 0;
    for (const auto& [_, e] : events) {
        current.emplace(e.subject, counter(e.subject));
        longest = std::max(longest, e.window_ms);
    }
    std::vector<std::string> fired;
    for (auto& [id, e] : events) {
        double value = value_of(e, now, current[e.subject]);
        bool above = value > e.ceiling + kEpsilon;
        bool& was = above_[id];
        if (above && !was) {
            e.fired_at = now;
            fired.push_back(id);
        }
        was = above;
    }
    for (const auto& [subject, value] : current) {
        auto& h = history_[subject];
        h.emplace_back(now, value);
        while (h.size() > 1 && h[1].first <= now - longest) {
            h.pop_front();
        }
    }
    return fired;
}

StopPlan plan_stops(std::vector<StopCandidate> flows, double capacity_mbps) {
    std::sort(flows.begin(), flows.end(), [](const StopCandidate& a, const StopCandidate& b) {
        return a.priority != b.priority ? a.priority > b.priority : a.flow < b.flow;
    });
    StopPlan plan;
    double used = 0.0;
    std::vector<StopCandidate> dropped;
    for (const auto& f : flows) {
        if (used + f.bandwidth_mbps <= capacity_mbps + kEpsilon) {
            used += f.bandwidth_mbps;
            plan.kept.push_back(f.flow);
        } else {
            dropped.push_back(f);
        }
    }
    std::sort(dropped.begin(), dropped.end(), [](const StopCandidate& a, const StopCandidate& b) {
        return a.priority != b.priority ? a.priority < b.priority : a.flow < b.flow;
    });
    for (const auto& f : dropped) {
        plan.stopped.push_back(f.flow);
    }
    return plan;
}

}  // namespace disco::ctrl
