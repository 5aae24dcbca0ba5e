#pragma once

#include <deque>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "disco/model/types.hpp"

namespace disco::ctrl {

/// Evaluates ceiling events against monotone drop counters. Each event
/// fires once per excursion above its ceiling and re-arms when the value
/// falls back to or below it.
class EventEvaluator {
public:
    using CounterFn = std::function<double(const std::string&)>;

    std::vector<std::string> evaluate(std::map<std::string, ThresholdEvent>& events, SimTime now,
                                      const CounterFn& counter);
    /// Current value an event is compared against.
    double value_of(const ThresholdEvent& event, SimTime now, double current) const;
    bool above(const std::string& id) const;

private:
    std::map<std::string, std::deque<std::pair<SimTime, double>>> history_;
    std::map<std::string, bool> above_;
};

struct StopCandidate {
    std::string flow;
    int priority = 0;
    double bandwidth_mbps = 0.0;
};

struct StopPlan {
    std::vector<std::string> kept;
    std::vector<std::string> stopped;  // ascending priority, the order of execution
};

/// Keeps flows by descending priority while they fit in `capacity_mbps`;
/// the rest are stopped lowest priority first. Ties go by flow id.
StopPlan plan_stops(std::vector<StopCandidate> flows, double capacity_mbps);

}  // namespace disco::ctrl
