#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "disco/model/types.hpp"

namespace disco::sim {

class SchedulingError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

enum class EventKind { timer, frame_delivery, flow_sample, scenario_action };

/// Deterministic discrete-event loop. Events run in (time, insertion
/// sequence) order; the clock only moves forward.
class EventLoop {
public:
    using Action = std::function<void()>;

    SimTime now() const { return now_; }

    void schedule(SimTime at, EventKind kind, Action action);
    void schedule_in(SimTime delay, EventKind kind, Action action) { schedule(now_ + delay, kind, std::move(action)); }

    /// Runs the next event. Returns false when the queue is empty.
    bool run_next();
    /// Runs every event with time <= end, then parks the clock at end.
    void run_until(SimTime end);

    std::size_t pending() const { return queue_.size(); }
    std::uint64_t executed() const { return executed_; }
    std::uint64_t executed(EventKind kind) const { return per_kind_[static_cast<int>(kind)]; }

    /// Called after every executed event (used by invariant checkers).
    void set_after_event(std::function<void()> hook) { after_event_ = std::move(hook); }

private:
    struct Entry {
        SimTime at;
        std::uint64_t seq;
        EventKind kind;
        Action action;
    };
    struct Later {
        bool operator()(const Entry& a, const Entry& b) const {
            return a.at != b.at ? a.at > b.at : a.seq > b.seq;
        }
    };

    SimTime now_ = 0;
    std::uint64_t next_seq_ = 0;
    std::uint64_t executed_ = 0;
    std::uint64_t per_kind_[4] = {0, 0, 0, 0};
    std::vector<Entry> queue_;
    std::function<void()> after_event_;
};

}  // namespace disco::sim
