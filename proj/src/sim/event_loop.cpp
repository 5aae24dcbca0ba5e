#include "disco/sim/event_loop.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace disco::sim {

void EventLoop::schedule(SimTime at, EventKind kind, Action action) {
    if (at < now_) {
        throw SchedulingError(fmt::format("cannot schedule at {} ms, clock is at {} ms", at, now_));
    }
    queue_.push_back(Entry{at, next_seq_++, kind, std::move(action)});
    std::push_heap(queue_.begin(), queue_.end(), Later{});
}

bool EventLoop::run_next() {
    if (queue_.empty()) {
        return false;
    }
    std::pop_heap(queue_.begin(), queue_.end(), Later{});
    Entry entry = std::move(queue_.back());
    queue_.pop_back();
    now_ = entry.at;
    ++executed_;
    ++per_kind_[static_cast<int>(entry.kind)];
    entry.action();
    if (after_event_) {
        after_event_();
    }
    return true;
}

void EventLoop::run_until(SimTime end) {
    while (!queue_.empty() && queue_.front().at <= end) {
        run_next();
    }
    if (end > now_) {
        now_ = end;
    }
}

}  // namespace disco::sim
