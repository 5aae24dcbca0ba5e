#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "disco/model/types.hpp"

namespace disco::sim {

/// Append-only event log, one record per line: `time_ms kind subject detail`.
class Trace {
public:
    void log(SimTime at, std::string_view kind, std::string_view subject, std::string_view detail = {});

    const std::vector<std::string>& lines() const { return lines_; }
    std::string text() const;
    void clear() { lines_.clear(); }

private:
    std::vector<std::string> lines_;
};

}  // namespace disco::sim
