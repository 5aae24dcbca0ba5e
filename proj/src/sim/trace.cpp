#include "disco/sim/trace.hpp"

#include <fmt/format.h>

namespace disco::sim {

void Trace::log(SimTime at, std::string_view kind, std::string_view subject, std::string_view detail) {
    if (detail.empty()) {
        lines_.push_back(fmt::format("{} {} {}", at, kind, subject));
    } else {
        lines_.push_back(fmt::format("{} {} {} {}", at, kind, subject, detail));
    }
}

std::string Trace::text() const {
    std::string out;
    for (const auto& line : lines_) {
        out += line;
        out += '\n';
    }
    return out;
}

}  // namespace disco::sim
