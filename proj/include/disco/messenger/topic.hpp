#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <string_view>

namespace disco::messenger {

class TopicError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Three dot-separated segments, each a literal or "*".
class Topic {
public:
    static constexpr std::size_t kSegments = 3;

    Topic() = default;
    Topic(std::string_view a, std::string_view b, std::string_view c);
    static Topic parse(std::string_view text);

    const std::string& segment(std::size_t i) const { return segments_.at(i); }
    bool is_pattern() const;
    std::string str() const;

    auto operator<=>(const Topic&) const = default;

private:
    std::array<std::string, kSegments> segments_;
};

/// Per-segment match: every pattern segment is "*" or equals the topic's.
bool matches(const Topic& pattern, const Topic& topic);

}  // namespace disco::messenger
