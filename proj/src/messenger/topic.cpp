#include "disco/messenger/topic.hpp"

#include <fmt/format.h>

namespace disco::messenger {

namespace {

void check_segment(std::string_view s, std::string_view whole) {
    if (s.empty()) {
        throw TopicError(fmt::format("topic '{}' has an empty segment", whole));
    }
    if (s != "*" && (s.find('*') != std::string_view::npos || s.find('.') != std::string_view::npos)) {
        throw TopicError(fmt::format("topic '{}': segment '{}' mixes wildcard and literal", whole, s));
    }
    for (char c : s) {
        if (c == ' ' || c == '\t' || c == '\n') {
            throw TopicError(fmt::format("topic '{}' contains whitespace", whole));
        }
    }
}

}  // namespace

Topic::Topic(std::string_view a, std::string_view b, std::string_view c)
    : segments_{std::string(a), std::string(b), std::string(c)} {
    std::string whole = str();
    for (const auto& s : segments_) {
        check_segment(s, whole);
    }
}

Topic Topic::parse(std::string_view text) {
    auto first = text.find('.');
    if (first == std::string_view::npos) {
        throw TopicError(fmt::format("topic '{}' needs {} segments", text, kSegments));
    }
    auto second = text.find('.', first + 1);
    if (second == std::string_view::npos || text.find('.', second + 1) != std::string_view::npos) {
        throw TopicError(fmt::format("topic '{}' needs {} segments", text, kSegments));
    }
    return Topic(text.substr(0, first), text.substr(first + 1, second - first - 1), text.substr(second + 1));
}

bool Topic::is_pattern() const {
    for (const auto& s : segments_) {
        if (s == "*") {
            return true;
        }
    }
    return false;
}

std::string Topic::str() const {
    return fmt::format("{}.{}.{}", segments_[0], segments_[1], segments_[2]);
}

bool matches(const Topic& pattern, const Topic& topic) {
    for (std::size_t i = 0; i < Topic::kSegments; ++i) {
        if (pattern.segment(i) != "*" && pattern.segment(i) != topic.segment(i)) {
            return false;
        }
    }
    return true;
}

}  // namespace disco::messenger
