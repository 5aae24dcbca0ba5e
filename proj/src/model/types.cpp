#include "disco/model/types.hpp"

#include <cctype>
#include <charconv>
#include <cmath>

#include <fmt/format.h>

namespace disco {

namespace {

int parse_int(std::string_view text, std::string_view what) {
    int value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || value < 0) {
        throw ModelError(fmt::format("invalid {} '{}'", what, text));
    }
    return value;
}

}  // namespace

DomainId::DomainId(std::string id) : id_(std::move(id)) {
    if (id_.empty()) {
        throw ModelError("empty domain identifier");
    }
    for (char c : id_) {
        if (c == '.' || c == '*' || c == ':' || c == '>' || c == ',' || std::isspace(static_cast<unsigned char>(c))) {
            throw ModelError(fmt::format("domain identifier '{}' contains reserved character '{}'", id_, c));
        }
    }
}

std::string NodeId::str() const {
    return fmt::format("{}.{}", domain.str(), local);
}

NodeId NodeId::parse(std::string_view text) {
    auto dot = text.rfind('.');
    if (dot == std::string_view::npos || dot == 0 || dot + 1 == text.size()) {
        throw ModelError(fmt::format("invalid switch reference '{}'", text));
    }
    return {DomainId(std::string(text.substr(0, dot))), parse_int(text.substr(dot + 1), "switch index")};
}

std::string PortRef::str() const {
    return fmt::format("{}:{}", node.str(), port);
}

PortRef PortRef::parse(std::string_view text) {
    auto colon = text.rfind(':');
    if (colon == std::string_view::npos || colon + 1 == text.size()) {
        throw ModelError(fmt::format("invalid port reference '{}'", text));
    }
    return {NodeId::parse(text.substr(0, colon)), parse_int(text.substr(colon + 1), "port")};
}

std::string LinkKey::str() const {
    return fmt::format("{}>{}", from.str(), to.str());
}

LinkKey LinkKey::parse(std::string_view text) {
    auto gt = text.find('>');
    if (gt == std::string_view::npos) {
        throw ModelError(fmt::format("invalid link reference '{}'", text));
    }
    return {PortRef::parse(text.substr(0, gt)), PortRef::parse(text.substr(gt + 1))};
}

void LinkSpec::validate() const {
    if (!(latency_ms > 0.0)) {
        throw ModelError(fmt::format("link {}: latency must be > 0", key.str()));
    }
    if (!(capacity_mbps > 0.0)) {
        throw ModelError(fmt::format("link {}: capacity must be > 0", key.str()));
    }
    if (!(loss_rate >= 0.0 && loss_rate <= 1.0)) {
        throw ModelError(fmt::format("link {}: loss must lie in [0,1]", key.str()));
    }
    bool same_domain = key.from.node.domain == key.to.node.domain;
    if (kind == LinkKind::intra && !same_domain) {
        throw ModelError(fmt::format("link {}: intra link crosses domains", key.str()));
    }
    if (kind == LinkKind::peering && same_domain) {
        throw ModelError(fmt::format("link {}: peering link inside one domain", key.str()));
    }
}

void FlowSpec::validate() const {
    if (id.empty()) {
        throw ModelError("flow without identifier");
    }
    if (src == dst) {
        throw ModelError(fmt::format("flow {}: source equals destination", id));
    }
    if (!(bandwidth_mbps > 0.0)) {
        throw ModelError(fmt::format("flow {}: bandwidth must be > 0", id));
    }
    if (max_latency_ms && !(*max_latency_ms > 0.0)) {
        throw ModelError(fmt::format("flow {}: latency ceiling must be > 0", id));
    }
}

std::string_view to_string(ReservationState s) {
    switch (s) {
        case ReservationState::pending: return "pending";
        case ReservationState::committed: return "committed";
        case ReservationState::released: return "released";
    }
    return "?";
}

std::string ReservationKey::str() const {
    return fmt::format("{}#{}", flow, epoch);
}

std::string MonitorPair::str() const {
    return fmt::format("{}~{}", from.str(), to.str());
}

void ThresholdEvent::validate() const {
    if (id.empty() || subject.empty()) {
        throw ModelError("threshold event needs an id and a subject");
    }
    if (mode == ThresholdMode::relative && window_ms <= 0) {
        throw ModelError(fmt::format("event {}: relative mode requires window > 0", id));
    }
}

std::string format_ms(double value) {
    if (std::isinf(value)) {
        return "inf";
    }
    return fmt::format("{}", value);
}

}  // namespace disco
