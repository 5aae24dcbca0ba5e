#include "disco/messenger/envelope.hpp"

namespace disco::messenger {

std::string category_of(const Topic& topic) {
    const auto& head = topic.segment(0);
    if (head == "monitoring" || head == "connectivity" || head == "reachability") {
        return head;
    }
    if (topic.segment(1) == "reserve") {
        return "reservation";
    }
    return "bus";
}

std::string BusMessage::category() const {
    return category_of(topic);
}

namespace {

Payload sync_document(const SubscriptionSync& sync) {
    Payload records = Payload::array();
    for (const auto& r : sync.records) {
        Payload patterns = Payload::array();
        for (const auto& p : r.patterns) {
            patterns.push_back(p.str());
        }
        records.push_back({{"owner", r.owner.str()}, {"version", r.version}, {"patterns", patterns}});
    }
    Payload withdrawn = Payload::array();
    for (const auto& w : sync.withdrawn) {
        withdrawn.push_back(w.str());
    }
    return Payload{{"subscriptions", records}, {"withdrawn", withdrawn}};
}

}  // namespace

std::size_t Envelope::bytes() const {
    return std::visit(
        [](const auto& b) -> std::size_t {
            using T = std::decay_t<decltype(b)>;
            if constexpr (std::is_same_v<T, SubscriptionSync>) {
                return sync_document(b).dump().size();
            } else if constexpr (std::is_same_v<T, KeepAlive>) {
                return Payload{{"keepalive", b.seq}}.dump().size();
            } else if constexpr (std::is_same_v<T, KeepAliveReply>) {
                return Payload{{"keepalive_reply", b.seq}}.dump().size();
            } else {
                return b.payload_bytes();
            }
        },
        body);
}

std::string Envelope::category() const {
    if (const auto* m = std::get_if<BusMessage>(&body)) {
        return m->category();
    }
    return "bus";
}

std::string Envelope::label() const {
    return std::visit(
        [](const auto& b) -> std::string {
            using T = std::decay_t<decltype(b)>;
            if constexpr (std::is_same_v<T, SubscriptionSync>) {
                return "subscription-sync";
            } else if constexpr (std::is_same_v<T, KeepAlive>) {
                return "keepalive";
            } else if constexpr (std::is_same_v<T, KeepAliveReply>) {
                return "keepalive-reply";
            } else {
                return b.topic.str();
            }
        },
        body);
}

}  // namespace disco::messenger
