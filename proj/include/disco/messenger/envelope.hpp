#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "disco/messenger/topic.hpp"
#include "disco/model/types.hpp"

namespace disco::messenger {

/// Structured key-value payload. nlohmann::json objects keep keys sorted, so
/// dump() is the canonical textual form.
using Payload = nlohmann::json;

struct BusMessage {
    Topic topic;
    DomainId origin;
    std::uint64_t seq = 0;
    Payload payload;
    SimTime sent_at = 0;
    /// Physical links (canonical keys) the federation must not relay over.
    std::set<LinkKey> excluded_links;

    std::string category() const;
    std::size_t payload_bytes() const { return payload.dump().size(); }
};

/// Pattern set of one federation member, versioned by its owner.
struct SubscriptionRecord {
    DomainId owner;
    std::uint64_t version = 0;
    std::set<Topic> patterns;
};

/// Records the sender learned or changed, plus owners the receiver must no
/// longer route through the sender.
struct SubscriptionSync {
    std::vector<SubscriptionRecord> records;
    std::vector<DomainId> withdrawn;
};

struct KeepAlive {
    std::uint64_t seq = 0;
};

struct KeepAliveReply {
    std::uint64_t seq = 0;
};

/// One control-channel transmission between paired controllers.
struct Envelope {
    using Body = std::variant<SubscriptionSync, KeepAlive, KeepAliveReply, BusMessage>;

    DomainId sender;
    Body body;

    /// Serialized size charged to the control-traffic accounting.
    std::size_t bytes() const;
    /// monitoring | connectivity | reachability | reservation | bus
    std::string category() const;
    /// Topic for publications, message kind otherwise.
    std::string label() const;
};

std::string category_of(const Topic& topic);

}  // namespace disco::messenger
