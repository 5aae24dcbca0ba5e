#pragma once

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "disco/messenger/envelope.hpp"
#include "disco/messenger/mlldp.hpp"
#include "disco/messenger/topic.hpp"
#include "disco/model/types.hpp"
#include "disco/sim/event_loop.hpp"
#include "disco/sim/trace.hpp"

namespace disco::messenger {

class UsageError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Link-level carrier for discovery frames and control envelopes between
/// neighboring controllers. `link` is the outgoing direction, sender side
/// first.
class Transport {
public:
    virtual ~Transport() = default;
    virtual void send_frame(const DomainId& sender, const LinkKey& link, std::vector<std::uint8_t> frame) = 0;
    virtual void send_envelope(const LinkKey& link, Envelope envelope) = 0;
};

struct MessengerConfig {
    SimTime discovery_period_ms = 1000;
    SimTime keepalive_period_ms = 500;
    int keepalive_misses = 3;
    std::array<std::uint8_t, 4> server_ip{10, 0, 0, 1};
    std::uint16_t server_port = 5672;
    std::string server_name = "disco";
};

enum class PeerStatus { connecting, up };

struct PeerState {
    DomainId id;
    LinkKey link;  // local side first
    PeerStatus status = PeerStatus::connecting;
    int consecutive_misses = 0;
    bool awaiting_reply = false;
    std::uint64_t keepalive_seq = 0;
    std::optional<SimTime> last_reply_at;
};

/// Inter-controller control channel: M-LLDP neighbor discovery, pairing,
/// keep-alive failure detection and a federated publish/subscribe bus with
/// per-segment wildcard topics.
///
/// Federation routing floods publications with (origin, seq) duplicate
/// suppression, only toward peers behind which some member subscribed to a
/// matching pattern. A member learns "behind which peers" another member sits
/// from the flood of that member's versioned subscription record.
class Messenger {
public:
    Messenger(DomainId self, sim::EventLoop& loop, sim::Trace& trace, Transport& transport,
              MessengerConfig config = {});

    const DomainId& self() const { return self_; }

    /// Begins discovery on the given border links (outgoing direction) and
    /// the keep-alive clock.
    void start(std::vector<LinkKey> border_links);
    /// Silences the controller: no timers, no replies, no processing.
    void kill();
    bool alive() const { return alive_; }
    /// Announces departure on general.leave.<ID>, then unpairs everybody.
    void leave();
    bool departed() const { return left_; }

    // Driver contract -----------------------------------------------------
    void subscribe(const Topic& pattern);
    void unsubscribe(const Topic& pattern);
    void pair(const DomainId& peer, const LinkKey& via);
    void unpair(const DomainId& peer);
    /// Returns the sequence number assigned to the publication.
    std::uint64_t publish(const Topic& topic, Payload payload, std::set<LinkKey> excluded_links = {});

    // Inbound ---------------------------------------------------------------
    /// `arrival` is the direction the frame travelled (remote side first).
    void receive_frame(const LinkKey& arrival, std::span<const std::uint8_t> frame);
    void receive_envelope(const LinkKey& arrival, const Envelope& envelope);

    void discovery_tick();
    void keepalive_tick();

    // Introspection ---------------------------------------------------------
    std::vector<DomainId> up_peers() const;
    bool is_up(const DomainId& peer) const;
    std::optional<PeerState> peer(const DomainId& peer) const;
    const std::set<Topic>& subscriptions() const { return own_.patterns; }
    /// Known patterns of other members, keyed by owner.
    std::map<DomainId, std::set<Topic>> remote_subscriptions() const;
    /// Peers behind which `owner` is reachable according to subscription floods.
    std::set<DomainId> routes_to(const DomainId& owner) const;
    /// Drops everything learned about a departed or unreachable member.
    void forget_domain(const DomainId& owner);
    bool announcing_on(const LinkKey& border) const;
    std::uint64_t deliveries() const { return deliveries_; }

    std::function<void(const BusMessage&)> on_deliver;
    std::function<void(const DomainId&, const LinkKey&)> on_peer_up;
    std::function<void(const DomainId&)> on_peer_down;
    /// Fired when the record of a previously unknown member arrives.
    std::function<void(const DomainId&)> on_member_joined;
    /// Fired when no route to a member remains; its record is already gone.
    std::function<void(const DomainId&)> on_member_lost;

private:
    void schedule_discovery(SimTime at);
    void schedule_keepalive(SimTime at);
    void send(const PeerState& peer, Envelope::Body body);
    void handle_sync(const DomainId& from, const LinkKey& local_link, const SubscriptionSync& sync);
    void merge_record(const DomainId& from, const SubscriptionRecord& record);
    void handle_publication(const DomainId& from, const BusMessage& message);
    void route(const BusMessage& message, const std::optional<DomainId>& arrived_from);
    bool wanted_behind(const DomainId& peer, const BusMessage& message) const;
    void deliver_locally(const BusMessage& message);
    void peer_failed(const DomainId& peer);
    void drop_route(const DomainId& owner, const DomainId& through);
    void broadcast_own_record();
    SubscriptionSync full_sync() const;

    DomainId self_;
    sim::EventLoop& loop_;
    sim::Trace& trace_;
    Transport& transport_;
    MessengerConfig config_;

    bool started_ = false;
    bool alive_ = true;
    bool left_ = false;
    std::vector<LinkKey> border_links_;
    std::map<LinkKey, DomainId> quiet_links_;
    std::map<DomainId, PeerState> peers_;

    SubscriptionRecord own_;
    std::map<DomainId, SubscriptionRecord> records_;
    std::map<DomainId, std::set<DomainId>> via_;

    std::uint64_t next_seq_ = 0;
    std::map<DomainId, std::set<std::uint64_t>> seen_;
    std::uint64_t deliveries_ = 0;
};

}  // namespace disco::messenger
