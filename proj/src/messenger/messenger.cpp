#include "disco/messenger/messenger.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace disco::messenger {

namespace {

SimTime next_multiple(SimTime after, SimTime period) {
    return (after / period + 1) * period;
}

}  // namespace

Messenger::Messenger(DomainId self, sim::EventLoop& loop, sim::Trace& trace, Transport& transport,
                     MessengerConfig config)
    : self_(std::move(self)), loop_(loop), trace_(trace), transport_(transport), config_(std::move(config)) {
    own_.owner = self_;
}

void Messenger::start(std::vector<LinkKey> border_links) {
    if (started_) {
        throw UsageError(fmt::format("messenger {} already started", self_.str()));
    }
    started_ = true;
    border_links_ = std::move(border_links);
    schedule_discovery(loop_.now());
    schedule_keepalive(next_multiple(loop_.now(), config_.keepalive_period_ms));
}

void Messenger::kill() {
    alive_ = false;
}

void Messenger::leave() {
    if (!alive_ || left_) {
        return;
    }
    publish(Topic("general", "leave", self_.str()), Payload{{"domain", self_.str()}});
    trace_.log(loop_.now(), "LEAVE", self_.str());
    std::vector<DomainId> all;
    for (const auto& [id, _] : peers_) {
        all.push_back(id);
    }
    for (const auto& id : all) {
        unpair(id);
    }
    left_ = true;
}

void Messenger::schedule_discovery(SimTime at) {
    loop_.schedule(at, sim::EventKind::timer, [this]() {
        if (!alive_ || left_) {
            return;
        }
        discovery_tick();
        schedule_discovery(loop_.now() + config_.discovery_period_ms);
    });
}

void Messenger::schedule_keepalive(SimTime at) {
    loop_.schedule(at, sim::EventKind::timer, [this]() {
        if (!alive_ || left_) {
            return;
        }
        keepalive_tick();
        schedule_keepalive(loop_.now() + config_.keepalive_period_ms);
    });
}

void Messenger::discovery_tick() {
    for (const auto& border : border_links_) {
        if (quiet_links_.count(border)) {
            continue;
        }
        MlldpFrame frame;
        frame.controller_id = self_.str();
        frame.switch_id = static_cast<std::uint16_t>(border.from.node.local);
        frame.switch_port = static_cast<std::uint16_t>(border.from.port);
        frame.server_ip = config_.server_ip;
        frame.server_port = config_.server_port;
        frame.server_name = config_.server_name;
        transport_.send_frame(self_, border, encode_mlldp(frame));
    }
}

void Messenger::keepalive_tick() {
    std::vector<DomainId> failed;
    for (auto& [id, peer] : peers_) {
        if (peer.awaiting_reply) {
            ++peer.consecutive_misses;
            if (peer.consecutive_misses >= config_.keepalive_misses) {
                failed.push_back(id);
                continue;
            }
        }
        peer.awaiting_reply = true;
        ++peer.keepalive_seq;
        send(peer, KeepAlive{peer.keepalive_seq});
    }
    for (const auto& id : failed) {
        peer_failed(id);
    }
}

void Messenger::peer_failed(const DomainId& peer) {
    trace_.log(loop_.now(), "PEERDOWN", self_.str(), peer.str());
    unpair(peer);
    if (on_peer_down) {
        on_peer_down(peer);
    }
}

void Messenger::send(const PeerState& peer, Envelope::Body body) {
    transport_.send_envelope(peer.link, Envelope{self_, std::move(body)});
}

void Messenger::subscribe(const Topic& pattern) {
    if (!own_.patterns.insert(pattern).second) {
        return;
    }
    ++own_.version;
    broadcast_own_record();
}

void Messenger::unsubscribe(const Topic& pattern) {
    if (own_.patterns.erase(pattern) == 0) {
        return;
    }
    ++own_.version;
    broadcast_own_record();
}

void Messenger::broadcast_own_record() {
    for (const auto& [_, peer] : peers_) {
        send(peer, SubscriptionSync{{own_}, {}});
    }
}

SubscriptionSync Messenger::full_sync() const {
    SubscriptionSync sync;
    sync.records.push_back(own_);
    for (const auto& [_, record] : records_) {
        sync.records.push_back(record);
    }
    return sync;
}

void Messenger::pair(const DomainId& peer, const LinkKey& via) {
    if (peer == self_) {
        throw UsageError("a controller cannot pair with itself");
    }
    quiet_links_[via] = peer;
    if (peers_.count(peer)) {
        return;
    }
    PeerState state;
    state.id = peer;
    state.link = via;
    trace_.log(loop_.now(), "PAIR", self_.str(), fmt::format("{} via={}", peer.str(), via.str()));
    const auto& stored = peers_.emplace(peer, std::move(state)).first->second;
    send(stored, full_sync());
}

void Messenger::unpair(const DomainId& peer) {
    if (peers_.erase(peer) == 0) {
        return;
    }
    for (auto it = quiet_links_.begin(); it != quiet_links_.end();) {
        it = it->second == peer ? quiet_links_.erase(it) : std::next(it);
    }
    trace_.log(loop_.now(), "UNPAIR", self_.str(), peer.str());
    std::vector<DomainId> owners;
    for (const auto& [owner, _] : via_) {
        owners.push_back(owner);
    }
    for (const auto& owner : owners) {
        drop_route(owner, peer);
    }
}

void Messenger::drop_route(const DomainId& owner, const DomainId& through) {
    auto it = via_.find(owner);
    if (it == via_.end() || it->second.erase(through) == 0) {
        return;
    }
    if (it->second.empty()) {
        via_.erase(it);
        records_.erase(owner);
        for (const auto& [id, peer] : peers_) {
            if (id != through && id != owner) {
                send(peer, SubscriptionSync{{}, {owner}});
            }
        }
        if (on_member_lost) {
            on_member_lost(owner);
        }
        return;
    }
    // Split horizon: a peer that is our only remaining route to `owner`
    // must not route toward `owner` through us.
    if (it->second.size() == 1) {
        const DomainId& only = *it->second.begin();
        auto p = peers_.find(only);
        if (p != peers_.end() && only != owner) {
            send(p->second, SubscriptionSync{{}, {owner}});
        }
    }
}

void Messenger::forget_domain(const DomainId& owner) {
    records_.erase(owner);
    via_.erase(owner);
}

std::uint64_t Messenger::publish(const Topic& topic, Payload payload, std::set<LinkKey> excluded_links) {
    if (topic.is_pattern()) {
        throw UsageError(fmt::format("cannot publish on wildcard topic {}", topic.str()));
    }
    if (!alive_ || left_) {
        return 0;
    }
    BusMessage message;
    message.topic = topic;
    message.origin = self_;
    message.seq = ++next_seq_;
    message.payload = std::move(payload);
    message.sent_at = loop_.now();
    for (const auto& key : excluded_links) {
        message.excluded_links.insert(key.canonical());
    }
    trace_.log(loop_.now(), "BUS", self_.str(), fmt::format("{} {}", topic.str(), message.payload_bytes()));
    seen_[self_].insert(message.seq);
    for (const auto& pattern : own_.patterns) {
        if (matches(pattern, topic)) {
            loop_.schedule(loop_.now(), sim::EventKind::timer, [this, message]() {
                if (alive_ && !left_) {
                    deliver_locally(message);
                }
            });
            break;
        }
    }
    route(message, std::nullopt);
    return message.seq;
}

void Messenger::deliver_locally(const BusMessage& message) {
    ++deliveries_;
    if (on_deliver) {
        on_deliver(message);
    }
}

bool Messenger::wanted_behind(const DomainId& peer, const BusMessage& message) const {
    for (const auto& [owner, routes] : via_) {
        if (owner == message.origin || !routes.count(peer)) {
            continue;
        }
        auto rec = records_.find(owner);
        if (rec == records_.end()) {
            continue;
        }
        for (const auto& pattern : rec->second.patterns) {
            if (matches(pattern, message.topic)) {
                return true;
            }
        }
    }
    return false;
}

void Messenger::route(const BusMessage& message, const std::optional<DomainId>& arrived_from) {
    for (const auto& [id, peer] : peers_) {
        if (peer.status != PeerStatus::up || id == message.origin || (arrived_from && id == *arrived_from)) {
            continue;
        }
        if (message.excluded_links.count(peer.link.canonical())) {
            continue;
        }
        if (wanted_behind(id, message)) {
            send(peer, message);
        }
    }
}

void Messenger::receive_frame(const LinkKey& arrival, std::span<const std::uint8_t> bytes) {
    if (!alive_ || left_) {
        return;
    }
    MlldpFrame frame;
    try {
        frame = decode_mlldp(bytes);
    } catch (const MlldpDecodeError& e) {
        trace_.log(loop_.now(), "ERROR", self_.str(), fmt::format("mlldp {} at byte {}", e.what(), e.position()));
        return;
    }
    DomainId peer(frame.controller_id);
    if (peer == self_) {
        return;
    }
    pair(peer, arrival.reversed());
}

void Messenger::receive_envelope(const LinkKey& arrival, const Envelope& envelope) {
    if (!alive_ || left_) {
        return;
    }
    const DomainId& from = envelope.sender;
    LinkKey local = arrival.reversed();
    if (const auto* sync = std::get_if<SubscriptionSync>(&envelope.body)) {
        handle_sync(from, local, *sync);
        return;
    }
    auto it = peers_.find(from);
    if (it == peers_.end()) {
        return;
    }
    PeerState& peer = it->second;
    if (const auto* ka = std::get_if<KeepAlive>(&envelope.body)) {
        send(peer, KeepAliveReply{ka->seq});
    } else if (const auto* reply = std::get_if<KeepAliveReply>(&envelope.body)) {
        if (peer.awaiting_reply && reply->seq == peer.keepalive_seq) {
            peer.awaiting_reply = false;
            peer.consecutive_misses = 0;
            peer.last_reply_at = loop_.now();
        }
    } else if (const auto* message = std::get_if<BusMessage>(&envelope.body)) {
        handle_publication(from, *message);
    }
}

void Messenger::handle_sync(const DomainId& from, const LinkKey& local_link, const SubscriptionSync& sync) {
    if (!peers_.count(from)) {
        if (sync.records.empty()) {
            return;
        }
        pair(from, local_link);
    }
    PeerState& peer = peers_.at(from);
    bool came_up = false;
    if (peer.status == PeerStatus::connecting) {
        peer.status = PeerStatus::up;
        came_up = true;
        trace_.log(loop_.now(), "PEERUP", self_.str(), from.str());
    }
    for (const auto& record : sync.records) {
        merge_record(from, record);
    }
    for (const auto& owner : sync.withdrawn) {
        if (owner != self_) {
            drop_route(owner, from);
        }
    }
    if (came_up && on_peer_up) {
        on_peer_up(from, peer.link);
    }
}

void Messenger::merge_record(const DomainId& from, const SubscriptionRecord& record) {
    if (record.owner == self_) {
        return;
    }
    auto it = records_.find(record.owner);
    if (it != records_.end() && record.version < it->second.version) {
        return;
    }
    if (it != records_.end() && record.version == it->second.version) {
        via_[record.owner].insert(from);
        return;
    }
    bool joined = it == records_.end();
    records_[record.owner] = record;
    via_[record.owner] = {from};
    for (const auto& [id, peer] : peers_) {
        if (id != from && id != record.owner) {
            send(peer, SubscriptionSync{{record}, {}});
        }
    }
    if (joined && on_member_joined) {
        on_member_joined(record.owner);
    }
}

void Messenger::handle_publication(const DomainId& from, const BusMessage& message) {
    if (!seen_[message.origin].insert(message.seq).second) {
        return;
    }
    for (const auto& pattern : own_.patterns) {
        if (matches(pattern, message.topic)) {
            deliver_locally(message);
            break;
        }
    }
    if (alive_ && !left_) {
        route(message, from);
    }
}

std::vector<DomainId> Messenger::up_peers() const {
    std::vector<DomainId> out;
    for (const auto& [id, peer] : peers_) {
        if (peer.status == PeerStatus::up) {
            out.push_back(id);
        }
    }
    return out;
}

bool Messenger::is_up(const DomainId& peer) const {
    auto it = peers_.find(peer);
    return it != peers_.end() && it->second.status == PeerStatus::up;
}

std::optional<PeerState> Messenger::peer(const DomainId& peer) const {
    auto it = peers_.find(peer);
    if (it == peers_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::map<DomainId, std::set<Topic>> Messenger::remote_subscriptions() const {
    std::map<DomainId, std::set<Topic>> out;
    for (const auto& [owner, record] : records_) {
        out[owner] = record.patterns;
    }
    return out;
}

std::set<DomainId> Messenger::routes_to(const DomainId& owner) const {
    auto it = via_.find(owner);
    return it == via_.end() ? std::set<DomainId>{} : it->second;
}

bool Messenger::announcing_on(const LinkKey& border) const {
    return std::find(border_links_.begin(), border_links_.end(), border) != border_links_.end() &&
           !quiet_links_.count(border);
}

}  // namespace disco::messenger
