#include <fmt/format.h>

#include "disco/agents/agents.hpp"
#include "disco/ctrl/controller.hpp"

namespace disco::agents {

namespace {

constexpr double kEpsilon = 1e-9;

std::string path_text(const std::vector<DomainId>& path) {
    std::string out;
    for (const auto& d : path) {
        out += (out.empty() ? "" : ",") + d.str();
    }
    return out;
}

}  // namespace

Payload encode_flow(const FlowSpec& flow) {
    Payload p{{"id", flow.id},
              {"src", flow.src},
              {"dst", flow.dst},
              {"priority", flow.priority},
              {"bandwidth", flow.bandwidth_mbps}};
    if (flow.max_latency_ms) {
        p["max_latency"] = *flow.max_latency_ms;
    }
    return p;
}

FlowSpec decode_flow(const Payload& p) {
    FlowSpec flow;
    flow.id = p.at("id").get<std::string>();
    flow.src = p.at("src").get<std::string>();
    flow.dst = p.at("dst").get<std::string>();
    flow.priority = p.at("priority").get<int>();
    flow.bandwidth_mbps = p.at("bandwidth").get<double>();
    if (p.contains("max_latency")) {
        flow.max_latency_ms = p.at("max_latency").get<double>();
    }
    return flow;
}

Payload encode_reservation(std::string_view kind, const SegmentRequest& r) {
    Payload path = Payload::array();
    for (const auto& d : r.path) {
        path.push_back(d.str());
    }
    Payload links = Payload::array();
    for (const auto& l : r.peering) {
        links.push_back(l.str());
    }
    return Payload{{"kind", std::string(kind)}, {"flow", encode_flow(r.flow)}, {"epoch", r.epoch},
                   {"path", path},              {"links", links},             {"hop", r.hop},
                   {"latency", r.latency_ms},   {"reason", r.reason}};
}

SegmentRequest decode_reservation(const Payload& p) {
    SegmentRequest r;
    r.flow = decode_flow(p.at("flow"));
    r.epoch = p.at("epoch").get<int>();
    for (const auto& d : p.at("path")) {
        r.path.emplace_back(d.get<std::string>());
    }
    for (const auto& l : p.at("links")) {
        r.peering.push_back(LinkKey::parse(l.get<std::string>()));
    }
    r.hop = p.at("hop").get<int>();
    r.latency_ms = p.at("latency").get<double>();
    r.reason = p.at("reason").get<std::string>();
    return r;
}

std::optional<std::string> ReservationAgent::hold_segment(const SegmentRequest& r, double& segment_latency) {
    auto& db = owner_.db();
    const int last = static_cast<int>(r.path.size()) - 1;
    const int i = r.hop;
    if (static_cast<int>(r.peering.size()) != last) {
        return "malformed path";
    }
    std::optional<LinkKey> ingress = i > 0 ? std::optional<LinkKey>(r.peering[i - 1]) : std::nullopt;
    std::optional<LinkKey> egress = i < last ? std::optional<LinkKey>(r.peering[i]) : std::nullopt;

    NodeId start;
    NodeId end;
    if (ingress) {
        start = ingress->to.node;
    } else {
        auto h = db.host(r.flow.src);
        if (!h || !h->attach || h->attach->node.domain != owner_.self()) {
            return fmt::format("source {} not attached here", r.flow.src);
        }
        start = h->attach->node;
    }
    if (egress) {
        end = egress->from.node;
    } else {
        auto h = db.host(r.flow.dst);
        if (!h || !h->attach || h->attach->node.domain != owner_.self()) {
            return fmt::format("destination {} not attached here", r.flow.dst);
        }
        end = h->attach->node;
    }
    for (const auto& l : {ingress, egress}) {
        if (l && (!db.knows_link(*l) || !db.link_up(*l) || db.impaired(*l))) {
            return fmt::format("link {} unusable", l->str());
        }
    }
    auto intra = owner_.local_path(start, end, r.flow.bandwidth_mbps);
    if (!intra) {
        return fmt::format("no intra path {}->{}", start.str(), end.str());
    }

    Reservation res;
    res.flow = r.flow;
    res.epoch = r.epoch;
    res.domain_path = r.path;
    for (const auto& l : {ingress, egress}) {
        if (l) {
            res.per_link_holds[*l] = r.flow.bandwidth_mbps;
        }
    }
    for (const auto& l : intra->links) {
        res.per_link_holds[l] = r.flow.bandwidth_mbps;
    }
    try {
        db.hold(std::move(res));
    } catch (const ModelError& e) {
        return std::string(e.what());
    }
    segment_latency = intra->latency_ms + (egress ? db.latency(*egress) : 0.0);
    local_[r.key()] = Local{r, intra->links, owner_.loop().now(), false};
    owner_.log("hold", fmt::format("{} hop={} path={}", r.key().str(), i, path_text(r.path)));
    return std::nullopt;
}

void ReservationAgent::install_segment_rules(const ReservationKey& key) {
    auto it = local_.find(key);
    if (it == local_.end()) {
        return;
    }
    const auto& r = it->second.request;
    const int last = static_cast<int>(r.path.size()) - 1;
    if (r.hop == last) {
        return;
    }
    for (const auto& l : it->second.intra) {
        owner_.set_rule(l.from.node, r.flow.dst, l.from.port, key.str());
    }
    const auto& egress = r.peering[r.hop];
    owner_.set_rule(egress.from.node, r.flow.dst, egress.from.port, key.str());
}

void ReservationAgent::send(std::string_view kind, SegmentRequest request, int hop) {
    request.hop = hop;
    const DomainId target = request.path.at(hop);
    owner_.bus().publish(messenger::Topic(target.str(), "reserve", kind), encode_reservation(kind, request),
                         owner_.control_exclusions());
}

std::optional<std::string> ReservationAgent::initiate(SegmentRequest request, bool immediate_rules) {
    request.hop = 0;
    request.latency_ms = 0.0;
    double segment = 0.0;
    if (auto reason = hold_segment(request, segment)) {
        return reason;
    }
    const ReservationKey key = request.key();
    if (request.path.size() == 1) {
        owner_.db().commit(key);
        local_[key].committed = true;
        owner_.loop().schedule(owner_.loop().now(), sim::EventKind::timer, [this, key, segment]() {
            if (owner_.alive() && holds(key)) {
                owner_.on_reservation_outcome(key, true, segment, "");
            }
        });
        return std::nullopt;
    }
    if (immediate_rules) {
        install_segment_rules(key);
    }
    request.latency_ms = segment;
    local_[key].request = request;
    send("setup", request, 1);
    owner_.loop().schedule(owner_.loop().now() + owner_.config().setup_timeout_ms, sim::EventKind::timer,
                           [this, key]() {
                               auto it = local_.find(key);
                               if (!owner_.alive() || it == local_.end() || it->second.committed) {
                                   return;
                               }
                               owner_.log("timeout", key.str());
                               teardown(key);
                               owner_.on_reservation_outcome(key, false, 0.0, "setup timeout");
                           });
    return std::nullopt;
}

void ReservationAgent::release(const ReservationKey& key) {
    owner_.db().release(key);
    owner_.remove_rules_owned_by(key.str());
    local_.erase(key);
}

void ReservationAgent::teardown(const ReservationKey& key) {
    tombstones_.insert(key);
    auto it = local_.find(key);
    if (it == local_.end()) {
        return;
    }
    SegmentRequest request = it->second.request;
    release(key);
    owner_.log("release", key.str());
    if (request.path.size() > 1) {
        send("teardown", request, 1);
    }
}

void ReservationAgent::arm_expiry(const ReservationKey& key) {
    SimTime held_at = owner_.loop().now();
    owner_.loop().schedule(held_at + owner_.config().pending_timeout_ms, sim::EventKind::timer,
                           [this, key, held_at]() {
                               auto it = local_.find(key);
                               if (!owner_.alive() || it == local_.end() || it->second.committed ||
                                   it->second.held_at != held_at) {
                                   return;
                               }
                               owner_.log("expire", key.str());
                               release(key);
                           });
}

void ReservationAgent::on_message(const BusMessage& message) {
    if (message.origin == owner_.self()) {
        return;
    }
    SegmentRequest request = decode_reservation(message.payload);
    if (request.hop < 0 || request.hop >= static_cast<int>(request.path.size()) ||
        request.path[request.hop] != owner_.self()) {
        return;
    }
    const auto& kind = message.topic.segment(2);
    if (kind == "setup") {
        handle_setup(std::move(request));
    } else if (kind == "accept") {
        handle_accept(request);
    } else if (kind == "reject") {
        handle_reject(request);
    } else if (kind == "teardown") {
        handle_teardown(request);
    }
}

void ReservationAgent::handle_setup(SegmentRequest request) {
    const int i = request.hop;
    const int last = static_cast<int>(request.path.size()) - 1;
    const ReservationKey key = request.key();
    if (i == 0 || local_.count(key)) {
        return;
    }
    if (tombstones_.count(key)) {
        request.reason = "torn down";
        send("reject", request, i - 1);
        return;
    }
    double segment = 0.0;
    if (auto reason = hold_segment(request, segment)) {
        owner_.log("refuse", fmt::format("{} {}", key.str(), *reason));
        request.reason = fmt::format("{}: {}", owner_.self().str(), *reason);
        send("reject", request, i - 1);
        return;
    }
    request.latency_ms += segment;
    local_[key].request = request;
    if (i < last) {
        arm_expiry(key);
        send("setup", request, i + 1);
        return;
    }
    if (request.flow.max_latency_ms && request.latency_ms > *request.flow.max_latency_ms + kEpsilon) {
        release(key);
        request.reason = fmt::format("{}: latency {} exceeds {}", owner_.self().str(), format_ms(request.latency_ms),
                                     format_ms(*request.flow.max_latency_ms));
        owner_.log("refuse", fmt::format("{} {}", key.str(), request.reason));
        send("reject", request, i - 1);
        return;
    }
    owner_.db().commit(key);
    local_[key].committed = true;
    owner_.log("commit", fmt::format("{} hop={}", key.str(), i));
    send("accept", request, i - 1);
}

void ReservationAgent::handle_accept(const SegmentRequest& request) {
    const ReservationKey key = request.key();
    auto it = local_.find(key);
    if (it == local_.end() || it->second.committed) {
        return;
    }
    owner_.db().commit(key);
    it->second.committed = true;
    it->second.request.latency_ms = request.latency_ms;
    install_segment_rules(key);
    if (request.hop == 0) {
        owner_.on_reservation_outcome(key, true, request.latency_ms, "");
        return;
    }
    owner_.log("commit", fmt::format("{} hop={}", key.str(), request.hop));
    send("accept", request, request.hop - 1);
}

void ReservationAgent::handle_reject(const SegmentRequest& request) {
    const ReservationKey key = request.key();
    bool held = local_.count(key) != 0;
    if (held) {
        release(key);
    }
    if (request.hop == 0) {
        if (held) {
            owner_.on_reservation_outcome(key, false, 0.0, request.reason);
        }
        return;
    }
    send("reject", request, request.hop - 1);
}

void ReservationAgent::handle_teardown(const SegmentRequest& request) {
    const ReservationKey key = request.key();
    tombstones_.insert(key);
    if (local_.count(key)) {
        release(key);
        owner_.log("release", key.str());
    }
    if (request.hop + 1 < static_cast<int>(request.path.size())) {
        send("teardown", request, request.hop + 1);
    }
}

}  // namespace disco::agents
