#include <cmath>
#include <deque>
#include <limits>

#include <fmt/format.h>

#include "disco/agents/agents.hpp"
#include "disco/ctrl/controller.hpp"

namespace disco::agents {

namespace {

std::set<DomainId> reach(const DomainId& from, const std::vector<DomainEdge>& edges, bool nominal_only) {
    std::set<DomainId> seen{from};
    std::deque<DomainId> queue{from};
    while (!queue.empty()) {
        DomainId d = queue.front();
        queue.pop_front();
        for (const auto& e : edges) {
            if (!e.up || (nominal_only && e.weak)) {
                continue;
            }
            const DomainId* other = e.a == d ? &e.b : e.b == d ? &e.a : nullptr;
            if (other && seen.insert(*other).second) {
                queue.push_back(*other);
            }
        }
    }
    return seen;
}

}  // namespace

LinkClass classify_link(double one_way_latency_ms, bool flagged, double threshold_ms) {
    return flagged || one_way_latency_ms >= threshold_ms ? LinkClass::weak : LinkClass::nominal;
}

std::string_view to_string(AdvertMode m) {
    switch (m) {
        case AdvertMode::direct_fast: return "direct-2000";
        case AdvertMode::relayed: return "relayed";
        case AdvertMode::direct_slow: return "direct-10000";
    }
    return "?";
}

std::string MonitoringPlan::describe() const {
    std::string links_text;
    for (const auto& l : links) {
        links_text += fmt::format("{}{}={}", links_text.empty() ? "" : ",", l.link.str(), to_string(l.mode));
    }
    std::string excluded;
    for (const auto& l : fast_exclusions) {
        excluded += fmt::format("{}{}", excluded.empty() ? "" : ",", l.str());
    }
    return fmt::format("links={} fast-exclude={} slow={}", links_text.empty() ? "-" : links_text,
                       excluded.empty() ? "-" : excluded, slow ? "10000" : "none");
}

MonitoringPlan plan_monitoring(const DomainId& self, const std::vector<DomainEdge>& edges) {
    MonitoringPlan plan;
    for (const auto& e : edges) {
        if (!e.up) {
            continue;
        }
        LinkPlan lp{e.link, AdvertMode::direct_fast};
        if (e.weak) {
            plan.fast_exclusions.insert(e.link);
            lp.mode = reach(e.a, edges, true).count(e.b) ? AdvertMode::relayed : AdvertMode::direct_slow;
        }
        plan.links.push_back(lp);
    }
    plan.slow = reach(self, edges, false) != reach(self, edges, true);
    return plan;
}

Payload encode_monitoring(const DomainId& origin, SimTime period_ms, const std::vector<MonitoringSample>& samples) {
    Payload list = Payload::array();
    for (const auto& s : samples) {
        Payload bw = std::isinf(s.available_mbps) ? Payload(nullptr) : Payload(s.available_mbps);
        list.push_back({{"from", s.pair.from.str()},
                        {"to", s.pair.to.str()},
                        {"bw", bw},
                        {"lat", s.latency_ms},
                        {"ts", s.timestamp},
                        {"lost", s.lost}});
    }
    return Payload{{"origin", origin.str()}, {"period", period_ms}, {"samples", list}};
}

std::vector<MonitoringSample> decode_monitoring(const DomainId& origin, const Payload& payload) {
    std::vector<MonitoringSample> out;
    SimTime period = payload.at("period").get<SimTime>();
    for (const auto& s : payload.at("samples")) {
        MonitoringSample m;
        m.reporter = origin;
        m.pair = {PortRef::parse(s.at("from").get<std::string>()), PortRef::parse(s.at("to").get<std::string>())};
        m.available_mbps =
            s.at("bw").is_null() ? std::numeric_limits<double>::infinity() : s.at("bw").get<double>();
        m.latency_ms = s.at("lat").get<double>();
        m.timestamp = s.at("ts").get<SimTime>();
        m.period_ms = period;
        m.lost = s.at("lost").get<bool>();
        out.push_back(m);
    }
    return out;
}

std::vector<MonitoringSample> MonitoringAgent::measure() const {
    const auto& db = owner_.db();
    const DomainId& self = owner_.self();
    SimTime now = owner_.loop().now();
    SimTime period = owner_.config().monitor_period_ms;

    std::vector<LinkKey> points;
    for (const auto& key : db.peering_links()) {
        if (db.link_up(key)) {
            points.push_back(key);
        }
    }
    std::set<NodeId> host_switches;
    for (const auto& h : db.hosts_in(self)) {
        if (h.attach && h.attach->node.domain == self) {
            host_switches.insert(h.attach->node);
        }
    }

    std::vector<MonitoringSample> out;
    auto internal = [&](const PortRef& from, const NodeId& to_node, const PortRef& to) {
        MonitoringSample s;
        s.reporter = self;
        s.pair = {from, to};
        s.timestamp = now;
        s.period_ms = period;
        auto path = owner_.local_path(from.node, to_node, 0.0);
        if (!path) {
            s.lost = true;
            return s;
        }
        s.latency_ms = path->latency_ms;
        s.available_mbps = std::numeric_limits<double>::infinity();
        for (const auto& l : path->links) {
            s.available_mbps = std::min(s.available_mbps, db.available_bandwidth(l));
        }
        return s;
    };
    for (const auto& p : points) {
        for (const auto& q : points) {
            if (p.from != q.from) {
                out.push_back(internal(p.from, q.from.node, q.from));
            }
        }
        for (const auto& sw : host_switches) {
            out.push_back(internal(p.from, sw, PortRef{sw, 0}));
        }
        MonitoringSample peer;
        peer.reporter = self;
        peer.pair = {p.from, p.to};
        peer.available_mbps = db.available_bandwidth(p);
        peer.latency_ms = db.latency(p);
        peer.timestamp = now;
        peer.period_ms = period;
        out.push_back(peer);
    }
    return out;
}

void MonitoringAgent::advertise(const std::vector<MonitoringSample>& samples) {
    const DomainId& self = owner_.self();
    SimTime now = owner_.loop().now();
    plan_ = plan_monitoring(self, owner_.db().domain_edges());
    if (!last_plan_ || *last_plan_ != plan_) {
        owner_.log("monitoring-plan", plan_.describe());
        last_plan_ = plan_;
    }
    ++fast_published_;
    owner_.bus().publish(messenger::Topic("monitoring", self.str(), "2s"),
                         encode_monitoring(self, owner_.config().monitor_period_ms, samples),
                         plan_.fast_exclusions);
    if (plan_.slow && now % owner_.config().slow_period_ms == 0) {
        ++slow_published_;
        auto slow = samples;
        for (auto& s : slow) {
            s.period_ms = owner_.config().slow_period_ms;
        }
        owner_.bus().publish(messenger::Topic("monitoring", self.str(), "10s"),
                             encode_monitoring(self, owner_.config().slow_period_ms, slow));
    }
}

void MonitoringAgent::on_message(const BusMessage& message) {
    if (message.origin == owner_.self()) {
        return;
    }
    for (const auto& s : decode_monitoring(message.origin, message.payload)) {
        owner_.db().record_sample(s);
    }
}

}  // namespace disco::agents
