#include "disco/ctrl/controller.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "disco/agents/agents.hpp"

namespace disco::ctrl {

namespace {

constexpr double kEpsilon = 1e-9;
constexpr std::size_t kMaxVictimCandidates = 12;

std::string host_node(const std::string& address) {
    return "host:" + address;
}

std::optional<DomainId> node_domain(const std::string& node) {
    if (node.rfind("host:", 0) == 0) {
        return std::nullopt;
    }
    auto colon = node.find(':');
    return NodeId::parse(node.substr(0, colon)).domain;
}

std::string join_domains(const std::vector<DomainId>& path) {
    std::string out;
    for (const auto& d : path) {
        out += (out.empty() ? "" : ",") + d.str();
    }
    return out;
}

SimTime next_multiple(SimTime after, SimTime period) {
    return (after / period + 1) * period;
}

}  // namespace

std::string_view to_string(FlowState s) {
    switch (s) {
        case FlowState::pending: return "pending";
        case FlowState::committed: return "committed";
        case FlowState::rejected: return "rejected";
        case FlowState::stopped: return "stopped";
        case FlowState::released: return "released";
    }
    return "?";
}

Controller::Controller(DomainId self, sim::EventLoop& loop, sim::Trace& trace, sim::Network& network,
                       messenger::Transport& transport, ControllerConfig config)
    : self_(std::move(self)),
      loop_(loop),
      trace_(trace),
      network_(network),
      config_(std::move(config)),
      db_(self_) {
    messenger_ = std::make_unique<messenger::Messenger>(self_, loop_, trace_, transport, config_.messenger);
    connectivity_ = std::make_unique<agents::ConnectivityAgent>(*this);
    monitoring_ = std::make_unique<agents::MonitoringAgent>(*this);
    reachability_ = std::make_unique<agents::ReachabilityAgent>(*this);
    reservation_ = std::make_unique<agents::ReservationAgent>(*this);

    messenger_->on_deliver = [this](const messenger::BusMessage& m) { deliver(m); };
    messenger_->on_member_joined = [this](const DomainId&) {
        connectivity_->publish_full();
        reachability_->publish_full();
    };
    messenger_->on_member_lost = [this](const DomainId& d) { on_member_lost(d); };
    messenger_->on_peer_down = [this](const DomainId& d) { log("peer-down", d.str()); };

    using messenger::Topic;
    messenger_->subscribe(Topic("connectivity", "*", "*"));
    messenger_->subscribe(Topic("monitoring", "*", "*"));
    messenger_->subscribe(Topic("reachability", "*", "*"));
    messenger_->subscribe(Topic(self_.str(), "*", "*"));
    messenger_->subscribe(Topic("general", "*", "*"));
}

Controller::~Controller() = default;

void Controller::log(std::string_view action, std::string_view detail) const {
    trace_.log(loop_.now(), "CTRL", self_.str(), fmt::format("{} {}", action, detail));
}

void Controller::load_local() {
    for (const auto& node : network_.switches()) {
        if (node.domain == self_) {
            db_.add_switch(node);
        }
    }
    for (const auto& key : network_.link_keys()) {
        if (key.from.node.domain == self_ || key.to.node.domain == self_) {
            db_.add_link(network_.link(key));
        }
    }
    for (const auto& [address, attach] : network_.hosts()) {
        if (attach && attach->node.domain == self_) {
            db_.upsert_host(HostId{address, attach}, self_);
        }
    }
    refresh_host_rules();
}

void Controller::start() {
    if (started_) {
        return;
    }
    started_ = true;
    messenger_->start(db_.peering_links());
    connectivity_->refresh();
    schedule_periodic(loop_.now(), config_.monitor_period_ms, [this]() { monitor_tick(); });
    schedule_periodic(next_multiple(loop_.now(), config_.event_period_ms), config_.event_period_ms,
                      [this]() { evaluate_events(); });
}

void Controller::schedule_periodic(SimTime first, SimTime period, std::function<void()> fn) {
    loop_.schedule(first, sim::EventKind::timer, [this, period, fn]() {
        if (!alive_) {
            return;
        }
        fn();
        schedule_periodic(loop_.now() + period, period, fn);
    });
}

void Controller::kill() {
    if (!alive_) {
        return;
    }
    log("killed", "-");
    alive_ = false;
    messenger_->kill();
}

void Controller::leave() {
    if (!alive_) {
        return;
    }
    log("leave", "-");
    messenger_->leave();
    alive_ = false;
}

// Bus dispatch ----------------------------------------------------------------

void Controller::deliver(const messenger::BusMessage& message) {
    if (!alive_) {
        return;
    }
    try {
        auto category = message.category();
        if (category == "connectivity") {
            connectivity_->on_message(message);
        } else if (category == "monitoring") {
            monitoring_->on_message(message);
        } else if (category == "reachability") {
            reachability_->on_message(message);
        } else if (category == "reservation") {
            reservation_->on_message(message);
        } else if (message.topic.segment(0) == "general" && message.topic.segment(1) == "leave") {
            DomainId gone(message.topic.segment(2));
            if (gone != self_) {
                messenger_->unpair(gone);
                messenger_->forget_domain(gone);
                on_member_lost(gone);
            }
        }
    } catch (const std::exception& e) {
        trace_.log(loop_.now(), "ERROR", self_.str(), fmt::format("{} {}", message.topic.str(), e.what()));
    }
}

void Controller::on_member_lost(const DomainId& domain) {
    trace_.log(loop_.now(), "PURGE", self_.str(), domain.str());
    db_.purge_domain(domain);
    on_topology_changed();
}

// Monitor manager ---------------------------------------------------------------

void Controller::monitor_tick() {
    bool changed = false;
    for (const auto& key : db_.link_keys()) {
        if (key.from.node.domain != self_) {
            continue;
        }
        const auto& spec = db_.link(key);
        std::optional<double> latency;
        if (spec.kind == LinkKind::intra) {
            latency = network_.send_probe({key});
        } else if (auto rtt = network_.ping_peer(key)) {
            latency = *rtt / 2.0;
        }
        bool up = latency.has_value();
        if (up != db_.link_up(key)) {
            db_.set_link_up(key, up);
            changed = true;
        }
        if (latency) {
            db_.set_measured_latency(key, *latency);
            if (spec.kind == LinkKind::peering) {
                db_.set_measured_latency(key.reversed(), *latency);
            }
        }
    }
    connectivity_->refresh();
    auto samples = monitoring_->measure();
    for (const auto& s : samples) {
        db_.record_sample(s);
    }
    monitoring_->advertise(samples);
    if (changed) {
        refresh_host_rules();
        on_topology_changed();
    }
}

void Controller::register_event(ThresholdEvent event) {
    bool known = false;
    if (event.subject.find('>') != std::string::npos) {
        known = db_.knows_link(LinkKey::parse(event.subject));
    } else {
        known = db_.link_from_port(PortRef::parse(event.subject)).has_value();
    }
    if (!known) {
        throw LookupError(fmt::format("event {}: unknown subject {}", event.id, event.subject));
    }
    db_.register_event(std::move(event));
}

void Controller::evaluate_events() {
    auto fired = evaluator_.evaluate(db_.events(), loop_.now(),
                                     [this](const std::string& subject) { return network_.counter(subject); });
    for (auto it = impaired_by_event_.begin(); it != impaired_by_event_.end();) {
        if (!evaluator_.above(it->first)) {
            db_.set_impaired(it->second, false);
            log("event-rearm", it->first);
            it = impaired_by_event_.erase(it);
        } else {
            ++it;
        }
    }
    for (const auto& id : fired) {
        const auto& e = db_.events().at(id);
        LinkKey link = e.subject.find('>') != std::string::npos ? LinkKey::parse(e.subject)
                                                                : *db_.link_from_port(PortRef::parse(e.subject));
        log("event-fired", fmt::format("{} subject={}", id, e.subject));
        db_.set_impaired(link, true);
        impaired_by_event_[id] = link;
        handle_event_reroute(link, false);
    }
}

// Rules -------------------------------------------------------------------------

void Controller::set_rule(const NodeId& node, const std::string& dst, PortNo port, const std::string& owner) {
    auto current = network_.current_rule(node, dst);
    if (!current || current->out_port != port) {
        network_.install_rule(sim::ForwardingRule{node, dst, port, 0});
    }
    rule_owner_[{node, dst}] = owner;
}

void Controller::remove_rules_owned_by(const std::string& owner) {
    for (auto it = rule_owner_.begin(); it != rule_owner_.end();) {
        if (it->second == owner) {
            network_.remove_rule(it->first.first, it->first.second);
            it = rule_owner_.erase(it);
        } else {
            ++it;
        }
    }
}

std::optional<std::string> Controller::rule_owner(const NodeId& node, const std::string& dst) const {
    auto it = rule_owner_.find({node, dst});
    if (it == rule_owner_.end()) {
        return std::nullopt;
    }
    return it->second;
}

void Controller::refresh_host_rules() {
    std::set<std::string> local;
    for (const auto& h : db_.hosts_in(self_)) {
        if (!h.attach || h.attach->node.domain != self_) {
            continue;
        }
        local.insert(h.address);
        for (const auto& sw : db_.switches()) {
            PortNo port = h.attach->port;
            if (sw != h.attach->node) {
                auto path = local_path(sw, h.attach->node, 0.0);
                if (!path) {
                    continue;
                }
                port = path->links.front().from.port;
            }
            set_rule(sw, h.address, port, "host");
        }
    }
    for (auto it = rule_owner_.begin(); it != rule_owner_.end();) {
        if (it->second == "host" && !local.count(it->first.second)) {
            network_.remove_rule(it->first.first, it->first.second);
            it = rule_owner_.erase(it);
        } else {
            ++it;
        }
    }
}

// Hosts -------------------------------------------------------------------------

void Controller::host_attached(const std::string& address, const PortRef& port) {
    if (!alive_) {
        return;
    }
    log("host-up", fmt::format("{} at {}", address, port.str()));
    reachability_->host_appeared(HostId{address, port});
    refresh_host_rules();
    on_host_mapping_changed(address);
}

void Controller::host_detached(const std::string& address) {
    if (!alive_) {
        return;
    }
    log("host-down", address);
    reachability_->host_disappeared(address);
    refresh_host_rules();
}

void Controller::on_host_mapping_changed(const std::string& address) {
    auto domain = db_.host_domain(address);
    if (!domain) {
        return;
    }
    std::vector<std::string> moved;
    for (const auto& [id, f] : flows_) {
        bool active = f.state == FlowState::committed || (f.state == FlowState::pending && f.pending_epoch);
        if (active && f.spec.dst == address && !f.domain_path.empty() && f.domain_path.back() != *domain) {
            moved.push_back(id);
        }
    }
    for (const auto& id : moved) {
        log("host-moved", fmt::format("{} {}->{} flow={}", address, flows_.at(id).domain_path.back().str(),
                                      domain->str(), id));
        reroute(id, true);
    }
}

// Path computation ----------------------------------------------------------------

double Controller::own_residual(const LinkKey& key, const FlowSpec& flow, const PathOptions& options) const {
    double residual = db_.available_bandwidth(key);
    if (options.preempt_below) {
        for (const auto& [id, f] : flows_) {
            if (f.state != FlowState::committed || f.spec.priority >= *options.preempt_below || id == flow.id) {
                continue;
            }
            if (const auto* r = db_.reservation({id, f.epoch})) {
                if (auto h = r->per_link_holds.find(key); h != r->per_link_holds.end()) {
                    residual += h->second;
                }
            }
        }
    }
    if (options.ignore) {
        if (const auto* r = db_.reservation(*options.ignore)) {
            if (auto h = r->per_link_holds.find(key); h != r->per_link_holds.end()) {
                residual += h->second;
            }
        }
    }
    if (auto it = options.extra_load.find(key); it != options.extra_load.end()) {
        residual -= it->second;
    }
    return residual;
}

std::optional<LocalPath> Controller::local_path(const NodeId& from, const NodeId& to, double demand_mbps) const {
    if (from == to) {
        return LocalPath{};
    }
    PathGraph graph;
    for (const auto& key : db_.link_keys()) {
        const auto& spec = db_.link(key);
        if (spec.kind != LinkKind::intra || !db_.link_up(key) || db_.impaired(key)) {
            continue;
        }
        graph.add(PathEdge{key.from.node.str(), key.to.node.str(), db_.latency(key), db_.available_bandwidth(key), key});
    }
    auto result = shortest_feasible_path(graph, from.str(), to.str(), demand_mbps);
    if (!result) {
        return std::nullopt;
    }
    LocalPath out;
    out.latency_ms = result->total_latency_ms;
    for (const auto& hop : result->hops) {
        out.links.push_back(*hop.link);
    }
    return out;
}

std::optional<Route> Controller::compute_path(const FlowSpec& flow, const PathOptions& options) const {
    auto src = db_.host(flow.src);
    auto dst = db_.host(flow.dst);
    auto dst_domain = db_.host_domain(flow.dst);
    if (!src || !src->attach || src->attach->node.domain != self_ || !dst || !dst->attach || !dst_domain) {
        return std::nullopt;
    }
    const SimTime now = loop_.now();
    std::string target = *dst_domain == self_ ? dst->attach->node.str() : host_node(flow.dst);

    PathGraph graph;
    for (const auto& key : db_.link_keys()) {
        if (key.from.node.domain != self_ || !db_.link_up(key) || db_.impaired(key)) {
            continue;
        }
        const auto& spec = db_.link(key);
        std::string to = spec.kind == LinkKind::intra ? key.to.node.str() : key.to.str();
        graph.add(PathEdge{key.from.node.str(), to, db_.latency(key), own_residual(key, flow, options), key});
    }

    std::set<LinkKey> up_edges;
    for (const auto& e : db_.domain_edges()) {
        if (e.up) {
            up_edges.insert(e.link);
        }
    }
    if (*dst_domain != self_) {
        for (const auto& [reporter, _] : db_.connectivity()) {
            if (reporter == self_) {
                continue;
            }
            for (const auto& s : db_.samples_from(reporter)) {
                if (s.lost || now - s.timestamp > 3 * s.period_ms) {
                    continue;
                }
                const auto& from = s.pair.from;
                const auto& to = s.pair.to;
                if (to.node.domain != reporter) {
                    LinkKey link{from, to};
                    if (to.node.domain == self_ || !up_edges.count(link.canonical())) {
                        continue;
                    }
                    graph.add(PathEdge{from.str(), to.str(), s.latency_ms, s.available_mbps, link});
                } else if (to.port == 0) {
                    if (reporter == *dst_domain && to.node == dst->attach->node) {
                        graph.add(PathEdge{from.str(), target, s.latency_ms, s.available_mbps, std::nullopt});
                    }
                } else {
                    graph.add(PathEdge{from.str(), to.str(), s.latency_ms, s.available_mbps, std::nullopt});
                }
            }
        }
    }

    std::optional<double> ceiling = options.ignore_latency_ceiling ? std::nullopt : flow.max_latency_ms;
    auto result = shortest_feasible_path(graph, src->attach->node.str(), target, flow.bandwidth_mbps, ceiling);
    if (!result) {
        return std::nullopt;
    }
    Route route;
    for (const auto& node : result->nodes) {
        auto d = node_domain(node);
        if (d && (route.domains.empty() || route.domains.back() != *d)) {
            if (std::find(route.domains.begin(), route.domains.end(), *d) != route.domains.end()) {
                return std::nullopt;
            }
            route.domains.push_back(*d);
        }
    }
    for (const auto& hop : result->hops) {
        if (hop.link && hop.link->from.node.domain != hop.link->to.node.domain) {
            route.peering.push_back(*hop.link);
        }
    }
    result->domain_sequence = route.domains;
    route.path = std::move(*result);
    return route;
}

// Service manager -------------------------------------------------------------

int Controller::next_epoch(const std::string& flow_id) {
    return ++epochs_[flow_id];
}

void Controller::packet_in(const NodeId& at, const FlowSpec& flow) {
    if (!alive_ || at.domain != self_ || db_.host_domain(flow.src) != self_) {
        return;
    }
    auto it = flows_.find(flow.id);
    if (it != flows_.end()) {
        const auto& f = it->second;
        if (f.state == FlowState::pending || f.state == FlowState::committed || f.state == FlowState::stopped) {
            return;
        }
        if (loop_.now() - f.last_attempt < config_.packet_in_backoff_ms) {
            return;
        }
    }
    trace_.log(loop_.now(), "PKTIN", at.str(), fmt::format("flow={}", flow.id));
    admit_service(flow);
}

void Controller::admit_service(const FlowSpec& flow) {
    if (!alive_) {
        return;
    }
    flow.validate();
    if (auto it = flows_.find(flow.id);
        it != flows_.end() && (it->second.state == FlowState::pending || it->second.state == FlowState::committed)) {
        return;
    }
    FlowStatus& record = flows_[flow.id];
    record = FlowStatus{};
    record.spec = flow;
    record.state = FlowState::pending;
    record.last_attempt = loop_.now();
    log("admit", fmt::format("{} {}->{} prio={} bw={} maxlat={}", flow.id, flow.src, flow.dst, flow.priority,
                             format_ms(flow.bandwidth_mbps),
                             flow.max_latency_ms ? format_ms(*flow.max_latency_ms) : std::string("-")));
    if (db_.host_domain(flow.src) != self_) {
        record.state = FlowState::rejected;
        record.reason = "source not local";
        log("reject", fmt::format("{} {}", flow.id, record.reason));
        return;
    }
    if (auto route = compute_path(flow)) {
        start_reservation(record, *route, false);
        return;
    }
    if (try_preempt(flow)) {
        return;
    }
    record.state = FlowState::rejected;
    record.reason = "no feasible path";
    log("reject", fmt::format("{} {}", flow.id, record.reason));
}

void Controller::start_reservation(FlowStatus& record, const Route& route, bool immediate_rules) {
    const std::string id = record.spec.id;
    const int epoch = next_epoch(id);
    record.pending_epoch = epoch;
    record.last_attempt = loop_.now();
    if (record.state != FlowState::committed) {
        record.state = FlowState::pending;
        record.domain_path = route.domains;
        record.peering_links = route.peering;
        record.expected_latency_ms = route.path.total_latency_ms;
    }
    log("reserve", fmt::format("{}#{} path={} latency={}", id, epoch, join_domains(route.domains),
                               format_ms(route.path.total_latency_ms)));
    pending_routes_[{id, epoch}] = route;
    agents::SegmentRequest request;
    request.flow = record.spec;
    request.epoch = epoch;
    request.path = route.domains;
    request.peering = route.peering;
    if (auto reason = reservation_->initiate(request, immediate_rules)) {
        on_reservation_outcome({id, epoch}, false, 0.0, *reason);
    }
}

void Controller::on_reservation_outcome(const ReservationKey& key, bool accepted, double latency_ms,
                                        const std::string& reason) {
    auto route_it = pending_routes_.find(key);
    std::optional<Route> route;
    if (route_it != pending_routes_.end()) {
        route = route_it->second;
        pending_routes_.erase(route_it);
    }
    auto it = flows_.find(key.flow);
    if (it == flows_.end() || it->second.pending_epoch != key.epoch) {
        if (accepted) {
            reservation_->teardown(key);
        }
        return;
    }
    FlowStatus& record = it->second;
    record.pending_epoch.reset();

    std::vector<std::string> resumed;
    std::vector<std::string> failed;
    for (auto& [requester, p] : preemptions_) {
        if (p.waiting.erase(key.flow)) {
            (accepted ? resumed : failed).push_back(requester);
        }
    }

    if (accepted) {
        const int old = record.epoch;
        record.epoch = key.epoch;
        record.state = FlowState::committed;
        record.reason.clear();
        if (route) {
            record.domain_path = route->domains;
            record.peering_links = route->peering;
            record.expected_latency_ms = route->path.total_latency_ms;
        }
        log("commit", fmt::format("{} path={} latency={}", key.str(), join_domains(record.domain_path),
                                  format_ms(latency_ms)));
        if (old > 0 && old != key.epoch) {
            reservation_->teardown({key.flow, old});
        }
    } else if (record.epoch > 0 && record.state == FlowState::committed) {
        log("update-failed", fmt::format("{} {}", key.str(), reason));
    } else {
        record.state = FlowState::rejected;
        record.reason = reason;
        log("reject", fmt::format("{} {}", key.str(), reason));
    }

    for (const auto& requester : failed) {
        auto p = preemptions_.find(requester);
        FlowSpec spec = p->second.requester;
        preemptions_.erase(p);
        auto& r = flows_[requester];
        r.state = FlowState::rejected;
        r.reason = "preemption failed";
        log("reject", fmt::format("{} {}", requester, r.reason));
    }
    for (const auto& requester : resumed) {
        auto p = preemptions_.find(requester);
        if (p == preemptions_.end() || !p->second.waiting.empty()) {
            continue;
        }
        FlowSpec spec = p->second.requester;
        preemptions_.erase(p);
        auto& r = flows_[requester];
        if (auto path = compute_path(spec)) {
            start_reservation(r, *path, false);
        } else {
            r.state = FlowState::rejected;
            r.reason = "no feasible path after preemption";
            log("reject", fmt::format("{} {}", requester, r.reason));
        }
    }
}

bool Controller::try_preempt(const FlowSpec& flow) {
    PathOptions desired_options;
    desired_options.preempt_below = flow.priority;
    auto desired = compute_path(flow, desired_options);
    if (!desired) {
        return false;
    }
    std::map<LinkKey, double> need;
    for (const auto& hop : desired->path.hops) {
        if (hop.link && hop.link->from.node.domain == self_) {
            double short_by = flow.bandwidth_mbps - db_.available_bandwidth(*hop.link);
            if (short_by > kEpsilon) {
                need[*hop.link] = short_by;
            }
        }
    }
    if (need.empty()) {
        return false;
    }

    struct Candidate {
        std::string id;
        int priority;
        std::map<LinkKey, double> holds;
    };
    std::vector<Candidate> candidates;
    for (const auto& [id, f] : flows_) {
        if (f.state != FlowState::committed || f.spec.priority >= flow.priority || id == flow.id) {
            continue;
        }
        const auto* r = db_.reservation({id, f.epoch});
        if (!r) {
            continue;
        }
        Candidate c{id, f.spec.priority, {}};
        for (const auto& [link, _] : need) {
            if (auto h = r->per_link_holds.find(link); h != r->per_link_holds.end()) {
                c.holds[link] = h->second;
            }
        }
        if (!c.holds.empty()) {
            candidates.push_back(std::move(c));
        }
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        return a.priority != b.priority ? a.priority < b.priority : a.id < b.id;
    });
    if (candidates.size() > kMaxVictimCandidates) {
        candidates.resize(kMaxVictimCandidates);
    }

    // Fewest victims first; among equal counts the ascending priority list,
    // then the flow ids, decide.
    std::optional<std::vector<std::size_t>> chosen;
    const std::size_t n = candidates.size();
    for (std::size_t k = 1; k <= n && !chosen; ++k) {
        std::vector<std::vector<std::size_t>> fitting;
        std::vector<bool> mask(n, false);
        std::fill(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(k), true);
        do {
            std::vector<std::size_t> subset;
            for (std::size_t i = 0; i < n; ++i) {
                if (mask[i]) {
                    subset.push_back(i);
                }
            }
            bool enough = true;
            for (const auto& [link, amount] : need) {
                double freed = 0.0;
                for (auto i : subset) {
                    if (auto h = candidates[i].holds.find(link); h != candidates[i].holds.end()) {
                        freed += h->second;
                    }
                }
                enough = enough && freed + kEpsilon >= amount;
            }
            if (enough) {
                fitting.push_back(subset);
            }
        } while (std::prev_permutation(mask.begin(), mask.end()));
        if (!fitting.empty()) {
            auto key = [&](const std::vector<std::size_t>& s) {
                std::vector<int> prios;
                std::vector<std::string> ids;
                for (auto i : s) {
                    prios.push_back(candidates[i].priority);
                    ids.push_back(candidates[i].id);
                }
                return std::make_pair(prios, ids);
            };
            chosen = *std::min_element(fitting.begin(), fitting.end(),
                                       [&](const auto& a, const auto& b) { return key(a) < key(b); });
        }
    }
    if (!chosen) {
        log("preempt-failed", fmt::format("{} no victim set frees enough bandwidth", flow.id));
        return false;
    }

    std::map<LinkKey, double> planned;
    for (const auto& hop : desired->path.hops) {
        if (hop.link && hop.link->from.node.domain == self_) {
            planned[*hop.link] += flow.bandwidth_mbps;
        }
    }
    std::vector<std::pair<std::string, std::optional<Route>>> plan;
    for (auto i : *chosen) {
        const auto& victim = flows_.at(candidates[i].id);
        PathOptions alt_options;
        alt_options.ignore = ReservationKey{victim.spec.id, victim.epoch};
        alt_options.extra_load = planned;
        alt_options.ignore_latency_ceiling = true;
        auto alt = compute_path(victim.spec, alt_options);
        if (alt) {
            for (const auto& hop : alt->path.hops) {
                if (hop.link && hop.link->from.node.domain == self_) {
                    planned[*hop.link] += victim.spec.bandwidth_mbps;
                }
            }
        } else if (!config_.preemption_drops) {
            log("preempt-failed", fmt::format("{} victim {} has no alternate path", flow.id, victim.spec.id));
            return false;
        }
        plan.emplace_back(victim.spec.id, alt);
    }

    std::string names;
    for (const auto& [id, _] : plan) {
        names += (names.empty() ? "" : ",") + id;
    }
    log("preempt", fmt::format("{} victims={}", flow.id, names));
    Preemption& p = preemptions_[flow.id];
    p.requester = flow;
    for (const auto& [id, alt] : plan) {
        if (alt) {
            p.waiting.insert(id);
        }
    }
    for (const auto& [id, alt] : plan) {
        if (alt) {
            log("reroute", fmt::format("{} preempted-by={}", id, flow.id));
            start_reservation(flows_.at(id), *alt, false);
        } else {
            stop_flow(id, fmt::format("preempted by {}", flow.id));
        }
    }
    if (p.waiting.empty()) {
        preemptions_.erase(flow.id);
        if (auto route = compute_path(flow)) {
            start_reservation(flows_.at(flow.id), *route, false);
        } else {
            return false;
        }
    }
    return true;
}

void Controller::reroute(const std::string& flow_id, bool path_broken) {
    auto it = flows_.find(flow_id);
    if (it == flows_.end()) {
        return;
    }
    FlowStatus& record = it->second;
    if (path_broken) {
        if (record.pending_epoch) {
            reservation_->teardown({flow_id, *record.pending_epoch});
            pending_routes_.erase({flow_id, *record.pending_epoch});
            record.pending_epoch.reset();
        }
        if (record.epoch > 0) {
            reservation_->teardown({flow_id, record.epoch});
            record.epoch = 0;
        }
        record.state = FlowState::pending;
    }
    auto route = compute_path(record.spec);
    if (!route) {
        if (path_broken) {
            stop_flow(flow_id, "no alternate path");
        } else {
            log("reroute-failed", fmt::format("{} no alternate path", flow_id));
        }
        return;
    }
    log("reroute", fmt::format("{} path={} latency={}", flow_id, join_domains(route->domains),
                               format_ms(route->path.total_latency_ms)));
    if (path_broken) {
        record.domain_path = route->domains;
        record.peering_links = route->peering;
        record.expected_latency_ms = route->path.total_latency_ms;
    }
    start_reservation(record, *route, path_broken);
}

void Controller::stop_flow(const std::string& flow_id, const std::string& reason) {
    auto it = flows_.find(flow_id);
    if (it == flows_.end()) {
        return;
    }
    FlowStatus& record = it->second;
    if (record.pending_epoch) {
        reservation_->teardown({flow_id, *record.pending_epoch});
        pending_routes_.erase({flow_id, *record.pending_epoch});
        record.pending_epoch.reset();
    }
    if (record.epoch > 0) {
        reservation_->teardown({flow_id, record.epoch});
        record.epoch = 0;
    }
    record.state = FlowState::stopped;
    record.reason = reason;
    log("stop", fmt::format("{} {}", flow_id, reason));
}

void Controller::teardown(const std::string& flow_id) {
    auto it = flows_.find(flow_id);
    if (it == flows_.end() || !alive_) {
        return;
    }
    FlowStatus& record = it->second;
    if (record.pending_epoch) {
        reservation_->teardown({flow_id, *record.pending_epoch});
        pending_routes_.erase({flow_id, *record.pending_epoch});
        record.pending_epoch.reset();
    }
    if (record.epoch > 0) {
        reservation_->teardown({flow_id, record.epoch});
        record.epoch = 0;
    }
    preemptions_.erase(flow_id);
    record.state = FlowState::released;
    log("teardown", flow_id);
}

std::optional<FlowStatus> Controller::status(const std::string& flow_id) const {
    auto it = flows_.find(flow_id);
    if (it == flows_.end()) {
        return std::nullopt;
    }
    return it->second;
}

// Failure handling --------------------------------------------------------------

bool Controller::route_intact(const FlowStatus& record) const {
    if (record.epoch <= 0) {
        return true;
    }
    if (const auto* r = db_.reservation({record.spec.id, record.epoch})) {
        for (const auto& [link, _] : r->per_link_holds) {
            if (!db_.link_up(link)) {
                return false;
            }
        }
    }
    auto edges = db_.domain_edges();
    for (const auto& link : record.peering_links) {
        if (db_.knows_link(link)) {
            continue;
        }
        auto e = std::find_if(edges.begin(), edges.end(), [&](const DomainEdge& x) { return x.link == link.canonical(); });
        if (e == edges.end() || !e->up) {
            return false;
        }
    }
    for (const auto& d : record.domain_path) {
        if (d != self_ && !db_.connectivity().count(d)) {
            return false;
        }
    }
    return true;
}

void Controller::on_topology_changed() {
    if (!alive_) {
        return;
    }
    std::vector<StopCandidate> broken;
    for (const auto& [id, f] : flows_) {
        if (f.state == FlowState::committed && !route_intact(f)) {
            broken.push_back({id, f.spec.priority, f.spec.bandwidth_mbps});
        }
    }
    if (broken.empty()) {
        return;
    }
    std::sort(broken.begin(), broken.end(), [](const StopCandidate& a, const StopCandidate& b) {
        return a.priority != b.priority ? a.priority > b.priority : a.flow < b.flow;
    });
    std::vector<StopCandidate> stuck;
    for (const auto& c : broken) {
        log("path-broken", c.flow);
        FlowStatus& record = flows_.at(c.flow);
        if (record.pending_epoch) {
            reservation_->teardown({c.flow, *record.pending_epoch});
            pending_routes_.erase({c.flow, *record.pending_epoch});
            record.pending_epoch.reset();
        }
        reservation_->teardown({c.flow, record.epoch});
        record.epoch = 0;
        record.state = FlowState::pending;
        if (auto route = compute_path(record.spec)) {
            log("reroute", fmt::format("{} path={} latency={}", c.flow, join_domains(route->domains),
                                       format_ms(route->path.total_latency_ms)));
            record.domain_path = route->domains;
            record.peering_links = route->peering;
            record.expected_latency_ms = route->path.total_latency_ms;
            start_reservation(record, *route, true);
        } else {
            stuck.push_back(c);
        }
    }
    for (const auto& id : plan_stops(stuck, 0.0).stopped) {
        stop_flow(id, "no alternate path");
    }
}

void Controller::handle_event_reroute(const LinkKey& link, bool link_down) {
    std::vector<StopCandidate> affected;
    for (const auto& [id, f] : flows_) {
        if (f.state != FlowState::committed) {
            continue;
        }
        if (const auto* r = db_.reservation({id, f.epoch}); r && r->per_link_holds.count(link)) {
            affected.push_back({id, f.spec.priority, f.spec.bandwidth_mbps});
        }
    }
    if (affected.empty()) {
        log("event-idle", link.str());
        return;
    }
    std::sort(affected.begin(), affected.end(), [](const StopCandidate& a, const StopCandidate& b) {
        return a.priority != b.priority ? a.priority > b.priority : a.flow < b.flow;
    });
    std::vector<StopCandidate> stuck;
    for (const auto& c : affected) {
        FlowStatus& record = flows_.at(c.flow);
        PathOptions options;
        options.ignore = ReservationKey{c.flow, record.epoch};
        auto route = compute_path(record.spec, options);
        if (route && std::find(route->peering.begin(), route->peering.end(), link) == route->peering.end()) {
            log("reroute", fmt::format("{} avoid={} path={} latency={}", c.flow, link.str(),
                                       join_domains(route->domains), format_ms(route->path.total_latency_ms)));
            start_reservation(record, *route, link_down);
        } else {
            stuck.push_back(c);
        }
    }
    double capacity = link_down ? 0.0 : db_.link(link).capacity_mbps;
    auto plan = plan_stops(stuck, capacity);
    for (const auto& id : plan.stopped) {
        stop_flow(id, fmt::format("event on {}", link.str()));
    }
}

std::set<LinkKey> Controller::control_exclusions() const {
    auto plan = agents::plan_monitoring(self_, db_.domain_edges());
    return plan.slow ? std::set<LinkKey>{} : plan.fast_exclusions;
}

bool Controller::is_weak(const LinkKey& link) const {
    return agents::classify_link(db_.latency(link), db_.link(link).weak, config_.weak_latency_ms) ==
           agents::LinkClass::weak;
}

}  // namespace disco::ctrl
