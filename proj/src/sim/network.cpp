#include "disco/sim/network.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace disco::sim {

namespace {

constexpr double kEpsilon = 1e-9;

SimTime next_grid(SimTime t) {
    return (t + Network::kTickMs - 1) / Network::kTickMs * Network::kTickMs;
}

}  // namespace

std::size_t FlowTraffic::delivered() const {
    return static_cast<std::size_t>(
        std::count_if(samples.begin(), samples.end(), [](const FlowSample& s) { return s.delivered; }));
}

double FlowTraffic::loss_rate() const {
    return samples.empty() ? 0.0 : static_cast<double>(dropped()) / static_cast<double>(offered());
}

void Network::add_switch(const NodeId& node) {
    switches_.insert(node);
}

void Network::add_link(const LinkSpec& spec) {
    spec.validate();
    if (!has_switch(spec.key.from.node) || !has_switch(spec.key.to.node)) {
        throw NetworkError(fmt::format("link {} references an unknown switch", spec.key.str()));
    }
    links_[spec.key] = LinkState{spec};
}

const LinkSpec& Network::link(const LinkKey& key) const {
    auto it = links_.find(key);
    if (it == links_.end()) {
        throw NetworkError(fmt::format("unknown link {}", key.str()));
    }
    return it->second.spec;
}

std::vector<LinkKey> Network::link_keys() const {
    std::vector<LinkKey> out;
    for (const auto& [key, _] : links_) {
        out.push_back(key);
    }
    return out;
}

std::optional<LinkKey> Network::link_from_port(const PortRef& port) const {
    auto it = links_.lower_bound(LinkKey{port, PortRef{}});
    if (it != links_.end() && it->first.from == port) {
        return it->first;
    }
    return std::nullopt;
}

void Network::add_host(const std::string& address, const PortRef& attach) {
    if (hosts_.count(address)) {
        throw NetworkError(fmt::format("duplicate host {}", address));
    }
    hosts_[address] = std::nullopt;
    attach_host(address, attach);
}

void Network::attach_host(const std::string& address, const PortRef& attach) {
    auto it = hosts_.find(address);
    if (it == hosts_.end()) {
        throw NetworkError(fmt::format("unknown host {}", address));
    }
    if (!has_switch(attach.node)) {
        throw NetworkError(fmt::format("host {}: unknown switch {}", address, attach.node.str()));
    }
    it->second = attach;
}

void Network::detach_host(const std::string& address) {
    auto it = hosts_.find(address);
    if (it == hosts_.end()) {
        throw NetworkError(fmt::format("unknown host {}", address));
    }
    it->second.reset();
}

std::optional<PortRef> Network::host_attachment(const std::string& address) const {
    auto it = hosts_.find(address);
    return it == hosts_.end() ? std::nullopt : it->second;
}

void Network::install_rule(ForwardingRule rule) {
    if (!has_switch(rule.node)) {
        throw NetworkError(fmt::format("install_rule: unknown switch {}", rule.node.str()));
    }
    SimTime now = loop_.now();
    rule.installed_at = now;
    auto& slot = rules_[{rule.node, rule.match_dst}];
    if (slot.changed_at != now || (!slot.current && !slot.before)) {
        slot.before = slot.current;
    }
    slot.changed_at = now;
    trace_.log(now, "RULE", rule.node.str(), fmt::format("dst={} port={}", rule.match_dst, rule.out_port));
    slot.current = std::move(rule);
}

bool Network::remove_rule(const NodeId& node, const std::string& dst) {
    auto it = rules_.find({node, dst});
    if (it == rules_.end() || !it->second.current) {
        return false;
    }
    SimTime now = loop_.now();
    auto& slot = it->second;
    if (slot.changed_at != now) {
        slot.before = slot.current;
    }
    slot.changed_at = now;
    slot.current.reset();
    trace_.log(now, "UNRULE", node.str(), fmt::format("dst={}", dst));
    return true;
}

std::optional<PortNo> Network::lookup(const NodeId& node, const std::string& dst, SimTime at) const {
    auto it = rules_.find({node, dst});
    if (it == rules_.end()) {
        return std::nullopt;
    }
    const auto& slot = it->second;
    const auto& rule = at > slot.changed_at ? slot.current : slot.before;
    if (!rule) {
        return std::nullopt;
    }
    return rule->out_port;
}

std::optional<ForwardingRule> Network::current_rule(const NodeId& node, const std::string& dst) const {
    auto it = rules_.find({node, dst});
    return it == rules_.end() ? std::nullopt : it->second.current;
}

std::size_t Network::rule_count() const {
    return static_cast<std::size_t>(
        std::count_if(rules_.begin(), rules_.end(), [](const auto& kv) { return kv.second.current.has_value(); }));
}

void Network::cut_link(const LinkKey& key) {
    link(key);
    links_[key].cut = true;
    if (auto it = links_.find(key.reversed()); it != links_.end()) {
        it->second.cut = true;
    }
}

void Network::restore_link(const LinkKey& key) {
    link(key);
    links_[key].cut = false;
    if (auto it = links_.find(key.reversed()); it != links_.end()) {
        it->second.cut = false;
    }
}

bool Network::is_cut(const LinkKey& key) const {
    auto it = links_.find(key);
    if (it == links_.end()) {
        throw NetworkError(fmt::format("unknown link {}", key.str()));
    }
    return it->second.cut;
}

std::optional<double> Network::send_probe(const std::vector<LinkKey>& path) const {
    double total = 0.0;
    for (std::size_t i = 0; i < path.size(); ++i) {
        if (i > 0 && path[i - 1].to.node != path[i].from.node) {
            throw NetworkError(fmt::format("probe path is not contiguous at {}", path[i].str()));
        }
        if (is_cut(path[i])) {
            return std::nullopt;
        }
        total += link(path[i]).latency_ms;
    }
    return total;
}

std::optional<double> Network::ping_peer(const LinkKey& key) const {
    auto forward = send_probe({key});
    auto back = send_probe({key.reversed()});
    if (!forward || !back) {
        return std::nullopt;
    }
    return *forward + *back;
}

SimTime Network::hop_delay(double latency_ms) {
    return static_cast<SimTime>(std::ceil(latency_ms - kEpsilon));
}

bool Network::transmit(const LinkKey& key, std::function<void()> on_arrival) {
    if (is_cut(key)) {
        return false;
    }
    loop_.schedule_in(hop_delay(link(key).latency_ms), EventKind::frame_delivery,
                      [this, key, fn = std::move(on_arrival)]() {
                          if (!is_cut(key)) {
                              fn();
                          }
                      });
    return true;
}

WalkResult Network::walk(const std::string& src, const std::string& dst, SimTime at) const {
    WalkResult result;
    auto src_at = host_attachment(src);
    if (!src_at) {
        result.drop_reason = "source-detached";
        return result;
    }
    auto dst_at = host_attachment(dst);
    NodeId current = src_at->node;
    for (int hop = 0; hop < kMaxHops; ++hop) {
        auto port = lookup(current, dst, at);
        if (!port) {
            result.drop_reason = "no-rule";
            result.missing_rule_at = current;
            return result;
        }
        PortRef out{current, *port};
        if (dst_at && *dst_at == out) {
            result.delivered = true;
            return result;
        }
        auto key = link_from_port(out);
        if (!key) {
            result.drop_reason = "no-link";
            return result;
        }
        if (is_cut(*key)) {
            result.drop_reason = "cut";
            result.drop_link = key;
            return result;
        }
        result.links.push_back(*key);
        result.latency_ms += link(*key).latency_ms;
        current = key->to.node;
    }
    result.drop_reason = "loop";
    return result;
}

void Network::inject_flow(FlowTraffic traffic) {
    traffic.flow.validate();
    if (!host_attachment(traffic.flow.src) || !host_attachment(traffic.flow.dst)) {
        throw NetworkError(fmt::format("flow {}: detached host", traffic.flow.id));
    }
    if (traffic.end <= traffic.start) {
        throw NetworkError(fmt::format("flow {}: empty interval", traffic.flow.id));
    }
    if (flows_.count(traffic.flow.id)) {
        throw NetworkError(fmt::format("flow {} already injected", traffic.flow.id));
    }
    traffic.samples.clear();
    SimTime start = std::max(traffic.start, loop_.now());
    std::string id = traffic.flow.id;
    flows_.emplace(id, std::move(traffic));
    accumulators_[id] = {};
    ensure_ticking(start);
}

void Network::stop_flow(const std::string& id) {
    auto it = flows_.find(id);
    if (it == flows_.end()) {
        throw NetworkError(fmt::format("unknown flow {}", id));
    }
    it->second.end = std::min(it->second.end, loop_.now());
}

const FlowTraffic& Network::flow(const std::string& id) const {
    auto it = flows_.find(id);
    if (it == flows_.end()) {
        throw NetworkError(fmt::format("unknown flow {}", id));
    }
    return it->second;
}

double Network::counter(const std::string& subject) const {
    auto it = counters_.find(subject);
    return it == counters_.end() ? 0.0 : it->second;
}

void Network::count_drop(const LinkKey& key) {
    counters_[key.str()] += 1.0;
    counters_[key.from.str()] += 1.0;
}

void Network::ensure_ticking(SimTime from) {
    SimTime first = next_grid(from);
    if (next_tick_ && *next_tick_ <= first) {
        return;
    }
    next_tick_ = first;
    std::uint64_t token = ++tick_token_;
    loop_.schedule(first, EventKind::flow_sample, [this, token]() {
        if (token == tick_token_) {
            tick();
        }
    });
}

void Network::tick() {
    SimTime t = loop_.now();
    next_tick_.reset();

    struct Active {
        FlowTraffic* traffic;
        WalkResult walk;
    };
    std::vector<Active> active;
    std::map<LinkKey, double> load;
    for (auto& [id, traffic] : flows_) {
        if (traffic.start <= t && t < traffic.end) {
            Active a{&traffic, walk(traffic.flow.src, traffic.flow.dst, t)};
            for (const auto& key : a.walk.links) {
                load[key] += traffic.rate_mbps;
            }
            active.push_back(std::move(a));
        }
    }

    std::vector<std::pair<NodeId, FlowSpec>> packet_ins;
    for (auto& a : active) {
        FlowSample sample{t, false, 0.0, {}};
        auto& acc = accumulators_[a.traffic->flow.id];
        if (!a.walk.delivered) {
            sample.drop_reason = a.walk.drop_reason;
            if (a.walk.drop_link) {
                count_drop(*a.walk.drop_link);
            }
            if (a.walk.missing_rule_at) {
                packet_ins.emplace_back(*a.walk.missing_rule_at, a.traffic->flow);
            }
        } else {
            double excess = 0.0;
            std::optional<LinkKey> worst;
            double survive = 1.0;
            std::optional<LinkKey> lossy;
            for (const auto& key : a.walk.links) {
                const auto& spec = link(key);
                double l = load[key];
                if (l > spec.capacity_mbps + kEpsilon) {
                    double e = (l - spec.capacity_mbps) / l;
                    if (e > excess) {
                        excess = e;
                        worst = key;
                    }
                }
                if (spec.loss_rate > 0.0) {
                    survive *= 1.0 - spec.loss_rate;
                    if (!lossy) {
                        lossy = key;
                    }
                }
            }
            acc.overload += excess;
            acc.loss += 1.0 - survive;
            if (worst && acc.overload >= 1.0 - kEpsilon) {
                acc.overload -= 1.0;
                sample.drop_reason = "overload";
                count_drop(*worst);
            } else if (lossy && acc.loss >= 1.0 - kEpsilon) {
                acc.loss -= 1.0;
                sample.drop_reason = "loss";
                count_drop(*lossy);
            } else {
                sample.delivered = true;
                sample.latency_ms = a.walk.latency_ms;
            }
        }
        a.traffic->samples.push_back(std::move(sample));
    }

    bool more = std::any_of(flows_.begin(), flows_.end(),
                            [t](const auto& kv) { return kv.second.end > t + kTickMs; });
    if (more) {
        ensure_ticking(t + kTickMs);
    }
    if (on_packet_in) {
        for (const auto& [node, flow] : packet_ins) {
            on_packet_in(node, flow);
        }
    }
}

}  // namespace disco::sim
