#include "disco/model/database.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

#include <fmt/format.h>

namespace disco {

namespace {

constexpr double kEpsilon = 1e-9;

std::string join_domains(const std::vector<DomainId>& path) {
    std::string out;
    for (const auto& d : path) {
        if (!out.empty()) {
            out += ',';
        }
        out += d.str();
    }
    return out;
}

}  // namespace

ExtendedDatabase::ExtendedDatabase(DomainId self) : self_(std::move(self)) {}

void ExtendedDatabase::add_switch(const NodeId& node) {
    if (node.domain != self_) {
        throw ModelError(fmt::format("switch {} does not belong to domain {}", node.str(), self_.str()));
    }
    switches_.insert(node);
}

void ExtendedDatabase::add_link(const LinkSpec& spec) {
    spec.validate();
    if (spec.key.from.node.domain != self_ && spec.key.to.node.domain != self_) {
        throw ModelError(fmt::format("link {} has no endpoint in domain {}", spec.key.str(), self_.str()));
    }
    links_[spec.key] = LinkState{spec, true, false, std::nullopt};
}

ExtendedDatabase::LinkState& ExtendedDatabase::state(const LinkKey& key) {
    auto it = links_.find(key);
    if (it == links_.end()) {
        throw LookupError(fmt::format("domain {}: unknown link {}", self_.str(), key.str()));
    }
    return it->second;
}

const ExtendedDatabase::LinkState& ExtendedDatabase::state(const LinkKey& key) const {
    auto it = links_.find(key);
    if (it == links_.end()) {
        throw LookupError(fmt::format("domain {}: unknown link {}", self_.str(), key.str()));
    }
    return it->second;
}

const LinkSpec& ExtendedDatabase::link(const LinkKey& key) const {
    return state(key).spec;
}

std::vector<LinkKey> ExtendedDatabase::link_keys() const {
    std::vector<LinkKey> keys;
    keys.reserve(links_.size());
    for (const auto& [key, _] : links_) {
        keys.push_back(key);
    }
    return keys;
}

std::vector<LinkKey> ExtendedDatabase::peering_links() const {
    std::vector<LinkKey> keys;
    for (const auto& [key, st] : links_) {
        if (st.spec.kind == LinkKind::peering && key.from.node.domain == self_) {
            keys.push_back(key);
        }
    }
    return keys;
}

std::optional<LinkKey> ExtendedDatabase::link_from_port(const PortRef& port) const {
    auto it = links_.lower_bound(LinkKey{port, PortRef{}});
    if (it != links_.end() && it->first.from == port) {
        return it->first;
    }
    return std::nullopt;
}

void ExtendedDatabase::set_link_up(const LinkKey& key, bool up) {
    state(key).up = up;
    if (auto it = links_.find(key.reversed()); it != links_.end()) {
        it->second.up = up;
    }
}

bool ExtendedDatabase::link_up(const LinkKey& key) const {
    return state(key).up;
}

void ExtendedDatabase::set_impaired(const LinkKey& key, bool impaired) {
    state(key).impaired = impaired;
}

bool ExtendedDatabase::impaired(const LinkKey& key) const {
    return state(key).impaired;
}

void ExtendedDatabase::set_measured_latency(const LinkKey& key, double latency_ms) {
    state(key).measured_latency = latency_ms;
}

double ExtendedDatabase::latency(const LinkKey& key) const {
    const auto& st = state(key);
    return st.measured_latency.value_or(st.spec.latency_ms);
}

std::optional<DomainId> ExtendedDatabase::upsert_host(const HostId& host, const DomainId& domain) {
    auto it = hosts_.find(host.address);
    if (it == hosts_.end()) {
        hosts_.emplace(host.address, HostEntry{host, domain});
        return std::nullopt;
    }
    DomainId previous = it->second.domain;
    it->second = HostEntry{host, domain};
    return previous;
}

bool ExtendedDatabase::remove_host(const std::string& address, const DomainId& domain) {
    auto it = hosts_.find(address);
    if (it == hosts_.end() || it->second.domain != domain) {
        return false;
    }
    hosts_.erase(it);
    return true;
}

std::optional<DomainId> ExtendedDatabase::host_domain(const std::string& address) const {
    auto it = hosts_.find(address);
    if (it == hosts_.end()) {
        return std::nullopt;
    }
    return it->second.domain;
}

std::optional<HostId> ExtendedDatabase::host(const std::string& address) const {
    auto it = hosts_.find(address);
    if (it == hosts_.end()) {
        return std::nullopt;
    }
    return it->second.host;
}

std::vector<HostId> ExtendedDatabase::hosts_in(const DomainId& domain) const {
    std::vector<HostId> out;
    for (const auto& [_, entry] : hosts_) {
        if (entry.domain == domain) {
            out.push_back(entry.host);
        }
    }
    return out;
}

void ExtendedDatabase::set_connectivity(const DomainId& origin, std::vector<PeeringStatus> peering) {
    std::sort(peering.begin(), peering.end());
    connectivity_[origin] = std::move(peering);
}

std::vector<DomainEdge> ExtendedDatabase::domain_edges() const {
    std::map<LinkKey, DomainEdge> edges;
    for (const auto& [origin, list] : connectivity_) {
        for (const auto& p : list) {
            LinkKey canon = p.link.canonical();
            auto [it, inserted] = edges.try_emplace(canon);
            DomainEdge& e = it->second;
            if (inserted) {
                e.a = std::min(origin, p.neighbor);
                e.b = std::max(origin, p.neighbor);
                e.link = canon;
                e.up = p.up;
                e.weak = p.weak;
            } else {
                e.up = e.up && p.up;
                e.weak = e.weak || p.weak;
            }
        }
    }
    std::vector<DomainEdge> out;
    out.reserve(edges.size());
    for (auto& [_, e] : edges) {
        out.push_back(e);
    }
    return out;
}

std::set<DomainId> ExtendedDatabase::reachable_domains(bool nominal_only) const {
    auto edges = domain_edges();
    std::set<DomainId> seen{self_};
    std::deque<DomainId> queue{self_};
    while (!queue.empty()) {
        DomainId d = queue.front();
        queue.pop_front();
        for (const auto& e : edges) {
            if (!e.up || (nominal_only && e.weak)) {
                continue;
            }
            const DomainId* other = nullptr;
            if (e.a == d) {
                other = &e.b;
            } else if (e.b == d) {
                other = &e.a;
            }
            if (other && seen.insert(*other).second) {
                queue.push_back(*other);
            }
        }
    }
    return seen;
}

bool ExtendedDatabase::record_sample(const MonitoringSample& sample) {
    MonitorKey key{sample.reporter, sample.pair};
    auto it = monitoring_.find(key);
    if (it != monitoring_.end() && it->second.timestamp > sample.timestamp) {
        return false;
    }
    monitoring_[key] = sample;
    return true;
}

std::optional<MonitoringSample> ExtendedDatabase::latest_monitoring(const DomainId& reporter,
                                                                    const MonitorPair& pair) const {
    auto it = monitoring_.find(MonitorKey{reporter, pair});
    if (it == monitoring_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::vector<MonitoringSample> ExtendedDatabase::samples_from(const DomainId& reporter) const {
    std::vector<MonitoringSample> out;
    for (auto it = monitoring_.lower_bound(MonitorKey{reporter, MonitorPair{}});
         it != monitoring_.end() && it->first.first == reporter; ++it) {
        out.push_back(it->second);
    }
    return out;
}

void ExtendedDatabase::purge_domain(const DomainId& domain) {
    connectivity_.erase(domain);
    for (auto it = monitoring_.begin(); it != monitoring_.end();) {
        it = it->first.first == domain ? monitoring_.erase(it) : std::next(it);
    }
    for (auto it = hosts_.begin(); it != hosts_.end();) {
        it = it->second.domain == domain ? hosts_.erase(it) : std::next(it);
    }
}

double ExtendedDatabase::held(const LinkKey& key, bool include_pending) const {
    double sum = 0.0;
    for (const auto& [_, r] : reservations_) {
        if (r.state == ReservationState::committed ||
            (include_pending && r.state == ReservationState::pending)) {
            if (auto it = r.per_link_holds.find(key); it != r.per_link_holds.end()) {
                sum += it->second;
            }
        }
    }
    return sum;
}

void ExtendedDatabase::hold(Reservation reservation) {
    if (reservations_.count(reservation.key())) {
        throw ModelError(fmt::format("reservation {} already held", reservation.key().str()));
    }
    for (const auto& [key, mbps] : reservation.per_link_holds) {
        const auto& st = state(key);
        if (std::abs(mbps - reservation.flow.bandwidth_mbps) > kEpsilon) {
            throw ModelError(fmt::format("reservation {}: hold on {} differs from flow demand",
                                         reservation.key().str(), key.str()));
        }
        if (held(key, true) + mbps > st.spec.capacity_mbps + kEpsilon) {
            throw CapacityError(fmt::format("reservation {}: {} Mbps does not fit on {}",
                                            reservation.key().str(), format_ms(mbps), key.str()));
        }
    }
    reservation.state = ReservationState::pending;
    reservations_.emplace(reservation.key(), std::move(reservation));
}

void ExtendedDatabase::commit(const ReservationKey& key) {
    auto it = reservations_.find(key);
    if (it == reservations_.end()) {
        throw LookupError(fmt::format("domain {}: no reservation {}", self_.str(), key.str()));
    }
    it->second.state = ReservationState::committed;
}

bool ExtendedDatabase::release(const ReservationKey& key) {
    return reservations_.erase(key) != 0;
}

const Reservation* ExtendedDatabase::reservation(const ReservationKey& key) const {
    auto it = reservations_.find(key);
    return it == reservations_.end() ? nullptr : &it->second;
}

double ExtendedDatabase::residual_bandwidth(const LinkKey& key) const {
    return std::max(0.0, state(key).spec.capacity_mbps - held(key, false));
}

double ExtendedDatabase::available_bandwidth(const LinkKey& key) const {
    return std::max(0.0, state(key).spec.capacity_mbps - held(key, true));
}

double ExtendedDatabase::held_below_priority(const LinkKey& key, int priority) const {
    double sum = 0.0;
    for (const auto& [_, r] : reservations_) {
        if (r.flow.priority < priority) {
            if (auto it = r.per_link_holds.find(key); it != r.per_link_holds.end()) {
                sum += it->second;
            }
        }
    }
    return sum;
}

void ExtendedDatabase::register_event(ThresholdEvent event) {
    event.validate();
    events_[event.id] = std::move(event);
}

std::string ExtendedDatabase::snapshot() const {
    std::ostringstream out;
    out << "self " << self_.str() << '\n';
    for (const auto& sw : switches_) {
        out << "switch " << sw.str() << '\n';
    }
    for (const auto& [key, st] : links_) {
        out << fmt::format("link {} {} latency={} capacity={} loss={} weak={} up={} impaired={} measured={}\n",
                           key.str(), st.spec.kind == LinkKind::intra ? "intra" : "peering",
                           format_ms(st.spec.latency_ms), format_ms(st.spec.capacity_mbps),
                           format_ms(st.spec.loss_rate), st.spec.weak ? 1 : 0, st.up ? 1 : 0,
                           st.impaired ? 1 : 0,
                           st.measured_latency ? format_ms(*st.measured_latency) : std::string("-"));
    }
    for (const auto& [addr, entry] : hosts_) {
        out << fmt::format("host {} domain={} attach={}\n", addr, entry.domain.str(),
                           entry.host.attach ? entry.host.attach->str() : std::string("-"));
    }
    for (const auto& [origin, list] : connectivity_) {
        for (const auto& p : list) {
            out << fmt::format("peering {} neighbor={} link={} up={} weak={}\n", origin.str(), p.neighbor.str(),
                               p.link.str(), p.up ? 1 : 0, p.weak ? 1 : 0);
        }
    }
    for (const auto& [key, s] : monitoring_) {
        out << fmt::format("monitor {} {} available={} latency={} t={} period={} lost={}\n", key.first.str(),
                           key.second.str(), format_ms(s.available_mbps), format_ms(s.latency_ms), s.timestamp,
                           s.period_ms, s.lost ? 1 : 0);
    }
    for (const auto& [key, r] : reservations_) {
        std::string holds;
        for (const auto& [link, mbps] : r.per_link_holds) {
            holds += fmt::format("{}{}={}", holds.empty() ? "" : ",", link.str(), format_ms(mbps));
        }
        out << fmt::format("reservation {} state={} priority={} path={} holds={}\n", key.str(), to_string(r.state),
                           r.flow.priority, join_domains(r.domain_path), holds);
    }
    for (const auto& [id, e] : events_) {
        out << fmt::format("event {} subject={} mode={} ceiling={} window={} fired={}\n", id, e.subject,
                           e.mode == ThresholdMode::absolute ? "absolute" : "relative", format_ms(e.ceiling),
                           e.window_ms, e.fired_at ? std::to_string(*e.fired_at) : std::string("-"));
    }
    return out.str();
}

std::vector<std::string> ExtendedDatabase::invariant_violations() const {
    std::vector<std::string> out;
    for (const auto& [key, st] : links_) {
        double committed = held(key, false);
        if (committed > st.spec.capacity_mbps + kEpsilon) {
            out.push_back(fmt::format("{}: link {} over-subscribed ({} > {})", self_.str(), key.str(),
                                      format_ms(committed), format_ms(st.spec.capacity_mbps)));
        }
    }
    for (const auto& [key, r] : reservations_) {
        for (const auto& [link, mbps] : r.per_link_holds) {
            if (!links_.count(link)) {
                out.push_back(fmt::format("{}: reservation {} holds unknown link {}", self_.str(), key.str(),
                                          link.str()));
            }
            if (std::abs(mbps - r.flow.bandwidth_mbps) > kEpsilon) {
                out.push_back(fmt::format("{}: reservation {} hold differs from demand", self_.str(), key.str()));
            }
        }
        std::set<DomainId> seen;
        for (const auto& d : r.domain_path) {
            if (!seen.insert(d).second) {
                out.push_back(fmt::format("{}: reservation {} path repeats {}", self_.str(), key.str(), d.str()));
            }
        }
    }
    return out;
}

}  // namespace disco
