#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "disco/model/types.hpp"

namespace disco {

class CapacityError : public ModelError {
public:
    using ModelError::ModelError;
};

/// Inter-domain adjacency as seen from the combined connectivity adverts.
struct DomainEdge {
    DomainId a;
    DomainId b;
    LinkKey link;  // canonical
    bool up = false;
    bool weak = false;
};

/// Per-controller store of intra- and inter-domain knowledge.
///
/// Single writer: the owning controller mutates it from inside simulator
/// events only. Links are stored per direction. Bandwidth accounting
/// distinguishes committed holds (residual_bandwidth) from committed plus
/// pending holds (available_bandwidth); admission uses the latter, so
/// committed holds can never exceed capacity.
class ExtendedDatabase {
public:
    explicit ExtendedDatabase(DomainId self);

    const DomainId& self() const { return self_; }

    // Local topology ------------------------------------------------------
    void add_switch(const NodeId& node);
    const std::set<NodeId>& switches() const { return switches_; }
    void add_link(const LinkSpec& spec);
    bool knows_link(const LinkKey& key) const { return links_.count(key) != 0; }
    const LinkSpec& link(const LinkKey& key) const;
    std::vector<LinkKey> link_keys() const;
    /// Outgoing peering link directions (local endpoint first).
    std::vector<LinkKey> peering_links() const;
    std::optional<LinkKey> link_from_port(const PortRef& port) const;

    /// Marks both directions of a physical link.
    void set_link_up(const LinkKey& key, bool up);
    bool link_up(const LinkKey& key) const;
    void set_impaired(const LinkKey& key, bool impaired);
    bool impaired(const LinkKey& key) const;
    void set_measured_latency(const LinkKey& key, double latency_ms);
    /// Latest measurement if any, configured latency otherwise.
    double latency(const LinkKey& key) const;

    // Hosts ---------------------------------------------------------------
    /// Maps the host to the domain and returns the domain it was mapped to
    /// before, if any.
    std::optional<DomainId> upsert_host(const HostId& host, const DomainId& domain);
    /// Removes the mapping only if it currently points to `domain`.
    bool remove_host(const std::string& address, const DomainId& domain);
    std::optional<DomainId> host_domain(const std::string& address) const;
    std::optional<HostId> host(const std::string& address) const;
    std::vector<HostId> hosts_in(const DomainId& domain) const;

    // Domain graph --------------------------------------------------------
    void set_connectivity(const DomainId& origin, std::vector<PeeringStatus> peering);
    const std::map<DomainId, std::vector<PeeringStatus>>& connectivity() const { return connectivity_; }
    std::vector<DomainEdge> domain_edges() const;
    /// Domains reachable from self over up edges; self included.
    std::set<DomainId> reachable_domains(bool nominal_only) const;

    // Monitoring ----------------------------------------------------------
    /// Stores the sample unless a newer one exists for its key. Returns
    /// whether it was stored.
    bool record_sample(const MonitoringSample& sample);
    std::optional<MonitoringSample> latest_monitoring(const DomainId& reporter, const MonitorPair& pair) const;
    std::vector<MonitoringSample> samples_from(const DomainId& reporter) const;
    /// Drops every advert originated by `domain`: connectivity, monitoring
    /// and host mappings.
    void purge_domain(const DomainId& domain);

    // Reservations --------------------------------------------------------
    /// Adds a pending reservation. Throws LookupError for unknown links and
    /// CapacityError when a hold does not fit the available bandwidth.
    void hold(Reservation reservation);
    void commit(const ReservationKey& key);
    /// Removes the reservation whatever its state. Returns false if absent.
    bool release(const ReservationKey& key);
    const Reservation* reservation(const ReservationKey& key) const;
    const std::map<ReservationKey, Reservation>& reservations() const { return reservations_; }

    double residual_bandwidth(const LinkKey& key) const;
    double available_bandwidth(const LinkKey& key) const;
    /// Sum of holds on `key` by reservations of strictly lower priority.
    double held_below_priority(const LinkKey& key, int priority) const;

    // Events --------------------------------------------------------------
    void register_event(ThresholdEvent event);
    std::map<std::string, ThresholdEvent>& events() { return events_; }
    const std::map<std::string, ThresholdEvent>& events() const { return events_; }

    /// Canonical key-sorted textual document of the whole store.
    std::string snapshot() const;
    /// Human-readable descriptions of broken invariants; empty when sound.
    std::vector<std::string> invariant_violations() const;

private:
    struct LinkState {
        LinkSpec spec;
        bool up = true;
        bool impaired = false;
        std::optional<double> measured_latency;
    };
    struct HostEntry {
        HostId host;
        DomainId domain;
    };
    using MonitorKey = std::pair<DomainId, MonitorPair>;

    double held(const LinkKey& key, bool include_pending) const;
    LinkState& state(const LinkKey& key);
    const LinkState& state(const LinkKey& key) const;

    DomainId self_;
    std::set<NodeId> switches_;
    std::map<LinkKey, LinkState> links_;
    std::map<std::string, HostEntry> hosts_;
    std::map<DomainId, std::vector<PeeringStatus>> connectivity_;
    std::map<MonitorKey, MonitoringSample> monitoring_;
    std::map<ReservationKey, Reservation> reservations_;
    std::map<std::string, ThresholdEvent> events_;
};

}  // namespace disco
