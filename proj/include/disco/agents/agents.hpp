#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "disco/messenger/envelope.hpp"
#include "disco/model/database.hpp"

namespace disco::ctrl {
class Controller;
}

namespace disco::agents {

using messenger::BusMessage;
using messenger::Payload;

// Connectivity ---------------------------------------------------------------

/// Advertises the state of the domain's peering links whenever it changes.
class ConnectivityAgent {
public:
    explicit ConnectivityAgent(ctrl::Controller& owner) : owner_(owner) {}

    /// Re-reads the local peering links; publishes and returns true on change.
    bool refresh();
    void publish_full();
    void on_message(const BusMessage& message);
    std::vector<PeeringStatus> local_status() const;
    std::uint64_t published() const { return published_; }

private:
    void publish(const std::vector<PeeringStatus>& status);

    ctrl::Controller& owner_;
    std::optional<std::vector<PeeringStatus>> last_;
    std::uint64_t published_ = 0;
};

Payload encode_connectivity(const DomainId& origin, const std::vector<PeeringStatus>& status);
std::vector<PeeringStatus> decode_connectivity(const Payload& payload);

// Monitoring -------------------------------------------------------------------

enum class LinkClass { nominal, weak };

/// Weak when flagged in the topology or when one-way latency reaches the
/// threshold (boundary included).
LinkClass classify_link(double one_way_latency_ms, bool flagged, double threshold_ms);

enum class AdvertMode { direct_fast, relayed, direct_slow };

std::string_view to_string(AdvertMode m);

struct LinkPlan {
    LinkKey link;  // canonical
    AdvertMode mode = AdvertMode::direct_fast;

    bool operator==(const LinkPlan&) const = default;
};

/// How monitoring adverts use each known peering link. Fast (2 s) adverts
/// never cross weak links; slow (10 s) adverts carry no exclusion and run
/// only while some known domain is reachable over weak links alone.
struct MonitoringPlan {
    std::vector<LinkPlan> links;
    std::set<LinkKey> fast_exclusions;
    bool slow = false;

    std::string describe() const;
    bool operator==(const MonitoringPlan&) const = default;
};

/// Builds the plan from an adjacency list: `edges` as seen in the database.
MonitoringPlan plan_monitoring(const DomainId& self, const std::vector<DomainEdge>& edges);

class MonitoringAgent {
public:
    explicit MonitoringAgent(ctrl::Controller& owner) : owner_(owner) {}

    /// Transit, access and peering measurements of the local domain.
    std::vector<MonitoringSample> measure() const;
    /// Re-evaluates the plan and publishes the periodic adverts due now.
    void advertise(const std::vector<MonitoringSample>& samples);
    void on_message(const BusMessage& message);
    const MonitoringPlan& plan() const { return plan_; }
    std::uint64_t fast_published() const { return fast_published_; }
    std::uint64_t slow_published() const { return slow_published_; }

private:
    ctrl::Controller& owner_;
    std::optional<MonitoringPlan> last_plan_;
    MonitoringPlan plan_;
    std::uint64_t fast_published_ = 0;
    std::uint64_t slow_published_ = 0;
};

Payload encode_monitoring(const DomainId& origin, SimTime period_ms, const std::vector<MonitoringSample>& samples);
std::vector<MonitoringSample> decode_monitoring(const DomainId& origin, const Payload& payload);

// Reachability ---------------------------------------------------------------

/// Announces host appearances and departures in the local domain.
class ReachabilityAgent {
public:
    explicit ReachabilityAgent(ctrl::Controller& owner) : owner_(owner) {}

    void host_appeared(const HostId& host);
    void host_disappeared(const std::string& address);
    void publish_full();
    void on_message(const BusMessage& message);
    std::uint64_t published() const { return published_; }

private:
    void publish(const std::vector<HostId>& added, const std::vector<std::string>& removed);

    ctrl::Controller& owner_;
    std::uint64_t published_ = 0;
};

// Reservation ----------------------------------------------------------------

/// One hop of the setup/accept/reject/teardown exchange. `peering[i]` is
/// the link direction from `path[i]` to `path[i+1]`.
struct SegmentRequest {
    FlowSpec flow;
    int epoch = 0;
    std::vector<DomainId> path;
    std::vector<LinkKey> peering;
    int hop = 0;
    double latency_ms = 0.0;
    std::string reason;

    ReservationKey key() const { return {flow.id, epoch}; }
};

Payload encode_reservation(std::string_view kind, const SegmentRequest& request);
SegmentRequest decode_reservation(const Payload& payload);
Payload encode_flow(const FlowSpec& flow);
FlowSpec decode_flow(const Payload& payload);

/// RSVP-like hop-by-hop reservation: each domain holds its ingress link,
/// intra path and egress link while the setup travels forward; the last
/// domain commits and the accept travels back, committing at each hop and
/// installing transit rules. Any reject releases upstream holds.
class ReservationAgent {
public:
    explicit ReservationAgent(ctrl::Controller& owner) : owner_(owner) {}

    /// Source side. Holds the local segment and sends the setup onward.
    /// Returns an error reason when the local segment does not fit.
    std::optional<std::string> initiate(SegmentRequest request, bool immediate_rules);
    /// Source side. Releases the reservation along the whole path.
    void teardown(const ReservationKey& key);
    void on_message(const BusMessage& message);

    bool holds(const ReservationKey& key) const { return local_.count(key) != 0; }
    std::size_t active() const { return local_.size(); }

private:
    struct Local {
        SegmentRequest request;
        std::vector<LinkKey> intra;
        SimTime held_at = 0;
        bool committed = false;
    };

    std::optional<std::string> hold_segment(const SegmentRequest& request, double& segment_latency);
    void install_segment_rules(const ReservationKey& key);
    void send(std::string_view kind, SegmentRequest request, int hop);
    void handle_setup(SegmentRequest request);
    void handle_accept(const SegmentRequest& request);
    void handle_reject(const SegmentRequest& request);
    void handle_teardown(const SegmentRequest& request);
    void release(const ReservationKey& key);
    void arm_expiry(const ReservationKey& key);

    ctrl::Controller& owner_;
    std::map<ReservationKey, Local> local_;
    std::set<ReservationKey> tombstones_;
};

}  // namespace disco::agents
