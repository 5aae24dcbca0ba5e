#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "disco/ctrl/events.hpp"
#include "disco/ctrl/path.hpp"
#include "disco/messenger/messenger.hpp"
#include "disco/model/database.hpp"
#include "disco/sim/event_loop.hpp"
#include "disco/sim/network.hpp"
#include "disco/sim/trace.hpp"

namespace disco::agents {
class ConnectivityAgent;
class MonitoringAgent;
class ReachabilityAgent;
class ReservationAgent;
struct SegmentRequest;
}  // namespace disco::agents

namespace disco::ctrl {

struct ControllerConfig {
    SimTime monitor_period_ms = 2000;
    SimTime slow_period_ms = 10000;
    SimTime event_period_ms = 500;
    SimTime setup_timeout_ms = 2000;
    SimTime pending_timeout_ms = 3000;
    SimTime packet_in_backoff_ms = 1000;
    double weak_latency_ms = 50.0;
    /// Lets preemption tear down a victim that has no alternate path.
    bool preemption_drops = false;
    messenger::MessengerConfig messenger;
};

enum class FlowState { pending, committed, rejected, stopped, released };

std::string_view to_string(FlowState s);

/// Source-side view of a flow admitted (or refused) by this controller.
struct FlowStatus {
    FlowSpec spec;
    FlowState state = FlowState::pending;
    int epoch = 0;                  // committed epoch, 0 if none
    std::optional<int> pending_epoch;
    std::vector<DomainId> domain_path;
    std::vector<LinkKey> peering_links;
    double expected_latency_ms = 0.0;
    std::string reason;
    SimTime last_attempt = 0;
};

struct PathOptions {
    /// Own links count holds of flows with priority below this as free.
    std::optional<int> preempt_below;
    /// Own links count this reservation's holds as free.
    std::optional<ReservationKey> ignore;
    /// Extra load assumed on own links (planned but not yet held).
    std::map<LinkKey, double> extra_load;
    bool ignore_latency_ceiling = false;
};

/// Inter-domain route chosen at the source: the domain sequence and the
/// peering link directions crossed between consecutive domains.
struct Route {
    PathResult path;
    std::vector<DomainId> domains;
    std::vector<LinkKey> peering;
};

/// Intra-domain path between two local switches.
struct LocalPath {
    std::vector<LinkKey> links;
    double latency_ms = 0.0;
};

/// One DISCO controller: owns the Extended Database, the messenger and the
/// agents of its domain, and programs its own switches in the simulator.
class Controller {
public:
    Controller(DomainId self, sim::EventLoop& loop, sim::Trace& trace, sim::Network& network,
               messenger::Transport& transport, ControllerConfig config = {});
    ~Controller();
    Controller(const Controller&) = delete;
    Controller& operator=(const Controller&) = delete;

    const DomainId& self() const { return self_; }

    /// Reads the domain's own switches, links and attached hosts.
    void load_local();
    /// Boots discovery, monitoring and event timers at the current time.
    void start();
    void kill();
    void leave();
    bool alive() const { return alive_; }

    // Northbound ------------------------------------------------------------
    void admit_service(const FlowSpec& flow);
    void teardown(const std::string& flow_id);
    std::optional<FlowStatus> status(const std::string& flow_id) const;
    const std::map<std::string, FlowStatus>& flows() const { return flows_; }

    // Southbound --------------------------------------------------------------
    void packet_in(const NodeId& at, const FlowSpec& flow);
    void host_attached(const std::string& address, const PortRef& port);
    void host_detached(const std::string& address);

    // Monitor manager, events, path computation ---------------------------
    void monitor_tick();
    void register_event(ThresholdEvent event);
    void evaluate_events();
    std::optional<Route> compute_path(const FlowSpec& flow, const PathOptions& options = {}) const;
    std::optional<LocalPath> local_path(const NodeId& from, const NodeId& to, double demand_mbps) const;
    /// Reroutes or stops the flows this domain sources over `link`.
    void handle_event_reroute(const LinkKey& link, bool link_down);

    // Shared services used by the agents ------------------------------------
    ExtendedDatabase& db() { return db_; }
    const ExtendedDatabase& db() const { return db_; }
    messenger::Messenger& bus() { return *messenger_; }
    const messenger::Messenger& bus() const { return *messenger_; }
    sim::Network& network() { return network_; }
    sim::EventLoop& loop() { return loop_; }
    sim::Trace& trace() { return trace_; }
    const ControllerConfig& config() const { return config_; }
    void log(std::string_view action, std::string_view detail) const;

    /// Links that non-monitoring publications avoid: the weak ones, as long
    /// as every known domain stays reachable without them.
    std::set<LinkKey> control_exclusions() const;
    bool is_weak(const LinkKey& link) const;

    void set_rule(const NodeId& node, const std::string& dst, PortNo port, const std::string& owner);
    void remove_rules_owned_by(const std::string& owner);
    std::optional<std::string> rule_owner(const NodeId& node, const std::string& dst) const;

    agents::ConnectivityAgent& connectivity() { return *connectivity_; }
    agents::MonitoringAgent& monitoring() { return *monitoring_; }
    agents::ReachabilityAgent& reachability() { return *reachability_; }
    agents::ReservationAgent& reservation() { return *reservation_; }

    // Notifications from the agents -----------------------------------------
    void on_reservation_outcome(const ReservationKey& key, bool accepted, double latency_ms,
                                const std::string& reason);
    void on_host_mapping_changed(const std::string& address);
    void on_topology_changed();

private:
    struct Preemption {
        FlowSpec requester;
        std::set<std::string> waiting;
    };

    void schedule_periodic(SimTime first, SimTime period, std::function<void()> fn);
    void deliver(const messenger::BusMessage& message);
    void on_member_lost(const DomainId& domain);
    void refresh_host_rules();
    void start_reservation(FlowStatus& record, const Route& route, bool immediate_rules);
    bool try_preempt(const FlowSpec& flow);
    void reroute(const std::string& flow_id, bool path_broken);
    void stop_flow(const std::string& flow_id, const std::string& reason);
    bool route_intact(const FlowStatus& record) const;
    double own_residual(const LinkKey& key, const FlowSpec& flow, const PathOptions& options) const;
    int next_epoch(const std::string& flow_id);

    DomainId self_;
    sim::EventLoop& loop_;
    sim::Trace& trace_;
    sim::Network& network_;
    ControllerConfig config_;
    ExtendedDatabase db_;
    std::unique_ptr<messenger::Messenger> messenger_;
    std::unique_ptr<agents::ConnectivityAgent> connectivity_;
    std::unique_ptr<agents::MonitoringAgent> monitoring_;
    std::unique_ptr<agents::ReachabilityAgent> reachability_;
    std::unique_ptr<agents::ReservationAgent> reservation_;

    bool alive_ = true;
    bool started_ = false;
    std::map<std::string, FlowStatus> flows_;
    std::map<std::string, int> epochs_;
    std::map<std::string, Preemption> preemptions_;
    std::map<std::pair<NodeId, std::string>, std::string> rule_owner_;
    std::set<std::string> local_host_rules_;
    EventEvaluator evaluator_;
    std::map<std::string, LinkKey> impaired_by_event_;
    std::map<ReservationKey, Route> pending_routes_;
};

}  // namespace disco::ctrl
