#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "disco/model/types.hpp"
#include "disco/sim/event_loop.hpp"
#include "disco/sim/trace.hpp"

namespace disco::sim {

class NetworkError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ForwardingRule {
    NodeId node;
    std::string match_dst;
    PortNo out_port = 0;
    SimTime installed_at = 0;
};

struct FlowSample {
    SimTime at = 0;
    bool delivered = false;
    double latency_ms = 0.0;
    std::string drop_reason;
};

struct FlowTraffic {
    FlowSpec flow;
    double rate_mbps = 0.0;
    SimTime start = 0;
    SimTime end = 0;
    std::vector<FlowSample> samples;

    std::size_t offered() const { return samples.size(); }
    std::size_t delivered() const;
    std::size_t dropped() const { return offered() - delivered(); }
    double loss_rate() const;
};

struct WalkResult {
    bool delivered = false;
    double latency_ms = 0.0;
    std::vector<LinkKey> links;
    std::string drop_reason;
    std::optional<NodeId> missing_rule_at;
    std::optional<LinkKey> drop_link;
};

/// Fluid data plane: switches, directional links, destination-based rule
/// tables, attached hosts and flows sampled on a fixed 10 ms tick.
class Network {
public:
    static constexpr SimTime kTickMs = 10;
    static constexpr int kMaxHops = 32;

    Network(EventLoop& loop, Trace& trace) : loop_(loop), trace_(trace) {}

    // Topology --------------------------------------------------------------
    void add_switch(const NodeId& node);
    bool has_switch(const NodeId& node) const { return switches_.count(node) != 0; }
    const std::set<NodeId>& switches() const { return switches_; }
    void add_link(const LinkSpec& spec);
    bool has_link(const LinkKey& key) const { return links_.count(key) != 0; }
    const LinkSpec& link(const LinkKey& key) const;
    std::vector<LinkKey> link_keys() const;
    std::optional<LinkKey> link_from_port(const PortRef& port) const;

    void add_host(const std::string& address, const PortRef& attach);
    void attach_host(const std::string& address, const PortRef& attach);
    void detach_host(const std::string& address);
    std::optional<PortRef> host_attachment(const std::string& address) const;
    const std::map<std::string, std::optional<PortRef>>& hosts() const { return hosts_; }

    // Rules -----------------------------------------------------------------
    /// Replaces any rule for (node, dst). The new rule is visible to frames
    /// processed at sim-times strictly after the installation time.
    void install_rule(ForwardingRule rule);
    bool remove_rule(const NodeId& node, const std::string& dst);
    std::optional<PortNo> lookup(const NodeId& node, const std::string& dst, SimTime at) const;
    std::optional<ForwardingRule> current_rule(const NodeId& node, const std::string& dst) const;
    std::size_t rule_count() const;

    // Links -----------------------------------------------------------------
    /// Cuts or restores both directions of the physical link.
    void cut_link(const LinkKey& key);
    void restore_link(const LinkKey& key);
    bool is_cut(const LinkKey& key) const;

    /// One-way latency over a contiguous path, or nullopt if a hop is cut.
    std::optional<double> send_probe(const std::vector<LinkKey>& path) const;
    /// Round-trip latency over a link and its reverse, or nullopt on loss.
    std::optional<double> ping_peer(const LinkKey& key) const;

    /// Carries a control frame over the link; `on_arrival` runs after the
    /// link latency (rounded up to whole ms) unless the link is cut at send or
    /// arrival time. Returns false when the frame is lost at send time.
    bool transmit(const LinkKey& key, std::function<void()> on_arrival);
    static SimTime hop_delay(double latency_ms);

    // Flows -----------------------------------------------------------------
    WalkResult walk(const std::string& src, const std::string& dst, SimTime at) const;
    void inject_flow(FlowTraffic traffic);
    void stop_flow(const std::string& id);
    bool has_flow(const std::string& id) const { return flows_.count(id) != 0; }
    const FlowTraffic& flow(const std::string& id) const;
    const std::map<std::string, FlowTraffic>& flows() const { return flows_; }

    /// Drop counter of a link ("A.1:2>B.1:2") or egress port ("A.1:2").
    double counter(const std::string& subject) const;

    /// Invoked when a flow sample finds no rule at a switch.
    std::function<void(const NodeId&, const FlowSpec&)> on_packet_in;

private:
    struct RuleSlot {
        std::optional<ForwardingRule> current;
        std::optional<ForwardingRule> before;
        SimTime changed_at = 0;
    };
    struct LinkState {
        LinkSpec spec;
        bool cut = false;
    };
    struct DropAccumulator {
        double overload = 0.0;
        double loss = 0.0;
    };

    void ensure_ticking(SimTime from);
    void tick();
    void count_drop(const LinkKey& key);

    EventLoop& loop_;
    Trace& trace_;
    std::set<NodeId> switches_;
    std::map<LinkKey, LinkState> links_;
    std::map<std::string, std::optional<PortRef>> hosts_;
    std::map<std::pair<NodeId, std::string>, RuleSlot> rules_;
    std::map<std::string, FlowTraffic> flows_;
    std::map<std::string, DropAccumulator> accumulators_;
    std::map<std::string, double> counters_;
    std::optional<SimTime> next_tick_;
    std::uint64_t tick_token_ = 0;
};

}  // namespace disco::sim
