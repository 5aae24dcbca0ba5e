#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "disco/ctrl/controller.hpp"
#include "disco/harness/scenario.hpp"
#include "disco/messenger/messenger.hpp"
#include "disco/sim/event_loop.hpp"
#include "disco/sim/network.hpp"
#include "disco/sim/trace.hpp"

namespace disco::harness {

/// Report column order.
inline constexpr std::array<std::string_view, 5> kCategories = {"bus", "monitoring", "reachability", "connectivity",
                                                                 "reservation"};

std::size_t category_index(std::string_view category);

/// Control bytes received over one domain-to-domain direction, per second.
struct ControlSeries {
    DomainId from;
    DomainId to;
    std::vector<std::array<std::uint64_t, kCategories.size()>> buckets;

    std::uint64_t total(std::size_t second) const;
};

struct FlowReport {
    FlowSpec spec;
    std::vector<sim::FlowSample> samples;
    std::optional<ctrl::FlowStatus> status;
};

struct MetricsReport {
    std::string scenario;
    SimTime duration_ms = 0;
    std::vector<ControlSeries> control;
    std::vector<FlowReport> flows;
    std::vector<std::string> trace;
};

/// Controllers, data plane and control channel of one scenario run. Control
/// envelopes travel over the simulated peering links; M-LLDP frames do too
/// but are not charged to the control-traffic series.
class Simulation : public messenger::Transport {
public:
    explicit Simulation(Scenario scenario, ctrl::ControllerConfig config = {});
    ~Simulation() override;

    /// Boots every controller at t=0 and schedules the scenario actions.
    void boot();
    /// Runs to `until` (default: the scenario duration).
    void run(std::optional<SimTime> until = std::nullopt);
    MetricsReport report() const;

    sim::EventLoop& loop() { return loop_; }
    sim::Trace& trace() { return trace_; }
    sim::Network& network() { return network_; }
    const Scenario& scenario() const { return scenario_; }
    ctrl::Controller& controller(const DomainId& d);
    const std::map<DomainId, std::unique_ptr<ctrl::Controller>>& controllers() const { return controllers_; }
    const ControlSeries* series(const DomainId& from, const DomainId& to) const;

    void apply(const Action& action);

    void send_frame(const DomainId& sender, const LinkKey& link, std::vector<std::uint8_t> frame) override;
    void send_envelope(const LinkKey& link, messenger::Envelope envelope) override;

private:
    void account(const LinkKey& link, const messenger::Envelope& envelope);
    std::optional<DomainId> domain_of_host(const std::string& address) const;

    Scenario scenario_;
    sim::EventLoop loop_;
    sim::Trace trace_;
    sim::Network network_;
    std::map<DomainId, std::unique_ptr<ctrl::Controller>> controllers_;
    std::map<std::pair<DomainId, DomainId>, ControlSeries> series_;
    std::vector<std::string> flow_order_;
    bool booted_ = false;
};

MetricsReport run(const Scenario& scenario);

/// Writes control_<X>_<Y>.csv per peering direction, flow_<id>.csv per flow,
/// flows.csv and, if requested, trace.log. Returns the written file names.
std::vector<std::string> emit_report(const MetricsReport& report, const std::string& dir, bool with_trace);

std::string control_csv(const ControlSeries& series);
std::string flow_csv(const FlowReport& flow);
std::string flows_summary_csv(const MetricsReport& report);

}  // namespace disco::harness
