#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace disco {

/// Simulated time in milliseconds.
using SimTime = std::int64_t;

using PortNo = int;

class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class LookupError : public ModelError {
public:
    using ModelError::ModelError;
};

/// Identifier of a domain and of the controller that manages it.
/// Never contains '.', '*', ':', '>' or whitespace; those characters are
/// reserved by the topic and topology grammars.
class DomainId {
public:
    DomainId() = default;
    explicit DomainId(std::string id);

    const std::string& str() const { return id_; }
    bool empty() const { return id_.empty(); }

    auto operator<=>(const DomainId&) const = default;

private:
    std::string id_;
};

/// A switch, written "A.1".
struct NodeId {
    DomainId domain;
    int local = 0;

    std::string str() const;
    static NodeId parse(std::string_view text);

    auto operator<=>(const NodeId&) const = default;
};

/// A switch port, written "A.1:2". Port 0 denotes the switch itself (used for
/// host access points in monitoring pairs).
struct PortRef {
    NodeId node;
    PortNo port = 0;

    std::string str() const;
    static PortRef parse(std::string_view text);

    auto operator<=>(const PortRef&) const = default;
};

/// One direction of a physical link, written "A.1:2>B.1:2".
struct LinkKey {
    PortRef from;
    PortRef to;

    LinkKey reversed() const { return {to, from}; }
    /// Direction-independent identity of the physical link.
    LinkKey canonical() const { return from < to ? *this : reversed(); }
    std::string str() const;
    static LinkKey parse(std::string_view text);

    auto operator<=>(const LinkKey&) const = default;
};

enum class LinkKind { intra, peering };

struct LinkSpec {
    LinkKey key;
    double latency_ms = 1.0;
    double capacity_mbps = 1.0;
    double loss_rate = 0.0;
    LinkKind kind = LinkKind::intra;
    bool weak = false;

    void validate() const;
};

struct HostId {
    std::string address;
    std::optional<PortRef> attach;

    auto operator<=>(const HostId&) const = default;
};

struct FlowSpec {
    std::string id;
    std::string src;
    std::string dst;
    int priority = 0;
    double bandwidth_mbps = 0.0;
    std::optional<double> max_latency_ms;

    void validate() const;

    bool operator==(const FlowSpec&) const = default;
};

enum class ReservationState { pending, committed, released };

std::string_view to_string(ReservationState s);

/// A flow is re-reserved under a new epoch each time its route changes, so
/// holds of the old and the new route never alias.
struct ReservationKey {
    std::string flow;
    int epoch = 0;

    std::string str() const;
    auto operator<=>(const ReservationKey&) const = default;
};

struct Reservation {
    FlowSpec flow;
    int epoch = 0;
    std::vector<DomainId> domain_path;
    std::map<LinkKey, double> per_link_holds;
    ReservationState state = ReservationState::pending;

    ReservationKey key() const { return {flow.id, epoch}; }
};

/// Key of a monitoring measurement. Three shapes occur:
///   transit pair: two local peering points of the reporter;
///   access pair:  a peering point and a switch with attached hosts (to.port == 0);
///   peering:      local border port and the remote end of its peering link.
struct MonitorPair {
    PortRef from;
    PortRef to;

    std::string str() const;
    auto operator<=>(const MonitorPair&) const = default;
};

struct MonitoringSample {
    DomainId reporter;
    MonitorPair pair;
    double available_mbps = 0.0;  // +inf when the internal path has no links
    double latency_ms = 0.0;
    SimTime timestamp = 0;
    SimTime period_ms = 2000;
    bool lost = false;
};

enum class ThresholdMode { absolute, relative };

struct ThresholdEvent {
    std::string id;
    std::string subject;  // a LinkKey or PortRef string naming a drop counter
    ThresholdMode mode = ThresholdMode::absolute;
    double ceiling = 0.0;
    SimTime window_ms = 0;
    std::optional<SimTime> fired_at;

    void validate() const;
};

/// Peering link status as advertised by one endpoint domain.
struct PeeringStatus {
    DomainId neighbor;
    LinkKey link;  // local side first
    bool up = false;
    bool weak = false;

    auto operator<=>(const PeeringStatus&) const = default;
};

std::string format_ms(double value);

}  // namespace disco
