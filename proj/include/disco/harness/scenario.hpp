#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "disco/harness/topology.hpp"

namespace disco::harness {

enum class Verb {
    cut_link,
    restore_link,
    start_flow,
    stop_flow,
    migrate_host,
    request_service,
    kill_controller,
    graceful_leave,
};

std::string_view to_string(Verb v);
std::optional<Verb> parse_verb(std::string_view text);

struct Action {
    SimTime at = 0;
    Verb verb = Verb::cut_link;
    std::vector<std::string> args;
    int line = 0;

    /// Link actions: the declared direction between the two endpoints.
    std::optional<LinkKey> link;
    /// start_flow and request_service.
    std::optional<FlowSpec> flow;
    /// start_flow: last sample time (exclusive); defaults to the duration.
    SimTime until = 0;
    /// migrate_host: new attachment.
    std::optional<PortRef> port;
    /// kill_controller and graceful_leave.
    std::optional<DomainId> domain;

    std::string describe() const;
};

struct Scenario {
    std::string name;
    Topology topology;
    std::vector<Action> actions;
    SimTime duration_ms = 0;
};

/// Grammar, one statement per line (`#` starts a comment):
///   name <text>
///   topology <path>            or inline domain/switch/host/link statements
///   duration <ms>
///   at <ms> <verb> <args...>
/// Verbs: cut_link <ep> <ep> | restore_link <ep> <ep>
///        start_flow <id> <src> <dst> bw=<mbps> [prio=<n>] [maxlat=<ms>] [until=<ms>]
///        stop_flow <id> | request_service <id> <src> <dst> bw=<mbps> [prio=<n>] [maxlat=<ms>]
///        migrate_host <addr> <switch>:<port> | kill_controller <domain> | graceful_leave <domain>
/// A relative topology path resolves against `base_dir`.
Scenario parse_scenario(std::string_view text, const std::string& origin = "<scenario>",
                        const std::string& base_dir = ".");

Scenario load_scenario_file(const std::string& path);

std::vector<std::string> builtin_scenarios();
std::optional<Scenario> builtin_scenario(std::string_view name);
/// Source text of a built-in scenario, with the reference topology inline.
std::optional<std::string> builtin_scenario_text(std::string_view name);

}  // namespace disco::harness
