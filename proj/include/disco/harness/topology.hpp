#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "disco/model/types.hpp"

namespace disco::harness {

struct Diagnostic {
    int line = 0;
    std::string message;
};

/// Parse or validation failure; what() lists every diagnostic as
/// `origin:line: message`.
class ParseError : public std::runtime_error {
public:
    ParseError(std::string origin, std::vector<Diagnostic> diagnostics);

    const std::string& origin() const { return origin_; }
    const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }

private:
    std::string origin_;
    std::vector<Diagnostic> diagnostics_;
};

struct HostDecl {
    std::string address;
    PortRef attach;
};

/// Declared network. Every `link` statement yields both directions.
struct Topology {
    std::vector<DomainId> domains;
    std::vector<NodeId> switches;
    std::vector<HostDecl> hosts;
    std::vector<LinkSpec> links;

    bool has_domain(const DomainId& d) const;
    bool has_switch(const NodeId& n) const;
    bool has_host(const std::string& address) const;
    /// The declared link direction between two endpoints, in either order.
    std::optional<LinkKey> find_link(const PortRef& a, const PortRef& b) const;
    /// Ports already taken by links or hosts.
    bool port_in_use(const PortRef& p) const;
};

/// Incremental statement reader shared by topology and scenario files.
class TopologyBuilder {
public:
    /// Returns false if `tokens[0]` is not a topology keyword.
    bool accept(int line, const std::vector<std::string>& tokens);
    /// Final cross-reference checks; throws ParseError with all diagnostics.
    Topology finish(const std::string& origin);

    std::vector<Diagnostic>& diagnostics() { return diagnostics_; }

private:
    struct PendingHost {
        int line;
        std::string address;
        std::string attach;
    };
    struct PendingLink {
        int line;
        std::vector<std::string> tokens;
    };

    void error(int line, std::string message) { diagnostics_.push_back({line, std::move(message)}); }

    Topology topology_;
    std::vector<PendingHost> hosts_;
    std::vector<PendingLink> links_;
    std::vector<Diagnostic> diagnostics_;
};

std::vector<std::string> tokenize(std::string_view line);

Topology parse_topology(std::string_view text, const std::string& origin = "<topology>");

/// Three domains A, B, C; two switches and a host region per domain; peering
/// A-B and B-C at 5 ms / 20 Mbps and A-C at 10 ms / 10 Mbps. With
/// `weak_ac` the A-C link is 50 ms and flagged weak.
std::string reference_topology_text(bool weak_ac = false);

}  // namespace disco::harness
