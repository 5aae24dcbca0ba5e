#include "disco/harness/topology.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include <fmt/format.h>

namespace disco::harness {

namespace {

std::string render(const std::string& origin, const std::vector<Diagnostic>& diagnostics) {
    std::string out;
    for (const auto& d : diagnostics) {
        out += fmt::format("{}{}:{}: {}", out.empty() ? "" : "\n", origin, d.line, d.message);
    }
    return out;
}

std::optional<double> parse_number(std::string_view text) {
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        return std::nullopt;
    }
    return value;
}

}  // namespace

ParseError::ParseError(std::string origin, std::vector<Diagnostic> diagnostics)
    : std::runtime_error(render(origin, diagnostics)),
      origin_(std::move(origin)),
      diagnostics_(std::move(diagnostics)) {}

bool Topology::has_domain(const DomainId& d) const {
    return std::find(domains.begin(), domains.end(), d) != domains.end();
}

bool Topology::has_switch(const NodeId& n) const {
    return std::find(switches.begin(), switches.end(), n) != switches.end();
}

bool Topology::has_host(const std::string& address) const {
    return std::any_of(hosts.begin(), hosts.end(), [&](const HostDecl& h) { return h.address == address; });
}

std::optional<LinkKey> Topology::find_link(const PortRef& a, const PortRef& b) const {
    for (const auto& l : links) {
        if (l.key.from == a && l.key.to == b) {
            return l.key;
        }
    }
    return std::nullopt;
}

bool Topology::port_in_use(const PortRef& p) const {
    return std::any_of(links.begin(), links.end(), [&](const LinkSpec& l) { return l.key.from == p; }) ||
           std::any_of(hosts.begin(), hosts.end(), [&](const HostDecl& h) { return h.attach == p; });
}

std::vector<std::string> tokenize(std::string_view line) {
    if (auto hash = line.find('#'); hash != std::string_view::npos) {
        line = line.substr(0, hash);
    }
    std::istringstream in{std::string(line)};
    std::vector<std::string> out;
    for (std::string word; in >> word;) {
        out.push_back(word);
    }
    return out;
}

bool TopologyBuilder::accept(int line, const std::vector<std::string>& tokens) {
    const auto& keyword = tokens.at(0);
    try {
        if (keyword == "domain") {
            if (tokens.size() != 2) {
                error(line, "expected: domain <ID>");
                return true;
            }
            DomainId d(tokens[1]);
            if (topology_.has_domain(d)) {
                error(line, fmt::format("duplicate domain {}", d.str()));
            } else {
                topology_.domains.push_back(d);
            }
        } else if (keyword == "switch") {
            if (tokens.size() != 3) {
                error(line, "expected: switch <domain> <n>");
                return true;
            }
            DomainId d(tokens[1]);
            auto n = parse_number(tokens[2]);
            if (!n || *n < 1 || *n != static_cast<int>(*n)) {
                error(line, fmt::format("bad switch number '{}'", tokens[2]));
                return true;
            }
            NodeId node{d, static_cast<int>(*n)};
            if (!topology_.has_domain(d)) {
                error(line, fmt::format("switch {}: unknown domain {}", node.str(), d.str()));
            } else if (topology_.has_switch(node)) {
                error(line, fmt::format("duplicate switch {}", node.str()));
            } else {
                topology_.switches.push_back(node);
            }
        } else if (keyword == "host") {
            if (tokens.size() != 4 || tokens[2] != "at") {
                error(line, "expected: host <addr> at <switch>:<port>");
                return true;
            }
            hosts_.push_back({line, tokens[1], tokens[3]});
        } else if (keyword == "link") {
            links_.push_back({line, tokens});
        } else {
            return false;
        }
    } catch (const ModelError& e) {
        error(line, e.what());
    }
    return true;
}

Topology TopologyBuilder::finish(const std::string& origin) {
    for (const auto& h : hosts_) {
        try {
            PortRef attach = PortRef::parse(h.attach);
            if (attach.port < 1) {
                error(h.line, fmt::format("host {}: port must be positive", h.address));
            } else if (!topology_.has_switch(attach.node)) {
                error(h.line, fmt::format("host {}: unknown switch {}", h.address, attach.node.str()));
            } else if (topology_.has_host(h.address)) {
                error(h.line, fmt::format("duplicate host {}", h.address));
            } else if (topology_.port_in_use(attach)) {
                error(h.line, fmt::format("host {}: port {} already in use", h.address, attach.str()));
            } else {
                topology_.hosts.push_back({h.address, attach});
            }
        } catch (const ModelError& e) {
            error(h.line, e.what());
        }
    }
    for (const auto& l : links_) {
        const auto& t = l.tokens;
        if (t.size() < 5) {
            error(l.line, "expected: link <endpoint> <endpoint> latency=<ms> capacity=<mbps> [loss=<f>] [weak]");
            continue;
        }
        try {
            LinkSpec spec;
            spec.key = LinkKey{PortRef::parse(t[1]), PortRef::parse(t[2])};
            bool ok = true;
            bool have_latency = false;
            bool have_capacity = false;
            for (std::size_t i = 3; i < t.size(); ++i) {
                if (t[i] == "weak") {
                    spec.weak = true;
                    continue;
                }
                auto eq = t[i].find('=');
                std::optional<double> value;
                if (eq != std::string::npos) {
                    value = parse_number(std::string_view(t[i]).substr(eq + 1));
                }
                std::string field = eq == std::string::npos ? t[i] : t[i].substr(0, eq);
                if (!value) {
                    error(l.line, fmt::format("bad link attribute '{}'", t[i]));
                    ok = false;
                } else if (field == "latency") {
                    spec.latency_ms = *value;
                    have_latency = true;
                } else if (field == "capacity") {
                    spec.capacity_mbps = *value;
                    have_capacity = true;
                } else if (field == "loss") {
                    spec.loss_rate = *value;
                } else {
                    error(l.line, fmt::format("unknown link attribute '{}'", field));
                    ok = false;
                }
            }
            if (!have_latency || !have_capacity) {
                error(l.line, "link needs latency= and capacity=");
                continue;
            }
            for (const auto& end : {spec.key.from, spec.key.to}) {
                if (!topology_.has_switch(end.node)) {
                    error(l.line, fmt::format("link endpoint {}: unknown switch {}", end.str(), end.node.str()));
                    ok = false;
                } else if (end.port < 1) {
                    error(l.line, fmt::format("link endpoint {}: port must be positive", end.str()));
                    ok = false;
                } else if (topology_.port_in_use(end)) {
                    error(l.line, fmt::format("link endpoint {} already in use", end.str()));
                    ok = false;
                }
            }
            if (spec.key.from.node == spec.key.to.node) {
                error(l.line, "link endpoints on the same switch");
                ok = false;
            }
            if (!ok) {
                continue;
            }
            spec.kind = spec.key.from.node.domain == spec.key.to.node.domain ? LinkKind::intra : LinkKind::peering;
            if (spec.weak && spec.kind == LinkKind::intra) {
                error(l.line, "only peering links can be weak");
                continue;
            }
            spec.validate();
            LinkSpec back = spec;
            back.key = spec.key.reversed();
            topology_.links.push_back(spec);
            topology_.links.push_back(back);
        } catch (const ModelError& e) {
            error(l.line, e.what());
        }
    }
    if (!diagnostics_.empty()) {
        std::stable_sort(diagnostics_.begin(), diagnostics_.end(),
                         [](const Diagnostic& a, const Diagnostic& b) { return a.line < b.line; });
        throw ParseError(origin, diagnostics_);
    }
    return topology_;
}

Topology parse_topology(std::string_view text, const std::string& origin) {
    TopologyBuilder builder;
    std::istringstream in{std::string(text)};
    int line_no = 0;
    for (std::string line; std::getline(in, line);) {
        ++line_no;
        auto tokens = tokenize(line);
        if (tokens.empty()) {
            continue;
        }
        if (!builder.accept(line_no, tokens)) {
            builder.diagnostics().push_back({line_no, fmt::format("unknown statement '{}'", tokens[0])});
        }
    }
    return builder.finish(origin);
}

std::string reference_topology_text(bool weak_ac) {
    std::string text =
        "domain A\n"
        "domain B\n"
        "domain C\n";
    for (const char* d : {"A", "B", "C"}) {
        text += fmt::format("switch {0} 1\nswitch {0} 2\nlink {0}.1:1 {0}.2:1 latency=2 capacity=100\n", d);
    }
    text +=
        "host A1 at A.1:10\n"
        "host A2 at A.1:11\n"
        "host B1 at B.1:10\n"
        "host C1 at C.1:10\n"
        "host C2 at C.1:11\n"
        "link A.2:2 B.1:2 latency=5 capacity=20\n"
        "link B.2:2 C.2:2 latency=5 capacity=20\n";
    text += weak_ac ? "link A.2:3 C.2:3 latency=50 capacity=10 weak\n" : "link A.2:3 C.2:3 latency=10 capacity=10\n";
    return text;
}

}  // namespace disco::harness
