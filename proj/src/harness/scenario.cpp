#include "disco/harness/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>

namespace disco::harness {

namespace {

constexpr std::pair<Verb, std::string_view> kVerbs[] = {
    {Verb::cut_link, "cut_link"},
    {Verb::restore_link, "restore_link"},
    {Verb::start_flow, "start_flow"},
    {Verb::stop_flow, "stop_flow"},
    {Verb::migrate_host, "migrate_host"},
    {Verb::request_service, "request_service"},
    {Verb::kill_controller, "kill_controller"},
    {Verb::graceful_leave, "graceful_leave"},
};

std::optional<std::int64_t> parse_int(std::string_view text) {
    std::int64_t value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        return std::nullopt;
    }
    return value;
}

std::optional<double> parse_double(std::string_view text) {
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        return std::nullopt;
    }
    return value;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ParseError(path, {{0, "cannot open file"}});
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

struct RawAction {
    int line;
    SimTime at;
    Verb verb;
    std::vector<std::string> args;
};

class ScenarioChecker {
public:
    ScenarioChecker(const Scenario& scenario, std::vector<Diagnostic>& diagnostics)
        : s_(scenario), diagnostics_(diagnostics) {
        for (const auto& h : s_.topology.hosts) {
            location_[h.address] = h.attach;
        }
    }

    std::optional<Action> check(const RawAction& raw) {
        Action a;
        a.at = raw.at;
        a.verb = raw.verb;
        a.args = raw.args;
        a.line = raw.line;
        line_ = raw.line;
        const auto& args = raw.args;
        try {
            switch (raw.verb) {
                case Verb::cut_link:
                case Verb::restore_link: {
                    if (args.size() != 2) {
                        return fail(fmt::format("{} needs two endpoints", to_string(raw.verb)));
                    }
                    auto key = s_.topology.find_link(PortRef::parse(args[0]), PortRef::parse(args[1]));
                    if (!key) {
                        return fail(fmt::format("no link between {} and {}", args[0], args[1]));
                    }
                    a.link = key;
                    break;
                }
                case Verb::start_flow:
                case Verb::request_service: {
                    if (args.size() < 4) {
                        return fail(fmt::format("{} needs <id> <src> <dst> bw=<mbps>", to_string(raw.verb)));
                    }
                    FlowSpec f;
                    f.id = args[0];
                    f.src = args[1];
                    f.dst = args[2];
                    bool have_bw = false;
                    std::optional<SimTime> until;
                    for (std::size_t i = 3; i < args.size(); ++i) {
                        auto eq = args[i].find('=');
                        if (eq == std::string::npos) {
                            return fail(fmt::format("bad flow attribute '{}'", args[i]));
                        }
                        std::string key = args[i].substr(0, eq);
                        std::string_view value = std::string_view(args[i]).substr(eq + 1);
                        if (key == "bw" && parse_double(value)) {
                            f.bandwidth_mbps = *parse_double(value);
                            have_bw = true;
                        } else if (key == "prio" && parse_int(value)) {
                            f.priority = static_cast<int>(*parse_int(value));
                        } else if (key == "maxlat" && parse_double(value)) {
                            f.max_latency_ms = parse_double(value);
                        } else if (key == "until" && raw.verb == Verb::start_flow && parse_int(value)) {
                            until = *parse_int(value);
                        } else {
                            return fail(fmt::format("bad flow attribute '{}'", args[i]));
                        }
                    }
                    if (!have_bw) {
                        return fail("flow needs bw=<mbps>");
                    }
                    for (const auto& h : {f.src, f.dst}) {
                        if (!s_.topology.has_host(h)) {
                            return fail(fmt::format("unknown host {}", h));
                        }
                    }
                    f.validate();
                    if (flow_ids_.count(f.id)) {
                        return fail(fmt::format("flow {} already declared", f.id));
                    }
                    flow_ids_.insert(f.id);
                    a.until = until.value_or(s_.duration_ms);
                    if (raw.verb == Verb::start_flow && a.until <= a.at) {
                        return fail(fmt::format("flow {} ends before it starts", f.id));
                    }
                    if (raw.verb == Verb::start_flow) {
                        traffic_.insert(f.id);
                    }
                    a.flow = f;
                    break;
                }
                case Verb::stop_flow:
                    if (args.size() != 1) {
                        return fail("stop_flow needs <id>");
                    }
                    if (!flow_ids_.count(args[0])) {
                        return fail(fmt::format("unknown flow {}", args[0]));
                    }
                    break;
                case Verb::migrate_host: {
                    if (args.size() != 2) {
                        return fail("migrate_host needs <addr> <switch>:<port>");
                    }
                    auto it = location_.find(args[0]);
                    if (it == location_.end()) {
                        return fail(fmt::format("unknown host {}", args[0]));
                    }
                    PortRef port = PortRef::parse(args[1]);
                    if (!s_.topology.has_switch(port.node) || port.port < 1) {
                        return fail(fmt::format("bad attachment {}", args[1]));
                    }
                    bool taken = std::any_of(s_.topology.links.begin(), s_.topology.links.end(),
                                             [&](const LinkSpec& l) { return l.key.from == port; });
                    for (const auto& [addr, at] : location_) {
                        taken = taken || (addr != args[0] && at == port);
                    }
                    if (taken) {
                        return fail(fmt::format("port {} already in use", port.str()));
                    }
                    it->second = port;
                    a.port = port;
                    break;
                }
                case Verb::kill_controller:
                case Verb::graceful_leave: {
                    if (args.size() != 1) {
                        return fail(fmt::format("{} needs <domain>", to_string(raw.verb)));
                    }
                    DomainId d(args[0]);
                    if (!s_.topology.has_domain(d)) {
                        return fail(fmt::format("unknown domain {}", d.str()));
                    }
                    a.domain = d;
                    break;
                }
            }
        } catch (const ModelError& e) {
            return fail(e.what());
        }
        return a;
    }

private:
    std::optional<Action> fail(std::string message) {
        diagnostics_.push_back({line_, std::move(message)});
        return std::nullopt;
    }

    const Scenario& s_;
    std::vector<Diagnostic>& diagnostics_;
    std::map<std::string, PortRef> location_;
    std::set<std::string> flow_ids_;
    std::set<std::string> traffic_;
    int line_ = 0;
};

}  // namespace

std::string_view to_string(Verb v) {
    for (const auto& [verb, name] : kVerbs) {
        if (verb == v) {
            return name;
        }
    }
    return "?";
}

std::optional<Verb> parse_verb(std::string_view text) {
    for (const auto& [verb, name] : kVerbs) {
        if (name == text) {
            return verb;
        }
    }
    return std::nullopt;
}

std::string Action::describe() const {
    std::string out(to_string(verb));
    for (const auto& a : args) {
        out += " " + a;
    }
    return out;
}

Scenario parse_scenario(std::string_view text, const std::string& origin, const std::string& base_dir) {
    Scenario scenario;
    scenario.name = std::filesystem::path(origin).stem().string();
    TopologyBuilder builder;
    std::vector<Diagnostic> diagnostics;
    std::vector<RawAction> raw;
    std::optional<std::string> topology_file;
    int topology_line = 0;
    bool inline_topology = false;
    bool have_duration = false;

    std::istringstream in{std::string(text)};
    int line_no = 0;
    for (std::string line; std::getline(in, line);) {
        ++line_no;
        auto tokens = tokenize(line);
        if (tokens.empty()) {
            continue;
        }
        const auto& keyword = tokens[0];
        if (keyword == "name" && tokens.size() == 2) {
            scenario.name = tokens[1];
        } else if (keyword == "topology" && tokens.size() == 2) {
            if (topology_file) {
                diagnostics.push_back({line_no, "topology given twice"});
            }
            topology_file = tokens[1];
            topology_line = line_no;
        } else if (keyword == "duration") {
            auto d = tokens.size() == 2 ? parse_int(tokens[1]) : std::nullopt;
            if (!d || *d < 0) {
                diagnostics.push_back({line_no, "expected: duration <ms>"});
            } else {
                scenario.duration_ms = *d;
                have_duration = true;
            }
        } else if (keyword == "at") {
            auto at = tokens.size() >= 3 ? parse_int(tokens[1]) : std::nullopt;
            auto verb = tokens.size() >= 3 ? parse_verb(tokens[2]) : std::nullopt;
            if (!at || *at < 0) {
                diagnostics.push_back({line_no, "expected: at <ms> <verb> <args...>"});
            } else if (!verb) {
                diagnostics.push_back({line_no, fmt::format("unknown verb '{}'", tokens[2])});
            } else {
                raw.push_back({line_no, *at, *verb, {tokens.begin() + 3, tokens.end()}});
            }
        } else if (builder.accept(line_no, tokens)) {
            inline_topology = true;
        } else {
            diagnostics.push_back({line_no, fmt::format("unknown statement '{}'", keyword)});
        }
    }

    if (!have_duration) {
        diagnostics.push_back({line_no, "missing duration"});
    }
    if (topology_file && inline_topology) {
        diagnostics.push_back({topology_line, "topology file and inline topology are exclusive"});
    }
    try {
        if (topology_file) {
            auto path = std::filesystem::path(*topology_file);
            if (path.is_relative()) {
                path = std::filesystem::path(base_dir) / path;
            }
            scenario.topology = parse_topology(read_file(path.string()), path.string());
        } else {
            scenario.topology = builder.finish(origin);
        }
    } catch (const ParseError& e) {
        if (e.origin() == origin) {
            diagnostics.insert(diagnostics.end(), e.diagnostics().begin(), e.diagnostics().end());
        } else {
            for (const auto& d : e.diagnostics()) {
                diagnostics.push_back({topology_line, fmt::format("{}:{}: {}", e.origin(), d.line, d.message)});
            }
        }
    }

    if (diagnostics.empty()) {
        ScenarioChecker checker(scenario, diagnostics);
        SimTime last = 0;
        for (const auto& r : raw) {
            if (r.at < last) {
                diagnostics.push_back({r.line, "actions must be sorted by time"});
            }
            if (r.at > scenario.duration_ms) {
                diagnostics.push_back({r.line, "action after the end of the run"});
            }
            last = std::max(last, r.at);
            if (auto a = checker.check(r)) {
                scenario.actions.push_back(std::move(*a));
            }
        }
    }
    if (!diagnostics.empty()) {
        std::stable_sort(diagnostics.begin(), diagnostics.end(),
                         [](const Diagnostic& a, const Diagnostic& b) { return a.line < b.line; });
        throw ParseError(origin, diagnostics);
    }
    return scenario;
}

Scenario load_scenario_file(const std::string& path) {
    auto dir = std::filesystem::path(path).parent_path().string();
    return parse_scenario(read_file(path), path, dir.empty() ? "." : dir);
}

std::vector<std::string> builtin_scenarios() {
    return {"uc1", "uc2", "uc3"};
}

std::optional<std::string> builtin_scenario_text(std::string_view name) {
    if (name == "uc1") {
        return "name uc1\n" + reference_topology_text(true) +
               "duration 60000\n"
               "at 33000 cut_link B.2:2 C.2:2\n";
    }
    if (name == "uc2") {
        return "name uc2\n" + reference_topology_text(false) +
               "duration 40000\n"
               "at 0 start_flow f1 A1 C1 bw=8 prio=1\n"
               "at 25000 start_flow f2 A2 C2 bw=8 prio=10 maxlat=15\n";
    }
    if (name == "uc3") {
        return "name uc3\n" + reference_topology_text(false) +
               "duration 50000\n"
               "at 5000 start_flow f1 A1 C2 bw=10 prio=1 until=45000\n"
               "at 25000 migrate_host C2 B.1:11\n";
    }
    return std::nullopt;
}

std::optional<Scenario> builtin_scenario(std::string_view name) {
    auto text = builtin_scenario_text(name);
    if (!text) {
        return std::nullopt;
    }
    return parse_scenario(*text, std::string(name));
}

}  // namespace disco::harness
