// disco: run multi-domain control-plane scenarios on the simulator.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "disco/harness/runner.hpp"
#include "disco/harness/scenario.hpp"
#include "disco/harness/topology.hpp"

namespace {

using namespace disco;

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw harness::ParseError(path, {{0, "cannot open file"}});
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

harness::Scenario resolve(const std::string& name) {
    if (!std::filesystem::exists(name)) {
        if (auto builtin = harness::builtin_scenario(name)) {
            return *builtin;
        }
    }
    return harness::load_scenario_file(name);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-domain SDN control plane simulator"};
    app.require_subcommand(1);

    std::string scenario_name;
    std::string out_dir = "out";
    bool with_trace = false;
    std::uint64_t seed = 0;
    auto* run = app.add_subcommand("run", "Run a scenario file or a built-in scenario (uc1, uc2, uc3)");
    run->add_option("scenario", scenario_name, "Scenario file or built-in name")->required();
    run->add_option("--out", out_dir, "Report directory")->capture_default_str();
    run->add_flag("--trace", with_trace, "Also write trace.log");
    run->add_option("--seed", seed, "Seed for randomized harnesses; scenarios are unaffected")->capture_default_str();

    std::string topology_file;
    auto* validate = app.add_subcommand("validate", "Check a topology file");
    validate->add_option("topology", topology_file, "Topology file")->required();

    auto* scenario = app.add_subcommand("scenario", "Built-in scenarios");
    auto* list = scenario->add_subcommand("list", "List built-in scenarios");
    std::string show_name;
    auto* show = scenario->add_subcommand("show", "Print a built-in scenario");
    show->add_option("name", show_name)->required();
    scenario->require_subcommand(1);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            auto s = resolve(scenario_name);
            auto report = harness::run(s);
            auto files = harness::emit_report(report, out_dir, with_trace);
            std::size_t control_bytes = 0;
            for (const auto& series : report.control) {
                for (std::size_t i = 0; i < series.buckets.size(); ++i) {
                    control_bytes += series.total(i);
                }
            }
            fmt::print("scenario {}: {} ms simulated, {} control bytes, {} flows, {} trace lines\n", report.scenario,
                       report.duration_ms, control_bytes, report.flows.size(), report.trace.size());
            for (const auto& f : report.flows) {
                fmt::print("  flow {}: {}\n", f.spec.id,
                           f.status ? std::string(ctrl::to_string(f.status->state)) : "unknown");
            }
            fmt::print("wrote {} files to {}\n", files.size(), out_dir);
        } else if (*validate) {
            auto topo = harness::parse_topology(slurp(topology_file), topology_file);
            fmt::print("{}: {} domains, {} switches, {} hosts, {} links\n", topology_file, topo.domains.size(),
                       topo.switches.size(), topo.hosts.size(), topo.links.size() / 2);
        } else if (*list) {
            for (const auto& name : harness::builtin_scenarios()) {
                fmt::print("{}\n", name);
            }
        } else if (*show) {
            auto text = harness::builtin_scenario_text(show_name);
            if (!text) {
                fmt::print(stderr, "unknown scenario {}\n", show_name);
                return 2;
            }
            fmt::print("{}", *text);
        }
    } catch (const harness::ParseError& e) {
        fmt::print(stderr, "{}\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    }
    return 0;
}
