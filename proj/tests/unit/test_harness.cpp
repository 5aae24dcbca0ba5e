#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "disco/harness/runner.hpp"

using namespace disco;
using namespace disco::harness;

namespace {

std::vector<Diagnostic> diagnostics_of(const std::string& text) {
    try {
        parse_topology(text, "t");
    } catch (const ParseError& e) {
        return e.diagnostics();
    }
    return {};
}

std::vector<Diagnostic> scenario_diagnostics(const std::string& text) {
    try {
        parse_scenario(text, "s");
    } catch (const ParseError& e) {
        return e.diagnostics();
    }
    return {};
}

std::string read(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream b;
    b << in.rdbuf();
    return b.str();
}

}  // namespace

TEST_CASE("the reference topology parses into three domains") {
    auto t = parse_topology(reference_topology_text(false));
    CHECK(t.domains.size() == 3);
    CHECK(t.switches.size() == 6);
    CHECK(t.hosts.size() == 5);
    CHECK(t.links.size() == 12);
    auto ac = t.find_link(PortRef::parse("A.2:3"), PortRef::parse("C.2:3"));
    REQUIRE(ac);
    for (const auto& l : t.links) {
        if (l.key == *ac) {
            CHECK(l.latency_ms == 10);
            CHECK(l.capacity_mbps == 10);
            CHECK_FALSE(l.weak);
            CHECK(l.kind == LinkKind::peering);
        }
    }
    auto weak = parse_topology(reference_topology_text(true));
    CHECK(std::any_of(weak.links.begin(), weak.links.end(),
                      [](const LinkSpec& l) { return l.weak && l.latency_ms >= 50; }));
}

TEST_CASE("topology diagnostics carry line numbers") {
    auto d = diagnostics_of("domain A\nswitch A 1\nlink A.1:1 A.7:1 latency=1 capacity=1\n");
    REQUIRE(d.size() == 1);
    CHECK(d[0].line == 3);
    CHECK(d[0].message.find("A.7") != std::string::npos);

    d = diagnostics_of("domain A\nswitch A 1\nhost h at A.1:5\nhost h at A.1:6\n");
    REQUIRE(d.size() == 1);
    CHECK(d[0].line == 4);
    CHECK(d[0].message.find("duplicate host") != std::string::npos);

    d = diagnostics_of("domain A\nswitch B 1\nfrobnicate\nlink A.1:1\n");
    CHECK(d.size() == 3);

    try {
        parse_topology("domain A\ndomain A\n", "net.topo");
        FAIL("duplicate domain accepted");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()) == "net.topo:2: duplicate domain A");
    }
}

TEST_CASE("scenario actions must reference declared entities and be sorted") {
    const std::string topo = reference_topology_text(false);
    CHECK(scenario_diagnostics(topo + "duration 1000\nat 500 cut_link A.2:2 B.1:2\n").empty());
    auto d = scenario_diagnostics(topo + "duration 1000\nat 500 cut_link A.2:2 C.2:2\n");
    REQUIRE(d.size() == 1);
    CHECK(d[0].message.find("no link") != std::string::npos);
    d = scenario_diagnostics(topo + "duration 1000\nat 600 kill_controller A\nat 500 kill_controller B\n");
    REQUIRE(d.size() == 1);
    CHECK(d[0].message.find("sorted") != std::string::npos);
    d = scenario_diagnostics(topo + "duration 1000\nat 100 start_flow f X1 C1 bw=1\n");
    REQUIRE(d.size() == 1);
    CHECK(d[0].message.find("unknown host X1") != std::string::npos);
    d = scenario_diagnostics(topo + "duration 1000\nat 100 migrate_host C2 A.2:2\n");
    REQUIRE(d.size() == 1);
    CHECK(d[0].message.find("in use") != std::string::npos);
    CHECK_FALSE(scenario_diagnostics(topo + "at 100 kill_controller A\n").empty());
    CHECK_FALSE(scenario_diagnostics(topo + "duration 1000\nat 2000 kill_controller A\n").empty());
}

TEST_CASE("built-in scenarios parse") {
    for (const auto& name : builtin_scenarios()) {
        CAPTURE(name);
        auto s = builtin_scenario(name);
        REQUIRE(s);
        CHECK(s->name == name);
    }
    CHECK_FALSE(builtin_scenario("uc9").has_value());
}

TEST_CASE("a scenario file may refer to a topology file next to it") {
    auto dir = std::filesystem::temp_directory_path() / "disco_harness_test";
    std::filesystem::create_directories(dir);
    {
        std::ofstream(dir / "net.topo") << reference_topology_text(false);
        std::ofstream(dir / "cut.scn") << "topology net.topo\nduration 3000\nat 1000 cut_link B.2:2 C.2:2\n";
    }
    auto s = load_scenario_file((dir / "cut.scn").string());
    CHECK(s.name == "cut");
    CHECK(s.topology.domains.size() == 3);
    REQUIRE(s.actions.size() == 1);
    CHECK(s.actions[0].link->str() == "B.2:2>C.2:2");
    std::filesystem::remove_all(dir);
}

TEST_CASE("an empty scenario yields header-only reports") {
    auto report = run(parse_scenario("duration 0\n", "empty"));
    CHECK(report.control.empty());
    CHECK(report.flows.empty());
    CHECK(flows_summary_csv(report).find('\n') == flows_summary_csv(report).size() - 1);
    ControlSeries empty{DomainId("A"), DomainId("B"), {}};
    CHECK(control_csv(empty) == "second,bus,monitoring,reachability,connectivity,reservation,total\n");
}

TEST_CASE("every scenario action appears in the trace at its time") {
    auto s = *builtin_scenario("uc3");
    Simulation sim(s);
    sim.run();
    for (const auto& a : s.actions) {
        auto prefix = std::to_string(a.at) + " ACTION " + std::string(to_string(a.verb));
        const auto& lines = sim.trace().lines();
        CHECK(std::any_of(lines.begin(), lines.end(), [&](const std::string& l) { return l.rfind(prefix, 0) == 0; }));
    }
}

TEST_CASE("control byte buckets equal sums recomputed from the trace") {
    auto report = run(*builtin_scenario("uc1"));
    CHECK(report.control.size() == 6);
    // oracle: aggregate RECV lines independently
    std::map<std::tuple<std::string, std::size_t, std::string>, std::uint64_t> sums;
    for (const auto& line : report.trace) {
        std::istringstream in(line);
        SimTime at;
        std::string kind, subject, category, bytes;
        in >> at >> kind >> subject >> category >> bytes;
        if (kind != "RECV") {
            continue;
        }
        sums[{subject, static_cast<std::size_t>(at / 1000), category}] += std::stoull(bytes.substr(6));
    }
    for (const auto& series : report.control) {
        std::string subject = series.from.str() + "->" + series.to.str();
        CHECK(series.buckets.size() == 60);
        for (std::size_t sec = 0; sec < series.buckets.size(); ++sec) {
            std::uint64_t total = 0;
            for (std::size_t c = 0; c < kCategories.size(); ++c) {
                auto it = sums.find({subject, sec, std::string(kCategories[c])});
                std::uint64_t want = it == sums.end() ? 0 : it->second;
                CHECK(series.buckets[sec][c] == want);
                total += want;
            }
            CHECK(series.total(sec) == total);
        }
    }
}

TEST_CASE("reports are byte-identical across runs") {
    auto base = std::filesystem::temp_directory_path() / "disco_det";
    std::filesystem::remove_all(base);
    for (const char* run_dir : {"one", "two"}) {
        emit_report(run(*builtin_scenario("uc2")), (base / run_dir).string(), true);
    }
    std::size_t compared = 0;
    for (const auto& entry : std::filesystem::directory_iterator(base / "one")) {
        auto other = base / "two" / entry.path().filename();
        REQUIRE(std::filesystem::exists(other));
        CHECK(read(entry.path()) == read(other));
        ++compared;
    }
    CHECK(compared >= 8);
    std::filesystem::remove_all(base);
}

TEST_CASE("errors in a referenced topology file point at the topology statement") {
    auto dir = std::filesystem::temp_directory_path() / "disco_harness_bad";
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "bad.topo") << "domain A\nswitch Q 1\n";
    try {
        parse_scenario("name x\ntopology bad.topo\nduration 10\n", "x.scn", dir.string());
        FAIL("bad topology accepted");
    } catch (const ParseError& e) {
        REQUIRE(e.diagnostics().size() == 1);
        CHECK(e.diagnostics()[0].line == 2);
        CHECK(e.diagnostics()[0].message.find("bad.topo:2:") != std::string::npos);
    }
    std::filesystem::remove_all(dir);
}
