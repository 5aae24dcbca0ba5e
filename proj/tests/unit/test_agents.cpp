#include <doctest.h>

#include <cmath>
#include <limits>

#include "disco/agents/agents.hpp"
#include "disco/harness/runner.hpp"

using namespace disco;
using namespace disco::agents;
using harness::Simulation;

namespace {

const DomainId A("A"), B("B"), C("C");

std::vector<DomainEdge> triangle_edges(bool ac_weak, bool bc_up) {
    auto ab = LinkKey::parse("A.2:2>B.1:2").canonical();
    auto bc = LinkKey::parse("B.2:2>C.2:2").canonical();
    auto ac = LinkKey::parse("A.2:3>C.2:3").canonical();
    return {{A, B, ab, true, false}, {B, C, bc, bc_up, false}, {A, C, ac, true, ac_weak}};
}

Simulation reference(const std::string& actions, SimTime duration, bool weak_ac = false) {
    auto text = harness::reference_topology_text(weak_ac) + "duration " + std::to_string(duration) + "\n" + actions;
    return Simulation(harness::parse_scenario(text, "test"));
}

std::size_t count_lines(const sim::Trace& t, const std::string& needle, SimTime from, SimTime to) {
    std::size_t n = 0;
    for (const auto& line : t.lines()) {
        auto at = std::stoll(line.substr(0, line.find(' ')));
        if (at >= from && at < to && line.find(needle) != std::string::npos) {
            ++n;
        }
    }
    return n;
}

}  // namespace

TEST_CASE("links at or above the latency threshold are weak") {
    CHECK(classify_link(49.9, false, 50) == LinkClass::nominal);
    CHECK(classify_link(50.0, false, 50) == LinkClass::weak);
    CHECK(classify_link(1.0, true, 50) == LinkClass::weak);
}

TEST_CASE("monitoring plan relays around a weak link while an alternative exists") {
    auto ac = LinkKey::parse("A.2:3>C.2:3").canonical();

    auto nominal = plan_monitoring(A, triangle_edges(false, true));
    CHECK(nominal.fast_exclusions.empty());
    CHECK_FALSE(nominal.slow);

    auto adapted = plan_monitoring(A, triangle_edges(true, true));
    CHECK(adapted.fast_exclusions == std::set<LinkKey>{ac});
    CHECK_FALSE(adapted.slow);
    for (const auto& lp : adapted.links) {
        CHECK(lp.mode == (lp.link == ac ? AdvertMode::relayed : AdvertMode::direct_fast));
    }

    auto cut = plan_monitoring(A, triangle_edges(true, false));
    CHECK(cut.slow);
    CHECK(cut.fast_exclusions == std::set<LinkKey>{ac});
    for (const auto& lp : cut.links) {
        CHECK(lp.link != LinkKey::parse("B.2:2>C.2:2").canonical());
        if (lp.link == ac) {
            CHECK(lp.mode == AdvertMode::direct_slow);
        }
    }
    // B now reaches C only through A over the weak link
    CHECK(plan_monitoring(B, triangle_edges(true, false)).slow);
}

TEST_CASE("agent payloads round-trip") {
    std::vector<PeeringStatus> status = {{B, LinkKey::parse("A.2:2>B.1:2"), true, false},
                                         {C, LinkKey::parse("A.2:3>C.2:3"), false, true}};
    CHECK(decode_connectivity(encode_connectivity(A, status)) == status);

    MonitoringSample s;
    s.reporter = B;
    s.pair = {PortRef::parse("B.1:2"), PortRef::parse("B.2:2")};
    s.available_mbps = std::numeric_limits<double>::infinity();
    s.latency_ms = 2;
    s.timestamp = 4000;
    auto back = decode_monitoring(B, encode_monitoring(B, 2000, {s}));
    REQUIRE(back.size() == 1);
    CHECK(std::isinf(back[0].available_mbps));
    CHECK(back[0].pair == s.pair);
    CHECK(back[0].timestamp == 4000);

    SegmentRequest r;
    r.flow = FlowSpec{"f2", "A2", "C2", 10, 8, 15.0};
    r.epoch = 3;
    r.path = {A, C};
    r.peering = {LinkKey::parse("A.2:3>C.2:3")};
    r.hop = 1;
    r.latency_ms = 12;
    auto rr = decode_reservation(encode_reservation("setup", r));
    CHECK(rr.flow == r.flow);
    CHECK(rr.epoch == 3);
    CHECK(rr.path == r.path);
    CHECK(rr.peering == r.peering);
    CHECK(rr.hop == 1);
    CHECK(decode_flow(encode_flow(r.flow)) == r.flow);
}

TEST_CASE("a domain reports ordered transit pairs, access pairs and peering samples") {
    auto sim = reference("", 3000);
    sim.run(2500);
    auto samples = sim.controller(B).monitoring().measure();
    std::size_t transit = 0, access = 0, peering = 0;
    for (const auto& s : samples) {
        if (s.pair.to.node.domain != B) {
            ++peering;
        } else if (s.pair.to.port == 0) {
            ++access;
        } else {
            ++transit;
        }
    }
    // two peering points: P(2,2) ordered transit pairs, one access pair each
    // towards the single host switch, one peering sample each
    CHECK(transit == 2);
    CHECK(access == 2);
    CHECK(peering == 2);
    for (const auto& s : samples) {
        if (s.pair.from == PortRef::parse("B.1:2") && s.pair.to == PortRef::parse("B.2:2")) {
            CHECK(s.latency_ms == doctest::Approx(2.0));
            CHECK(s.available_mbps == doctest::Approx(100.0));
        }
    }
}

TEST_CASE("connectivity and reachability stay silent without changes") {
    auto sim = reference("", 30000);
    sim.run();
    CHECK(count_lines(sim.trace(), "connectivity.", 5000, 30000) == 0);
    CHECK(count_lines(sim.trace(), "reachability.", 5000, 30000) == 0);
}

TEST_CASE("reachability updates follow a migrated host") {
    auto sim = reference("at 5000 migrate_host C2 B.1:11\n", 6000);
    sim.run(4000);
    CHECK(sim.controller(A).db().host_domain("C2") == C);
    sim.run();
    for (const char* d : {"A", "B", "C"}) {
        CAPTURE(d);
        CHECK(sim.controller(DomainId(d)).db().host_domain("C2") == B);
    }
}

TEST_CASE("a committed reservation holds the same demand in every domain on its path") {
    auto sim = reference("at 4000 request_service f1 A1 C1 bw=8 prio=1\n", 6000);
    sim.run();
    auto st = sim.controller(A).status("f1");
    REQUIRE(st);
    CHECK(st->state == ctrl::FlowState::committed);
    CHECK(st->domain_path == std::vector<DomainId>{A, C});
    ReservationKey key{"f1", st->epoch};
    for (const auto& d : st->domain_path) {
        const auto* r = sim.controller(d).db().reservation(key);
        REQUIRE(r);
        CHECK(r->state == ReservationState::committed);
        for (const auto& [_, amount] : r->per_link_holds) {
            CHECK(amount == doctest::Approx(8.0));
        }
    }
    CHECK(sim.controller(B).db().reservation(key) == nullptr);
    // source switch and egress get transit rules towards C1
    CHECK(sim.network().current_rule(NodeId::parse("A.1"), "C1").has_value());
    CHECK(sim.network().current_rule(NodeId::parse("A.2"), "C1")->out_port == 3);
}

TEST_CASE("teardown releases the reservation in every domain") {
    auto sim = reference(
        "at 4000 request_service f1 A1 C1 bw=8 prio=1\n"
        "at 5000 stop_flow f1\n",
        6000);
    sim.run();
    for (const auto& [_, c] : sim.controllers()) {
        CHECK(c->db().reservations().empty());
        CHECK(c->reservation().active() == 0);
    }
    CHECK(sim.controller(A).status("f1")->state == ctrl::FlowState::released);
}

TEST_CASE("a refused setup leaves no hold upstream") {
    auto sim = reference("", 6000);
    sim.run(3500);
    // right after C's 4000 ms advert, take C's internal capacity without A
    // knowing; A still believes the path A-C fits and sends the setup
    sim.loop().schedule(4000, sim::EventKind::scenario_action, [&] {
        Reservation blocker;
        blocker.flow = FlowSpec{"x", "C2", "C1", 0, 95, std::nullopt};
        blocker.epoch = 1;
        blocker.domain_path = {C};
        blocker.per_link_holds = {{LinkKey::parse("C.2:1>C.1:1"), 95}};
        sim.controller(C).db().hold(blocker);
    });
    sim.loop().schedule(4001, sim::EventKind::scenario_action, [&] {
        sim.controller(A).admit_service(FlowSpec{"f1", "A1", "C1", 1, 8, std::nullopt});
    });
    sim.run(4100);
    auto st = sim.controller(A).status("f1");
    REQUIRE(st);
    CHECK(st->state == ctrl::FlowState::rejected);
    CHECK(sim.controller(A).db().reservations().empty());
    CHECK(sim.controller(C).db().reservations().size() == 1);
    CHECK(count_lines(sim.trace(), "CTRL C refuse f1#1", 4000, 4100) == 1);
}
