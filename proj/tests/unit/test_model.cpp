#include <doctest.h>

#include <random>

#include "disco/model/database.hpp"

using namespace disco;

namespace {

LinkSpec link(const char* text, double latency, double capacity, LinkKind kind = LinkKind::intra) {
    LinkSpec s;
    s.key = LinkKey::parse(text);
    s.latency_ms = latency;
    s.capacity_mbps = capacity;
    s.kind = kind;
    return s;
}

ExtendedDatabase small_db() {
    ExtendedDatabase db(DomainId("A"));
    db.add_switch(NodeId::parse("A.1"));
    db.add_switch(NodeId::parse("A.2"));
    db.add_link(link("A.1:1>A.2:1", 2, 100));
    db.add_link(link("A.2:1>A.1:1", 2, 100));
    db.add_link(link("A.2:3>C.2:3", 10, 10, LinkKind::peering));
    db.add_link(link("C.2:3>A.2:3", 10, 10, LinkKind::peering));
    return db;
}

Reservation res(const std::string& flow, int epoch, int priority, std::map<LinkKey, double> holds) {
    Reservation r;
    r.flow.id = flow;
    r.flow.src = "A1";
    r.flow.dst = "C1";
    r.flow.priority = priority;
    r.flow.bandwidth_mbps = holds.empty() ? 1.0 : holds.begin()->second;
    r.epoch = epoch;
    r.domain_path = {DomainId("A"), DomainId("C")};
    r.per_link_holds = std::move(holds);
    return r;
}

}  // namespace

TEST_CASE("identifiers round-trip through their text form") {
    CHECK(NodeId::parse("A.1").str() == "A.1");
    CHECK(PortRef::parse("B.2:3").str() == "B.2:3");
    auto key = LinkKey::parse("A.2:3>C.2:3");
    CHECK(key.str() == "A.2:3>C.2:3");
    CHECK(key.reversed().str() == "C.2:3>A.2:3");
    CHECK(key.canonical() == key.reversed().canonical());
    CHECK_THROWS_AS(DomainId("A.B"), ModelError);
    CHECK_THROWS_AS(DomainId("*"), ModelError);
    CHECK_THROWS_AS(NodeId::parse("A"), ModelError);
    CHECK_THROWS_AS(PortRef::parse("A.1"), ModelError);
    CHECK_THROWS_AS(LinkKey::parse("A.1:1"), ModelError);
}

TEST_CASE("link and flow specs validate their fields") {
    auto ok = link("A.1:1>A.2:1", 2, 100);
    CHECK_NOTHROW(ok.validate());
    auto bad = ok;
    bad.capacity_mbps = 0;
    CHECK_THROWS_AS(bad.validate(), ModelError);
    bad = ok;
    bad.loss_rate = 1.5;
    CHECK_THROWS_AS(bad.validate(), ModelError);
    FlowSpec f{"f1", "A1", "C1", 1, 8.0, std::nullopt};
    CHECK_NOTHROW(f.validate());
    f.bandwidth_mbps = -1;
    CHECK_THROWS_AS(f.validate(), ModelError);
}

TEST_CASE("holds count against available bandwidth until released") {
    auto db = small_db();
    auto ac = LinkKey::parse("A.2:3>C.2:3");
    db.hold(res("f1", 1, 1, {{ac, 8.0}}));
    CHECK(db.available_bandwidth(ac) == doctest::Approx(2.0));
    // pending holds are not yet part of the committed residual
    CHECK(db.residual_bandwidth(ac) == doctest::Approx(10.0));
    db.commit({"f1", 1});
    CHECK(db.residual_bandwidth(ac) == doctest::Approx(2.0));
    CHECK_THROWS_AS(db.hold(res("f2", 1, 5, {{ac, 8.0}})), CapacityError);
    CHECK(db.held_below_priority(ac, 5) == doctest::Approx(8.0));
    CHECK(db.held_below_priority(ac, 1) == doctest::Approx(0.0));
    CHECK(db.release({"f1", 1}));
    CHECK_FALSE(db.release({"f1", 1}));
    CHECK(db.available_bandwidth(ac) == doctest::Approx(10.0));
    CHECK_THROWS_AS(db.hold(res("f3", 1, 1, {{LinkKey::parse("A.9:1>A.2:1"), 1.0}})), LookupError);
    CHECK(db.invariant_violations().empty());
}

TEST_CASE("random hold and release sequences never over-subscribe") {
    std::mt19937 rng(7);
    auto db = small_db();
    const std::vector<LinkKey> links = {LinkKey::parse("A.1:1>A.2:1"), LinkKey::parse("A.2:3>C.2:3")};
    std::map<ReservationKey, std::map<LinkKey, double>> live;
    for (int step = 0; step < 2000; ++step) {
        std::uniform_int_distribution<int> pick(0, 3);
        int op = pick(rng);
        if (op < 2) {
            std::map<LinkKey, double> holds;
            double demand = std::uniform_real_distribution<double>(0.5, 12.0)(rng);
            for (const auto& l : links) {
                if (rng() % 2) {
                    holds[l] = demand;
                }
            }
            if (holds.empty()) {
                continue;
            }
            ReservationKey key{"f" + std::to_string(step), 1};
            // oracle: fits iff every hold is within capacity minus live holds
            bool fits = true;
            for (const auto& [l, amount] : holds) {
                double used = 0.0;
                for (const auto& [_, h] : live) {
                    if (auto it = h.find(l); it != h.end()) {
                        used += it->second;
                    }
                }
                fits = fits && used + amount <= db.link(l).capacity_mbps + 1e-9;
            }
            auto r = res(key.flow, 1, 0, holds);
            if (fits) {
                CHECK_NOTHROW(db.hold(r));
                live[key] = holds;
                if (rng() % 2) {
                    db.commit(key);
                }
            } else {
                CHECK_THROWS_AS(db.hold(r), CapacityError);
            }
        } else if (!live.empty()) {
            auto it = live.begin();
            std::advance(it, static_cast<long>(rng() % live.size()));
            CHECK(db.release(it->first));
            live.erase(it);
        }
        REQUIRE(db.invariant_violations().empty());
    }
}

TEST_CASE("host mappings move between domains and are purged with them") {
    auto db = small_db();
    HostId c2{"C2", PortRef::parse("C.1:11")};
    CHECK_FALSE(db.upsert_host(c2, DomainId("C")).has_value());
    CHECK(db.host_domain("C2") == DomainId("C"));
    HostId moved{"C2", PortRef::parse("B.1:11")};
    CHECK(db.upsert_host(moved, DomainId("B")) == DomainId("C"));
    // a late removal from the previous owner must not erase the new mapping
    CHECK_FALSE(db.remove_host("C2", DomainId("C")));
    CHECK(db.host_domain("C2") == DomainId("B"));
    db.purge_domain(DomainId("B"));
    CHECK_FALSE(db.host_domain("C2").has_value());
}

TEST_CASE("monitoring samples keep the latest per reporter and pair") {
    auto db = small_db();
    MonitoringSample s;
    s.reporter = DomainId("B");
    s.pair = {PortRef::parse("B.1:2"), PortRef::parse("B.2:2")};
    s.latency_ms = 2;
    s.available_mbps = 100;
    s.timestamp = 2000;
    CHECK(db.record_sample(s));
    auto older = s;
    older.timestamp = 1000;
    CHECK_FALSE(db.record_sample(older));
    auto newer = s;
    newer.timestamp = 4000;
    newer.latency_ms = 3;
    CHECK(db.record_sample(newer));
    CHECK(db.latest_monitoring(DomainId("B"), s.pair)->latency_ms == doctest::Approx(3));
    db.purge_domain(DomainId("B"));
    CHECK_FALSE(db.latest_monitoring(DomainId("B"), s.pair).has_value());
}

TEST_CASE("domain graph follows advertised peering status") {
    ExtendedDatabase db(DomainId("A"));
    auto ab = LinkKey::parse("A.2:2>B.1:2");
    auto bc = LinkKey::parse("B.2:2>C.2:2");
    auto ac = LinkKey::parse("A.2:3>C.2:3");
    db.set_connectivity(DomainId("A"), {{DomainId("B"), ab, true, false}, {DomainId("C"), ac, true, true}});
    db.set_connectivity(DomainId("B"), {{DomainId("A"), ab.reversed(), true, false}, {DomainId("C"), bc, true, false}});
    db.set_connectivity(DomainId("C"), {{DomainId("B"), bc.reversed(), true, false}, {DomainId("A"), ac.reversed(), true, true}});
    CHECK(db.domain_edges().size() == 3);
    CHECK(db.reachable_domains(true).count(DomainId("C")));
    db.set_connectivity(DomainId("B"), {{DomainId("A"), ab.reversed(), true, false}, {DomainId("C"), bc, false, false}});
    CHECK_FALSE(db.reachable_domains(true).count(DomainId("C")));
    CHECK(db.reachable_domains(false).count(DomainId("C")));
}
