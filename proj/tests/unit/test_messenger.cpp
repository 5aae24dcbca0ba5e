#include <doctest.h>

#include <cmath>
#include <memory>
#include <random>

#include "disco/messenger/messenger.hpp"
#include "disco/messenger/mlldp.hpp"
#include "disco/messenger/topic.hpp"

using namespace disco;
using namespace disco::messenger;

namespace {

MlldpFrame sample_frame() {
    MlldpFrame f;
    f.controller_id = "A";
    f.switch_id = 2;
    f.switch_port = 3;
    f.server_ip = {10, 0, 0, 1};
    f.server_port = 5672;
    f.server_name = "disco";
    return f;
}

// Point-to-point links with fixed integer latency; frames on a cut link are
// lost at send and at arrival.
class Wire : public Transport {
public:
    explicit Wire(sim::EventLoop& loop) : loop_(loop) {}

    std::map<DomainId, Messenger*> nodes;
    std::map<LinkKey, SimTime> latency;
    std::set<LinkKey> cut;
    std::vector<std::pair<LinkKey, std::string>> carried;

    void connect(const char* text, SimTime ms) {
        auto key = LinkKey::parse(text);
        latency[key] = ms;
        latency[key.reversed()] = ms;
    }
    void sever(const char* text) {
        auto key = LinkKey::parse(text);
        cut.insert(key);
        cut.insert(key.reversed());
    }

    void send_frame(const DomainId&, const LinkKey& link, std::vector<std::uint8_t> frame) override {
        carry(link, [this, link, frame] { nodes.at(link.to.node.domain)->receive_frame(link, frame); });
    }
    void send_envelope(const LinkKey& link, Envelope envelope) override {
        carried.emplace_back(link, envelope.label());
        carry(link, [this, link, envelope] { nodes.at(link.to.node.domain)->receive_envelope(link, envelope); });
    }

private:
    void carry(const LinkKey& link, std::function<void()> fn) {
        if (cut.count(link)) {
            return;
        }
        loop_.schedule_in(latency.at(link), sim::EventKind::frame_delivery, [this, link, fn] {
            if (!cut.count(link)) {
                fn();
            }
        });
    }

    sim::EventLoop& loop_;
};

struct Federation {
    sim::EventLoop loop;
    sim::Trace trace;
    Wire wire{loop};
    std::map<DomainId, std::unique_ptr<Messenger>> m;
    std::map<DomainId, std::vector<std::string>> delivered;
    std::map<DomainId, std::vector<std::string>> lost;

    Messenger& add(const char* id) {
        DomainId d(id);
        auto& slot = m[d];
        slot = std::make_unique<Messenger>(d, loop, trace, wire);
        wire.nodes[d] = slot.get();
        slot->on_deliver = [this, d](const BusMessage& msg) {
            delivered[d].push_back(msg.topic.str() + "@" + std::to_string(loop.now()));
        };
        slot->on_member_lost = [this, d](const DomainId& gone) {
            lost[d].push_back(gone.str() + "@" + std::to_string(loop.now()));
        };
        return *slot;
    }
    Messenger& operator[](const char* id) { return *m.at(DomainId(id)); }
    void start(const char* id, std::vector<const char*> borders) {
        std::vector<LinkKey> keys;
        for (auto b : borders) {
            keys.push_back(LinkKey::parse(b));
        }
        (*this)[id].start(keys);
    }
    bool logged(const std::string& line) const {
        const auto& lines = trace.lines();
        return std::find(lines.begin(), lines.end(), line) != lines.end();
    }
};

// A-B and B-C at 5 ms, A-C at 10 ms.
void triangle(Federation& f, bool with_ac = true) {
    f.add("A");
    f.add("B");
    f.add("C");
    f.wire.connect("A.2:2>B.1:2", 5);
    f.wire.connect("B.2:2>C.2:2", 5);
    if (with_ac) {
        f.wire.connect("A.2:3>C.2:3", 10);
    }
    for (const char* d : {"A", "B", "C"}) {
        f[d].subscribe(Topic("test", "*", "*"));
    }
    f.start("A", with_ac ? std::vector<const char*>{"A.2:2>B.1:2", "A.2:3>C.2:3"}
                         : std::vector<const char*>{"A.2:2>B.1:2"});
    f.start("B", {"B.1:2>A.2:2", "B.2:2>C.2:2"});
    f.start("C", with_ac ? std::vector<const char*>{"C.2:2>B.2:2", "C.2:3>A.2:3"}
                         : std::vector<const char*>{"C.2:2>B.2:2"});
}

}  // namespace

TEST_CASE("M-LLDP frames are 60 bytes and decode to what was encoded") {
    auto frame = sample_frame();
    auto bytes = encode_mlldp(frame);
    CHECK(bytes.size() == kMlldpFrameSize);
    CHECK(decode_mlldp(bytes) == frame);
    // custom TLV: type 127 in the top 7 bits of offset 14, OUI, subtype
    CHECK((bytes[14] >> 1) == kCustomTlvType);
    CHECK(bytes[16] == 0x00);
    CHECK(bytes[17] == 0x26);
    CHECK(bytes[18] == 0xE1);
    CHECK(bytes[19] == kMessengerSubtype);
}

TEST_CASE("M-LLDP decoding rejects foreign OUI, subtype and short input") {
    auto bytes = encode_mlldp(sample_frame());
    auto wrong_oui = bytes;
    wrong_oui[17] = 0x27;
    CHECK_THROWS_AS(decode_mlldp(wrong_oui), MlldpDecodeError);
    auto wrong_subtype = bytes;
    wrong_subtype[19] = 0x18;
    try {
        decode_mlldp(wrong_subtype);
        FAIL("accepted a foreign subtype");
    } catch (const MlldpDecodeError& e) {
        CHECK(e.position() == 19);
    }
    std::vector<std::uint8_t> short_frame(bytes.begin(), bytes.begin() + 59);
    CHECK_THROWS_AS(decode_mlldp(short_frame), MlldpDecodeError);
}

TEST_CASE("M-LLDP encoding refuses fields that do not fit") {
    auto frame = sample_frame();
    frame.controller_id = std::string(kMlldpControllerIdWidth + 1, 'x');
    CHECK_THROWS_AS(encode_mlldp(frame), MlldpEncodeError);
    frame = sample_frame();
    frame.server_name = std::string(kMlldpServerNameWidth + 1, 'x');
    CHECK_THROWS_AS(encode_mlldp(frame), MlldpEncodeError);
}

TEST_CASE("M-LLDP round-trips random valid frames") {
    std::mt19937 rng(11);
    auto text = [&](std::size_t max) {
        static const std::string alphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789_-";
        std::string s(1 + rng() % max, ' ');
        for (auto& c : s) {
            c = alphabet[rng() % alphabet.size()];
        }
        return s;
    };
    for (int i = 0; i < 1000; ++i) {
        MlldpFrame f;
        f.controller_id = text(kMlldpControllerIdWidth);
        f.switch_id = static_cast<std::uint16_t>(rng());
        f.switch_port = static_cast<std::uint16_t>(rng());
        for (auto& b : f.server_ip) {
            b = static_cast<std::uint8_t>(rng());
        }
        f.server_port = static_cast<std::uint16_t>(rng());
        f.server_name = text(kMlldpServerNameWidth);
        f.ttl_s = static_cast<std::uint16_t>(rng());
        auto bytes = encode_mlldp(f);
        REQUIRE(bytes.size() == kMlldpFrameSize);
        REQUIRE(decode_mlldp(bytes) == f);
    }
}

TEST_CASE("topic patterns match segment by segment") {
    CHECK(matches(Topic::parse("monitoring.*.*"), Topic::parse("monitoring.B.2s")));
    CHECK(matches(Topic::parse("*.reserve.*"), Topic::parse("C.reserve.setup")));
    CHECK_FALSE(matches(Topic::parse("monitoring.A.*"), Topic::parse("monitoring.B.2s")));
    CHECK_FALSE(matches(Topic::parse("A.*.*"), Topic::parse("AB.reserve.setup")));
    CHECK(Topic::parse("a.b.c").str() == "a.b.c");
    CHECK_THROWS_AS(Topic::parse("a.b"), TopicError);
    CHECK_THROWS_AS(Topic::parse("a.b.c.d"), TopicError);
    CHECK_THROWS_AS(Topic::parse("a..c"), TopicError);
}

TEST_CASE("publications are charged to their category") {
    CHECK(category_of(Topic::parse("monitoring.A.2s")) == "monitoring");
    CHECK(category_of(Topic::parse("C.reserve.setup")) == "reservation");
    CHECK(category_of(Topic::parse("general.leave.A")) == "bus");
    Envelope ka{DomainId("A"), KeepAlive{7}};
    CHECK(ka.category() == "bus");
    CHECK(ka.bytes() == std::string(R"({"keepalive":7})").size());
}

TEST_CASE("neighbors pair through discovery and learn each other's subscriptions") {
    Federation f;
    triangle(f);
    f.loop.run_until(200);
    for (const char* d : {"A", "B", "C"}) {
        CHECK(f[d].up_peers().size() == 2);
    }
    // discovery frame one way, then the subscription sync back
    CHECK(f.logged("10 PEERUP A B"));
    CHECK(f.logged("20 PEERUP A C"));
    auto remote = f["A"].remote_subscriptions();
    CHECK(remote.count(DomainId("B")));
    CHECK(remote.count(DomainId("C")));
}

TEST_CASE("a publication reaches every subscriber exactly once") {
    Federation f;
    triangle(f);
    f.loop.run_until(1000);
    f.loop.schedule(1000, sim::EventKind::timer, [&] { f["A"].publish(Topic("test", "A", "x"), {{"v", 1}}); });
    f.loop.run_until(2000);
    CHECK(f.delivered[DomainId("A")] == std::vector<std::string>{"test.A.x@1000"});
    CHECK(f.delivered[DomainId("B")] == std::vector<std::string>{"test.A.x@1005"});
    // direct A-C (10 ms) ties with the relay through B (5 + 5 ms); only one copy counts
    CHECK(f.delivered[DomainId("C")] == std::vector<std::string>{"test.A.x@1010"});
}

TEST_CASE("excluded links are never used to relay a publication") {
    Federation f;
    triangle(f);
    f.loop.run_until(1000);
    auto ac = LinkKey::parse("A.2:3>C.2:3").canonical();
    f.wire.carried.clear();
    f.loop.schedule(1000, sim::EventKind::timer, [&] { f["A"].publish(Topic("test", "A", "x"), {}, {ac}); });
    f.loop.run_until(1020);
    for (const auto& [link, label] : f.wire.carried) {
        if (label == "test.A.x") {
            CHECK(link.canonical() != ac);
        }
    }
    CHECK(f.delivered[DomainId("C")] == std::vector<std::string>{"test.A.x@1010"});
}

TEST_CASE("subscriptions propagate across a relay") {
    Federation f;
    triangle(f, false);
    f.loop.run_until(1000);
    CHECK_FALSE(f["A"].is_up(DomainId("C")));
    CHECK(f["A"].routes_to(DomainId("C")) == std::set<DomainId>{DomainId("B")});
    f.loop.schedule(1000, sim::EventKind::timer, [&] { f["A"].publish(Topic("test", "A", "x"), {}); });
    f.loop.run_until(1100);
    CHECK(f.delivered[DomainId("C")] == std::vector<std::string>{"test.A.x@1010"});
}

TEST_CASE("three missed keep-alives declare the peer down 1500 ms after it fell silent") {
    Federation f;
    f.add("A");
    f.add("B");
    f.wire.connect("A.2:2>B.1:2", 5);
    f.start("A", {"A.2:2>B.1:2"});
    f.start("B", {"B.1:2>A.2:2"});
    const SimTime silenced = 10000;
    f.loop.schedule(silenced, sim::EventKind::scenario_action, [&] { f["B"].kill(); });
    f.loop.run_until(20000);
    CHECK(f.logged(std::to_string(silenced + 1500) + " PEERDOWN A B"));
    CHECK_FALSE(f.logged(std::to_string(silenced + 1000) + " PEERDOWN A B"));
    CHECK(f.lost[DomainId("A")] == std::vector<std::string>{"B@" + std::to_string(silenced + 1500)});
    CHECK_FALSE(f["A"].peer(DomainId("B")).has_value());
}

TEST_CASE("losing a relay withdraws the owners reached through it") {
    Federation f;
    triangle(f, false);
    f.loop.run_until(1000);
    f.wire.sever("A.2:2>B.1:2");
    f.loop.run_until(5000);
    // A loses B and, with it, its only route to C
    CHECK(f.lost[DomainId("A")].size() == 2);
    CHECK(f["A"].routes_to(DomainId("C")).empty());
    CHECK(f["C"].routes_to(DomainId("A")).empty());
}

TEST_CASE("a leaving member announces itself and stops") {
    Federation f;
    triangle(f);
    f["B"].subscribe(Topic("general", "*", "*"));
    f.loop.run_until(1000);
    f.delivered.clear();
    f.loop.schedule(1000, sim::EventKind::scenario_action, [&] { f["A"].leave(); });
    f.loop.run_until(1100);
    CHECK(f["A"].departed());
    CHECK(f.delivered[DomainId("B")] == std::vector<std::string>{"general.leave.A@1005"});
    CHECK(f["A"].up_peers().empty());
}
