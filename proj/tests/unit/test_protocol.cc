#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "detmac/formal.h"
#include "detmac/protocol.h"
#include "detmac/scenario_file.h"
#include "detmac/simulator.h"

using namespace detmac;

namespace {

NodeId id(int v) { return NodeId(static_cast<std::uint16_t>(v)); }

std::vector<std::string> labels_of(const std::vector<TraceStep>& steps)
{
    std::vector<std::string> out;
    for (const auto& s : steps)
        out.push_back(s.label);
    return out;
}

const AssociationRecord* record_of(const MetricsBundle& m, NodeId n)
{
    for (const auto& r : m.associations)
        if (r.node == n)
            return &r;
    return nullptr;
}

bool contains(const std::vector<std::string>& v, std::string_view s)
{
    return std::find(v.begin(), v.end(), s) != v.end();
}

NetModel model(const char* name)
{
    return load_net(std::string(DETMAC_MODEL_DIR) + "/" + name);
}

const char* kStar = R"(
[network]
node 0 supercoordinator
node 1 coordinator parent=0
node 10 leaf parent=1
node 11 leaf parent=1
[schedule]
cap slot=12
)";

}  // namespace

TEST_CASE("leaf with a PDS associates deterministically")
{
    for (int level = 0; level <= 3; ++level) {
        for (Tick on : {0, 8, 136, 520}) {
            auto s = parse_scenario(std::string(kStar) + "pds 10 level=" + std::to_string(level) +
                                    "\n[run]\npreassociate 1\nsuperframes 40\nstop_when_associated yes\npower_on 10 tick=" +
                                    std::to_string(on) + "\n");
            auto m = run(s);
            const auto* r = record_of(m, id(10));
            REQUIRE(r != nullptr);
            CHECK(r->deterministic);
            CHECK(r->requests_sent == 1);
            CHECK(r->power_on == on);
            CHECK(m.frames.collided == 0);
            CHECK(m.csma_failures == 0);
            // parent beacon, then the PDS, then the response in a later beacon
            const Tick sf = 128;
            CHECK(r->latency() <= sf * ((Tick{1} << level) + 2));
            auto l = labels_of(m.association_traces.at(id(10)));
            CHECK(l.front() == "power_on");
            CHECK(contains(l, "sync"));
            CHECK(contains(l, "send_request"));
            CHECK(l.back() == "receive_response");
        }
    }
}

TEST_CASE("leaf without a PDS goes through the CAP")
{
    auto s = parse_scenario(std::string(kStar) + "[run]\npreassociate 1\nsuperframes 40\nstop_when_associated yes\n"
                                                 "power_on 10 tick=16\n");
    auto m = run(s);
    const auto* r = record_of(m, id(10));
    REQUIRE(r != nullptr);
    CHECK_FALSE(r->deterministic);
    auto l = labels_of(m.association_traces.at(id(10)));
    CHECK(contains(l, "cap_request"));
    CHECK(l.back() == "receive_response");
    CHECK(m.frames.conserved());
}

TEST_CASE("coordinator association through its PDS, every traced step replays on the model")
{
    auto net = model("association_coordinator.net");
    for (int level = 0; level <= 3; ++level) {
        auto s = coordinator_association_scenario(3, 3, level, 8 * 37);
        auto m = run(s);
        const auto* r = record_of(m, id(1));
        REQUIRE(r != nullptr);
        CHECK(pds_latency_bounds(BeaconOrder(3), level).contains(r->latency()));
        auto l = labels_of(m.association_traces.at(id(1)));
        CHECK(replay(net, l) == std::nullopt);
    }
}

TEST_CASE("leaf traces with grants and restarts replay on the leaf model")
{
    auto net = model("association_leaf.net");
    auto s = parse_scenario(std::string(kStar) + "pds 10 level=1\n[traffic]\nrequest 10 level=2 at=6\n"
                                                 "[run]\npreassociate 1\nsuperframes 30\npower_on 10 tick=40\n"
                                                 "restart 10 at=14\n");
    auto m = run(s);
    auto l = labels_of(m.association_traces.at(id(10)));
    CHECK(contains(l, "leave"));
    CHECK(std::count(l.begin(), l.end(), "power_on") == 2);
    CHECK(replay(net, l) == std::nullopt);
    // the grant shows up in the grant log
    CHECK(std::any_of(m.grants.begin(), m.grants.end(), [](const GrantRecord& g) { return g.requester == id(10) && g.granted; }));
}

TEST_CASE("coordinator desynchronizes after missed superbeacons and resynchronizes")
{
    auto s = parse_scenario(std::string(kStar) + "pds 1 level=0\n[radio]\noutage 1 from=5 count=4\n"
                                                 "[run]\npower_on 1 tick=0\nsuperframes 16\n");
    auto m = run(s);
    auto l = labels_of(m.association_traces.at(id(1)));
    CHECK(contains(l, "desync"));
    CHECK(contains(l, "resync"));
    CHECK(replay(model("association_coordinator.net"), l) == std::nullopt);
    CHECK(m.frames.conserved());
}

TEST_CASE("a replayed trace with an impossible step is rejected")
{
    auto net = model("association_leaf.net");
    std::vector<std::string> bad{"power_on", "pds_data"};
    CHECK(replay(net, bad) == 1u);
    std::vector<std::string> foreign{"power_on", "retry", "sync"};
    CHECK(replay(net, foreign) == std::nullopt);
}

TEST_CASE("GTS requests through the CAP are granted and used")
{
    auto s = parse_scenario(std::string(kStar) + "[traffic]\nrequest 11 level=0 at=2\nflow 11 every=1 bytes=20 start=6\n"
                                                 "[run]\npreassociate 1\npreassociate 11\nsuperframes 12\n");
    auto m = run(s);
    REQUIRE(m.grants.size() == 1);
    CHECK(m.grants[0].granted);
    CHECK(m.frames_by_type[FrameType::Data].delivered >= 5);
    CHECK(m.frames.conserved());
}

TEST_CASE("grant cap denies with policy")
{
    auto s = parse_scenario(std::string(kStar) + "grant_cap 1\n[traffic]\nrequest 11 level=0 at=2 count=2\n"
                                                 "[run]\npreassociate 1\npreassociate 11\nsuperframes 12\n");
    auto m = run(s);
    REQUIRE(m.grants.size() == 2);
    CHECK(m.grants[0].granted);
    CHECK_FALSE(m.grants[1].granted);
    CHECK(m.grants[1].reason == "POLICY");
}

TEST_CASE("SGTS negotiation outcomes")
{
    std::map<NodeId, PowerObservation> c1{{id(10), {-60.0, 5}}, {id(20), {-80.0, 5}}};
    std::map<NodeId, PowerObservation> c2{{id(20), {-62.0, 5}}, {id(10), {-77.0, 6}}};
    auto ok = negotiate_sgts(id(1), c1, id(2), c2, id(10), id(20), 10.0, 6, 4);
    REQUIRE(std::holds_alternative<CaptureEvidence>(ok));
    CHECK(std::get<CaptureEvidence>(ok).two_sided());
    CHECK(std::get<CaptureEvidence>(ok).valid(6, 4));

    c2[id(10)].dbm = -70.0;
    auto weak = negotiate_sgts(id(1), c1, id(2), c2, id(10), id(20), 10.0, 6, 4);
    REQUIRE(std::holds_alternative<SgtsRejection>(weak));
    CHECK(std::get<SgtsRejection>(weak).coordinator == id(2));
    CHECK(std::get<SgtsRejection>(weak).delta_db == doctest::Approx(8.0));

    c1.erase(id(20));
    auto missing = negotiate_sgts(id(1), c1, id(2), c2, id(10), id(20), 10.0, 6, 4);
    REQUIRE(std::holds_alternative<SgtsRejection>(missing));
    CHECK(std::get<SgtsRejection>(missing).coordinator == id(1));
    CHECK(std::isnan(std::get<SgtsRejection>(missing).delta_db));
}

TEST_CASE("slot map follows the coordinator superframe")
{
    std::vector<SlotAnnouncement> sched;
    sched.push_back({make_superbeacon(id(0)), std::nullopt});
    sched.push_back({make_gbs(id(1), SlotIndex(5)), std::nullopt});
    sched.push_back({make_reservation(AssignmentKind::Gts, id(10), SlotIndex(2), ReservationLevel(1), 1), std::nullopt});
    sched.push_back({make_reservation(AssignmentKind::Pds, id(11), SlotIndex(7), ReservationLevel(0), 0), 4});
    auto map = build_slot_map(sched, 2, SlotIndex(5));
    CHECK(map[0].slot.value() == 5);
    CHECK(map[0].kind == AssignmentKind::Gbs);
    CHECK(map[0].superframe == 2);
    // slot 0 and slot 2 belong to the next superframe
    CHECK(map[11].slot.value() == 0);
    CHECK(map[11].superframe == 3);
    CHECK(map[11].kind == AssignmentKind::SuperBeacon);
    CHECK(map[13].kind == AssignmentKind::Gts);
    CHECK(map[2].kind == AssignmentKind::Pds);
    auto later = build_slot_map(sched, 5, SlotIndex(5));
    CHECK_FALSE(later[2].kind.has_value());
    CHECK_FALSE(later[13].kind.has_value());
}
