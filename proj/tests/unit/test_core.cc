#include <doctest.h>

#include <random>

#include "detmac/core.h"
#include "oracles.h"

using namespace detmac;

namespace {

NodeId id(int v) { return NodeId(static_cast<std::uint16_t>(v)); }

std::vector<NodeInfo> two_stars()
{
    return {{id(0), NodeRole::Supercoordinator, std::nullopt},
            {id(1), NodeRole::Coordinator, id(0)},
            {id(2), NodeRole::Coordinator, id(0)},
            {id(10), NodeRole::Leaf, id(1)},
            {id(20), NodeRole::Leaf, id(2)}};
}

}  // namespace

TEST_CASE("slot index wraps and rejects out of range values")
{
    CHECK((SlotIndex(15) + 1).value() == 0);
    CHECK((SlotIndex(3) + -5).value() == 14);
    CHECK_THROWS_AS(SlotIndex(16), std::out_of_range);
    CHECK_THROWS_AS(SlotIndex(-1), std::out_of_range);
}

TEST_CASE("beacon order timing")
{
    CHECK(BeaconOrder(0).slot_ticks() == 1);
    CHECK(BeaconOrder(3).slot_ticks() == 8);
    CHECK(BeaconOrder(3).superframe_ticks() == 128);
    CHECK(BeaconOrder(14).superframe_ticks() == 16 * 16384);
    CHECK_THROWS(BeaconOrder(15));
    CHECK(ReservationLevel(3).period() == 8);
}

TEST_CASE("occupancy follows k mod 2^n == phase")
{
    auto a = make_reservation(AssignmentKind::Gts, id(10), SlotIndex(4), ReservationLevel(2), 3);
    for (SuperframeCounter k = 0; k < 32; ++k)
        CHECK(occupies(a, k) == (k % 4 == 3));
    // phases are reduced modulo the period
    auto b = make_reservation(AssignmentKind::Gts, id(10), SlotIndex(4), ReservationLevel(1), 5);
    CHECK(b.phase == 1);
}

TEST_CASE("closed-form overlap agrees with instance enumeration")
{
    const int nmax = 4;
    std::vector<SlotAssignment> shapes;
    for (int slot : {1, 2, 3})
        for (int n = 0; n <= 3; ++n)
            for (std::int64_t ph = 0; ph < (1 << n); ++ph)
                for (int len : {1, 2})
                    shapes.push_back(make_reservation(AssignmentKind::Gts, id(10), SlotIndex(slot),
                                                      ReservationLevel(n), ph, len));
    int checked = 0;
    for (const auto& a : shapes)
        for (const auto& b : shapes) {
            REQUIRE(instances_overlap(a, b) == oracle::overlap(a, b, nmax));
            ++checked;
        }
    CHECK(checked == static_cast<int>(shapes.size() * shapes.size()));
}

TEST_CASE("assignment validation")
{
    CHECK_NOTHROW(validate(make_superbeacon(id(0)), 3));
    CHECK_NOTHROW(validate(make_gbs(id(1), SlotIndex(5)), 3));
    CHECK_THROWS_AS(validate(make_reservation(AssignmentKind::Gts, id(10), SlotIndex(1), ReservationLevel(4), 0), 3),
                    std::invalid_argument);
    CHECK_THROWS_AS(validate(make_reservation(AssignmentKind::Gts, id(10), SlotIndex(15), ReservationLevel(0), 0, 2), 3),
                    std::invalid_argument);
    auto sg = make_sgts(id(10), id(10), SlotIndex(3), ReservationLevel(1), 0);
    CHECK_THROWS_AS(validate(sg, 3), std::invalid_argument);
    auto cap = make_cap(SlotIndex(9));
    CHECK(cap.owners.empty());
    CHECK_NOTHROW(validate(cap, 3));
}

TEST_CASE("coordinator superframe starts at its GBS slot")
{
    auto span = coordinator_superframe_span(SlotIndex(5));
    CHECK(span[0].value() == 5);
    CHECK(span[10].value() == 15);
    CHECK(span[11].value() == 0);
    CHECK(span[15].value() == 4);
}

TEST_CASE("interference relation is symmetric and reflexive")
{
    auto r = InterferenceRelation::none();
    CHECK(r.interferes(id(3), id(3)));
    CHECK_FALSE(r.interferes(id(3), id(4)));
    r.set(id(4), id(3), true);
    CHECK(r.interferes(id(3), id(4)));
    CHECK(r.interferes(id(4), id(3)));
    auto all = InterferenceRelation::all();
    all.set(id(1), id(2), false);
    CHECK_FALSE(all.interferes(id(2), id(1)));
    CHECK(all.interferes(id(1), id(3)));
}

TEST_CASE("topology queries")
{
    Topology t(two_stars());
    CHECK(t.violations().empty());
    CHECK(t.supercoordinator() == id(0));
    CHECK(t.coordinators() == std::vector<NodeId>{id(1), id(2)});
    CHECK(t.children(id(1)) == std::vector<NodeId>{id(10)});
    CHECK(t.star_of(id(20)) == id(2));
    CHECK(t.star_of(id(2)) == id(2));
    CHECK(t.star_of(id(0)) == id(0));
    CHECK_THROWS_AS(t.at(id(99)), std::out_of_range);
}

TEST_CASE("topology violations name the culprit")
{
    auto nodes = two_stars();
    nodes.push_back({id(5), NodeRole::Supercoordinator, std::nullopt});
    auto v = Topology(nodes).violations();
    REQUIRE(v.size() == 1);
    CHECK(v[0].find("duplicate supercoordinator: node 5") != std::string::npos);

    nodes = two_stars();
    nodes.push_back({id(30), NodeRole::Leaf, id(0)});
    v = Topology(nodes).violations();
    REQUIRE(v.size() == 1);
    CHECK(v[0].find("leaf 30") != std::string::npos);

    nodes = two_stars();
    nodes.erase(nodes.begin());
    CHECK_FALSE(Topology(nodes).violations().empty());

    std::vector<NodeInfo> many{{id(0), NodeRole::Supercoordinator, std::nullopt}};
    for (int c = 1; c <= 16; ++c)
        many.push_back({id(c), NodeRole::Coordinator, id(0)});
    v = Topology(many).violations();
    CHECK(std::any_of(v.begin(), v.end(), [](const std::string& s) { return s.find("at most 15") != std::string::npos; }));
}

TEST_CASE("conflict check agrees with the occupancy oracle on random tables")
{
    std::mt19937_64 rng(17);
    for (int round = 0; round < 200; ++round) {
        ScheduleTable table(id(0), 3);
        auto rel = InterferenceRelation::all();
        if (rng() % 2)
            rel = InterferenceRelation::none();
        for (int i = 0; i < 6; ++i) {
            int n = static_cast<int>(rng() % 4);
            auto a = make_reservation(AssignmentKind::Gts, id(10 + static_cast<int>(rng() % 4)),
                                      SlotIndex(1 + static_cast<int>(rng() % 5)), ReservationLevel(n),
                                      static_cast<std::int64_t>(rng() % 8), 1 + static_cast<int>(rng() % 2));
            table.add(a);
        }
        if (rng() % 3 == 0)
            table.add(make_cap(SlotIndex(2)));
        auto fast = conflict_check(table, rel);
        auto slow = oracle::conflicts(table, rel);
        REQUIRE(fast.size() == slow.size());
        for (std::size_t i = 0; i < fast.size(); ++i) {
            CHECK(fast[i].first == slow[i].first);
            CHECK(fast[i].second == slow[i].second);
        }
    }
}

TEST_CASE("schedule table lookup by instance")
{
    ScheduleTable t(id(0), 3);
    auto g = t.add(make_reservation(AssignmentKind::Gts, id(10), SlotIndex(3), ReservationLevel(1), 1, 2));
    CHECK(t.at(0, SlotIndex(0)).size() == 1);
    CHECK(t.at(1, SlotIndex(4)).size() == 1);
    CHECK(t.at(2, SlotIndex(4)).empty());
    CHECK(t.remove(g).owners.front() == id(10));
    CHECK_THROWS_AS(t.remove(g), std::out_of_range);
}
