#include <doctest.h>

#include <numeric>

#include "detmac/scenario_file.h"
#include "detmac/simulator.h"

using namespace detmac;

namespace {

NodeId id(int v) { return NodeId(static_cast<std::uint16_t>(v)); }

const char* kBase = R"(
[network]
node 0 supercoordinator
node 1 coordinator parent=0
node 2 coordinator parent=0
node 10 leaf parent=1
node 11 leaf parent=1
node 20 leaf parent=2
[schedule]
pds 10 level=1
pds 20 level=2
cap slot=14
)";

Scenario busy(std::uint64_t seed)
{
    auto s = parse_scenario(std::string(kBase) + R"(
[traffic]
flow 11 every=1 bytes=40 mode=cap start=2
flow 10 every=2 bytes=20 start=6
request 20 level=1 at=10
[run]
preassociate 1
preassociate 2
power_on 10 tick=random
power_on 11 tick=random
power_on 20 tick=random
superframes 30
)");
    s.seed = seed;
    return s;
}

}  // namespace

TEST_CASE("histogram of equal samples is one full bin")
{
    std::vector<Tick> v(7, 200);
    auto h = latency_histogram(v, 128);
    REQUIRE(h.size() == 1);
    CHECK(h[0].lower == 128);
    CHECK(h[0].upper == 256);
    CHECK(h[0].count == 7);
    CHECK(h[0].proportion == 1.0);
    CHECK(latency_histogram(std::vector<Tick>{}, 128).empty());
}

TEST_CASE("histogram bins are aligned and proportions sum to one")
{
    std::vector<Tick> v{136, 140, 255, 256, 700, 1152};
    auto h = latency_histogram(v, 128);
    REQUIRE(h.size() == 9);
    double sum = 0.0;
    std::int64_t count = 0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        CHECK(h[i].lower == 128 * static_cast<Tick>(i + 1));
        CHECK(h[i].upper - h[i].lower == 128);
        sum += h[i].proportion;
        count += h[i].count;
    }
    CHECK(sum == doctest::Approx(1.0));
    CHECK(count == 6);
    CHECK(nonempty_bins(h) == 4);
}

TEST_CASE("analytic PDS latency bounds")
{
    CHECK(pds_latency_bounds(BeaconOrder(3), 0).lower == 136);
    CHECK(pds_latency_bounds(BeaconOrder(3), 0).upper == 256);
    CHECK(pds_latency_bounds(BeaconOrder(3), 1).upper == 384);
    CHECK(pds_latency_bounds(BeaconOrder(3), 2).upper == 640);
    CHECK(pds_latency_bounds(BeaconOrder(3), 3).upper == 1152);
    CHECK(pds_latency_bounds(BeaconOrder(0), 0).lower == 17);
    CHECK(pds_latency_bounds(BeaconOrder(0), 0).upper == 32);
}

TEST_CASE("idle network only carries beacons")
{
    auto s = parse_scenario(R"(
[network]
node 0 supercoordinator
node 1 coordinator parent=0
[run]
preassociate 1
superframes 10
)");
    auto m = run(s);
    CHECK(m.superframes_run == 10);
    CHECK(m.frames.transmitted == 20);
    CHECK(m.frames_by_type[FrameType::SuperBeacon].transmitted == 10);
    CHECK(m.frames_by_type[FrameType::Beacon].transmitted == 10);
    CHECK(m.frames.delivered == 20);
    CHECK(m.end_tick == 1280);
}

TEST_CASE("same seed gives the same metrics, different seeds differ")
{
    auto a = run(busy(4));
    auto b = run(busy(4));
    CHECK(a == b);
    auto c = run(busy(5));
    std::vector<Tick> pa, pc;
    for (const auto& r : a.associations)
        pa.push_back(r.power_on);
    for (const auto& r : c.associations)
        pc.push_back(r.power_on);
    CHECK(pa != pc);
}

TEST_CASE("frames are conserved under contention and loss")
{
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        auto s = busy(seed);
        s.frame_error_rate = 0.1 * static_cast<double>(seed % 4);
        auto m = run(s);
        CHECK(m.frames.conserved());
        for (const auto& [type, c] : m.frames_by_type)
            CHECK(c.conserved());
        if (seed % 4 != 0)
            CHECK(m.frames.lost > 0);
    }
}

TEST_CASE("PDS holders always associate on an ideal medium")
{
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
        auto m = run(busy(seed));
        for (NodeId n : {id(10), id(20)}) {
            bool found = false;
            for (const auto& r : m.associations)
                if (r.node == n) {
                    found = true;
                    CHECK(r.deterministic);
                    CHECK(r.requests_sent == 1);
                }
            CHECK(found);
        }
    }
}

TEST_CASE("trace ring keeps the most recent events")
{
    auto s = busy(2);
    s.trace_capacity = 16;
    std::vector<TraceRecord> all;
    RunOptions opt;
    opt.sink = [&](const TraceRecord& r) { all.push_back(r); };
    auto m = run(s, opt);
    REQUIRE(m.trace.size() == 16);
    REQUIRE(all.size() > 16);
    CHECK(m.trace.back() == all.back());
    CHECK(m.trace.front() == all[all.size() - 16]);
    for (std::size_t i = 1; i < all.size(); ++i)
        CHECK(all[i - 1].tick <= all[i].tick);
}

TEST_CASE("invalid scenarios are rejected before running")
{
    auto s = busy(1);
    s.nodes.push_back({id(5), NodeRole::Supercoordinator, std::nullopt});
    CHECK_THROWS_AS(run(s), ScenarioError);
}

TEST_CASE("association sweep stays inside the bounds")
{
    for (int n = 0; n <= 3; ++n) {
        AssociationSweepConfig cfg;
        cfg.pds_level = n;
        cfg.trials = 300;
        cfg.seed = 9;
        auto r = sweep_association(cfg);
        CHECK(r.latencies.size() == 300);
        CHECK(r.out_of_bounds == 0);
        CHECK(r.incomplete == 0);
        CHECK(r.retransmissions == 0);
        CHECK(r.frames.conserved());
        for (Tick t : r.latencies)
            CHECK(r.bounds.contains(t));
    }
    AssociationSweepConfig one;
    one.trials = 1;
    auto r = sweep_association(one);
    CHECK(r.latencies.size() == 1);
    CHECK(r.bounds.contains(r.latencies[0]));
}

TEST_CASE("exhaustive power-on sweep reaches both bound edges at level 0")
{
    Tick lo = 1 << 30;
    Tick hi = 0;
    for (Tick on = 0; on < 128 * 8; on += 8) {
        auto m = run(coordinator_association_scenario(3, 3, 0, on));
        REQUIRE(m.associations.size() == 1);
        lo = std::min(lo, m.associations[0].latency());
        hi = std::max(hi, m.associations[0].latency());
    }
    CHECK(lo == 136);
    CHECK(hi == 256);
}

TEST_CASE("contention run: PDS is collision free")
{
    ContentionConfig cfg;
    cfg.trials = 60;
    cfg.use_pds = true;
    auto r = run_contention(cfg);
    CHECK(r.incomplete == 0);
    CHECK(r.out_of_bounds == 0);
    CHECK(r.pds_frames.collided == 0);
    CHECK(r.trials_conserved == 60);

    cfg.use_pds = false;
    auto c = run_contention(cfg);
    CHECK(c.trials_conserved == 60);
    CHECK(c.frames.collided > 0);
}
