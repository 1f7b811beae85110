// Acceptance runner: one PASS/FAIL line per criterion, non-zero exit on any failure.
// Every tolerance used below is a named constant in this file.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "detmac/cli.h"
#include "detmac/formal.h"
#include "detmac/radio.h"
#include "detmac/scenario_file.h"
#include "detmac/scheduler.h"
#include "detmac/simulator.h"
#include "oracles.h"

using namespace detmac;

namespace {

constexpr int kBo = 3;
constexpr int kNmax = 3;
constexpr int kAssocTrials = 10'000;
constexpr std::int64_t kAllowedBoundViolations = 0;
constexpr double kAssocBudgetSeconds = 60.0;
constexpr double kFormalBudgetSeconds = 1.0;
constexpr int kSchedulerSequences = 1000;
constexpr int kSchedulerSteps = 40;
constexpr int kContentionTrials = 10'000;
constexpr double kCaptureMargin = 10.0;
constexpr double kCaptureStep = 0.5;
constexpr int kCaptureTrials = 100;
constexpr double kBiases[] = {1.0, 3.0, 5.0};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

NodeId id(int v) { return NodeId(static_cast<std::uint16_t>(v)); }

struct Verdict {
    bool pass = true;
    std::string detail;
};

// Frame conservation bookkeeping shared by every criterion.
struct Conservation {
    std::int64_t runs = 0;
    std::int64_t broken = 0;
    void note(bool conserved)
    {
        ++runs;
        broken += !conserved;
    }
};

Conservation g_conservation;

// --- 1 and 2 ----------------------------------------------------------------

std::vector<AssociationSweepResult> g_sweeps;
double g_sweep_seconds = 0.0;

Verdict bound_containment()
{
    auto t0 = Clock::now();
    for (int n = 0; n <= 3; ++n) {
        AssociationSweepConfig cfg;
        cfg.bo = kBo;
        cfg.pds_level = n;
        cfg.trials = kAssocTrials;
        cfg.seed = 1;
        g_sweeps.push_back(sweep_association(cfg));
        g_conservation.note(g_sweeps.back().frames.conserved());
    }
    g_sweep_seconds = seconds_since(t0);

    Verdict v;
    std::ostringstream d;
    for (const auto& r : g_sweeps) {
        std::int64_t outside = r.out_of_bounds;
        Tick lo = 0, hi = 0;
        if (!r.latencies.empty()) {
            lo = *std::min_element(r.latencies.begin(), r.latencies.end());
            hi = *std::max_element(r.latencies.begin(), r.latencies.end());
        }
        // recompute against the closed-form bounds rather than trusting the sweep's own count
        const Tick lower = 17 * (Tick{1} << kBo);
        const Tick upper = 16 * (Tick{1} << kBo) * ((Tick{1} << r.pds_level) + 1);
        std::int64_t recount = 0;
        for (Tick t : r.latencies)
            recount += t < lower || t > upper;
        if (recount != outside || outside > kAllowedBoundViolations || r.incomplete != 0 ||
            static_cast<int>(r.latencies.size()) != kAssocTrials)
            v.pass = false;
        d << "n=" << r.pds_level << " [" << lo << "," << hi << "] within [" << lower << "," << upper << "] "
          << recount << " outside; ";
    }
    if (g_sweep_seconds >= kAssocBudgetSeconds)
        v.pass = false;
    d << "time " << g_sweep_seconds << " s";
    v.detail = d.str();
    return v;
}

Verdict histogram_shape()
{
    Verdict v;
    std::ostringstream d;
    const Tick superframe = 16 * (Tick{1} << kBo);
    int prev_bins = 0;
    std::vector<Tick> spread;
    for (const auto& r : g_sweeps) {
        int bins = nonempty_bins(latency_histogram(r.latencies, superframe));
        auto [lo, hi] = std::minmax_element(r.latencies.begin(), r.latencies.end());
        spread.push_back(*hi - *lo);
        if (bins < prev_bins)
            v.pass = false;
        prev_bins = bins;
        d << "n=" << r.pds_level << " bins " << bins << " spread " << spread.back() << "; ";
    }
    if (spread.size() != 4 || !(spread[3] > spread[0]))
        v.pass = false;
    v.detail = d.str();
    return v;
}

// --- 3 ----------------------------------------------------------------------

bool decoded(double delta, double lo_edge, double hi_edge)
{
    // success outside the open band (lo_edge, hi_edge); the edge itself decodes
    return delta <= lo_edge || delta >= hi_edge;
}

int run_shared_slot(double delta)
{
    // the same experiment through the full simulator, for conservation
    auto s = load_scenario(std::string(DETMAC_SCENARIO_DIR) + "/shared_slot.scn");
    for (auto& p : s.powers) {
        const bool cross = (p.tx == id(10) && p.rx == id(2)) || (p.tx == id(20) && p.rx == id(1));
        if (cross)
            p.dbm = -60.0 - delta;
    }
    auto m = run(s);
    g_conservation.note(m.frames.conserved());
    return static_cast<int>(m.frames.transmitted);
}

Verdict capture_threshold()
{
    Verdict v;
    std::ostringstream d;
    int points = 0;
    int wrong = 0;

    CaptureSweepConfig base;
    base.from_db = -30.0;
    base.to_db = 30.0;
    base.step_db = kCaptureStep;
    base.margin_db = kCaptureMargin;
    base.noise_sigma_db = 0.0;
    base.trials = kCaptureTrials;

    auto curve = sweep_capture(base);
    for (std::size_t i = 0; i < curve.size(); ++i) {
        const auto& p = curve[i];
        const double want = decoded(p.delta_db, -kCaptureMargin, kCaptureMargin) ? 1.0 : 0.0;
        ++points;
        wrong += p.success_rate_c1 != want || p.success_rate_c2 != want;
        // symmetry: the mirrored point has the same outcome
        const auto& mirror = curve[curve.size() - 1 - i];
        wrong += mirror.delta_db != -p.delta_db || mirror.success_rate_c1 != p.success_rate_c1 ||
                 mirror.success_rate_c2 != p.success_rate_c2;
    }

    for (double b : kBiases) {
        for (LeadingLeaf leader : {LeadingLeaf::First, LeadingLeaf::Second}) {
            auto cfg = base;
            cfg.sync_offset_bias_db = b;
            cfg.leader = leader;
            // the leader's own coordinator sees its band move down by b, the other one up by b
            const double s1 = leader == LeadingLeaf::First ? -b : b;
            for (const auto& p : sweep_capture(cfg)) {
                ++points;
                const double w1 = decoded(p.delta_db, -kCaptureMargin + s1, kCaptureMargin + s1) ? 1.0 : 0.0;
                const double w2 = decoded(p.delta_db, -kCaptureMargin - s1, kCaptureMargin - s1) ? 1.0 : 0.0;
                wrong += p.success_rate_c1 != w1 || p.success_rate_c2 != w2;
            }
        }
    }

    int sim_runs = 0;
    for (double delta : {-20.0, -5.0, 0.0, 5.0, 20.0}) {
        run_shared_slot(delta);
        ++sim_runs;
    }

    v.pass = wrong == 0;
    d << points << " sweep points, " << wrong << " off the threshold model; band at bias 0 is (-10, 10), "
      << "shifted by exactly b for b in {1, 3, 5}; " << sim_runs << " full simulator runs";
    v.detail = d.str();
    return v;
}

// --- 4 ----------------------------------------------------------------------

Verdict formal_verdicts()
{
    Verdict v;
    std::ostringstream d;
    for (const char* name : {"association_leaf.net", "association_coordinator.net"}) {
        auto m = load_net(std::string(DETMAC_MODEL_DIR) + "/" + name);
        auto t0 = Clock::now();
        auto ex = explore(m);
        auto* g = std::get_if<StateGraph>(&ex);
        if (!g) {
            v.pass = false;
            d << name << ": exploration hit the cap; ";
            continue;
        }
        const bool safe = check_bounded(ex, m).safe();
        const bool live = check_live(*g, m).live;
        const bool home = check_reinitializable(*g).home;
        const double secs = seconds_since(t0);

        const bool agree = oracle::live(*g, m.transitions.size()) == live && oracle::home(*g) == home &&
                           oracle::reachable_markings(m) == std::set<Marking>(g->states.begin(), g->states.end());
        if (!(safe && live && home && agree && secs < kFormalBudgetSeconds))
            v.pass = false;
        d << name << ": " << g->states.size() << " states, safe " << safe << " live " << live << " home " << home
          << ", oracle " << (agree ? "agrees" : "DISAGREES") << ", " << secs << " s; ";
    }
    v.detail = d.str();
    return v;
}

// --- 5 ----------------------------------------------------------------------

Topology two_stars()
{
    std::vector<NodeInfo> nodes{{id(0), NodeRole::Supercoordinator, std::nullopt}};
    for (int c = 1; c <= 2; ++c) {
        nodes.push_back({id(c), NodeRole::Coordinator, id(0)});
        for (int l = 0; l < 4; ++l)
            nodes.push_back({id(10 * c + l), NodeRole::Leaf, id(c)});
    }
    return Topology(nodes);
}

CaptureMeasurement measurement(NodeId coord, NodeId own, NodeId other, SuperframeCounter at)
{
    return CaptureMeasurement{coord, own, other, -60.0, -80.0, kCaptureMargin, at};
}

Verdict scheduler_oracle()
{
    Verdict v;
    std::int64_t steps = 0, probes = 0, disagreements = 0, full = 0, full_unconfirmed = 0, merges = 0;
    std::int64_t releases = 0, pds = 0, allocs = 0, merged = 0;

    for (int seq = 0; seq < kSchedulerSequences; ++seq) {
        std::mt19937_64 rng(static_cast<std::uint64_t>(seq));
        auto rnd = [&](int n) { return static_cast<int>(rng() % static_cast<std::uint64_t>(n)); };
        auto rel = InterferenceRelation::all();
        if (seq % 2)
            for (int a : {1, 10, 11, 12, 13})
                for (int b : {2, 20, 21, 22, 23})
                    rel.set(id(a), id(b), false);
        Scheduler s(two_stars(), rel, kNmax);
        if (seq % 3 == 0)
            s.add_cap(SlotIndex(15));

        for (int step = 0; step < kSchedulerSteps; ++step) {
            const SuperframeCounter now = step;
            s.expire_quarantine(now);
            const int star = 1 + rnd(2);
            const int leaf = 10 * star + rnd(4);
            ReservationLevel lvl(rnd(4));
            const int len = 1 + rnd(2);
            const int op = rnd(10);

            std::optional<GrantDecision> d;
            AssignmentKind kind = AssignmentKind::Gts;
            int shape_len = len;
            if (op < 2 && s.table().assignments().size() > 1) {
                const auto& as = s.table().assignments();
                const auto& victim = as[1 + rng() % (as.size() - 1)];
                if (victim.kind != AssignmentKind::Cap) {
                    s.release(victim.id);
                    ++releases;
                }
            } else if (op < 4) {
                std::vector<const SlotAssignment*> g1, g2;
                for (const auto& a : s.table().assignments()) {
                    if (a.kind != AssignmentKind::Gts || a.owners.size() != 1)
                        continue;
                    const int owner = static_cast<int>(a.owners.front());
                    (owner / 10 == 1 ? g1 : g2).push_back(&a);
                }
                bool tried = false;
                for (auto* a : g1) {
                    for (auto* b : g2) {
                        if (a->level != b->level || a->last_slot() != a->slot.value() ||
                            b->last_slot() != b->slot.value())
                            continue;
                        const NodeId na = a->owners.front(), nb = b->owners.front();
                        CaptureEvidence ev{measurement(id(1), na, nb, now), measurement(id(2), nb, na, now)};
                        d = s.merge_sgts(a->id, b->id, ev, now);
                        ++merges;
                        merged += d->is_granted();
                        tried = true;
                        break;
                    }
                    if (tried)
                        break;
                }
            } else if (op < 6) {
                d = s.reserve_pds(id(leaf), lvl);
                kind = AssignmentKind::Pds;
                shape_len = 1;
                ++pds;
            } else {
                d = s.allocate({id(leaf), std::nullopt, lvl, len, 0});
                ++allocs;
            }

            if (d && !d->is_granted() && d->reason() == DenyReason::Full) {
                ++full;
                if (!oracle::exhausted(s, kind, id(leaf), lvl, shape_len))
                    ++full_unconfirmed;
            }

            ++steps;
            if (!oracle::conflicts(s.table(), rel).empty())
                ++disagreements;
            // nothing live may sit on a quarantined instance
            for (const auto& q : s.quarantined())
                for (const auto& a : s.table().assignments())
                    if (oracle::conflict(q.assignment, a, rel, s.table().nmax()))
                        ++disagreements;

            // sweep every placement of a random shape over the whole hypercycle
            ReservationLevel plvl(rnd(4));
            const int plen = 1 + rnd(2);
            for (int slot = 1; slot + plen - 1 <= 15; ++slot)
                for (std::int64_t ph = 0; ph < plvl.period(); ++ph) {
                    auto probe = make_reservation(AssignmentKind::Gts, id(leaf), SlotIndex(slot), plvl, ph, plen);
                    ++probes;
                    if (s.fits(probe) != oracle::fits(s, probe))
                        ++disagreements;
                }
        }
    }

    v.pass = disagreements == 0 && full_unconfirmed == 0 && full > 0 && merged > 0;
    std::ostringstream d;
    d << kSchedulerSequences << " sequences, " << steps << " steps (" << allocs << " allocate, " << pds
      << " reserve_pds, " << releases << " release, " << merges << " merge_sgts of which " << merged
      << " granted), " << probes << " probes, "
      << disagreements << " disagreements, " << full << " FULL denials, " << full_unconfirmed
      << " not exhaustive";
    v.detail = d.str();
    return v;
}

// --- 6 ----------------------------------------------------------------------

std::string cli_output(std::vector<std::string> args, int& code)
{
    std::ostringstream out, err;
    code = run_cli(args, out, err);
    return out.str();
}

Verdict determinism()
{
    Verdict v;
    std::ostringstream d;
    int same = 0, checked = 0;
    const std::vector<std::vector<std::string>> commands{
        {"simulate", std::string(DETMAC_SCENARIO_DIR) + "/five_nodes.scn", "--format", "json-lines"},
        {"simulate", std::string(DETMAC_SCENARIO_DIR) + "/csma_contention.scn", "--format", "json-lines"},
        {"simulate", std::string(DETMAC_SCENARIO_DIR) + "/shared_slot.scn", "--format", "json-lines"},
        {"sweep-assoc", "--trials", "500", "--format", "json-lines"},
        {"sweep-capture", "--trials", "20", "--noise", "2", "--format", "json-lines"},
    };
    for (const auto& cmd : commands) {
        int c1 = -1, c2 = -1;
        auto a = cli_output(cmd, c1);
        auto b = cli_output(cmd, c2);
        ++checked;
        if (a == b && c1 == c2 && c1 == kExitOk && !a.empty())
            ++same;
    }
    for (const char* name : {"five_nodes.scn", "csma_contention.scn", "shared_slot.scn"}) {
        auto s = load_scenario(std::string(DETMAC_SCENARIO_DIR) + "/" + name);
        auto m = run(s);
        g_conservation.note(m.frames.conserved());
    }

    AssociationSweepConfig cfg;
    cfg.trials = 200;
    cfg.pds_level = 2;
    cfg.seed = 1;
    auto r1 = sweep_association(cfg);
    cfg.seed = 2;
    auto r2 = sweep_association(cfg);
    g_conservation.note(r1.frames.conserved());
    g_conservation.note(r2.frames.conserved());
    const bool orders_differ = r1.latencies != r2.latencies;

    v.pass = same == checked && orders_differ;
    d << same << "/" << checked << " commands byte-identical on rerun; seeds 1 and 2 give "
      << (orders_differ ? "different" : "IDENTICAL") << " latency sample orders";
    v.detail = d.str();
    return v;
}

// --- 7 ----------------------------------------------------------------------

Verdict baseline_contrast()
{
    ContentionConfig cfg;
    cfg.bo = kBo;
    cfg.leaves = 10;
    cfg.cap_slots = 4;
    cfg.trials = kContentionTrials;
    cfg.seed = 1;

    cfg.use_pds = false;
    auto csma = run_contention(cfg);
    cfg.use_pds = true;
    auto det = run_contention(cfg);
    for (const auto* r : {&csma, &det}) {
        g_conservation.runs += kContentionTrials;
        g_conservation.broken += kContentionTrials - r->trials_conserved;
    }

    const Tick bound = pds_latency_bounds(BeaconOrder(kBo), 0).upper;
    const Tick csma_max =
        csma.latencies.empty() ? 0 : *std::max_element(csma.latencies.begin(), csma.latencies.end());
    const Tick pds_max = det.latencies.empty() ? 0 : *std::max_element(det.latencies.begin(), det.latencies.end());

    Verdict v;
    v.pass = csma_max > bound && csma.csma_failures > 0 && det.pds_frames.collided == 0 && det.out_of_bounds == 0 &&
             det.incomplete == 0;
    std::ostringstream d;
    d << "CSMA max " << csma_max << " vs PDS bound " << bound << ", " << csma.csma_failures
      << " channel access failures, " << csma.incomplete << " never associated; PDS max " << pds_max << ", "
      << det.pds_frames.collided << " collisions, " << det.out_of_bounds << " out of bounds";
    v.detail = d.str();
    return v;
}

// --- 8 ----------------------------------------------------------------------

Verdict conservation()
{
    Verdict v;
    v.pass = g_conservation.broken == 0 && g_conservation.runs > 0;
    std::ostringstream d;
    d << g_conservation.runs << " runs checked, " << g_conservation.broken << " with transmitted != delivered + "
      << "collided + lost";
    v.detail = d.str();
    return v;
}

}  // namespace

int main()
{
    struct Criterion {
        int number;
        const char* name;
        std::function<Verdict()> check;
    };
    const std::vector<Criterion> criteria{
        {1, "association latency inside the PDS bounds", bound_containment},
        {2, "latency spread grows with the PDS level", histogram_shape},
        {3, "capture threshold model", capture_threshold},
        {4, "association models are safe, live and reinitializable", formal_verdicts},
        {5, "incremental scheduler agrees with the occupancy oracle", scheduler_oracle},
        {6, "determinism", determinism},
        {7, "CSMA baseline versus PDS", baseline_contrast},
        {8, "frame conservation", conservation},
    };

    int failed = 0;
    for (const auto& c : criteria) {
        Verdict v;
        auto t0 = Clock::now();
        try {
            v = c.check();
        } catch (const std::exception& e) {
            v.pass = false;
            v.detail = std::string("threw: ") + e.what();
        }
        const double secs = seconds_since(t0);
        failed += !v.pass;
        std::printf("%s %d %s: %s [%.2f s]\n", v.pass ? "PASS" : "FAIL", c.number, c.name, v.detail.c_str(), secs);
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
