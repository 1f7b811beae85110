#ifndef DETMAC_SIMULATOR_H
#define DETMAC_SIMULATOR_H

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "detmac/protocol.h"
#include "detmac/scenario.h"
#include "detmac/scheduler.h"

namespace detmac {

struct FrameCounters {
    std::int64_t transmitted = 0;
    std::int64_t delivered = 0;
    std::int64_t collided = 0;
    std::int64_t lost = 0;

    bool conserved() const { return transmitted == delivered + collided + lost; }
    friend bool operator==(const FrameCounters&, const FrameCounters&) = default;
};

struct TraceRecord {
    Tick tick = 0;
    SuperframeCounter superframe = 0;
    int slot = 0;
    NodeId node{};
    std::string event;
    std::string detail;

    friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

struct GrantRecord {
    Tick tick = 0;
    NodeId requester{};
    bool granted = false;
    /// Set when granted.
    int slot = 0;
    int level = 0;
    std::int64_t phase = 0;
    /// Set when denied.
    std::string reason;

    friend bool operator==(const GrantRecord&, const GrantRecord&) = default;
};

struct SgtsRecord {
    SuperframeCounter superframe = 0;
    NodeId c1{}, c2{}, f1{}, f2{};
    bool merged = false;
    std::string detail;

    friend bool operator==(const SgtsRecord&, const SgtsRecord&) = default;
};

/// Everything measured during one run.
struct MetricsBundle {
    std::vector<AssociationRecord> associations;
    FrameCounters frames;
    std::map<FrameType, FrameCounters> frames_by_type;
    std::int64_t csma_failures = 0;
    std::int64_t malformed = 0;
    std::vector<GrantRecord> grants;
    std::vector<SgtsRecord> sgts;
    /// Schedule at the end of the run, with PDS waste counted over the whole run.
    UtilizationReport utilization;
    std::map<NodeId, std::vector<TraceStep>> association_traces;
    /// Most recent events when tracing is enabled.
    std::deque<TraceRecord> trace;
    SuperframeCounter superframes_run = 0;
    Tick end_tick = 0;
    /// Nodes that were expected to associate but did not within the run.
    std::vector<NodeId> unassociated;

    friend bool operator==(const MetricsBundle&, const MetricsBundle&) = default;
};

/// A transmission outside every instance owned by its sender.
class OwnershipViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

struct RunOptions {
    /// Receives every trace record as it happens (independent of the ring buffer).
    std::function<void(const TraceRecord&)> sink;
};

/// Runs a scenario. Throws ScenarioError when it does not validate.
MetricsBundle run(const Scenario& scenario, const RunOptions& options = {});

struct HistogramBin {
    Tick lower = 0;
    /// Exclusive.
    Tick upper = 0;
    std::int64_t count = 0;
    double proportion = 0.0;

    friend bool operator==(const HistogramBin&, const HistogramBin&) = default;
};

/// Bins aligned to multiples of bin_width, from the lowest to the highest
/// occupied bin (empty ones in between included). Empty input gives no bins.
std::vector<HistogramBin> latency_histogram(std::span<const Tick> samples, Tick bin_width);

std::int64_t nonempty_bins(std::span<const HistogramBin> bins);

/// 17 T 2^bo <= latency <= 16 T 2^bo (2^n + 1) for PDS association at level n.
struct LatencyBounds {
    Tick lower = 0;
    Tick upper = 0;
    bool contains(Tick t) const { return t >= lower && t <= upper; }
};

LatencyBounds pds_latency_bounds(BeaconOrder bo, int pds_level);

/// Coordinator association trials: SC, one coordinator holding a PDS at
/// pds_level, power-on drawn uniformly over the slot boundaries of one hypercycle.
struct AssociationSweepConfig {
    int bo = 3;
    int nmax = kDefaultMaxLevel;
    int pds_level = 0;
    int trials = 10'000;
    std::uint64_t seed = 1;
};

struct AssociationSweepResult {
    int pds_level = 0;
    LatencyBounds bounds;
    std::vector<Tick> latencies;
    std::int64_t out_of_bounds = 0;
    std::int64_t incomplete = 0;
    FrameCounters frames;
    std::int64_t retransmissions = 0;
};

/// Scenario of one trial; power-on is the given tick.
Scenario coordinator_association_scenario(int bo, int nmax, int pds_level, Tick power_on);

AssociationSweepResult sweep_association(const AssociationSweepConfig& config);

/// Leaves associating to a preassociated coordinator, either all through
/// their own PDS or all through a CAP of cap_slots slots.
struct ContentionConfig {
    int bo = 3;
    int nmax = kDefaultMaxLevel;
    int leaves = 10;
    int cap_slots = 4;
    bool use_pds = false;
    int pds_level = 0;
    int trials = 10'000;
    std::uint64_t seed = 1;
    /// Extra CAP data per leaf per superframe, in bytes (0 for none).
    int background_bytes = 0;
    SuperframeCounter max_superframes = 512;
};

struct ContentionResult {
    std::vector<Tick> latencies;
    std::int64_t csma_failures = 0;
    std::int64_t incomplete = 0;
    std::int64_t out_of_bounds = 0;
    LatencyBounds bounds;
    FrameCounters frames;
    FrameCounters pds_frames;
    std::int64_t retransmissions = 0;
    std::int64_t trials_conserved = 0;
};

Scenario contention_scenario(const ContentionConfig& config, std::uint64_t seed);

ContentionResult run_contention(const ContentionConfig& config);

}  // namespace detmac

#endif  // DETMAC_SIMULATOR_H
