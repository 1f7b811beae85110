#ifndef DETMAC_SCENARIO_H
#define DETMAC_SCENARIO_H

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "detmac/core.h"
#include "detmac/csma.h"
#include "detmac/protocol.h"
#include "detmac/radio.h"
#include "detmac/scheduler.h"

namespace detmac {

/// Where each statement of a scenario came from. Keys look like "node#3" or
/// "pds#0". Never part of a scenario's identity, so equality ignores it.
struct SourceMap {
    std::map<std::string, int> lines;

    int line(const std::string& key) const
    {
        auto it = lines.find(key);
        return it == lines.end() ? 0 : it->second;
    }
    friend bool operator==(const SourceMap&, const SourceMap&) { return true; }
};

struct Diagnostic {
    /// 0 when the problem is not tied to one line.
    int line = 0;
    std::string message;

    std::string str() const;
    friend bool operator==(const Diagnostic&, const Diagnostic&) = default;
};

class ScenarioError : public std::runtime_error {
public:
    explicit ScenarioError(std::vector<Diagnostic> diagnostics);
    const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }

private:
    std::vector<Diagnostic> diagnostics_;
};

struct InterferenceStatement {
    enum class Kind { Interfere, Isolate, IsolateStars };
    Kind kind = Kind::Interfere;
    NodeId a{};
    NodeId b{};
    friend bool operator==(const InterferenceStatement&, const InterferenceStatement&) = default;
};

struct GbsPlan {
    NodeId node{};
    int slot = 1;
    friend bool operator==(const GbsPlan&, const GbsPlan&) = default;
};

struct PdsPlan {
    NodeId node{};
    int level = 0;
    friend bool operator==(const PdsPlan&, const PdsPlan&) = default;
};

struct CapPlan {
    int slot = 1;
    int level = 0;
    std::int64_t phase = 0;
    friend bool operator==(const CapPlan&, const CapPlan&) = default;
};

struct PowerEntry {
    NodeId tx{};
    NodeId rx{};
    double dbm = 0.0;
    friend bool operator==(const PowerEntry&, const PowerEntry&) = default;
};

struct PositionEntry {
    NodeId node{};
    double x = 0.0;
    double y = 0.0;
    friend bool operator==(const PositionEntry&, const PositionEntry&) = default;
};

struct PathLoss {
    double p0_dbm = -40.0;
    double exponent = 2.0;
    std::optional<double> floor_dbm;
    friend bool operator==(const PathLoss&, const PathLoss&) = default;
};

struct LeadEntry {
    NodeId node{};
    int lead = 0;
    friend bool operator==(const LeadEntry&, const LeadEntry&) = default;
};

struct OutagePlan {
    NodeId node{};
    SuperframeCounter from = 0;
    SuperframeCounter count = 1;
    friend bool operator==(const OutagePlan&, const OutagePlan&) = default;
};

enum class FlowMode { Auto, Cap };

struct FlowPlan {
    NodeId node{};
    SuperframeCounter every = 1;
    int bytes = 30;
    SuperframeCounter start = 0;
    FlowMode mode = FlowMode::Auto;
    friend bool operator==(const FlowPlan&, const FlowPlan&) = default;
};

struct RequestPlan {
    NodeId node{};
    int level = 0;
    int count = 1;
    SuperframeCounter at = 0;
    int priority = 0;
    friend bool operator==(const RequestPlan&, const RequestPlan&) = default;
};

struct SgtsPlan {
    NodeId c1{};
    NodeId c2{};
    NodeId f1{};
    NodeId f2{};
    SuperframeCounter at = 0;
    friend bool operator==(const SgtsPlan&, const SgtsPlan&) = default;
};

struct PowerOnPlan {
    NodeId node{};
    /// Unset: drawn uniformly over the slot boundaries of one hypercycle.
    std::optional<Tick> tick;
    friend bool operator==(const PowerOnPlan&, const PowerOnPlan&) = default;
};

struct RestartPlan {
    NodeId node{};
    SuperframeCounter at = 0;
    friend bool operator==(const RestartPlan&, const RestartPlan&) = default;
};

/// Everything one simulation run needs.
struct Scenario {
    // network
    std::vector<NodeInfo> nodes;
    bool interference_all = true;
    std::vector<InterferenceStatement> interference;

    // schedule
    int bo = 3;
    int nmax = kDefaultMaxLevel;
    PlacementPolicy policy = PlacementPolicy::FirstFit;
    std::optional<int> grant_cap;
    std::vector<GbsPlan> gbs;
    std::vector<PdsPlan> pds;
    std::vector<CapPlan> cap;

    // radio
    double margin_db = 10.0;
    double sync_offset_bias_db = 0.0;
    double noise_sigma_db = 0.0;
    double frame_error_rate = 0.0;
    std::optional<double> default_power_dbm = -60.0;
    std::vector<PowerEntry> powers;
    std::vector<PositionEntry> positions;
    std::optional<PathLoss> pathloss;
    std::vector<LeadEntry> leads;
    std::vector<OutagePlan> outages;

    // traffic
    FrameSizes sizes;
    CsmaParams csma;
    std::vector<FlowPlan> flows;
    std::vector<RequestPlan> requests;
    std::vector<SgtsPlan> sgts;

    // run
    std::uint64_t seed = 1;
    SuperframeCounter superframes = 16;
    std::vector<PowerOnPlan> power_on;
    std::vector<NodeId> preassociated;
    std::vector<RestartPlan> restarts;
    bool stop_when_associated = false;
    int trace_capacity = 0;
    int desync_threshold = 2;
    SuperframeCounter sgts_freshness = 4;

    SourceMap source;

    friend bool operator==(const Scenario&, const Scenario&) = default;
};

/// Every violation found, anchored to its statement when the scenario was parsed from text.
std::vector<Diagnostic> validate(const Scenario& scenario);

Topology build_topology(const Scenario& scenario);
InterferenceRelation build_interference(const Scenario& scenario, const Topology& topology);
RadioEnvironment build_radio(const Scenario& scenario);

/// Scheduler with the superbeacon, GBS, CAP and PDS plans applied.
/// Throws ScenarioError when a plan does not fit.
Scheduler build_scheduler(const Scenario& scenario);

}  // namespace detmac

#endif  // DETMAC_SCENARIO_H
