#ifndef DETMAC_SCHEDULER_H
#define DETMAC_SCHEDULER_H

#include <map>
#include <optional>
#include <set>
#include <span>
#include <tuple>
#include <variant>
#include <vector>

#include "detmac/capture_evidence.h"
#include "detmac/core.h"

namespace detmac {

enum class PlacementPolicy { FirstFit, Spread };
enum class DenyReason { Full, Policy };

std::string_view to_string(PlacementPolicy policy);
std::optional<PlacementPolicy> parse_policy(std::string_view text);
std::string_view to_string(DenyReason reason);

struct GtsRequest {
    NodeId requester{};
    std::optional<NodeId> relayed_by;
    ReservationLevel level;
    int slot_count = 1;
    /// Higher wins when several requests compete for the last free instance.
    int priority = 0;

    friend bool operator==(const GtsRequest&, const GtsRequest&) = default;
};

class GrantDecision {
public:
    static GrantDecision granted(NodeId requester, SlotAssignment a)
    {
        return GrantDecision(requester, std::move(a));
    }
    static GrantDecision denied(NodeId requester, DenyReason reason)
    {
        return GrantDecision(requester, reason);
    }

    NodeId requester() const { return requester_; }
    bool is_granted() const { return std::holds_alternative<SlotAssignment>(outcome_); }
    const SlotAssignment& assignment() const { return std::get<SlotAssignment>(outcome_); }
    DenyReason reason() const { return std::get<DenyReason>(outcome_); }

    friend bool operator==(const GrantDecision&, const GrantDecision&) = default;

private:
    GrantDecision(NodeId requester, std::variant<SlotAssignment, DenyReason> outcome)
        : requester_(requester), outcome_(std::move(outcome))
    {
    }

    NodeId requester_;
    std::variant<SlotAssignment, DenyReason> outcome_;
};

struct SchedulerConfig {
    PlacementPolicy policy = PlacementPolicy::FirstFit;
    /// Maximum GTS/PDS/SGTS reservations held by one node; unset means unlimited.
    std::optional<int> per_node_cap;
    /// Capture evidence older than this many superframes is stale.
    SuperframeCounter evidence_freshness = 4;
};

/// An assignment removed from the table that still blocks its instance until
/// a given superframe, so that nodes acting on older beacons stay collision free.
struct Quarantine {
    SlotAssignment assignment;
    SuperframeCounter until = 0;
};

/// The supercoordinator's allocation authority over one hypercycle.
class Scheduler {
public:
    Scheduler(Topology topology, InterferenceRelation relation, int nmax = kDefaultMaxLevel,
              SchedulerConfig config = {});

    const ScheduleTable& table() const { return table_; }
    const Topology& topology() const { return topology_; }
    const InterferenceRelation& relation() const { return relation_; }
    const SchedulerConfig& config() const { return config_; }

    /// Equal-division GBS placement: coordinator i (1-based) of C gets slot floor(16 i / (C + 1)).
    std::vector<SlotAssignment> place_gbs(std::span<const NodeId> coordinators);
    /// GBS on an explicit slot. Throws std::invalid_argument if the slot instance is taken.
    SlotAssignment place_gbs_at(NodeId coordinator, SlotIndex slot);

    /// Adds open-contention slots. Throws std::invalid_argument if the instance is taken.
    SlotAssignment add_cap(SlotIndex slot, ReservationLevel level = ReservationLevel(0),
                           std::int64_t phase = 0);

    GrantDecision allocate(const GtsRequest& request);
    GrantDecision allocate(const GtsRequest& request, PlacementPolicy policy);

    /// Pre-association reservation; denied with POLICY once the owner is associated.
    GrantDecision reserve_pds(NodeId owner, ReservationLevel level);
    GrantDecision reserve_pds(NodeId owner, ReservationLevel level, PlacementPolicy policy);

    /// Replaces two GTS of distinct stars with one SGTS on the smaller (slot, phase).
    /// Throws std::invalid_argument when the inputs are not GTS of equal level in
    /// different stars.
    GrantDecision merge_sgts(AssignmentId a, AssignmentId b, const CaptureEvidence& evidence,
                             SuperframeCounter now);

    /// Throws std::out_of_range when absent.
    SlotAssignment release(AssignmentId id);

    /// Keeps an instance blocked until the given superframe.
    void quarantine(SlotAssignment a, SuperframeCounter until);
    void expire_quarantine(SuperframeCounter now);
    const std::vector<Quarantine>& quarantined() const { return quarantine_; }

    void mark_associated(NodeId node) { associated_.insert(node); }
    void mark_unassociated(NodeId node) { associated_.erase(node); }
    bool is_associated(NodeId node) const { return associated_.count(node) != 0; }

    /// Incremental check: can the candidate join the table (and quarantined
    /// instances) without creating a conflict?
    bool fits(const SlotAssignment& candidate) const;
    bool fits(const SlotAssignment& candidate, std::optional<AssignmentId> ignore) const;

    /// Number of reservations (GTS, PDS, SGTS) held by a node.
    int reservations_held(NodeId node) const;

private:
    GrantDecision place(NodeId requester, std::optional<NodeId> relay, AssignmentKind kind,
                        ReservationLevel level, int slot_count, PlacementPolicy policy);
    std::optional<SlotAssignment> search(const SlotAssignment& shape, NodeId requester,
                                         std::optional<NodeId> relay,
                                         PlacementPolicy policy) const;

    Topology topology_;
    InterferenceRelation relation_;
    SchedulerConfig config_;
    ScheduleTable table_;
    std::vector<Quarantine> quarantine_;
    std::set<NodeId> associated_;
};

/// Frames observed per slot instance, used to spot unused reservations.
struct TrafficLog {
    SuperframeCounter first_superframe = 0;
    SuperframeCounter superframe_count = 0;
    /// (superframe, slot, sender) of every transmitted frame.
    std::set<std::tuple<SuperframeCounter, int, NodeId>> frames;

    void record(SuperframeCounter k, SlotIndex s, NodeId sender) { frames.insert({k, s.value(), sender}); }
    bool transmitted(SuperframeCounter k, SlotIndex s, NodeId sender) const
    {
        return frames.count({k, s.value(), sender}) != 0;
    }
};

enum class InstanceCategory { Idle, SuperBeacon, Gbs, Gts, Pds, Sgts, Cap };

std::string_view to_string(InstanceCategory category);

struct UtilizationReport {
    std::int64_t hypercycle = 0;
    /// [superframe within hypercycle][slot].
    std::vector<std::array<InstanceCategory, kSlotsPerSuperframe>> instances;
    std::map<InstanceCategory, std::int64_t> counts;
    /// PDS instances inside the log window whose owner sent nothing.
    std::int64_t wasted_pds = 0;
    /// PDS instances inside the log window.
    std::int64_t pds_instances = 0;

    std::int64_t total() const;
    friend bool operator==(const UtilizationReport&, const UtilizationReport&) = default;
};

/// Category of every instance of one hypercycle plus wasted-PDS accounting over the log window.
UtilizationReport utilization(const ScheduleTable& table, const TrafficLog& log);

}  // namespace detmac

#endif  // DETMAC_SCHEDULER_H
