#ifndef DETMAC_PROTOCOL_H
#define DETMAC_PROTOCOL_H

#include <array>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "detmac/capture_evidence.h"
#include "detmac/core.h"
#include "detmac/csma.h"
#include "detmac/scheduler.h"

namespace detmac {

enum class FrameType { SuperBeacon, Beacon, AssocRequest, GtsRequestCmd, Data, Ack };

std::string_view to_string(FrameType type);

/// A schedule entry as announced in beacons. Quarantined entries carry the
/// superframe from which they are no longer valid.
struct SlotAnnouncement {
    SlotAssignment assignment;
    std::optional<SuperframeCounter> valid_until;

    bool valid_in(SuperframeCounter k) const { return !valid_until || k < *valid_until; }
    friend bool operator==(const SlotAnnouncement&, const SlotAnnouncement&) = default;
};

/// What a beacon says about one slot of the sender's superframe.
struct SlotMapEntry {
    SuperframeCounter superframe = 0;
    SlotIndex slot;
    /// Empty means the slot is neither reserved nor open for contention.
    std::optional<AssignmentKind> kind;
    std::vector<NodeId> owners;
};

struct BeaconPayload {
    SuperframeCounter superframe = 0;
    std::int64_t hypercycle_phase = 0;
    /// The sender's superframe, from its GBS slot (slot 0 for the superbeacon) onwards.
    std::array<SlotMapEntry, kSlotsPerSuperframe> slot_map{};
    /// Full reservation list, so that receivers can find instances beyond this superframe.
    std::vector<SlotAnnouncement> schedule;
    /// Superbeacon only.
    std::vector<std::pair<NodeId, SlotIndex>> gbs_directory;
    std::vector<GtsRequest> piggyback;
    std::vector<GrantDecision> grants;
    std::vector<NodeId> association_responses;
};

struct Frame {
    std::uint64_t id = 0;
    FrameType type = FrameType::Data;
    NodeId src{};
    /// nullopt for broadcasts.
    std::optional<NodeId> dst;
    /// Nodes that should decode a broadcast.
    std::vector<NodeId> listeners;
    bool contention = false;
    int bytes = 0;

    SuperframeCounter superframe = 0;
    SlotIndex slot;
    /// Backoff periods, [start, end).
    std::int64_t start_period = 0;
    std::int64_t end_period = 0;
    /// Intra-period ordering key from processing delay; smaller starts first.
    int lead = 0;

    std::shared_ptr<const BeaconPayload> beacon;
    std::optional<GtsRequest> request;
    /// Frame being acknowledged, for acks.
    std::uint64_t acked_frame = 0;
};

struct FrameSizes {
    int bytes_per_period = 10;
    int assoc_bytes = 21;
    int request_bytes = 12;
    int ack_bytes = 11;

    int periods(int bytes) const { return (bytes + bytes_per_period - 1) / bytes_per_period; }
    friend bool operator==(const FrameSizes&, const FrameSizes&) = default;
};

struct ProtocolConfig {
    BeaconOrder bo{3};
    int nmax = kDefaultMaxLevel;
    CsmaParams csma;
    FrameSizes sizes;
    int desync_threshold = 2;
    SuperframeCounter sgts_freshness = 4;
};

/// Position of the engine at a slot boundary.
struct SlotContext {
    SuperframeCounter superframe = 0;
    SlotIndex slot;
    Tick tick = 0;
    Tick slot_ticks = 1;
    std::int64_t start_period = 0;
    int periods_per_slot = 3;

    Tick end_tick() const { return tick + slot_ticks; }
};

enum class AssociationPhase { Idle, WaitBeacon, WaitPds, ReqSent, Associated };

std::string_view to_string(AssociationPhase phase);

/// Labels shared with the formal association models.
namespace labels {
inline constexpr std::string_view kPowerOn = "power_on";
inline constexpr std::string_view kSync = "sync";
inline constexpr std::string_view kSendRequest = "send_request";
inline constexpr std::string_view kReceiveResponse = "receive_response";
inline constexpr std::string_view kPdsData = "pds_data";
inline constexpr std::string_view kPdsGtsRequest = "pds_gts_request";
inline constexpr std::string_view kBeaconGtsRequest = "beacon_gts_request";
inline constexpr std::string_view kReceiveGrant = "receive_grant";
inline constexpr std::string_view kEmitBeacon = "emit_beacon";
inline constexpr std::string_view kDesync = "desync";
inline constexpr std::string_view kResync = "resync";
inline constexpr std::string_view kLeave = "leave";
inline constexpr std::string_view kRetry = "retry";
inline constexpr std::string_view kCapRequest = "cap_request";
}  // namespace labels

struct TraceStep {
    Tick tick = 0;
    std::string label;

    friend bool operator==(const TraceStep&, const TraceStep&) = default;
};

/// Association bookkeeping for one node. end_tick - start_tick is the latency.
struct AssociationState {
    AssociationPhase phase = AssociationPhase::Idle;
    Tick start_tick = 0;
    Tick end_tick = 0;
    /// Used its PDS rather than the CAP.
    bool deterministic = true;
    int requests_sent = 0;
    std::vector<TraceStep> trace;
};

struct AssociationRecord {
    NodeId node{};
    NodeRole role = NodeRole::Leaf;
    Tick power_on = 0;
    Tick associated = 0;
    bool deterministic = true;
    int requests_sent = 0;

    Tick latency() const { return associated - power_on; }
    friend bool operator==(const AssociationRecord&, const AssociationRecord&) = default;
};

struct PowerObservation {
    double dbm = 0.0;
    SuperframeCounter superframe = 0;
};

/// Everything a node machine may report to the engine besides frames.
struct NodeEvents {
    std::vector<AssociationRecord> associations;
    std::vector<std::pair<Tick, GrantDecision>> grants_issued;
    std::vector<std::string> notes;
    std::int64_t malformed = 0;
};

class NodeMachine {
public:
    NodeMachine(NodeId id, NodeRole role, const ProtocolConfig& config);
    virtual ~NodeMachine() = default;

    NodeMachine(const NodeMachine&) = delete;
    NodeMachine& operator=(const NodeMachine&) = delete;

    NodeId id() const { return id_; }
    NodeRole role() const { return role_; }
    bool powered() const { return powered_; }
    const AssociationState& association() const { return assoc_; }

    virtual void power_on(const SlotContext& ctx);
    /// Marks the node associated from the start (infrastructure brought up beforehand).
    virtual void preassociate(const SlotContext& ctx);
    /// Drops the association and powers on again at the same boundary.
    virtual void restart(const SlotContext& ctx);
    /// Whether a restart can happen now (associated and in a steady state).
    virtual bool can_leave() const { return assoc_.phase == AssociationPhase::Associated; }

    /// Slot boundary: fills `out` with frames that occupy the whole slot.
    virtual void begin_slot(const SlotContext& ctx, std::vector<Frame>& out) = 0;
    virtual void end_slot(const SlotContext&) {}
    virtual void on_receive(const Frame& frame, const SlotContext& ctx) = 0;

    /// Next frame to send by contention, if any. Called at CAP slot boundaries.
    std::optional<Frame> take_contention_frame();
    /// Result of a contention frame: acknowledged (or broadcast and sent) or not.
    virtual void on_contention_result(const Frame& frame, bool delivered, const SlotContext& ctx);
    virtual void on_contention_failure(const Frame& frame, const SlotContext& ctx);
    /// A frame heard alone in its slot, with the power read by this node.
    virtual void on_overhear(NodeId, double, SuperframeCounter) {}

    /// Queue a data frame for this node's reservations (or the CAP when it has none).
    void enqueue_data(int bytes, bool contention_only);
    /// Schedule a GTS request to be sent at the next opportunity.
    void enqueue_request(const GtsRequest& request) { pending_requests_.push_back(request); }

    NodeEvents& events() { return events_; }

protected:
    void record(Tick tick, std::string_view label);
    void complete_association(Tick tick);
    Frame make_frame(FrameType type, std::optional<NodeId> dst, int bytes) const;
    void queue_contention(Frame frame) { contention_.push_back(std::move(frame)); }
    bool contention_pending(FrameType type) const;

    /// Reservation of this node active on (k, s) according to what it has heard.
    const SlotAssignment* owned_instance(SuperframeCounter k, SlotIndex s) const;
    void learn_schedule(const std::vector<SlotAnnouncement>& schedule) { known_schedule_ = schedule; }
    const std::vector<SlotAnnouncement>& known_schedule() const { return known_schedule_; }
    const SlotAssignment* own_pds() const;

    /// Association attempt through the parent (beacon, then PDS or CAP, then response).
    void association_on_parent_beacon(const BeaconPayload& beacon, const SlotContext& ctx);
    /// Emits the association request if this is the PDS instance to use.
    bool association_try_pds(const SlotContext& ctx, std::vector<Frame>& out);
    /// Data or a GTS request in an owned reservation; moves traffic to the CAP when none is held.
    void use_reservations(const SlotContext& ctx, std::vector<Frame>& out, bool requests_in_slots);
    /// Handles a grant addressed to this node.
    void take_grant(const GrantDecision& grant, Tick tick);

    NodeId id_;
    NodeRole role_;
    ProtocolConfig config_;
    bool powered_ = false;
    AssociationState assoc_;
    std::optional<NodeId> parent_;
    /// Superframe and slot of the beacon that synchronized the node, for the PDS wait.
    std::optional<std::pair<SuperframeCounter, int>> synced_at_;

    struct QueuedData {
        int bytes = 0;
        bool contention_only = false;
    };
    std::deque<QueuedData> data_;
    std::deque<GtsRequest> pending_requests_;
    bool request_outstanding_ = false;
    std::deque<Frame> contention_;
    std::vector<SlotAnnouncement> known_schedule_;
    NodeEvents events_;
};

struct SgtsSubmission {
    AssignmentId first{};
    AssignmentId second{};
    CaptureEvidence evidence;
};

class Supercoordinator : public NodeMachine {
public:
    Supercoordinator(NodeId id, const ProtocolConfig& config, Scheduler scheduler);

    const Scheduler& scheduler() const { return scheduler_; }
    Scheduler& scheduler() { return scheduler_; }

    void power_on(const SlotContext& ctx) override;
    void begin_slot(const SlotContext& ctx, std::vector<Frame>& out) override;
    void on_receive(const Frame& frame, const SlotContext& ctx) override;

    /// Queued for the next superbeacon boundary.
    void submit_sgts(SgtsSubmission submission) { sgts_.push_back(std::move(submission)); }
    const std::vector<GrantDecision>& sgts_outcomes() const { return sgts_outcomes_; }

    /// Announced reservations: the table plus still-quarantined entries.
    std::vector<SlotAnnouncement> announcements() const;

private:
    Scheduler scheduler_;
    std::vector<GtsRequest> requests_;
    std::set<NodeId> association_requests_;
    std::vector<SgtsSubmission> sgts_;
    std::vector<GrantDecision> sgts_outcomes_;
};

class Coordinator : public NodeMachine {
public:
    Coordinator(NodeId id, NodeId parent, const ProtocolConfig& config);

    void begin_slot(const SlotContext& ctx, std::vector<Frame>& out) override;
    void end_slot(const SlotContext& ctx) override;
    void on_receive(const Frame& frame, const SlotContext& ctx) override;
    void on_overhear(NodeId tx, double dbm, SuperframeCounter k) override;
    void restart(const SlotContext& ctx) override;
    bool can_leave() const override { return NodeMachine::can_leave() && !desynced_; }

    bool desynchronized() const { return desynced_; }
    std::optional<SlotIndex> gbs_slot() const { return gbs_; }
    const std::map<NodeId, PowerObservation>& observations() const { return observations_; }

private:
    bool beaconing(const SlotContext& ctx) const;
    BeaconPayload build_beacon(const SlotContext& ctx);

    std::optional<SlotIndex> gbs_;
    bool heard_superbeacon_ = false;
    int missed_ = 0;
    bool desynced_ = false;
    std::optional<SuperframeCounter> resume_at_;
    std::vector<GtsRequest> relay_;
    std::vector<GrantDecision> grants_for_children_;
    std::set<NodeId> responses_;
    std::set<NodeId> relayed_for_;
    std::map<NodeId, PowerObservation> observations_;
};

class Leaf : public NodeMachine {
public:
    Leaf(NodeId id, NodeId parent, const ProtocolConfig& config);

    void begin_slot(const SlotContext& ctx, std::vector<Frame>& out) override;
    void on_receive(const Frame& frame, const SlotContext& ctx) override;
};

/// Both coordinators' measurements agreed: evidence for the scheduler.
/// Otherwise the side that failed and the delta it measured.
struct SgtsRejection {
    NodeId coordinator{};
    /// Own minus other power; NaN when a measurement was missing or stale.
    double delta_db = 0.0;
    std::string reason;
};

using SgtsNegotiation = std::variant<CaptureEvidence, SgtsRejection>;

/// c1 checks PF1 > PF2 + margin from its own observations of f1 and f2, then
/// proposes to c2 which runs the same test with the roles swapped.
SgtsNegotiation negotiate_sgts(NodeId c1, const std::map<NodeId, PowerObservation>& c1_observations,
                               NodeId c2, const std::map<NodeId, PowerObservation>& c2_observations,
                               NodeId f1, NodeId f2, double margin_db, SuperframeCounter now,
                               SuperframeCounter freshness);

/// Slot map of a superframe starting at `first_slot` of superframe k.
std::array<SlotMapEntry, kSlotsPerSuperframe> build_slot_map(
    const std::vector<SlotAnnouncement>& schedule, SuperframeCounter k, SlotIndex first_slot);

}  // namespace detmac

#endif  // DETMAC_PROTOCOL_H
