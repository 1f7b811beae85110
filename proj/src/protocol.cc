#include "detmac/protocol.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace detmac {

std::string_view to_string(FrameType type)
{
    switch (type) {
    case FrameType::SuperBeacon: return "superbeacon";
    case FrameType::Beacon: return "beacon";
    case FrameType::AssocRequest: return "assoc_request";
    case FrameType::GtsRequestCmd: return "gts_request";
    case FrameType::Data: return "data";
    case FrameType::Ack: return "ack";
    }
    return "?";
}

std::string_view to_string(AssociationPhase phase)
{
    switch (phase) {
    case AssociationPhase::Idle: return "IDLE";
    case AssociationPhase::WaitBeacon: return "WAIT_BEACON";
    case AssociationPhase::WaitPds: return "WAIT_PDS";
    case AssociationPhase::ReqSent: return "REQ_SENT";
    case AssociationPhase::Associated: return "ASSOCIATED";
    }
    return "?";
}

std::array<SlotMapEntry, kSlotsPerSuperframe> build_slot_map(
    const std::vector<SlotAnnouncement>& schedule, SuperframeCounter k, SlotIndex first_slot)
{
    std::array<SlotMapEntry, kSlotsPerSuperframe> map{};
    for (int i = 0; i < kSlotsPerSuperframe; ++i) {
        SlotIndex s = first_slot + i;
        SlotMapEntry& e = map[static_cast<std::size_t>(i)];
        e.slot = s;
        e.superframe = s < first_slot ? k + 1 : k;
        for (const auto& ann : schedule) {
            const auto& a = ann.assignment;
            if (ann.valid_in(e.superframe) && occupies(a, e.superframe) && a.covers(s)) {
                e.kind = a.kind;
                e.owners = a.owners;
                break;
            }
        }
    }
    return map;
}

// ---------------------------------------------------------------------------

NodeMachine::NodeMachine(NodeId id, NodeRole role, const ProtocolConfig& config)
    : id_(id), role_(role), config_(config)
{
}

void NodeMachine::record(Tick tick, std::string_view label)
{
    assoc_.trace.push_back(TraceStep{tick, std::string(label)});
}

void NodeMachine::power_on(const SlotContext& ctx)
{
    powered_ = true;
    const auto trace = std::move(assoc_.trace);
    assoc_ = AssociationState{};
    assoc_.trace = trace;
    assoc_.phase = AssociationPhase::WaitBeacon;
    assoc_.start_tick = ctx.tick;
    request_outstanding_ = false;
    contention_.clear();
    record(ctx.tick, labels::kPowerOn);
}

void NodeMachine::preassociate(const SlotContext& ctx)
{
    powered_ = true;
    assoc_ = AssociationState{};
    assoc_.phase = AssociationPhase::Associated;
    assoc_.start_tick = assoc_.end_tick = ctx.tick;
}

void NodeMachine::restart(const SlotContext& ctx)
{
    if (assoc_.phase == AssociationPhase::Associated)
        record(ctx.tick, labels::kLeave);
    power_on(ctx);
}

void NodeMachine::complete_association(Tick tick)
{
    assoc_.phase = AssociationPhase::Associated;
    assoc_.end_tick = tick;
    events_.associations.push_back(AssociationRecord{id_, role_, assoc_.start_tick, tick,
                                                     assoc_.deterministic, assoc_.requests_sent});
}

Frame NodeMachine::make_frame(FrameType type, std::optional<NodeId> dst, int bytes) const
{
    Frame f;
    f.type = type;
    f.src = id_;
    f.dst = dst;
    f.bytes = bytes;
    return f;
}

std::optional<Frame> NodeMachine::take_contention_frame()
{
    if (contention_.empty())
        return std::nullopt;
    Frame f = std::move(contention_.front());
    contention_.pop_front();
    return f;
}

bool NodeMachine::contention_pending(FrameType type) const
{
    return std::any_of(contention_.begin(), contention_.end(),
                       [type](const Frame& f) { return f.type == type; });
}

void NodeMachine::enqueue_data(int bytes, bool contention_only)
{
    data_.push_back(QueuedData{bytes, contention_only});
}

const SlotAssignment* NodeMachine::owned_instance(SuperframeCounter k, SlotIndex s) const
{
    for (const auto& ann : known_schedule_) {
        const auto& a = ann.assignment;
        if (a.kind != AssignmentKind::Gts && a.kind != AssignmentKind::Pds &&
            a.kind != AssignmentKind::Sgts)
            continue;
        if (ann.valid_in(k) && a.owned_by(id_) && occupies(a, k) && a.covers(s))
            return &a;
    }
    return nullptr;
}

const SlotAssignment* NodeMachine::own_pds() const
{
    for (const auto& ann : known_schedule_)
        if (ann.assignment.kind == AssignmentKind::Pds && ann.assignment.owned_by(id_) &&
            !ann.valid_until)
            return &ann.assignment;
    return nullptr;
}

void NodeMachine::association_on_parent_beacon(const BeaconPayload& beacon, const SlotContext& ctx)
{
    switch (assoc_.phase) {
    case AssociationPhase::Idle:
    case AssociationPhase::Associated:
        return;
    case AssociationPhase::WaitBeacon:
        record(ctx.tick, labels::kSync);
        assoc_.phase = AssociationPhase::WaitPds;
        if (!own_pds()) {
            assoc_.deterministic = false;
            if (!contention_pending(FrameType::AssocRequest))
                queue_contention(make_frame(FrameType::AssocRequest, parent_, config_.sizes.assoc_bytes));
        }
        return;
    case AssociationPhase::WaitPds:
    case AssociationPhase::ReqSent:
        break;
    }

    const auto& r = beacon.association_responses;
    if (std::find(r.begin(), r.end(), id_) != r.end()) {
        contention_.erase(std::remove_if(contention_.begin(), contention_.end(),
                                         [](const Frame& f) { return f.type == FrameType::AssocRequest; }),
                          contention_.end());
        record(ctx.tick, labels::kReceiveResponse);
        complete_association(ctx.end_tick());
        return;
    }
    if (assoc_.phase == AssociationPhase::ReqSent) {
        record(ctx.tick, labels::kRetry);
        assoc_.phase = AssociationPhase::WaitPds;
        if (!assoc_.deterministic && !contention_pending(FrameType::AssocRequest))
            queue_contention(make_frame(FrameType::AssocRequest, parent_, config_.sizes.assoc_bytes));
    }
}

bool NodeMachine::association_try_pds(const SlotContext& ctx, std::vector<Frame>& out)
{
    if (assoc_.phase != AssociationPhase::WaitPds || !assoc_.deterministic)
        return false;
    const SlotAssignment* a = owned_instance(ctx.superframe, ctx.slot);
    if (!a || a->kind != AssignmentKind::Pds)
        return false;
    out.push_back(make_frame(FrameType::AssocRequest, parent_, config_.sizes.assoc_bytes));
    ++assoc_.requests_sent;
    assoc_.phase = AssociationPhase::ReqSent;
    record(ctx.tick, labels::kSendRequest);
    return true;
}

void NodeMachine::use_reservations(const SlotContext& ctx, std::vector<Frame>& out,
                                   bool requests_in_slots)
{
    const SlotAssignment* a = owned_instance(ctx.superframe, ctx.slot);
    const bool pds = a && a->kind == AssignmentKind::Pds;
    const bool holds_any = std::any_of(known_schedule_.begin(), known_schedule_.end(), [this](const auto& ann) {
        const auto k = ann.assignment.kind;
        return !ann.valid_until && ann.assignment.owned_by(id_) &&
               (k == AssignmentKind::Gts || k == AssignmentKind::Pds || k == AssignmentKind::Sgts);
    });

    if (requests_in_slots && !pending_requests_.empty() && !request_outstanding_) {
        if (a && a->kind != AssignmentKind::Sgts) {
            Frame f = make_frame(FrameType::GtsRequestCmd, parent_, config_.sizes.request_bytes);
            f.request = pending_requests_.front();
            out.push_back(std::move(f));
            request_outstanding_ = true;
            record(ctx.tick, pds ? labels::kPdsGtsRequest : std::string_view("gts_request"));
            return;
        }
        if (!holds_any && !contention_pending(FrameType::GtsRequestCmd)) {
            Frame f = make_frame(FrameType::GtsRequestCmd, parent_, config_.sizes.request_bytes);
            f.request = pending_requests_.front();
            queue_contention(std::move(f));
            request_outstanding_ = true;
        }
    }

    if (data_.empty())
        return;
    const QueuedData& d = data_.front();
    if (!d.contention_only && a) {
        out.push_back(make_frame(FrameType::Data, parent_, d.bytes));
        data_.pop_front();
        record(ctx.tick, pds ? labels::kPdsData : std::string_view("gts_data"));
        return;
    }
    if ((d.contention_only || !holds_any) && !contention_pending(FrameType::Data)) {
        queue_contention(make_frame(FrameType::Data, parent_, d.bytes));
        data_.pop_front();
    }
}

void NodeMachine::take_grant(const GrantDecision& grant, Tick tick)
{
    if (grant.requester() != id_ || !request_outstanding_)
        return;
    request_outstanding_ = false;
    if (!pending_requests_.empty())
        pending_requests_.pop_front();
    record(tick, labels::kReceiveGrant);
}

void NodeMachine::on_contention_result(const Frame& frame, bool delivered, const SlotContext& ctx)
{
    switch (frame.type) {
    case FrameType::AssocRequest:
        if (assoc_.phase != AssociationPhase::WaitPds)
            return;
        ++assoc_.requests_sent;
        record(ctx.tick, labels::kCapRequest);
        if (delivered)
            assoc_.phase = AssociationPhase::ReqSent;
        else
            queue_contention(frame);
        return;
    case FrameType::GtsRequestCmd:
    case FrameType::Data:
        if (!delivered)
            contention_.push_front(frame);
        return;
    default:
        return;
    }
}

void NodeMachine::on_contention_failure(const Frame& frame, const SlotContext&)
{
    if (frame.type == FrameType::AssocRequest && assoc_.phase != AssociationPhase::WaitPds)
        return;
    contention_.push_front(frame);
}

// ---------------------------------------------------------------------------

Supercoordinator::Supercoordinator(NodeId id, const ProtocolConfig& config, Scheduler scheduler)
    : NodeMachine(id, NodeRole::Supercoordinator, config), scheduler_(std::move(scheduler))
{
}

void Supercoordinator::power_on(const SlotContext& ctx)
{
    preassociate(ctx);
}

std::vector<SlotAnnouncement> Supercoordinator::announcements() const
{
    std::vector<SlotAnnouncement> out;
    for (const auto& a : scheduler_.table().assignments())
        out.push_back(SlotAnnouncement{a, std::nullopt});
    for (const auto& q : scheduler_.quarantined())
        out.push_back(SlotAnnouncement{q.assignment, q.until});
    return out;
}

void Supercoordinator::begin_slot(const SlotContext& ctx, std::vector<Frame>& out)
{
    if (ctx.slot.value() != 0)
        return;
    const SuperframeCounter k = ctx.superframe;
    scheduler_.expire_quarantine(k);

    for (const auto& sub : sgts_) {
        const SlotAssignment* a = scheduler_.table().find(sub.first);
        const SlotAssignment* b = scheduler_.table().find(sub.second);
        if (!a || !b) {
            ++events_.malformed;
            continue;
        }
        const SlotAssignment first = *a, second = *b;
        try {
            GrantDecision d = scheduler_.merge_sgts(sub.first, sub.second, sub.evidence, k);
            if (d.is_granted()) {
                const auto& kept = d.assignment();
                const SlotAssignment& freed =
                    (first.slot == kept.slot && first.phase == kept.phase) ? second : first;
                scheduler_.quarantine(freed, k + 2);
            }
            sgts_outcomes_.push_back(d);
        } catch (const std::invalid_argument&) {
            ++events_.malformed;
        }
    }
    sgts_.clear();

    std::stable_sort(requests_.begin(), requests_.end(), [](const GtsRequest& x, const GtsRequest& y) {
        if (x.priority != y.priority)
            return x.priority > y.priority;
        return x.requester < y.requester;
    });
    auto payload = std::make_shared<BeaconPayload>();
    for (const auto& req : requests_) {
        try {
            GrantDecision d = scheduler_.allocate(req);
            events_.grants_issued.emplace_back(ctx.tick, d);
            payload->grants.push_back(std::move(d));
        } catch (const std::exception&) {
            ++events_.malformed;
        }
    }
    requests_.clear();

    for (NodeId n : association_requests_) {
        scheduler_.mark_associated(n);
        payload->association_responses.push_back(n);
    }
    association_requests_.clear();

    payload->superframe = k;
    payload->hypercycle_phase = k % scheduler_.table().hypercycle();
    payload->schedule = announcements();
    payload->slot_map = build_slot_map(payload->schedule, k, SlotIndex(0));
    for (const auto& a : scheduler_.table().assignments())
        if (a.kind == AssignmentKind::Gbs)
            payload->gbs_directory.emplace_back(a.owners.front(), a.slot);

    Frame f = make_frame(FrameType::SuperBeacon, std::nullopt, 0);
    f.beacon = std::move(payload);
    out.push_back(std::move(f));
}

void Supercoordinator::on_receive(const Frame& frame, const SlotContext&)
{
    const Topology& topo = scheduler_.topology();
    const NodeInfo* sender = topo.find(frame.src);
    if (!sender) {
        ++events_.malformed;
        return;
    }
    switch (frame.type) {
    case FrameType::Beacon:
        if (sender->role != NodeRole::Coordinator || !frame.beacon) {
            ++events_.malformed;
            return;
        }
        for (const auto& req : frame.beacon->piggyback) {
            if (!topo.contains(req.requester) || req.level.n() > scheduler_.table().nmax() ||
                req.slot_count < 1 || req.slot_count >= kSlotsPerSuperframe) {
                ++events_.malformed;
                continue;
            }
            requests_.push_back(req);
        }
        return;
    case FrameType::AssocRequest:
        if (sender->parent != id_) {
            ++events_.malformed;
            return;
        }
        association_requests_.insert(frame.src);
        return;
    case FrameType::GtsRequestCmd:
        if (!frame.request) {
            ++events_.malformed;
            return;
        }
        requests_.push_back(*frame.request);
        return;
    default:
        return;
    }
}

// ---------------------------------------------------------------------------

Coordinator::Coordinator(NodeId id, NodeId parent, const ProtocolConfig& config)
    : NodeMachine(id, NodeRole::Coordinator, config)
{
    parent_ = parent;
}

void Coordinator::restart(const SlotContext& ctx)
{
    NodeMachine::restart(ctx);
    heard_superbeacon_ = false;
    missed_ = 0;
    desynced_ = false;
    resume_at_.reset();
    relay_.clear();
    grants_for_children_.clear();
    responses_.clear();
    relayed_for_.clear();
}

bool Coordinator::beaconing(const SlotContext& ctx) const
{
    return assoc_.phase == AssociationPhase::Associated && !desynced_ && gbs_ && *gbs_ == ctx.slot;
}

BeaconPayload Coordinator::build_beacon(const SlotContext& ctx)
{
    BeaconPayload b;
    b.superframe = ctx.superframe;
    b.hypercycle_phase = ctx.superframe % (std::int64_t{1} << config_.nmax);
    b.schedule = known_schedule_;
    b.slot_map = build_slot_map(known_schedule_, ctx.superframe, ctx.slot);
    b.piggyback = relay_;
    b.grants = grants_for_children_;
    b.association_responses.assign(responses_.begin(), responses_.end());
    return b;
}

void Coordinator::begin_slot(const SlotContext& ctx, std::vector<Frame>& out)
{
    if (!powered_)
        return;
    if (assoc_.phase != AssociationPhase::Associated) {
        association_try_pds(ctx, out);
        return;
    }
    if (desynced_)
        return;
    if (beaconing(ctx)) {
        auto payload = std::make_shared<BeaconPayload>(build_beacon(ctx));
        bool own = false;
        if (!pending_requests_.empty() && !request_outstanding_) {
            payload->piggyback.push_back(pending_requests_.front());
            request_outstanding_ = true;
            own = true;
        }
        record(ctx.tick, own ? labels::kBeaconGtsRequest : labels::kEmitBeacon);
        Frame f = make_frame(FrameType::Beacon, std::nullopt, 0);
        f.beacon = std::move(payload);
        out.push_back(std::move(f));
        relay_.clear();
        grants_for_children_.clear();
        responses_.clear();
        return;
    }
    use_reservations(ctx, out, false);
}

void Coordinator::end_slot(const SlotContext& ctx)
{
    if (ctx.slot.value() != 0 || !powered_)
        return;
    const bool heard = heard_superbeacon_;
    heard_superbeacon_ = false;
    if (assoc_.phase != AssociationPhase::Associated || desynced_)
        return;
    if (heard) {
        missed_ = 0;
        return;
    }
    if (++missed_ >= config_.desync_threshold) {
        desynced_ = true;
        resume_at_.reset();
        record(ctx.tick, labels::kDesync);
    }
}

void Coordinator::on_receive(const Frame& frame, const SlotContext& ctx)
{
    if (!powered_)
        return;
    switch (frame.type) {
    case FrameType::SuperBeacon: {
        if (frame.src != parent_ || !frame.beacon) {
            ++events_.malformed;
            return;
        }
        heard_superbeacon_ = true;
        const BeaconPayload& b = *frame.beacon;
        learn_schedule(b.schedule);
        for (const auto& [node, slot] : b.gbs_directory)
            if (node == id_)
                gbs_ = slot;

        if (assoc_.phase != AssociationPhase::Associated) {
            association_on_parent_beacon(b, ctx);
            return;
        }
        if (desynced_) {
            if (!resume_at_) {
                resume_at_ = ctx.superframe + 1;
            } else if (ctx.superframe >= *resume_at_) {
                desynced_ = false;
                missed_ = 0;
                resume_at_.reset();
                record(ctx.tick, labels::kResync);
            }
        }
        for (const auto& g : b.grants) {
            if (g.requester() == id_)
                take_grant(g, ctx.tick);
            else if (relayed_for_.count(g.requester()))
                grants_for_children_.push_back(g);
        }
        return;
    }
    case FrameType::AssocRequest:
        if (frame.dst == id_)
            responses_.insert(frame.src);
        return;
    case FrameType::GtsRequestCmd:
        if (frame.dst != id_ || !frame.request) {
            ++events_.malformed;
            return;
        }
        {
            GtsRequest r = *frame.request;
            r.relayed_by = id_;
            relay_.push_back(r);
            relayed_for_.insert(r.requester);
        }
        return;
    default:
        return;
    }
}

void Coordinator::on_overhear(NodeId tx, double dbm, SuperframeCounter k)
{
    observations_[tx] = PowerObservation{dbm, k};
}

// ---------------------------------------------------------------------------

Leaf::Leaf(NodeId id, NodeId parent, const ProtocolConfig& config)
    : NodeMachine(id, NodeRole::Leaf, config)
{
    parent_ = parent;
}

void Leaf::begin_slot(const SlotContext& ctx, std::vector<Frame>& out)
{
    if (!powered_)
        return;
    if (assoc_.phase != AssociationPhase::Associated) {
        association_try_pds(ctx, out);
        return;
    }
    use_reservations(ctx, out, true);
}

void Leaf::on_receive(const Frame& frame, const SlotContext& ctx)
{
    if (!powered_ || frame.type != FrameType::Beacon || frame.src != parent_ || !frame.beacon)
        return;
    const BeaconPayload& b = *frame.beacon;
    learn_schedule(b.schedule);
    if (assoc_.phase != AssociationPhase::Associated) {
        association_on_parent_beacon(b, ctx);
        return;
    }
    for (const auto& g : b.grants)
        take_grant(g, ctx.tick);
}

// ---------------------------------------------------------------------------

namespace {

std::optional<CaptureMeasurement> measure_side(NodeId coordinator,
                                               const std::map<NodeId, PowerObservation>& obs,
                                               NodeId own, NodeId other, double margin,
                                               SuperframeCounter now, SuperframeCounter freshness,
                                               SgtsRejection& rejection)
{
    rejection.coordinator = coordinator;
    rejection.delta_db = std::numeric_limits<double>::quiet_NaN();
    auto po = obs.find(own);
    auto pt = obs.find(other);
    if (po == obs.end() || pt == obs.end()) {
        rejection.reason = "missing measurement";
        return std::nullopt;
    }
    if (now - po->second.superframe > freshness || now - pt->second.superframe > freshness) {
        rejection.reason = "stale measurement";
        return std::nullopt;
    }
    CaptureMeasurement m{coordinator, own,
                         other,       po->second.dbm,
                         pt->second.dbm, margin,
                         std::min(po->second.superframe, pt->second.superframe)};
    rejection.delta_db = m.delta_db();
    if (!m.satisfied()) {
        rejection.reason = "capture condition not met";
        return std::nullopt;
    }
    return m;
}

}  // namespace

SgtsNegotiation negotiate_sgts(NodeId c1, const std::map<NodeId, PowerObservation>& c1_observations,
                               NodeId c2, const std::map<NodeId, PowerObservation>& c2_observations,
                               NodeId f1, NodeId f2, double margin_db, SuperframeCounter now,
                               SuperframeCounter freshness)
{
    SgtsRejection rejection;
    CaptureEvidence evidence;
    evidence.proposer = measure_side(c1, c1_observations, f1, f2, margin_db, now, freshness, rejection);
    if (!evidence.proposer)
        return rejection;
    evidence.confirmer = measure_side(c2, c2_observations, f2, f1, margin_db, now, freshness, rejection);
    if (!evidence.confirmer)
        return rejection;
    return evidence;
}

}  // namespace detmac
