#include "detmac/scheduler.h"

#include <algorithm>
#include <limits>

namespace detmac {

std::string_view to_string(PlacementPolicy policy)
{
    return policy == PlacementPolicy::FirstFit ? "first_fit" : "spread";
}

std::optional<PlacementPolicy> parse_policy(std::string_view text)
{
    if (text == "first_fit")
        return PlacementPolicy::FirstFit;
    if (text == "spread")
        return PlacementPolicy::Spread;
    return std::nullopt;
}

std::string_view to_string(DenyReason reason)
{
    return reason == DenyReason::Full ? "FULL" : "POLICY";
}

std::string_view to_string(InstanceCategory category)
{
    switch (category) {
    case InstanceCategory::Idle: return "IDLE";
    case InstanceCategory::SuperBeacon: return "SUPERBEACON";
    case InstanceCategory::Gbs: return "GBS";
    case InstanceCategory::Gts: return "GTS";
    case InstanceCategory::Pds: return "PDS";
    case InstanceCategory::Sgts: return "SGTS";
    case InstanceCategory::Cap: return "CAP";
    }
    return "?";
}

bool CaptureEvidence::valid(SuperframeCounter now, SuperframeCounter freshness_window) const
{
    if (!two_sided())
        return false;
    const auto& p = *proposer;
    const auto& c = *confirmer;
    if (p.coordinator == c.coordinator || p.own_leaf != c.other_leaf || p.other_leaf != c.own_leaf)
        return false;
    if (p.margin_db != c.margin_db)
        return false;
    for (const auto* m : {&p, &c}) {
        if (!m->satisfied())
            return false;
        if (m->measured_at > now || now - m->measured_at > freshness_window)
            return false;
    }
    return true;
}

Scheduler::Scheduler(Topology topology, InterferenceRelation relation, int nmax,
                     SchedulerConfig config)
    : topology_(std::move(topology)),
      relation_(std::move(relation)),
      config_(config),
      table_(topology_.supercoordinator(), nmax)
{
}

std::vector<SlotAssignment> Scheduler::place_gbs(std::span<const NodeId> coordinators)
{
    const int count = static_cast<int>(coordinators.size());
    if (count < 1 || count > kSlotsPerSuperframe - 1)
        throw std::length_error("GBS placement needs 1 to 15 coordinators, got " +
                                std::to_string(count));
    std::vector<SlotAssignment> out;
    for (int i = 1; i <= count; ++i) {
        SlotIndex slot(kSlotsPerSuperframe * i / (count + 1));
        out.push_back(place_gbs_at(coordinators[i - 1], slot));
    }
    return out;
}

SlotAssignment Scheduler::place_gbs_at(NodeId coordinator, SlotIndex slot)
{
    SlotAssignment a = make_gbs(coordinator, slot);
    if (!fits(a))
        throw std::invalid_argument("GBS slot " + std::to_string(slot.value()) + " for coordinator " +
                                    to_string(coordinator) + " is already taken");
    a.id = table_.add(a);
    return a;
}

SlotAssignment Scheduler::add_cap(SlotIndex slot, ReservationLevel level, std::int64_t phase)
{
    SlotAssignment a = make_cap(slot, level, phase);
    validate(a, table_.nmax());
    if (!fits(a))
        throw std::invalid_argument("CAP slot " + std::to_string(slot.value()) + " is already taken");
    a.id = table_.add(a);
    return a;
}

bool Scheduler::fits(const SlotAssignment& candidate) const
{
    return fits(candidate, std::nullopt);
}

bool Scheduler::fits(const SlotAssignment& candidate, std::optional<AssignmentId> ignore) const
{
    for (const auto& e : table_.assignments()) {
        if (ignore && e.id == *ignore)
            continue;
        if (instances_overlap(candidate, e) && owners_interfere(candidate, e, relation_))
            return false;
    }
    for (const auto& q : quarantine_)
        if (instances_overlap(candidate, q.assignment) &&
            owners_interfere(candidate, q.assignment, relation_))
            return false;
    return true;
}

int Scheduler::reservations_held(NodeId node) const
{
    int held = 0;
    for (const auto& a : table_.assignments())
        if ((a.kind == AssignmentKind::Gts || a.kind == AssignmentKind::Pds ||
             a.kind == AssignmentKind::Sgts) &&
            a.owned_by(node))
            ++held;
    return held;
}

GrantDecision Scheduler::allocate(const GtsRequest& request)
{
    return allocate(request, config_.policy);
}

GrantDecision Scheduler::allocate(const GtsRequest& request, PlacementPolicy policy)
{
    return place(request.requester, request.relayed_by, AssignmentKind::Gts, request.level,
                 request.slot_count, policy);
}

GrantDecision Scheduler::reserve_pds(NodeId owner, ReservationLevel level)
{
    return reserve_pds(owner, level, config_.policy);
}

GrantDecision Scheduler::reserve_pds(NodeId owner, ReservationLevel level, PlacementPolicy policy)
{
    if (is_associated(owner))
        return GrantDecision::denied(owner, DenyReason::Policy);
    std::optional<NodeId> relay;
    if (const NodeInfo* n = topology_.find(owner); n && n->role == NodeRole::Leaf)
        relay = n->parent;
    return place(owner, relay, AssignmentKind::Pds, level, 1, policy);
}

GrantDecision Scheduler::place(NodeId requester, std::optional<NodeId> relay, AssignmentKind kind,
                               ReservationLevel level, int slot_count, PlacementPolicy policy)
{
    if (!topology_.contains(requester))
        throw std::invalid_argument("requester " + to_string(requester) + " is not in the topology");
    if (level.n() > table_.nmax())
        throw std::invalid_argument("reservation level exceeds nmax");
    if (slot_count < 1 || slot_count > kSlotsPerSuperframe - 1)
        throw std::invalid_argument("slot_count must be in [1, 15]");

    if (config_.per_node_cap && reservations_held(requester) >= *config_.per_node_cap)
        return GrantDecision::denied(requester, DenyReason::Policy);

    SlotAssignment shape = make_reservation(kind, requester, SlotIndex(1), level, 0, slot_count);
    auto found = search(shape, requester, relay, policy);
    if (!found)
        return GrantDecision::denied(requester, DenyReason::Full);
    found->id = table_.add(*found);
    return GrantDecision::granted(requester, *found);
}

namespace {

// Circular distance between the starts of two instance sets on the
// hypercycle ring of 16 * H slot positions.
std::int64_t min_ring_distance(const SlotAssignment& a, const SlotAssignment& b, std::int64_t hyper)
{
    const std::int64_t ring = hyper * kSlotsPerSuperframe;
    std::int64_t best = std::numeric_limits<std::int64_t>::max();
    for (std::int64_t ka = a.phase; ka < hyper; ka += a.level.period()) {
        std::int64_t pa = ka * kSlotsPerSuperframe + a.slot.value();
        for (std::int64_t kb = b.phase; kb < hyper; kb += b.level.period()) {
            std::int64_t pb = kb * kSlotsPerSuperframe + b.slot.value();
            std::int64_t d = pa > pb ? pa - pb : pb - pa;
            best = std::min(best, std::min(d, ring - d));
        }
    }
    return best;
}

}  // namespace

std::optional<SlotAssignment> Scheduler::search(const SlotAssignment& shape, NodeId requester,
                                                std::optional<NodeId> relay,
                                                PlacementPolicy policy) const
{
    std::vector<const SlotAssignment*> references;
    if (policy == PlacementPolicy::Spread) {
        NodeId star = relay ? *relay : topology_.star_of(requester);
        for (const auto& e : table_.assignments()) {
            if (e.owned_by(requester) || (e.kind == AssignmentKind::Gbs && e.owned_by(star)))
                references.push_back(&e);
        }
    }

    std::optional<SlotAssignment> best;
    std::int64_t best_score = -1;
    const int last_start = kSlotsPerSuperframe - shape.length;
    for (int s = 1; s <= last_start; ++s) {
        for (std::int64_t phase = 0; phase < shape.level.period(); ++phase) {
            SlotAssignment c = shape;
            c.slot = SlotIndex(s);
            c.phase = phase;
            if (!fits(c))
                continue;
            if (policy == PlacementPolicy::FirstFit || references.empty())
                return c;
            std::int64_t score = std::numeric_limits<std::int64_t>::max();
            for (const auto* r : references)
                score = std::min(score, min_ring_distance(c, *r, table_.hypercycle()));
            if (score > best_score) {
                best_score = score;
                best = c;
            }
        }
    }
    return best;
}

GrantDecision Scheduler::merge_sgts(AssignmentId a_id, AssignmentId b_id,
                                    const CaptureEvidence& evidence, SuperframeCounter now)
{
    const SlotAssignment* a = table_.find(a_id);
    const SlotAssignment* b = table_.find(b_id);
    if (!a || !b)
        throw std::out_of_range("SGTS merge refers to an unknown assignment");
    if (a->kind != AssignmentKind::Gts || b->kind != AssignmentKind::Gts)
        throw std::invalid_argument("SGTS merge needs two GTS");
    if (a->level != b->level || a->length != b->length)
        throw std::invalid_argument("SGTS merge needs GTS of equal level and length");
    const NodeId owner_a = a->owners.front();
    const NodeId owner_b = b->owners.front();
    if (topology_.star_of(owner_a) == topology_.star_of(owner_b))
        throw std::invalid_argument("SGTS merge needs leaves of two different stars");

    if (!evidence.valid(now, config_.evidence_freshness))
        return GrantDecision::denied(owner_a, DenyReason::Policy);
    const auto& p = *evidence.proposer;
    const auto& c = *evidence.confirmer;
    bool owners_match = (p.own_leaf == owner_a && c.own_leaf == owner_b) ||
                        (p.own_leaf == owner_b && c.own_leaf == owner_a);
    if (!owners_match || p.coordinator != topology_.star_of(p.own_leaf) ||
        c.coordinator != topology_.star_of(c.own_leaf))
        return GrantDecision::denied(owner_a, DenyReason::Policy);

    // Sharing an instance already frees nothing.
    if (instances_overlap(*a, *b))
        return GrantDecision::denied(owner_a, DenyReason::Policy);

    const SlotAssignment& kept =
        std::tie(a->slot, a->phase) <= std::tie(b->slot, b->phase) ? *a : *b;
    SlotAssignment merged = make_sgts(owner_a, owner_b, kept.slot, kept.level, kept.phase, kept.length);

    for (const auto& e : table_.assignments()) {
        if (e.id == a_id || e.id == b_id)
            continue;
        if (instances_overlap(merged, e) && owners_interfere(merged, e, relation_))
            return GrantDecision::denied(owner_a, DenyReason::Policy);
    }
    for (const auto& q : quarantine_)
        if (instances_overlap(merged, q.assignment) &&
            owners_interfere(merged, q.assignment, relation_))
            return GrantDecision::denied(owner_a, DenyReason::Policy);

    table_.remove(a_id);
    table_.remove(b_id);
    merged.id = table_.add(merged);
    return GrantDecision::granted(owner_a, merged);
}

SlotAssignment Scheduler::release(AssignmentId id)
{
    return table_.remove(id);
}

void Scheduler::quarantine(SlotAssignment a, SuperframeCounter until)
{
    quarantine_.push_back({std::move(a), until});
}

void Scheduler::expire_quarantine(SuperframeCounter now)
{
    std::erase_if(quarantine_, [now](const Quarantine& q) { return q.until <= now; });
}

std::int64_t UtilizationReport::total() const
{
    std::int64_t sum = 0;
    for (const auto& [category, count] : counts)
        sum += count;
    return sum;
}

namespace {

int precedence(AssignmentKind kind)
{
    switch (kind) {
    case AssignmentKind::SuperBeacon: return 6;
    case AssignmentKind::Gbs: return 5;
    case AssignmentKind::Sgts: return 4;
    case AssignmentKind::Gts: return 3;
    case AssignmentKind::Pds: return 2;
    case AssignmentKind::Cap: return 1;
    }
    return 0;
}

InstanceCategory category_of(AssignmentKind kind)
{
    switch (kind) {
    case AssignmentKind::SuperBeacon: return InstanceCategory::SuperBeacon;
    case AssignmentKind::Gbs: return InstanceCategory::Gbs;
    case AssignmentKind::Gts: return InstanceCategory::Gts;
    case AssignmentKind::Pds: return InstanceCategory::Pds;
    case AssignmentKind::Sgts: return InstanceCategory::Sgts;
    case AssignmentKind::Cap: return InstanceCategory::Cap;
    }
    return InstanceCategory::Idle;
}

}  // namespace

UtilizationReport utilization(const ScheduleTable& table, const TrafficLog& log)
{
    UtilizationReport report;
    report.hypercycle = table.hypercycle();
    report.instances.resize(static_cast<std::size_t>(report.hypercycle));
    for (auto c : {InstanceCategory::Idle, InstanceCategory::SuperBeacon, InstanceCategory::Gbs,
                   InstanceCategory::Gts, InstanceCategory::Pds, InstanceCategory::Sgts,
                   InstanceCategory::Cap})
        report.counts[c] = 0;

    for (std::int64_t k = 0; k < report.hypercycle; ++k) {
        for (int s = 0; s < kSlotsPerSuperframe; ++s) {
            int best = 0;
            InstanceCategory category = InstanceCategory::Idle;
            for (const auto* a : table.at(k, SlotIndex(s))) {
                if (precedence(a->kind) > best) {
                    best = precedence(a->kind);
                    category = category_of(a->kind);
                }
            }
            report.instances[k][s] = category;
            ++report.counts[category];
        }
    }

    for (SuperframeCounter k = log.first_superframe;
         k < log.first_superframe + log.superframe_count; ++k) {
        for (const auto& a : table.assignments()) {
            if (a.kind != AssignmentKind::Pds || !occupies(a, k))
                continue;
            ++report.pds_instances;
            bool used = false;
            for (int s = a.slot.value(); s <= a.last_slot() && !used; ++s)
                used = log.transmitted(k, SlotIndex(s), a.owners.front());
            if (!used)
                ++report.wasted_pds;
        }
    }
    return report;
}

}  // namespace detmac
