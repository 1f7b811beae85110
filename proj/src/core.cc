#include "detmac/core.h"

#include <algorithm>

namespace detmac {

std::string to_string(NodeId id)
{
    return std::to_string(to_int(id));
}

std::string_view to_string(NodeRole role)
{
    switch (role) {
    case NodeRole::Supercoordinator: return "supercoordinator";
    case NodeRole::Coordinator: return "coordinator";
    case NodeRole::Leaf: return "leaf";
    }
    return "?";
}

std::optional<NodeRole> parse_role(std::string_view text)
{
    if (text == "supercoordinator")
        return NodeRole::Supercoordinator;
    if (text == "coordinator")
        return NodeRole::Coordinator;
    if (text == "leaf")
        return NodeRole::Leaf;
    return std::nullopt;
}

std::string_view to_string(AssignmentKind kind)
{
    switch (kind) {
    case AssignmentKind::SuperBeacon: return "SUPERBEACON";
    case AssignmentKind::Gbs: return "GBS";
    case AssignmentKind::Gts: return "GTS";
    case AssignmentKind::Pds: return "PDS";
    case AssignmentKind::Sgts: return "SGTS";
    case AssignmentKind::Cap: return "CAP";
    }
    return "?";
}

bool SlotAssignment::owned_by(NodeId node) const
{
    return std::find(owners.begin(), owners.end(), node) != owners.end();
}

namespace {

std::int64_t canonical_phase(std::int64_t phase, ReservationLevel level)
{
    std::int64_t p = phase % level.period();
    return p < 0 ? p + level.period() : p;
}

}  // namespace

SlotAssignment make_superbeacon(NodeId supercoordinator)
{
    SlotAssignment a;
    a.kind = AssignmentKind::SuperBeacon;
    a.owners = {supercoordinator};
    a.slot = SlotIndex(0);
    return a;
}

SlotAssignment make_gbs(NodeId coordinator, SlotIndex slot)
{
    if (slot.value() == 0)
        throw std::invalid_argument("slot 0 belongs to the superbeacon");
    SlotAssignment a;
    a.kind = AssignmentKind::Gbs;
    a.owners = {coordinator};
    a.slot = slot;
    return a;
}

SlotAssignment make_reservation(AssignmentKind kind, NodeId owner, SlotIndex slot,
                                ReservationLevel level, std::int64_t phase, int length)
{
    if (kind != AssignmentKind::Gts && kind != AssignmentKind::Pds)
        throw std::invalid_argument("make_reservation builds GTS or PDS only");
    SlotAssignment a;
    a.kind = kind;
    a.owners = {owner};
    a.slot = slot;
    a.length = length;
    a.level = level;
    a.phase = canonical_phase(phase, level);
    return a;
}

SlotAssignment make_sgts(NodeId first, NodeId second, SlotIndex slot,
                         ReservationLevel level, std::int64_t phase, int length)
{
    SlotAssignment a;
    a.kind = AssignmentKind::Sgts;
    a.owners = {std::min(first, second), std::max(first, second)};
    a.slot = slot;
    a.length = length;
    a.level = level;
    a.phase = canonical_phase(phase, level);
    return a;
}

SlotAssignment make_cap(SlotIndex slot, ReservationLevel level, std::int64_t phase)
{
    SlotAssignment a;
    a.kind = AssignmentKind::Cap;
    a.slot = slot;
    a.level = level;
    a.phase = canonical_phase(phase, level);
    return a;
}

void validate(const SlotAssignment& a, int nmax)
{
    if (a.level.n() > nmax)
        throw std::invalid_argument("reservation level exceeds nmax");
    if (a.phase < 0 || a.phase >= a.level.period())
        throw std::invalid_argument("phase is not canonical for its level");
    if (a.length < 1 || a.last_slot() >= kSlotsPerSuperframe)
        throw std::invalid_argument("reservation must fit inside one superframe");

    switch (a.kind) {
    case AssignmentKind::SuperBeacon:
        if (a.slot.value() != 0 || a.level.n() != 0 || a.length != 1 || a.owners.size() != 1)
            throw std::invalid_argument("superbeacon must be slot 0, level 0, single owner");
        return;
    case AssignmentKind::Cap:
        if (!a.owners.empty())
            throw std::invalid_argument("CAP slots have no owner");
        break;
    case AssignmentKind::Sgts:
        if (a.owners.size() != 2 || a.owners[0] == a.owners[1])
            throw std::invalid_argument("SGTS needs exactly two distinct owners");
        break;
    case AssignmentKind::Gbs:
        if (a.level.n() != 0 || a.length != 1)
            throw std::invalid_argument("GBS recurs every superframe on one slot");
        [[fallthrough]];
    case AssignmentKind::Gts:
    case AssignmentKind::Pds:
        if (a.owners.size() != 1)
            throw std::invalid_argument("reservation needs exactly one owner");
        break;
    }
    if (a.slot.value() == 0)
        throw std::invalid_argument("slot 0 is reserved for the superbeacon");
}

bool occupies(const SlotAssignment& a, SuperframeCounter k)
{
    return k % a.level.period() == a.phase;
}

bool instances_overlap(const SlotAssignment& a, const SlotAssignment& b)
{
    if (a.last_slot() < b.slot.value() || b.last_slot() < a.slot.value())
        return false;
    const SlotAssignment& coarse = a.level.n() <= b.level.n() ? a : b;
    const SlotAssignment& fine = a.level.n() <= b.level.n() ? b : a;
    return fine.phase % coarse.level.period() == coarse.phase;
}

std::array<SlotIndex, kSlotsPerSuperframe> coordinator_superframe_span(SlotIndex gbs_slot)
{
    if (gbs_slot.value() == 0)
        throw std::invalid_argument("slot 0 is the superbeacon slot, not a GBS");
    std::array<SlotIndex, kSlotsPerSuperframe> span;
    for (int i = 0; i < kSlotsPerSuperframe; ++i)
        span[i] = gbs_slot + i;
    return span;
}

void InterferenceRelation::set(NodeId a, NodeId b, bool interfere)
{
    if (a == b)
        return;
    auto key = std::minmax(a, b);
    if (interfere == default_)
        flipped_.erase(key);
    else
        flipped_.insert(key);
}

bool InterferenceRelation::interferes(NodeId a, NodeId b) const
{
    if (a == b)
        return true;
    bool flipped = flipped_.count(std::minmax(a, b)) != 0;
    return flipped ? !default_ : default_;
}

Topology::Topology(std::vector<NodeInfo> nodes) : nodes_(std::move(nodes))
{
    std::sort(nodes_.begin(), nodes_.end(),
              [](const NodeInfo& a, const NodeInfo& b) { return a.id < b.id; });
}

const NodeInfo* Topology::find(NodeId id) const
{
    auto it = std::lower_bound(nodes_.begin(), nodes_.end(), id,
                               [](const NodeInfo& n, NodeId v) { return n.id < v; });
    if (it == nodes_.end() || it->id != id)
        return nullptr;
    return &*it;
}

const NodeInfo& Topology::at(NodeId id) const
{
    const NodeInfo* n = find(id);
    if (!n)
        throw std::out_of_range("unknown node " + to_string(id));
    return *n;
}

NodeId Topology::supercoordinator() const
{
    for (const auto& n : nodes_)
        if (n.role == NodeRole::Supercoordinator)
            return n.id;
    throw std::logic_error("topology has no supercoordinator");
}

std::vector<NodeId> Topology::coordinators() const
{
    std::vector<NodeId> out;
    for (const auto& n : nodes_)
        if (n.role == NodeRole::Coordinator)
            out.push_back(n.id);
    return out;
}

std::vector<NodeId> Topology::children(NodeId parent) const
{
    std::vector<NodeId> out;
    for (const auto& n : nodes_)
        if (n.parent == parent)
            out.push_back(n.id);
    return out;
}

NodeId Topology::star_of(NodeId id) const
{
    const NodeInfo& n = at(id);
    if (n.role == NodeRole::Leaf && n.parent)
        return *n.parent;
    return n.id;
}

std::vector<std::string> Topology::violations(int node_cap) const
{
    std::vector<std::string> out;
    if (static_cast<int>(nodes_.size()) > node_cap)
        out.push_back("network has " + std::to_string(nodes_.size()) + " nodes, cap is " +
                      std::to_string(node_cap));
    for (std::size_t i = 1; i < nodes_.size(); ++i)
        if (nodes_[i].id == nodes_[i - 1].id)
            out.push_back("duplicate node id " + to_string(nodes_[i].id));

    std::vector<NodeId> supers;
    for (const auto& n : nodes_)
        if (n.role == NodeRole::Supercoordinator)
            supers.push_back(n.id);
    if (supers.empty())
        out.push_back("no supercoordinator declared");
    for (std::size_t i = 1; i < supers.size(); ++i)
        out.push_back("duplicate supercoordinator: node " + to_string(supers[i]) +
                      " (node " + to_string(supers[0]) + " already declared)");

    int coordinators = 0;
    for (const auto& n : nodes_) {
        switch (n.role) {
        case NodeRole::Supercoordinator:
            if (n.parent)
                out.push_back("supercoordinator " + to_string(n.id) + " cannot have a parent");
            break;
        case NodeRole::Coordinator: {
            ++coordinators;
            const NodeInfo* p = n.parent ? find(*n.parent) : nullptr;
            if (!p || p->role != NodeRole::Supercoordinator)
                out.push_back("coordinator " + to_string(n.id) +
                              " must have the supercoordinator as parent");
            break;
        }
        case NodeRole::Leaf: {
            const NodeInfo* p = n.parent ? find(*n.parent) : nullptr;
            if (!p || p->role != NodeRole::Coordinator)
                out.push_back("leaf " + to_string(n.id) + " must have a coordinator as parent");
            break;
        }
        }
    }
    if (coordinators > kSlotsPerSuperframe - 1)
        out.push_back("at most 15 coordinators fit in a superframe, got " +
                      std::to_string(coordinators));
    return out;
}

bool owners_interfere(const SlotAssignment& a, const SlotAssignment& b,
                      const InterferenceRelation& relation)
{
    if (a.owners.empty() || b.owners.empty())
        return true;
    for (NodeId x : a.owners)
        for (NodeId y : b.owners)
            if (relation.interferes(x, y))
                return true;
    return false;
}

ScheduleTable::ScheduleTable(NodeId supercoordinator, int nmax)
    : supercoordinator_(supercoordinator), nmax_(nmax)
{
    if (nmax < 0 || nmax > 16)
        throw std::invalid_argument("nmax must be in [0, 16]");
    add(make_superbeacon(supercoordinator));
}

const SlotAssignment* ScheduleTable::find(AssignmentId id) const
{
    auto it = std::lower_bound(assignments_.begin(), assignments_.end(), id,
                               [](const SlotAssignment& a, AssignmentId v) { return a.id < v; });
    if (it == assignments_.end() || it->id != id)
        return nullptr;
    return &*it;
}

AssignmentId ScheduleTable::add(SlotAssignment a)
{
    validate(a, nmax_);
    if (a.kind == AssignmentKind::SuperBeacon && !assignments_.empty())
        throw std::invalid_argument("table already holds the superbeacon");
    a.id = AssignmentId{next_id_++};
    assignments_.push_back(std::move(a));
    return assignments_.back().id;
}

SlotAssignment ScheduleTable::remove(AssignmentId id)
{
    auto it = std::lower_bound(assignments_.begin(), assignments_.end(), id,
                               [](const SlotAssignment& a, AssignmentId v) { return a.id < v; });
    if (it == assignments_.end() || it->id != id)
        throw std::out_of_range("assignment " + std::to_string(to_int(id)) + " not found");
    if (it->kind == AssignmentKind::SuperBeacon)
        throw std::invalid_argument("the superbeacon cannot be released");
    SlotAssignment out = std::move(*it);
    assignments_.erase(it);
    return out;
}

std::vector<const SlotAssignment*> ScheduleTable::at(SuperframeCounter k, SlotIndex s) const
{
    std::vector<const SlotAssignment*> out;
    for (const auto& a : assignments_)
        if (a.covers(s) && occupies(a, k))
            out.push_back(&a);
    return out;
}

std::vector<Conflict> conflict_check(const ScheduleTable& table,
                                     const InterferenceRelation& relation)
{
    std::vector<Conflict> out;
    const auto& all = table.assignments();
    for (std::size_t i = 0; i < all.size(); ++i)
        for (std::size_t j = i + 1; j < all.size(); ++j)
            if (instances_overlap(all[i], all[j]) && owners_interfere(all[i], all[j], relation))
                out.push_back({all[i].id, all[j].id});
    return out;
}

}  // namespace detmac
