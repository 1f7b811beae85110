#ifndef DETMAC_CORE_H
#define DETMAC_CORE_H

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace detmac {

inline constexpr int kSlotsPerSuperframe = 16;
inline constexpr int kMaxBeaconOrder = 14;
inline constexpr int kDefaultMaxLevel = 3;
inline constexpr int kDefaultNodeCap = 64;

/// Simulation time in ticks. One tick is one slot at beacon order 0.
using Tick = std::int64_t;
/// Global superframe counter, starting at 0 with the first superbeacon.
using SuperframeCounter = std::int64_t;

enum class NodeId : std::uint16_t {};

constexpr int to_int(NodeId id) { return static_cast<int>(id); }
std::string to_string(NodeId id);

/// Index of a slot inside a superframe. Arithmetic wraps modulo 16.
class SlotIndex {
public:
    constexpr SlotIndex() = default;
    constexpr explicit SlotIndex(int value) : value_(value)
    {
        if (value < 0 || value >= kSlotsPerSuperframe)
            throw std::out_of_range("slot index out of range [0, 15]");
    }

    constexpr int value() const { return value_; }

    constexpr SlotIndex operator+(int offset) const
    {
        int v = (value_ + offset) % kSlotsPerSuperframe;
        return SlotIndex(v < 0 ? v + kSlotsPerSuperframe : v);
    }

    constexpr auto operator<=>(const SlotIndex&) const = default;

private:
    int value_ = 0;
};

class BeaconOrder {
public:
    constexpr BeaconOrder() = default;
    constexpr explicit BeaconOrder(int bo) : bo_(bo)
    {
        if (bo < 0 || bo > kMaxBeaconOrder)
            throw std::out_of_range("beacon order out of range [0, 14]");
    }

    constexpr int value() const { return bo_; }
    /// Ticks per slot: 2^bo.
    constexpr Tick slot_ticks() const { return Tick{1} << bo_; }
    constexpr Tick superframe_ticks() const { return kSlotsPerSuperframe * slot_ticks(); }

    constexpr auto operator<=>(const BeaconOrder&) const = default;

private:
    int bo_ = 3;
};

/// Reservation level n: the reservation recurs every 2^n superframes.
class ReservationLevel {
public:
    constexpr ReservationLevel() = default;
    constexpr explicit ReservationLevel(int n) : n_(n)
    {
        if (n < 0 || n > 30)
            throw std::out_of_range("reservation level must be non-negative");
    }

    constexpr int n() const { return n_; }
    constexpr std::int64_t period() const { return std::int64_t{1} << n_; }

    constexpr auto operator<=>(const ReservationLevel&) const = default;

private:
    int n_ = 0;
};

enum class NodeRole { Supercoordinator, Coordinator, Leaf };

std::string_view to_string(NodeRole role);
std::optional<NodeRole> parse_role(std::string_view text);

enum class AssignmentKind { SuperBeacon, Gbs, Gts, Pds, Sgts, Cap };

std::string_view to_string(AssignmentKind kind);

enum class AssignmentId : std::uint32_t {};

constexpr std::uint32_t to_int(AssignmentId id) { return static_cast<std::uint32_t>(id); }

/// One periodic reservation of a slot (or a run of contiguous slots).
///
/// The reservation occupies superframe k iff k mod 2^level == phase. Phases are
/// stored canonically (already reduced modulo 2^level). CAP entries have no
/// owner; SGTS entries have exactly two.
struct SlotAssignment {
    AssignmentId id{};
    AssignmentKind kind = AssignmentKind::Gts;
    std::vector<NodeId> owners;
    SlotIndex slot;
    int length = 1;
    ReservationLevel level;
    std::int64_t phase = 0;

    bool owned_by(NodeId node) const;
    int last_slot() const { return slot.value() + length - 1; }
    bool covers(SlotIndex s) const { return s.value() >= slot.value() && s.value() <= last_slot(); }

    friend bool operator==(const SlotAssignment&, const SlotAssignment&) = default;
};

SlotAssignment make_superbeacon(NodeId supercoordinator);
SlotAssignment make_gbs(NodeId coordinator, SlotIndex slot);
/// GTS or PDS for a single owner. Phase is canonicalized modulo 2^level.
SlotAssignment make_reservation(AssignmentKind kind, NodeId owner, SlotIndex slot,
                                ReservationLevel level, std::int64_t phase, int length = 1);
SlotAssignment make_sgts(NodeId first, NodeId second, SlotIndex slot,
                         ReservationLevel level, std::int64_t phase, int length = 1);
SlotAssignment make_cap(SlotIndex slot, ReservationLevel level = ReservationLevel(0),
                        std::int64_t phase = 0);

/// Throws std::invalid_argument when the assignment breaks a structural invariant.
void validate(const SlotAssignment& a, int nmax);

bool occupies(const SlotAssignment& a, SuperframeCounter k);

/// True when some superframe has both assignments active on a common slot.
/// Uses the closed form: with n1 <= n2 they meet iff phase2 mod 2^n1 == phase1.
bool instances_overlap(const SlotAssignment& a, const SlotAssignment& b);

/// Slots of a coordinator superframe that starts at its GBS slot and wraps to slot i-1.
std::array<SlotIndex, kSlotsPerSuperframe> coordinator_superframe_span(SlotIndex gbs_slot);

/// Symmetric, reflexive "can disturb each other" relation over nodes.
///
/// The relation starts as all-interfering or none-interfering and individual
/// pairs are flipped explicitly.
class InterferenceRelation {
public:
    static InterferenceRelation all() { return InterferenceRelation(true); }
    static InterferenceRelation none() { return InterferenceRelation(false); }

    void set(NodeId a, NodeId b, bool interfere);
    bool interferes(NodeId a, NodeId b) const;
    bool default_interferes() const { return default_; }

    friend bool operator==(const InterferenceRelation&, const InterferenceRelation&) = default;

private:
    explicit InterferenceRelation(bool all_interfere) : default_(all_interfere) {}

    bool default_;
    std::set<std::pair<NodeId, NodeId>> flipped_;
};

struct NodeInfo {
    NodeId id{};
    NodeRole role = NodeRole::Leaf;
    std::optional<NodeId> parent;

    friend bool operator==(const NodeInfo&, const NodeInfo&) = default;
};

/// Star-of-stars topology: one supercoordinator, coordinators below it, leaves below coordinators.
class Topology {
public:
    Topology() = default;
    explicit Topology(std::vector<NodeInfo> nodes);

    const std::vector<NodeInfo>& nodes() const { return nodes_; }
    const NodeInfo* find(NodeId id) const;
    bool contains(NodeId id) const { return find(id) != nullptr; }
    const NodeInfo& at(NodeId id) const;
    NodeId supercoordinator() const;
    std::vector<NodeId> coordinators() const;
    std::vector<NodeId> children(NodeId parent) const;
    /// Coordinator heading the star the node belongs to; the supercoordinator is its own star.
    NodeId star_of(NodeId id) const;

    /// Lists every structural violation; empty when the topology is well formed.
    std::vector<std::string> violations(int node_cap = kDefaultNodeCap) const;

private:
    std::vector<NodeInfo> nodes_;  // sorted by id
};

/// True when any owner of a can disturb any owner of b. CAP entries (no owner)
/// are open contention and conflict with everything sharing their instance.
bool owners_interfere(const SlotAssignment& a, const SlotAssignment& b,
                      const InterferenceRelation& relation);

class ScheduleTable {
public:
    ScheduleTable(NodeId supercoordinator, int nmax = kDefaultMaxLevel);

    int nmax() const { return nmax_; }
    std::int64_t hypercycle() const { return std::int64_t{1} << nmax_; }
    NodeId supercoordinator() const { return supercoordinator_; }

    const std::vector<SlotAssignment>& assignments() const { return assignments_; }
    const SlotAssignment* find(AssignmentId id) const;

    /// Inserts a well-formed assignment and returns its new id. Conflicts are not checked here.
    AssignmentId add(SlotAssignment a);
    /// Throws std::out_of_range when the id is absent.
    SlotAssignment remove(AssignmentId id);

    /// Assignments active on (k, s).
    std::vector<const SlotAssignment*> at(SuperframeCounter k, SlotIndex s) const;

    friend bool operator==(const ScheduleTable&, const ScheduleTable&) = default;

private:
    NodeId supercoordinator_;
    int nmax_;
    std::uint32_t next_id_ = 1;
    std::vector<SlotAssignment> assignments_;
};

struct Conflict {
    AssignmentId first{};
    AssignmentId second{};

    friend bool operator==(const Conflict&, const Conflict&) = default;
};

/// Every pair of assignments that share a slot instance and whose owners interfere.
std::vector<Conflict> conflict_check(const ScheduleTable& table,
                                     const InterferenceRelation& relation);

}  // namespace detmac

#endif  // DETMAC_CORE_H
