#ifndef DETMAC_FORMAL_H
#define DETMAC_FORMAL_H

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace detmac {

struct Arc {
    std::size_t place = 0;
    int weight = 1;
    friend bool operator==(const Arc&, const Arc&) = default;
};

struct NetTransition {
    std::string name;
    std::vector<Arc> inputs;
    std::vector<Arc> outputs;
    friend bool operator==(const NetTransition&, const NetTransition&) = default;
};

/// Place/transition net with arc weights.
struct NetModel {
    std::vector<std::string> places;
    std::vector<int> initial;
    std::vector<NetTransition> transitions;

    std::optional<std::size_t> place_index(std::string_view name) const;
    std::optional<std::size_t> transition_index(std::string_view name) const;

    friend bool operator==(const NetModel&, const NetModel&) = default;
};

class NetParseError : public std::runtime_error {
public:
    NetParseError(int line, const std::string& message);
    int line() const { return line_; }

private:
    int line_;
};

/// Text form:
///   PLACES
///   <name> <initial tokens>
///   TRANSITIONS
///   <name> ; <inputs> ; <outputs>
/// where inputs and outputs are space separated place[:weight] lists, "-" when empty.
/// '#' starts a comment.
NetModel parse_net(std::string_view text);
std::string serialize(const NetModel& model);
/// Throws std::runtime_error when unreadable, NetParseError when malformed.
NetModel load_net(const std::string& path);

using Marking = std::vector<int>;

bool enabled(const NetModel& model, const Marking& m, std::size_t transition);
Marking fire(const NetModel& model, const Marking& m, std::size_t transition);

struct GraphEdge {
    std::size_t from = 0;
    std::size_t transition = 0;
    std::size_t to = 0;
    friend bool operator==(const GraphEdge&, const GraphEdge&) = default;
};

/// Reachability graph; state 0 is the initial marking, states are numbered in BFS order.
struct StateGraph {
    std::vector<Marking> states;
    std::vector<GraphEdge> edges;
    /// Edge indices leaving each state, in transition order.
    std::vector<std::vector<std::size_t>> outgoing;

    std::size_t initial() const { return 0; }
    friend bool operator==(const StateGraph&, const StateGraph&) = default;
};

/// A place went over the cap. The witness fires `transitions` from the initial
/// marking through `markings` (initial first, offending marking last).
struct CapExceeded {
    std::size_t place = 0;
    int cap = 0;
    std::vector<std::size_t> transitions;
    std::vector<Marking> markings;
    friend bool operator==(const CapExceeded&, const CapExceeded&) = default;
};

using Exploration = std::variant<StateGraph, CapExceeded>;

/// Breadth-first reachability, transitions tried in declaration order.
Exploration explore(const NetModel& model, int marking_cap = 8);

struct BoundReport {
    bool bounded = false;
    /// Maximum tokens per place over the reachable states (when bounded).
    std::vector<int> bounds;
    std::optional<CapExceeded> witness;

    int max_bound() const;
    bool safe() const { return bounded && max_bound() <= 1; }
};

BoundReport check_bounded(const Exploration& exploration, const NetModel& model);

struct LivenessReport {
    bool live = false;
    /// Transitions that some reachable state can never fire again.
    std::vector<std::size_t> dead_transitions;
    /// States without successors.
    std::vector<std::size_t> deadlocks;
};

LivenessReport check_live(const StateGraph& graph, const NetModel& model);

struct HomeReport {
    bool home = false;
    /// A reachable state from which the initial marking cannot be reached.
    std::optional<std::size_t> counterexample;
};

HomeReport check_reinitializable(const StateGraph& graph);

/// Tarjan's algorithm; components are listed in reverse topological order.
std::vector<std::vector<std::size_t>> strongly_connected_components(const StateGraph& graph);

/// Transitions of a shortest firing sequence from the initial state to target.
std::vector<std::size_t> path_to(const StateGraph& graph, std::size_t target);

std::string format_marking(const NetModel& model, const Marking& m);

/// One "from transition to" line per edge, states written as markings.
std::string edge_list(const StateGraph& graph, const NetModel& model);

/// Fires the labels that name transitions of the model, skipping the others.
/// Returns the index (into labels) of the first label that could not fire, or
/// nullopt when the whole projected trace is a path of the net.
std::optional<std::size_t> replay(const NetModel& model, std::span<const std::string> labels);

}  // namespace detmac

#endif  // DETMAC_FORMAL_H
