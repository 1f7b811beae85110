#include "detmac/formal.h"

#include <algorithm>
#include <charconv>
#include <deque>
#include <fstream>
#include <map>
#include <sstream>

namespace detmac {

std::optional<std::size_t> NetModel::place_index(std::string_view name) const
{
    for (std::size_t i = 0; i < places.size(); ++i)
        if (places[i] == name)
            return i;
    return std::nullopt;
}

std::optional<std::size_t> NetModel::transition_index(std::string_view name) const
{
    for (std::size_t i = 0; i < transitions.size(); ++i)
        if (transitions[i].name == name)
            return i;
    return std::nullopt;
}

NetParseError::NetParseError(int line, const std::string& message)
    : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line)
{
}

namespace {

std::string_view trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string_view> words(std::string_view s)
{
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t'))
            ++i;
        std::size_t j = i;
        while (j < s.size() && s[j] != ' ' && s[j] != '\t')
            ++j;
        if (j > i)
            out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

bool valid_name(std::string_view s)
{
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-';
    }) && s != "-";
}

int parse_int(std::string_view s, int line, const char* what)
{
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw NetParseError(line, std::string("expected an integer ") + what + ", got '" + std::string(s) + "'");
    return v;
}

std::vector<Arc> parse_arcs(const NetModel& model, std::string_view list, int line)
{
    std::vector<Arc> arcs;
    list = trim(list);
    if (list == "-")
        return arcs;
    if (list.empty())
        throw NetParseError(line, "empty arc list (write '-' for none)");
    for (auto w : words(list)) {
        std::string_view name = w;
        int weight = 1;
        if (auto colon = w.find(':'); colon != std::string_view::npos) {
            name = w.substr(0, colon);
            weight = parse_int(w.substr(colon + 1), line, "arc weight");
            if (weight < 1)
                throw NetParseError(line, "arc weight must be at least 1");
        }
        auto p = model.place_index(name);
        if (!p)
            throw NetParseError(line, "unknown place '" + std::string(name) + "'");
        auto same = std::find_if(arcs.begin(), arcs.end(), [&](const Arc& a) { return a.place == *p; });
        if (same != arcs.end())
            same->weight += weight;
        else
            arcs.push_back(Arc{*p, weight});
    }
    return arcs;
}

}  // namespace

NetModel parse_net(std::string_view text)
{
    NetModel model;
    enum class Section { None, Places, Transitions } section = Section::None;
    int line_no = 0;
    bool saw_places = false, saw_transitions = false;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty())
            continue;
        if (line == "PLACES") {
            if (saw_places || saw_transitions)
                throw NetParseError(line_no, "PLACES must come once, before TRANSITIONS");
            section = Section::Places;
            saw_places = true;
            continue;
        }
        if (line == "TRANSITIONS") {
            if (!saw_places || saw_transitions)
                throw NetParseError(line_no, "TRANSITIONS must come once, after PLACES");
            section = Section::Transitions;
            saw_transitions = true;
            continue;
        }
        switch (section) {
        case Section::None:
            throw NetParseError(line_no, "statement outside any section");
        case Section::Places: {
            auto w = words(line);
            if (w.size() != 2)
                throw NetParseError(line_no, "expected '<place> <initial tokens>'");
            if (!valid_name(w[0]))
                throw NetParseError(line_no, "invalid place name '" + std::string(w[0]) + "'");
            if (model.place_index(w[0]))
                throw NetParseError(line_no, "duplicate place '" + std::string(w[0]) + "'");
            int tokens = parse_int(w[1], line_no, "token count");
            if (tokens < 0)
                throw NetParseError(line_no, "initial tokens must be non-negative");
            model.places.emplace_back(w[0]);
            model.initial.push_back(tokens);
            break;
        }
        case Section::Transitions: {
            const auto s1 = line.find(';');
            const auto s2 = s1 == std::string_view::npos ? s1 : line.find(';', s1 + 1);
            if (s2 == std::string_view::npos || line.find(';', s2 + 1) != std::string_view::npos)
                throw NetParseError(line_no, "expected '<name> ; <inputs> ; <outputs>'");
            auto name = trim(line.substr(0, s1));
            if (!valid_name(name))
                throw NetParseError(line_no, "invalid transition name '" + std::string(name) + "'");
            if (model.transition_index(name))
                throw NetParseError(line_no, "duplicate transition '" + std::string(name) + "'");
            NetTransition t;
            t.name = std::string(name);
            t.inputs = parse_arcs(model, line.substr(s1 + 1, s2 - s1 - 1), line_no);
            t.outputs = parse_arcs(model, line.substr(s2 + 1), line_no);
            model.transitions.push_back(std::move(t));
            break;
        }
        }
    }
    if (!saw_places)
        throw NetParseError(line_no, "missing PLACES section");
    if (!saw_transitions)
        throw NetParseError(line_no, "missing TRANSITIONS section");
    return model;
}

std::string serialize(const NetModel& model)
{
    std::ostringstream out;
    out << "PLACES\n";
    for (std::size_t i = 0; i < model.places.size(); ++i)
        out << model.places[i] << ' ' << model.initial[i] << '\n';
    out << "TRANSITIONS\n";
    auto arcs = [&](const std::vector<Arc>& list) {
        if (list.empty())
            return std::string("-");
        std::string s;
        for (const auto& a : list) {
            if (!s.empty())
                s += ' ';
            s += model.places[a.place];
            if (a.weight != 1)
                s += ':' + std::to_string(a.weight);
        }
        return s;
    };
    for (const auto& t : model.transitions)
        out << t.name << " ; " << arcs(t.inputs) << " ; " << arcs(t.outputs) << '\n';
    return out.str();
}

NetModel load_net(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot read " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_net(buf.str());
}

bool enabled(const NetModel& model, const Marking& m, std::size_t transition)
{
    for (const auto& a : model.transitions[transition].inputs)
        if (m[a.place] < a.weight)
            return false;
    return true;
}

Marking fire(const NetModel& model, const Marking& m, std::size_t transition)
{
    Marking next = m;
    for (const auto& a : model.transitions[transition].inputs)
        next[a.place] -= a.weight;
    for (const auto& a : model.transitions[transition].outputs)
        next[a.place] += a.weight;
    return next;
}

Exploration explore(const NetModel& model, int marking_cap)
{
    StateGraph g;
    std::map<Marking, std::size_t> index;
    std::vector<std::pair<std::size_t, std::size_t>> parent;  // (state, transition)

    auto witness = [&](std::size_t state, std::size_t t, Marking last, std::size_t place) {
        CapExceeded w;
        w.place = place;
        w.cap = marking_cap;
        std::vector<std::size_t> chain;
        for (std::size_t s = state; s != 0; s = parent[s].first)
            chain.push_back(s);
        chain.push_back(0);
        std::reverse(chain.begin(), chain.end());
        for (std::size_t i = 0; i < chain.size(); ++i) {
            w.markings.push_back(g.states[chain[i]]);
            if (i > 0)
                w.transitions.push_back(parent[chain[i]].second);
        }
        w.transitions.push_back(t);
        w.markings.push_back(std::move(last));
        return w;
    };

    for (std::size_t p = 0; p < model.places.size(); ++p)
        if (model.initial[p] > marking_cap) {
            CapExceeded w;
            w.place = p;
            w.cap = marking_cap;
            w.markings.push_back(model.initial);
            return w;
        }

    g.states.push_back(model.initial);
    g.outgoing.emplace_back();
    parent.emplace_back(0, 0);
    index.emplace(model.initial, 0);

    for (std::size_t s = 0; s < g.states.size(); ++s) {
        for (std::size_t t = 0; t < model.transitions.size(); ++t) {
            if (!enabled(model, g.states[s], t))
                continue;
            Marking next = fire(model, g.states[s], t);
            for (std::size_t p = 0; p < next.size(); ++p)
                if (next[p] > marking_cap)
                    return witness(s, t, std::move(next), p);
            auto [it, inserted] = index.emplace(next, g.states.size());
            if (inserted) {
                g.states.push_back(std::move(next));
                g.outgoing.emplace_back();
                parent.emplace_back(s, t);
            }
            g.outgoing[s].push_back(g.edges.size());
            g.edges.push_back(GraphEdge{s, t, it->second});
        }
    }
    return g;
}

int BoundReport::max_bound() const
{
    return bounds.empty() ? 0 : *std::max_element(bounds.begin(), bounds.end());
}

BoundReport check_bounded(const Exploration& exploration, const NetModel& model)
{
    BoundReport r;
    if (const auto* cap = std::get_if<CapExceeded>(&exploration)) {
        r.witness = *cap;
        return r;
    }
    const auto& g = std::get<StateGraph>(exploration);
    r.bounded = true;
    r.bounds.assign(model.places.size(), 0);
    for (const auto& m : g.states)
        for (std::size_t p = 0; p < m.size(); ++p)
            r.bounds[p] = std::max(r.bounds[p], m[p]);
    return r;
}

std::vector<std::vector<std::size_t>> strongly_connected_components(const StateGraph& graph)
{
    const std::size_t n = graph.states.size();
    constexpr std::size_t kUnset = static_cast<std::size_t>(-1);
    std::vector<std::size_t> order(n, kUnset), low(n, 0);
    std::vector<bool> on_stack(n, false);
    std::vector<std::size_t> stack;
    std::vector<std::vector<std::size_t>> components;
    std::size_t counter = 0;

    struct Frame {
        std::size_t state;
        std::size_t next_edge;
    };
    for (std::size_t root = 0; root < n; ++root) {
        if (order[root] != kUnset)
            continue;
        std::vector<Frame> call{{root, 0}};
        order[root] = low[root] = counter++;
        stack.push_back(root);
        on_stack[root] = true;
        while (!call.empty()) {
            Frame& f = call.back();
            const auto& out = graph.outgoing[f.state];
            if (f.next_edge < out.size()) {
                const std::size_t w = graph.edges[out[f.next_edge++]].to;
                if (order[w] == kUnset) {
                    order[w] = low[w] = counter++;
                    stack.push_back(w);
                    on_stack[w] = true;
                    call.push_back({w, 0});
                } else if (on_stack[w]) {
                    low[f.state] = std::min(low[f.state], order[w]);
                }
                continue;
            }
            const std::size_t v = f.state;
            call.pop_back();
            if (!call.empty())
                low[call.back().state] = std::min(low[call.back().state], low[v]);
            if (low[v] == order[v]) {
                std::vector<std::size_t> comp;
                std::size_t w;
                do {
                    w = stack.back();
                    stack.pop_back();
                    on_stack[w] = false;
                    comp.push_back(w);
                } while (w != v);
                std::sort(comp.begin(), comp.end());
                components.push_back(std::move(comp));
            }
        }
    }
    return components;
}

namespace {

/// Components with no edge leaving them.
std::vector<std::vector<std::size_t>> terminal_components(const StateGraph& graph)
{
    auto comps = strongly_connected_components(graph);
    std::vector<std::size_t> comp_of(graph.states.size());
    for (std::size_t c = 0; c < comps.size(); ++c)
        for (auto s : comps[c])
            comp_of[s] = c;
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t c = 0; c < comps.size(); ++c) {
        bool closed = true;
        for (auto s : comps[c])
            for (auto e : graph.outgoing[s])
                if (comp_of[graph.edges[e].to] != c)
                    closed = false;
        if (closed)
            out.push_back(comps[c]);
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

LivenessReport check_live(const StateGraph& graph, const NetModel& model)
{
    LivenessReport r;
    for (std::size_t s = 0; s < graph.states.size(); ++s)
        if (graph.outgoing[s].empty())
            r.deadlocks.push_back(s);
    std::vector<bool> dead(model.transitions.size(), false);
    for (const auto& comp : terminal_components(graph)) {
        std::vector<bool> fired(model.transitions.size(), false);
        for (auto s : comp)
            for (auto e : graph.outgoing[s])
                fired[graph.edges[e].transition] = true;
        for (std::size_t t = 0; t < fired.size(); ++t)
            if (!fired[t])
                dead[t] = true;
    }
    for (std::size_t t = 0; t < dead.size(); ++t)
        if (dead[t])
            r.dead_transitions.push_back(t);
    r.live = r.dead_transitions.empty() && r.deadlocks.empty();
    return r;
}

HomeReport check_reinitializable(const StateGraph& graph)
{
    HomeReport r;
    auto terminal = terminal_components(graph);
    for (const auto& comp : terminal) {
        if (!std::binary_search(comp.begin(), comp.end(), graph.initial())) {
            if (!r.counterexample || comp.front() < *r.counterexample)
                r.counterexample = comp.front();
        }
    }
    r.home = !r.counterexample;
    return r;
}

std::vector<std::size_t> path_to(const StateGraph& graph, std::size_t target)
{
    std::vector<std::pair<std::size_t, std::size_t>> via(graph.states.size(), {SIZE_MAX, 0});
    std::deque<std::size_t> queue{graph.initial()};
    via[graph.initial()] = {graph.initial(), 0};
    while (!queue.empty()) {
        std::size_t s = queue.front();
        queue.pop_front();
        if (s == target)
            break;
        for (auto e : graph.outgoing[s]) {
            const auto& edge = graph.edges[e];
            if (via[edge.to].first == SIZE_MAX) {
                via[edge.to] = {s, edge.transition};
                queue.push_back(edge.to);
            }
        }
    }
    std::vector<std::size_t> path;
    if (via[target].first == SIZE_MAX)
        return path;
    for (std::size_t s = target; s != graph.initial(); s = via[s].first)
        path.push_back(via[s].second);
    std::reverse(path.begin(), path.end());
    return path;
}

std::string format_marking(const NetModel& model, const Marking& m)
{
    std::string out = "{";
    bool first = true;
    for (std::size_t p = 0; p < m.size(); ++p) {
        if (m[p] == 0)
            continue;
        if (!first)
            out += ' ';
        first = false;
        out += model.places[p];
        if (m[p] != 1)
            out += ':' + std::to_string(m[p]);
    }
    return out + "}";
}

std::string edge_list(const StateGraph& graph, const NetModel& model)
{
    std::string out;
    for (const auto& e : graph.edges) {
        out += "s" + std::to_string(e.from) + ' ' + model.transitions[e.transition].name + " s" +
               std::to_string(e.to) + "  # " + format_marking(model, graph.states[e.from]) + " -> " +
               format_marking(model, graph.states[e.to]) + '\n';
    }
    return out;
}

std::optional<std::size_t> replay(const NetModel& model, std::span<const std::string> labels)
{
    Marking m = model.initial;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto t = model.transition_index(labels[i]);
        if (!t)
            continue;
        if (!enabled(model, m, *t))
            return i;
        m = fire(model, m, *t);
    }
    return std::nullopt;
}

}  // namespace detmac
