#include "detmac/scenario.h"

#include <algorithm>
#include <regex>
#include <set>

#include "detmac/radio.h"

namespace detmac {

std::string Diagnostic::str() const
{
    if (line > 0)
        return "line " + std::to_string(line) + ": " + message;
    return message;
}

namespace {

std::string join(const std::vector<Diagnostic>& diagnostics)
{
    std::string out;
    for (const auto& d : diagnostics) {
        if (!out.empty())
            out += '\n';
        out += d.str();
    }
    return out;
}

std::string key(const char* kind, std::size_t index)
{
    return std::string(kind) + "#" + std::to_string(index);
}

class Checker {
public:
    explicit Checker(const Scenario& s) : s_(s)
    {
        for (std::size_t i = 0; i < s.nodes.size(); ++i)
            node_index_[s.nodes[i].id] = i;
    }

    void error(const std::string& anchor, std::string message)
    {
        out_.push_back(Diagnostic{s_.source.line(anchor), std::move(message)});
    }

    const NodeInfo* node(NodeId id) const
    {
        auto it = node_index_.find(id);
        return it == node_index_.end() ? nullptr : &s_.nodes[it->second];
    }

    int node_line(NodeId id) const
    {
        auto it = node_index_.find(id);
        return it == node_index_.end() ? 0 : s_.source.line(key("node", it->second));
    }

    /// Node must exist and, if given, not be the supercoordinator.
    bool known(const std::string& anchor, NodeId id, bool allow_super = false)
    {
        const NodeInfo* n = node(id);
        if (!n) {
            error(anchor, "unknown node " + to_string(id));
            return false;
        }
        if (!allow_super && n->role == NodeRole::Supercoordinator) {
            error(anchor, "node " + to_string(id) + " is the supercoordinator");
            return false;
        }
        return true;
    }

    std::vector<Diagnostic> run();

private:
    const Scenario& s_;
    std::map<NodeId, std::size_t> node_index_;
    std::vector<Diagnostic> out_;
};

std::vector<Diagnostic> Checker::run()
{
    const auto& s = s_;
    if (s.bo < 0 || s.bo > kMaxBeaconOrder)
        error("bo", "beacon order " + std::to_string(s.bo) + " outside [0, 14]");
    if (s.nmax < 0 || s.nmax > 10)
        error("nmax", "nmax " + std::to_string(s.nmax) + " outside [0, 10]");
    const int nmax = std::clamp(s.nmax, 0, 10);
    const int bo = std::clamp(s.bo, 0, kMaxBeaconOrder);
    if (s.superframes < 1)
        error("superframes", "a run needs at least one superframe");
    if (s.trace_capacity < 0)
        error("trace", "trace capacity must be non-negative");
    if (s.desync_threshold < 1)
        error("desync", "desync threshold must be at least 1");
    if (s.sgts_freshness < 0)
        error("freshness", "SGTS freshness window must be non-negative");
    if (s.grant_cap && *s.grant_cap < 0)
        error("grant_cap", "grant cap must be non-negative");

    // Topology, anchored on the node the message names.
    static const std::regex named(R"((node|supercoordinator|coordinator|leaf) (\d+))");
    for (const auto& v : Topology(s.nodes).violations()) {
        std::smatch m;
        int line = 0;
        if (std::regex_search(v, m, named))
            line = node_line(NodeId(static_cast<std::uint16_t>(std::stoi(m[2]))));
        if (v.rfind("duplicate node id", 0) == 0) {
            // Point at the second declaration.
            std::size_t seen = 0;
            for (std::size_t i = 0; i < s.nodes.size(); ++i)
                if (to_string(s.nodes[i].id) == v.substr(v.rfind(' ') + 1) && seen++ == 1)
                    line = s.source.line(key("node", i));
        }
        out_.push_back(Diagnostic{line, v});
    }

    for (std::size_t i = 0; i < s.interference.size(); ++i) {
        const auto& st = s.interference[i];
        const auto anchor = key("interference", i);
        if (!known(anchor, st.a, true) || !known(anchor, st.b, true))
            continue;
        if (st.kind == InterferenceStatement::Kind::IsolateStars &&
            (node(st.a)->role != NodeRole::Coordinator || node(st.b)->role != NodeRole::Coordinator))
            error(anchor, "isolate_stars takes two coordinators");
    }

    // GBS plan: none, or one per coordinator.
    if (!s.gbs.empty()) {
        std::set<NodeId> planned;
        std::set<int> slots;
        for (std::size_t i = 0; i < s.gbs.size(); ++i) {
            const auto& g = s.gbs[i];
            const auto anchor = key("gbs", i);
            if (!known(anchor, g.node))
                continue;
            if (node(g.node)->role != NodeRole::Coordinator)
                error(anchor, "GBS for node " + to_string(g.node) + " which is not a coordinator");
            if (g.slot < 1 || g.slot > 15)
                error(anchor, "GBS slot " + std::to_string(g.slot) + " outside [1, 15]");
            if (!planned.insert(g.node).second)
                error(anchor, "second GBS for coordinator " + to_string(g.node));
            if (!slots.insert(g.slot).second)
                error(anchor, "GBS slot " + std::to_string(g.slot) + " used twice");
        }
        for (const auto& n : s.nodes)
            if (n.role == NodeRole::Coordinator && !planned.count(n.id))
                out_.push_back(Diagnostic{node_line(n.id), "coordinator " + to_string(n.id) + " has no GBS"});
    }

    for (std::size_t i = 0; i < s.pds.size(); ++i) {
        const auto& p = s.pds[i];
        const auto anchor = key("pds", i);
        known(anchor, p.node);
        if (p.level < 0 || p.level > nmax)
            error(anchor, "PDS level " + std::to_string(p.level) + " outside [0, " + std::to_string(nmax) + "]");
    }
    for (std::size_t i = 0; i < s.cap.size(); ++i) {
        const auto& c = s.cap[i];
        const auto anchor = key("cap", i);
        if (c.slot < 1 || c.slot > 15)
            error(anchor, "CAP slot " + std::to_string(c.slot) + " outside [1, 15]");
        if (c.level < 0 || c.level > nmax)
            error(anchor, "CAP level " + std::to_string(c.level) + " outside [0, " + std::to_string(nmax) + "]");
        else if (c.phase < 0 || c.phase >= (std::int64_t{1} << c.level))
            error(anchor, "CAP phase " + std::to_string(c.phase) + " outside [0, 2^level)");
    }

    if (s.margin_db < 0)
        error("margin", "capture margin must be non-negative");
    if (s.noise_sigma_db < 0)
        error("noise_sigma", "noise sigma must be non-negative");
    if (s.frame_error_rate < 0 || s.frame_error_rate >= 1)
        error("loss", "frame error rate must be in [0, 1)");
    for (std::size_t i = 0; i < s.powers.size(); ++i) {
        const auto anchor = key("power", i);
        known(anchor, s.powers[i].tx, true);
        known(anchor, s.powers[i].rx, true);
        if (s.powers[i].tx == s.powers[i].rx)
            error(anchor, "power entry from a node to itself");
    }
    for (std::size_t i = 0; i < s.positions.size(); ++i)
        known(key("position", i), s.positions[i].node, true);
    if (s.pathloss && s.positions.empty())
        error("pathloss", "path loss needs node positions");
    if (s.pathloss && s.pathloss->exponent <= 0)
        error("pathloss", "path loss exponent must be positive");
    for (std::size_t i = 0; i < s.leads.size(); ++i)
        known(key("lead", i), s.leads[i].node, true);
    for (std::size_t i = 0; i < s.outages.size(); ++i) {
        const auto& o = s.outages[i];
        const auto anchor = key("outage", i);
        known(anchor, o.node, true);
        if (o.from < 0 || o.count < 1)
            error(anchor, "outage needs from >= 0 and count >= 1");
    }

    if (s.sizes.bytes_per_period < 1)
        error("bytes_per_backoff", "bytes per backoff period must be positive");
    if (s.sizes.assoc_bytes < 1 || s.sizes.request_bytes < 1 || s.sizes.ack_bytes < 1)
        error("frame_sizes", "frame sizes must be positive");
    try {
        s.csma.validate();
    } catch (const std::invalid_argument& e) {
        error("csma", e.what());
    }
    for (std::size_t i = 0; i < s.flows.size(); ++i) {
        const auto& f = s.flows[i];
        const auto anchor = key("flow", i);
        known(anchor, f.node);
        if (f.every < 1 || f.bytes < 1 || f.start < 0)
            error(anchor, "flow needs every >= 1, bytes >= 1 and start >= 0");
    }
    for (std::size_t i = 0; i < s.requests.size(); ++i) {
        const auto& r = s.requests[i];
        const auto anchor = key("request", i);
        known(anchor, r.node);
        if (r.level < 0 || r.level > nmax)
            error(anchor, "request level " + std::to_string(r.level) + " outside [0, " + std::to_string(nmax) + "]");
        if (r.count < 1 || r.at < 0)
            error(anchor, "request needs count >= 1 and at >= 0");
    }
    for (std::size_t i = 0; i < s.sgts.size(); ++i) {
        const auto& g = s.sgts[i];
        const auto anchor = key("sgts", i);
        if (!known(anchor, g.c1) || !known(anchor, g.c2) || !known(anchor, g.f1) || !known(anchor, g.f2))
            continue;
        if (node(g.c1)->role != NodeRole::Coordinator || node(g.c2)->role != NodeRole::Coordinator || g.c1 == g.c2)
            error(anchor, "SGTS needs two distinct coordinators");
        else if (node(g.f1)->parent != g.c1 || node(g.f2)->parent != g.c2)
            error(anchor, "SGTS leaves must belong to the two coordinators' stars");
        if (g.at < 0)
            error(anchor, "SGTS time must be non-negative");
    }

    std::set<NodeId> pre;
    for (std::size_t i = 0; i < s.preassociated.size(); ++i) {
        const auto anchor = key("preassociate", i);
        if (known(anchor, s.preassociated[i]) && !pre.insert(s.preassociated[i]).second)
            error(anchor, "node " + to_string(s.preassociated[i]) + " preassociated twice");
    }
    std::set<NodeId> powered;
    const Tick slot_ticks = Tick{1} << bo;
    for (std::size_t i = 0; i < s.power_on.size(); ++i) {
        const auto& p = s.power_on[i];
        const auto anchor = key("power_on", i);
        if (!known(anchor, p.node))
            continue;
        if (!powered.insert(p.node).second)
            error(anchor, "node " + to_string(p.node) + " powered on twice");
        if (pre.count(p.node))
            error(anchor, "node " + to_string(p.node) + " is preassociated");
        if (p.tick && (*p.tick < 0 || *p.tick % slot_ticks != 0))
            error(anchor, "power-on tick " + std::to_string(*p.tick) + " is not a slot boundary (multiple of " +
                              std::to_string(slot_ticks) + ")");
    }
    for (std::size_t i = 0; i < s.restarts.size(); ++i) {
        const auto anchor = key("restart", i);
        known(anchor, s.restarts[i].node);
        if (s.restarts[i].at < 1)
            error(anchor, "restart time must be at least superframe 1");
    }

    std::stable_sort(out_.begin(), out_.end(), [](const Diagnostic& a, const Diagnostic& b) {
        if ((a.line == 0) != (b.line == 0))
            return b.line == 0;
        return a.line < b.line;
    });
    return out_;
}

}  // namespace

ScenarioError::ScenarioError(std::vector<Diagnostic> diagnostics)
    : std::runtime_error(join(diagnostics)), diagnostics_(std::move(diagnostics))
{
}

std::vector<Diagnostic> validate(const Scenario& scenario)
{
    return Checker(scenario).run();
}

Topology build_topology(const Scenario& scenario)
{
    return Topology(scenario.nodes);
}

InterferenceRelation build_interference(const Scenario& scenario, const Topology& topology)
{
    auto rel = scenario.interference_all ? InterferenceRelation::all() : InterferenceRelation::none();
    for (const auto& st : scenario.interference) {
        switch (st.kind) {
        case InterferenceStatement::Kind::Interfere:
            rel.set(st.a, st.b, true);
            break;
        case InterferenceStatement::Kind::Isolate:
            rel.set(st.a, st.b, false);
            break;
        case InterferenceStatement::Kind::IsolateStars: {
            auto members = [&](NodeId c) {
                auto m = topology.children(c);
                m.push_back(c);
                return m;
            };
            for (NodeId x : members(st.a))
                for (NodeId y : members(st.b))
                    rel.set(x, y, false);
            break;
        }
        }
    }
    return rel;
}

RadioEnvironment build_radio(const Scenario& scenario)
{
    RadioEnvironment env;
    env.capture_margin_db = scenario.margin_db;
    env.sync_offset_bias_db = scenario.sync_offset_bias_db;
    env.noise_sigma_db = scenario.noise_sigma_db;
    env.loss.frame_error_rate = scenario.frame_error_rate;
    env.default_power_dbm = scenario.default_power_dbm;
    if (scenario.pathloss) {
        std::map<NodeId, std::pair<double, double>> pos;
        for (const auto& p : scenario.positions)
            pos[p.node] = {p.x, p.y};
        apply_log_distance(env, pos, scenario.pathloss->p0_dbm, scenario.pathloss->exponent,
                           scenario.pathloss->floor_dbm);
    }
    for (const auto& p : scenario.powers)
        env.set_power(p.tx, p.rx, p.dbm);
    return env;
}

Scheduler build_scheduler(const Scenario& scenario)
{
    Topology topology = build_topology(scenario);
    InterferenceRelation relation = build_interference(scenario, topology);
    SchedulerConfig config;
    config.policy = scenario.policy;
    config.per_node_cap = scenario.grant_cap;
    config.evidence_freshness = scenario.sgts_freshness;
    Scheduler sched(topology, relation, scenario.nmax, config);

    std::vector<Diagnostic> errors;
    const auto& src = scenario.source;
    if (scenario.gbs.empty()) {
        auto coordinators = topology.coordinators();
        if (!coordinators.empty())
            sched.place_gbs(coordinators);
    } else {
        for (std::size_t i = 0; i < scenario.gbs.size(); ++i) {
            try {
                sched.place_gbs_at(scenario.gbs[i].node, SlotIndex(scenario.gbs[i].slot));
            } catch (const std::exception& e) {
                errors.push_back(Diagnostic{src.line(key("gbs", i)), e.what()});
            }
        }
    }
    for (std::size_t i = 0; i < scenario.cap.size(); ++i) {
        const auto& c = scenario.cap[i];
        try {
            sched.add_cap(SlotIndex(c.slot), ReservationLevel(c.level), c.phase);
        } catch (const std::exception& e) {
            errors.push_back(Diagnostic{src.line(key("cap", i)), e.what()});
        }
    }
    for (std::size_t i = 0; i < scenario.pds.size(); ++i) {
        const auto& p = scenario.pds[i];
        GrantDecision d = sched.reserve_pds(p.node, ReservationLevel(p.level));
        if (!d.is_granted())
            errors.push_back(Diagnostic{src.line(key("pds", i)),
                                        "PDS for node " + to_string(p.node) + " at level " +
                                            std::to_string(p.level) + " denied (" +
                                            std::string(to_string(d.reason())) + ")"});
    }
    if (!errors.empty())
        throw ScenarioError(std::move(errors));
    return sched;
}

}  // namespace detmac
