#include "detmac/cli.h"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "detmac/formal.h"
#include "detmac/radio.h"
#include "detmac/scenario_file.h"
#include "detmac/simulator.h"

namespace detmac {

std::string csv_field(const Cell& cell)
{
    return std::visit(
        [](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, std::int64_t>) {
                return std::to_string(v);
            } else if constexpr (std::is_same_v<T, double>) {
                return format_double(v);
            } else if constexpr (std::is_same_v<T, bool>) {
                return v ? "true" : "false";
            } else {
                if (v.find_first_of(",\"\n") == std::string::npos)
                    return v;
                std::string q = "\"";
                for (char c : v) {
                    if (c == '"')
                        q += '"';
                    q += c;
                }
                return q + "\"";
            }
        },
        cell);
}

void write_csv(std::ostream& out, const Table& table)
{
    for (std::size_t i = 0; i < table.columns.size(); ++i)
        out << (i ? "," : "") << table.columns[i];
    out << '\n';
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i)
            out << (i ? "," : "") << csv_field(row[i]);
        out << '\n';
    }
}

void write_json_lines(std::ostream& out, const Table& table)
{
    for (const auto& row : table.rows) {
        nlohmann::ordered_json j;
        j["table"] = table.name;
        for (std::size_t i = 0; i < row.size() && i < table.columns.size(); ++i)
            std::visit([&](const auto& v) { j[table.columns[i]] = v; }, row[i]);
        out << j.dump() << '\n';
    }
}

Output::Output(OutputFormat format, std::optional<std::filesystem::path> dir, std::ostream& out, std::ostream& err)
    : format_(format), dir_(std::move(dir)), out_(out), err_(err)
{
    if (dir_)
        std::filesystem::create_directories(*dir_);
}

void Output::table(const Table& table)
{
    auto write = [&](std::ostream& os) {
        if (format_ == OutputFormat::Table)
            write_csv(os, table);
        else
            write_json_lines(os, table);
    };
    if (dir_) {
        auto path = *dir_ / (table.name + (format_ == OutputFormat::Table ? ".csv" : ".jsonl"));
        std::ofstream f(path);
        if (!f)
            throw std::runtime_error("cannot write " + path.string());
        write(f);
        return;
    }
    if (format_ == OutputFormat::Table && !first_)
        out_ << '\n';
    first_ = false;
    write(out_);
}

void Output::summary(const std::vector<std::string>& lines)
{
    if (dir_) {
        std::ofstream f(*dir_ / "summary.txt");
        for (const auto& l : lines)
            f << l << '\n';
    }
    for (const auto& l : lines)
        err_ << l << '\n';
}

LogLevel log_level_from_env()
{
    const char* v = std::getenv("DETMAC_LOG");
    if (!v)
        return LogLevel::Off;
    std::string s(v);
    if (s == "trace" || s == "1" || s == "debug")
        return LogLevel::Trace;
    if (s == "info")
        return LogLevel::Info;
    return LogLevel::Off;
}

namespace {

struct Globals {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<int> trials;
    std::string format = "table";

    OutputFormat output_format() const
    {
        return format == "json-lines" ? OutputFormat::JsonLines : OutputFormat::Table;
    }
};

std::string node_str(NodeId n) { return to_string(n); }

void print_diagnostics(std::ostream& err, const std::string& path, const std::vector<Diagnostic>& diags)
{
    for (const auto& d : diags) {
        err << path << ':';
        if (d.line > 0)
            err << d.line << ':';
        err << ' ' << d.message << '\n';
    }
}

/// Parses and validates; prints diagnostics and returns nullopt on any problem.
std::optional<Scenario> read_scenario(const std::string& path, std::ostream& err)
{
    try {
        Scenario s = load_scenario(path);
        auto diags = validate(s);
        if (!diags.empty()) {
            print_diagnostics(err, path, diags);
            return std::nullopt;
        }
        return s;
    } catch (const ScenarioError& e) {
        print_diagnostics(err, path, e.diagnostics());
        return std::nullopt;
    }
}

std::string fmt_ticks(Tick t, std::optional<double> tick_us)
{
    std::string s = std::to_string(t) + " ticks";
    if (tick_us)
        s += " (" + format_double(static_cast<double>(t) * *tick_us / 1000.0) + " ms)";
    return s;
}

// --- simulate ---------------------------------------------------------------

struct SimulateArgs {
    std::string scenario;
    std::optional<std::int64_t> superframes;
    std::optional<double> tick_us;
};

int cmd_simulate(const Globals& g, const SimulateArgs& a, std::ostream& out, std::ostream& err)
{
    auto parsed = read_scenario(a.scenario, err);
    if (!parsed)
        return kExitInputError;
    Scenario base = *parsed;
    if (g.seed)
        base.seed = *g.seed;
    if (a.superframes)
        base.superframes = *a.superframes;
    const int trials = g.trials.value_or(1);
    if (trials < 1) {
        err << "--trials must be at least 1\n";
        return kExitInputError;
    }

    const LogLevel level = log_level_from_env();
    RunOptions options;
    if (level == LogLevel::Trace) {
        options.sink = [&err](const TraceRecord& r) {
            err << "trace tick=" << r.tick << " sf=" << r.superframe << " slot=" << r.slot << " node=" << node_str(r.node)
                << ' ' << r.event;
            if (!r.detail.empty())
                err << ' ' << r.detail;
            err << '\n';
        };
    }

    Table assoc{"associations",
                {"trial", "seed", "node", "role", "power_on", "associated", "latency", "deterministic", "requests_sent"}};
    Table frames{"frames", {"trial", "type", "transmitted", "delivered", "collided", "lost"}};
    Table counters{"counters", {"trial", "name", "value"}};
    Table grants{"grants", {"trial", "tick", "requester", "granted", "slot", "level", "phase", "reason"}};
    Table sgts{"sgts", {"trial", "superframe", "c1", "c2", "f1", "f2", "merged", "detail"}};
    Table util{"utilization", {"trial", "category", "instances"}};
    Table trace{"trace", {"trial", "tick", "superframe", "slot", "node", "event", "detail"}};

    std::vector<std::string> summary;
    bool conserved = true;
    FrameCounters total;
    Tick worst = -1;
    std::int64_t associated = 0;
    std::int64_t unassociated = 0;
    std::int64_t failures = 0;

    for (int t = 0; t < trials; ++t) {
        Scenario s = base;
        s.seed = base.seed + static_cast<std::uint64_t>(t);
        if (level != LogLevel::Off)
            err << "info: trial " << t << " seed " << s.seed << '\n';
        MetricsBundle m;
        try {
            m = run(s, options);
        } catch (const OwnershipViolation& e) {
            err << "ownership violation: " << e.what() << '\n';
            return kExitViolation;
        } catch (const ScenarioError& e) {
            print_diagnostics(err, a.scenario, e.diagnostics());
            return kExitInputError;
        }
        const std::int64_t ti = t;
        const auto seed = static_cast<std::int64_t>(s.seed);
        for (const auto& r : m.associations) {
            assoc.add({ti, seed, node_str(r.node), std::string(to_string(r.role)), r.power_on, r.associated,
                       r.latency(), r.deterministic, std::int64_t{r.requests_sent}});
            worst = std::max(worst, r.latency());
        }
        associated += static_cast<std::int64_t>(m.associations.size());
        unassociated += static_cast<std::int64_t>(m.unassociated.size());
        failures += m.csma_failures;
        frames.add({ti, std::string("all"), m.frames.transmitted, m.frames.delivered, m.frames.collided, m.frames.lost});
        for (const auto& [type, c] : m.frames_by_type)
            frames.add({ti, std::string(to_string(type)), c.transmitted, c.delivered, c.collided, c.lost});
        counters.add({ti, std::string("superframes_run"), m.superframes_run});
        counters.add({ti, std::string("end_tick"), m.end_tick});
        counters.add({ti, std::string("csma_failures"), m.csma_failures});
        counters.add({ti, std::string("malformed"), m.malformed});
        counters.add({ti, std::string("unassociated"), static_cast<std::int64_t>(m.unassociated.size())});
        counters.add({ti, std::string("pds_instances"), m.utilization.pds_instances});
        counters.add({ti, std::string("wasted_pds"), m.utilization.wasted_pds});
        for (const auto& gr : m.grants)
            grants.add({ti, gr.tick, node_str(gr.requester), gr.granted, std::int64_t{gr.slot}, std::int64_t{gr.level},
                        gr.phase, gr.reason});
        for (const auto& r : m.sgts)
            sgts.add({ti, r.superframe, node_str(r.c1), node_str(r.c2), node_str(r.f1), node_str(r.f2), r.merged,
                      r.detail});
        for (const auto& [cat, n] : m.utilization.counts)
            util.add({ti, std::string(to_string(cat)), n});
        for (const auto& r : m.trace)
            trace.add({ti, r.tick, r.superframe, std::int64_t{r.slot}, node_str(r.node), r.event, r.detail});

        total.transmitted += m.frames.transmitted;
        total.delivered += m.frames.delivered;
        total.collided += m.frames.collided;
        total.lost += m.frames.lost;
        if (!m.frames.conserved())
            conserved = false;
        if (trials == 1) {
            for (NodeId n : m.unassociated)
                summary.push_back("node " + node_str(n) + " did not associate");
        }
    }

    summary.insert(summary.begin(),
                   {"scenario: " + a.scenario, "seed: " + std::to_string(base.seed) +
                                                   (trials > 1 ? " (+0.." + std::to_string(trials - 1) + ")" : ""),
                    "trials: " + std::to_string(trials),
                    "associations: " + std::to_string(associated) + ", unassociated: " + std::to_string(unassociated),
                    "worst association latency: " + (worst < 0 ? std::string("n/a") : fmt_ticks(worst, a.tick_us)),
                    "frames: transmitted " + std::to_string(total.transmitted) + ", delivered " +
                        std::to_string(total.delivered) + ", collided " + std::to_string(total.collided) + ", lost " +
                        std::to_string(total.lost) + (conserved ? "" : " (NOT CONSERVED)"),
                    "channel access failures: " + std::to_string(failures)});

    Output o(g.output_format(), g.out ? std::optional<std::filesystem::path>(*g.out) : std::nullopt, out, err);
    o.summary(summary);
    for (const Table* tb : {&assoc, &frames, &counters, &grants, &sgts, &util})
        o.table(*tb);
    if (!trace.rows.empty())
        o.table(trace);
    return conserved ? kExitOk : kExitViolation;
}

// --- sweep-assoc -------------------------------------------------------------

struct SweepAssocArgs {
    int bo = 3;
    int nmax = kDefaultMaxLevel;
    std::vector<int> levels{0, 1, 2, 3};
    std::optional<Tick> bin;
};

int cmd_sweep_assoc(const Globals& g, const SweepAssocArgs& a, std::ostream& out, std::ostream& err)
{
    const int trials = g.trials.value_or(10'000);
    if (trials < 1 || a.bo < 0 || a.bo > 14 || a.nmax < 0 || a.nmax > 8) {
        err << "sweep-assoc: need trials >= 1, 0 <= bo <= 14, 0 <= nmax <= 8\n";
        return kExitInputError;
    }
    for (int n : a.levels) {
        if (n < 0 || n > a.nmax) {
            err << "sweep-assoc: pds level " << n << " outside 0.." << a.nmax << '\n';
            return kExitInputError;
        }
    }
    const Tick superframe = Tick{16} << a.bo;
    const Tick bin = a.bin.value_or(superframe);
    if (bin < 1) {
        err << "sweep-assoc: bin width must be positive\n";
        return kExitInputError;
    }

    Table hist{"histogram",
               {"n_pds", "bin_lower", "bin_upper", "count", "proportion", "bound_lower", "bound_upper", "out_of_bounds"}};
    Table summ{"summary",
               {"n_pds", "bo", "trials", "min", "max", "bound_lower", "bound_upper", "nonempty_bins", "out_of_bounds",
                "incomplete", "retransmissions", "frames_conserved", "arrival"}};
    std::vector<std::string> text;
    bool ok = true;
    const LogLevel level = log_level_from_env();
    for (int n : a.levels) {
        AssociationSweepConfig cfg;
        cfg.bo = a.bo;
        cfg.nmax = a.nmax;
        cfg.pds_level = n;
        cfg.trials = trials;
        cfg.seed = g.seed.value_or(1);
        if (level != LogLevel::Off)
            err << "info: sweeping n_pds=" << n << " over " << trials << " trials\n";
        auto r = sweep_association(cfg);
        auto bins = latency_histogram(r.latencies, bin);
        for (const auto& b : bins) {
            const bool outside = b.count > 0 && (b.lower < r.bounds.lower || b.upper - 1 > r.bounds.upper);
            // A bin straddling a bound is flagged only if it really holds an outside sample.
            bool flagged = false;
            if (outside) {
                for (Tick t : r.latencies)
                    if (t >= b.lower && t < b.upper && !r.bounds.contains(t)) {
                        flagged = true;
                        break;
                    }
            }
            hist.add({std::int64_t{n}, b.lower, b.upper, b.count, b.proportion, r.bounds.lower, r.bounds.upper,
                      flagged});
        }
        Tick lo = r.latencies.empty() ? 0 : *std::min_element(r.latencies.begin(), r.latencies.end());
        Tick hi = r.latencies.empty() ? 0 : *std::max_element(r.latencies.begin(), r.latencies.end());
        summ.add({std::int64_t{n}, std::int64_t{a.bo}, std::int64_t{trials}, lo, hi, r.bounds.lower, r.bounds.upper,
                  nonempty_bins(bins), r.out_of_bounds, r.incomplete, r.retransmissions, r.frames.conserved(),
                  std::string("uniform_hypercycle")});
        text.push_back("n_pds=" + std::to_string(n) + ": latency " + std::to_string(lo) + ".." + std::to_string(hi) +
                       " within [" + std::to_string(r.bounds.lower) + ", " + std::to_string(r.bounds.upper) +
                       "], out of bounds " + std::to_string(r.out_of_bounds) + ", incomplete " +
                       std::to_string(r.incomplete));
        if (r.out_of_bounds > 0 || r.incomplete > 0 || !r.frames.conserved())
            ok = false;
    }
    text.push_back("arrival model: power-on uniform over the slot boundaries of one hypercycle (assumed)");
    text.push_back(ok ? "result: all samples within bounds" : "result: BOUND VIOLATION");

    Output o(g.output_format(), g.out ? std::optional<std::filesystem::path>(*g.out) : std::nullopt, out, err);
    o.summary(text);
    o.table(hist);
    o.table(summ);
    return ok ? kExitOk : kExitViolation;
}

// --- sweep-capture -----------------------------------------------------------

struct SweepCaptureArgs {
    double from = -30.0;
    double to = 30.0;
    double step = 1.0;
    double margin = 10.0;
    double bias = 0.0;
    double noise = 0.0;
    double own_power = -60.0;
    std::string leader = "first";
};

int cmd_sweep_capture(const Globals& g, const SweepCaptureArgs& a, std::ostream& out, std::ostream& err)
{
    CaptureSweepConfig cfg;
    cfg.from_db = a.from;
    cfg.to_db = a.to;
    cfg.step_db = a.step;
    cfg.trials = g.trials.value_or(100);
    cfg.margin_db = a.margin;
    cfg.sync_offset_bias_db = a.bias;
    cfg.noise_sigma_db = a.noise;
    cfg.own_power_dbm = a.own_power;
    cfg.seed = g.seed.value_or(1);
    if (a.leader == "first")
        cfg.leader = LeadingLeaf::First;
    else if (a.leader == "second")
        cfg.leader = LeadingLeaf::Second;
    else
        cfg.leader = LeadingLeaf::None;
    if (cfg.trials < 1 || a.step <= 0 || a.to < a.from || a.margin < 0 || a.noise < 0) {
        err << "sweep-capture: need trials >= 1, step > 0, to >= from, margin >= 0, noise >= 0\n";
        return kExitInputError;
    }
    auto points = sweep_capture(cfg);
    Table t{"capture", {"delta_dB", "success_rate_C1", "success_rate_C2"}};
    for (const auto& p : points)
        t.add({p.delta_db, p.success_rate_c1, p.success_rate_c2});
    Output o(g.output_format(), g.out ? std::optional<std::filesystem::path>(*g.out) : std::nullopt, out, err);
    if (g.out)
        o.summary({"capture sweep " + format_double(a.from) + ".." + format_double(a.to) + " step " +
                   format_double(a.step) + " dB, margin " + format_double(a.margin) + " dB, " +
                   std::to_string(points.size()) + " points"});
    o.table(t);
    return kExitOk;
}

// --- verify ------------------------------------------------------------------

struct VerifyArgs {
    std::string model;
    int cap = 8;
    std::optional<std::string> edges;
};

std::string path_text(const NetModel& m, const std::vector<std::size_t>& transitions)
{
    if (transitions.empty())
        return "(initial)";
    std::string s;
    for (auto t : transitions)
        s += (s.empty() ? "" : " ") + m.transitions[t].name;
    return s;
}

int cmd_verify(const Globals& g, const VerifyArgs& a, std::ostream& out, std::ostream& err)
{
    NetModel m;
    try {
        m = load_net(a.model);
    } catch (const NetParseError& e) {
        err << a.model << ':' << e.line() << ": " << e.what() << '\n';
        return kExitInputError;
    } catch (const std::exception& e) {
        err << a.model << ": " << e.what() << '\n';
        return kExitInputError;
    }
    if (a.cap < 1) {
        err << "verify: --cap must be at least 1\n";
        return kExitInputError;
    }
    auto ex = explore(m, a.cap);
    auto bound = check_bounded(ex, m);
    const auto* graph = std::get_if<StateGraph>(&ex);

    Table t{"verdicts", {"property", "holds", "detail", "witness"}};
    std::vector<std::string> lines;
    lines.push_back("model: " + a.model);
    lines.push_back("places: " + std::to_string(m.places.size()) +
                    ", transitions: " + std::to_string(m.transitions.size()));

    if (bound.bounded) {
        int k = bound.max_bound();
        std::string detail = bound.safe() ? "safe (1-bounded)" : std::to_string(k) + "-bounded";
        lines.push_back("bounded: yes, " + detail);
        t.add({std::string("bounded"), true, detail, std::string()});
    } else {
        const auto& w = *bound.witness;
        std::string detail = "place " + m.places[w.place] + " exceeded cap " + std::to_string(w.cap);
        std::string wit = path_text(m, w.transitions);
        lines.push_back("bounded: NO, " + detail);
        lines.push_back("  witness: " + wit);
        lines.push_back("  reaches: " + format_marking(m, w.markings.back()));
        t.add({std::string("bounded"), false, detail, wit});
    }

    bool live = false;
    bool home = false;
    if (graph) {
        lines.push_back("states: " + std::to_string(graph->states.size()) +
                        ", edges: " + std::to_string(graph->edges.size()));
        auto lr = check_live(*graph, m);
        live = lr.live;
        if (live) {
            lines.push_back("live: yes");
            t.add({std::string("live"), true, std::string("every transition fireable again from every state"),
                   std::string()});
        } else {
            std::string dead;
            for (auto d : lr.dead_transitions)
                dead += (dead.empty() ? "" : " ") + m.transitions[d].name;
            std::string detail = "dead transitions: " + (dead.empty() ? std::string("none") : dead) +
                                 "; deadlocks: " + std::to_string(lr.deadlocks.size());
            std::string wit;
            lines.push_back("live: NO, " + detail);
            if (!lr.deadlocks.empty()) {
                auto s = lr.deadlocks.front();
                wit = path_text(m, path_to(*graph, s));
                lines.push_back("  deadlock: " + format_marking(m, graph->states[s]));
                lines.push_back("  witness: " + wit);
            }
            t.add({std::string("live"), false, detail, wit});
        }
        auto hr = check_reinitializable(*graph);
        home = hr.home;
        if (home) {
            lines.push_back("reinitializable: yes");
            t.add({std::string("reinitializable"), true, std::string("initial marking reachable from every state"),
                   std::string()});
        } else {
            auto s = *hr.counterexample;
            std::string detail = "no way back from " + format_marking(m, graph->states[s]);
            std::string wit = path_text(m, path_to(*graph, s));
            lines.push_back("reinitializable: NO, " + detail);
            lines.push_back("  witness: " + wit);
            t.add({std::string("reinitializable"), false, detail, wit});
        }
        if (a.edges) {
            std::ofstream f(*a.edges);
            if (!f) {
                err << "cannot write " << *a.edges << '\n';
                return kExitInputError;
            }
            f << edge_list(*graph, m);
        }
    } else {
        lines.push_back("live: not checked (exploration capped)");
        lines.push_back("reinitializable: not checked (exploration capped)");
        t.add({std::string("live"), false, std::string("not checked: exploration capped"), std::string()});
        t.add({std::string("reinitializable"), false, std::string("not checked: exploration capped"), std::string()});
    }

    const bool all = bound.bounded && live && home;
    lines.push_back(all ? "result: all properties hold" : "result: PROPERTY VIOLATION");
    if (g.output_format() == OutputFormat::Table && !g.out) {
        for (const auto& l : lines)
            out << l << '\n';
    } else {
        Output o(g.output_format(), g.out ? std::optional<std::filesystem::path>(*g.out) : std::nullopt, out, err);
        o.summary(lines);
        o.table(t);
    }
    return all ? kExitOk : kExitViolation;
}

// --- validate ----------------------------------------------------------------

int cmd_validate(const std::string& path, bool canonical, std::ostream& out, std::ostream& err)
{
    auto s = read_scenario(path, err);
    if (!s)
        return kExitInputError;
    if (canonical)
        out << serialize_scenario(*s);
    else
        out << path << ": ok, " << s->nodes.size() << " nodes\n";
    return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Deterministic slotted MAC simulator and verifier", "detmac"};
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--seed", g.seed, "Random seed (overrides the scenario file)");
    app.add_option("--out", g.out, "Directory for summary and tables (default: standard output)");
    app.add_option("--trials", g.trials, "Number of trials");
    app.add_option("--format", g.format, "Table format")->check(CLI::IsMember({"table", "json-lines"}));

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Run a scenario and report metrics");
    simulate->add_option("scenario", sim.scenario, "Scenario file")->required();
    simulate->add_option("--superframes", sim.superframes, "Run length (overrides the scenario file)");
    simulate->add_option("--tick-us", sim.tick_us, "Also show latencies in ms for this tick length in microseconds");

    SweepAssocArgs sa;
    auto* sweep_assoc = app.add_subcommand("sweep-assoc", "Coordinator association latency per PDS level");
    sweep_assoc->add_option("--bo", sa.bo, "Beacon order");
    sweep_assoc->add_option("--nmax", sa.nmax, "Largest reservation level");
    sweep_assoc->add_option("--npds", sa.levels, "PDS levels")->delimiter(',');
    sweep_assoc->add_option("--bin", sa.bin, "Histogram bin width in ticks (default: one superframe)");

    SweepCaptureArgs sc;
    auto* sweep_cap = app.add_subcommand("sweep-capture", "Capture success rate against the power difference");
    sweep_cap->add_option("--from", sc.from, "First delta in dB");
    sweep_cap->add_option("--to", sc.to, "Last delta in dB");
    sweep_cap->add_option("--step", sc.step, "Delta step in dB");
    sweep_cap->add_option("--margin", sc.margin, "Capture margin in dB");
    sweep_cap->add_option("--bias", sc.bias, "Sync offset bias in dB");
    sweep_cap->add_option("--noise", sc.noise, "Noise standard deviation in dB");
    sweep_cap->add_option("--own-power", sc.own_power, "Power of each leaf at its own coordinator in dBm");
    sweep_cap->add_option("--leader", sc.leader, "Leaf whose frame starts first")
        ->check(CLI::IsMember({"first", "second", "none"}));

    VerifyArgs va;
    auto* verify = app.add_subcommand("verify", "Check a net model for boundedness, liveness and reinitializability");
    verify->add_option("model", va.model, "Net model file")->required();
    verify->add_option("--cap", va.cap, "Token cap per place during exploration");
    verify->add_option("--edges", va.edges, "Write the reachability graph as an edge list");

    std::string vpath;
    bool canonical = false;
    auto* validate_cmd = app.add_subcommand("validate", "Check a scenario file");
    validate_cmd->add_option("scenario", vpath, "Scenario file")->required();
    validate_cmd->add_flag("--canonical", canonical, "Print the canonical form");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitInputError;
    }

    try {
        if (*simulate)
            return cmd_simulate(g, sim, out, err);
        if (*sweep_assoc)
            return cmd_sweep_assoc(g, sa, out, err);
        if (*sweep_cap)
            return cmd_sweep_capture(g, sc, out, err);
        if (*verify)
            return cmd_verify(g, va, out, err);
        return cmd_validate(vpath, canonical, out, err);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitInputError;
    }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    std::vector<const char*> argv{"detmac"};
    for (const auto& a : args)
        argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace detmac
