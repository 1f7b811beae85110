#include "detmac/scenario_file.h"

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace detmac {

std::string format_double(double value)
{
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, p);
}

namespace {

enum class Section { None, Network, Schedule, Radio, Traffic, Run };

const std::map<std::string, Section, std::less<>> kSections = {
    {"[network]", Section::Network}, {"[schedule]", Section::Schedule}, {"[radio]", Section::Radio},
    {"[traffic]", Section::Traffic}, {"[run]", Section::Run},
};

std::string_view section_name(Section s)
{
    switch (s) {
    case Section::None: return "(none)";
    case Section::Network: return "[network]";
    case Section::Schedule: return "[schedule]";
    case Section::Radio: return "[radio]";
    case Section::Traffic: return "[traffic]";
    case Section::Run: return "[run]";
    }
    return "?";
}

/// One statement: positional words after the keyword plus key=value options.
class Statement {
public:
    Statement(int line, std::vector<std::string> words, std::vector<Diagnostic>& errors)
        : line_(line), errors_(errors)
    {
        keyword_ = words.front();
        for (std::size_t i = 1; i < words.size(); ++i) {
            const auto& w = words[i];
            if (auto eq = w.find('='); eq != std::string::npos) {
                const auto key = w.substr(0, eq);
                if (!options_.emplace(key, w.substr(eq + 1)).second)
                    fail("option '" + key + "' given twice");
            } else {
                positional_.push_back(w);
            }
        }
    }

    const std::string& keyword() const { return keyword_; }
    int line() const { return line_; }
    bool ok() const { return ok_; }

    void fail(const std::string& message)
    {
        if (ok_)
            errors_.push_back(Diagnostic{line_, message});
        ok_ = false;
    }

    bool arity(std::size_t n)
    {
        if (positional_.size() != n) {
            fail("'" + keyword_ + "' takes " + std::to_string(n) + " argument" + (n == 1 ? "" : "s") + ", got " +
                 std::to_string(positional_.size()));
            return false;
        }
        return true;
    }

    const std::string& arg(std::size_t i) const { return positional_[i]; }

    template <typename T>
    T number(const std::string& text, const std::string& what)
    {
        T v{};
        const char* first = text.data();
        const char* last = first + text.size();
        if (!text.empty() && *first == '+')
            ++first;
        auto [p, ec] = std::from_chars(first, last, v);
        if (ec != std::errc() || p != last || text.empty()) {
            fail("invalid " + what + " '" + text + "'");
            return T{};
        }
        return v;
    }

    NodeId node(const std::string& text)
    {
        int v = number<int>(text, "node id");
        if (v < 0 || v > 65535) {
            fail("node id " + text + " out of range");
            return NodeId{};
        }
        return NodeId(static_cast<std::uint16_t>(v));
    }

    template <typename T>
    std::optional<T> option(const std::string& key, bool required)
    {
        auto it = options_.find(key);
        if (it == options_.end()) {
            if (required)
                fail("'" + keyword_ + "' needs " + key + "=");
            return std::nullopt;
        }
        std::string value = it->second;
        options_.erase(it);
        return number<T>(value, key);
    }

    std::optional<std::string> text_option(const std::string& key)
    {
        auto it = options_.find(key);
        if (it == options_.end())
            return std::nullopt;
        std::string v = it->second;
        options_.erase(it);
        return v;
    }

    /// Rejects options nobody consumed.
    void finish()
    {
        for (const auto& [k, v] : options_)
            fail("unknown option '" + k + "' for '" + keyword_ + "'");
        options_.clear();
    }

private:
    int line_;
    std::vector<Diagnostic>& errors_;
    std::string keyword_;
    std::vector<std::string> positional_;
    std::map<std::string, std::string> options_;
    bool ok_ = true;
};

class Parser {
public:
    Scenario parse(std::string_view text);

private:
    void network(Statement& st);
    void schedule(Statement& st);
    void radio(Statement& st);
    void traffic(Statement& st);
    void run(Statement& st);

    /// Scalar statements may appear once.
    bool once(Statement& st, const std::string& anchor)
    {
        if (!seen_.insert(st.keyword()).second) {
            st.fail("'" + st.keyword() + "' given twice");
            return false;
        }
        s_.source.lines[anchor] = st.line();
        return true;
    }

    void anchor(const char* kind, std::size_t index, int line)
    {
        s_.source.lines[std::string(kind) + "#" + std::to_string(index)] = line;
    }

    Scenario s_;
    std::vector<Diagnostic> errors_;
    std::set<std::string> seen_;
};

Scenario Parser::parse(std::string_view text)
{
    Section section = Section::None;
    int line_no = 0;
    std::istringstream in{std::string(text)};
    std::string raw;
    while (std::getline(in, raw)) {
        ++line_no;
        if (auto hash = raw.find('#'); hash != std::string::npos)
            raw.erase(hash);
        std::istringstream ws(raw);
        std::vector<std::string> words;
        for (std::string w; ws >> w;)
            words.push_back(w);
        if (words.empty())
            continue;
        if (words.front().front() == '[') {
            auto it = kSections.find(words.front());
            if (it == kSections.end() || words.size() != 1)
                errors_.push_back(Diagnostic{line_no, "unknown section '" + raw + "'"});
            else
                section = it->second;
            continue;
        }
        Statement st(line_no, std::move(words), errors_);
        switch (section) {
        case Section::None:
            st.fail("statement before any section");
            break;
        case Section::Network: network(st); break;
        case Section::Schedule: schedule(st); break;
        case Section::Radio: radio(st); break;
        case Section::Traffic: traffic(st); break;
        case Section::Run: run(st); break;
        }
        st.finish();
    }
    if (!errors_.empty())
        throw ScenarioError(std::move(errors_));
    return std::move(s_);
}

#define UNKNOWN_KEY(st, sec) st.fail("unknown key '" + st.keyword() + "' in " + std::string(section_name(sec)))

void Parser::network(Statement& st)
{
    const auto& k = st.keyword();
    if (k == "node") {
        if (st.arity(2) == false)
            return;
        NodeInfo n;
        n.id = st.node(st.arg(0));
        auto role = parse_role(st.arg(1));
        if (!role) {
            st.fail("unknown role '" + st.arg(1) + "' (supercoordinator, coordinator or leaf)");
            return;
        }
        n.role = *role;
        if (auto p = st.text_option("parent"))
            n.parent = st.node(*p);
        anchor("node", s_.nodes.size(), st.line());
        s_.nodes.push_back(n);
    } else if (k == "interference") {
        if (!st.arity(1) || !once(st, "interference"))
            return;
        if (st.arg(0) == "all")
            s_.interference_all = true;
        else if (st.arg(0) == "none")
            s_.interference_all = false;
        else
            st.fail("interference is 'all' or 'none'");
    } else if (k == "interfere" || k == "isolate" || k == "isolate_stars") {
        if (!st.arity(2))
            return;
        InterferenceStatement is;
        is.kind = k == "interfere" ? InterferenceStatement::Kind::Interfere
                  : k == "isolate" ? InterferenceStatement::Kind::Isolate
                                   : InterferenceStatement::Kind::IsolateStars;
        is.a = st.node(st.arg(0));
        is.b = st.node(st.arg(1));
        anchor("interference", s_.interference.size(), st.line());
        s_.interference.push_back(is);
    } else {
        UNKNOWN_KEY(st, Section::Network);
    }
}

void Parser::schedule(Statement& st)
{
    const auto& k = st.keyword();
    if (k == "bo" || k == "nmax") {
        if (!st.arity(1) || !once(st, k))
            return;
        (k == "bo" ? s_.bo : s_.nmax) = st.number<int>(st.arg(0), k);
    } else if (k == "policy") {
        if (!st.arity(1) || !once(st, k))
            return;
        auto p = parse_policy(st.arg(0));
        if (!p)
            st.fail("unknown policy '" + st.arg(0) + "' (first_fit or spread)");
        else
            s_.policy = *p;
    } else if (k == "grant_cap") {
        if (!st.arity(1) || !once(st, k))
            return;
        if (st.arg(0) == "none")
            s_.grant_cap.reset();
        else
            s_.grant_cap = st.number<int>(st.arg(0), "grant cap");
    } else if (k == "gbs") {
        if (!st.arity(1))
            return;
        GbsPlan g{st.node(st.arg(0)), st.option<int>("slot", true).value_or(1)};
        anchor("gbs", s_.gbs.size(), st.line());
        s_.gbs.push_back(g);
    } else if (k == "pds") {
        if (!st.arity(1))
            return;
        PdsPlan p{st.node(st.arg(0)), st.option<int>("level", true).value_or(0)};
        anchor("pds", s_.pds.size(), st.line());
        s_.pds.push_back(p);
    } else if (k == "cap") {
        if (!st.arity(0))
            return;
        CapPlan c;
        c.slot = st.option<int>("slot", true).value_or(1);
        c.level = st.option<int>("level", false).value_or(0);
        c.phase = st.option<std::int64_t>("phase", false).value_or(0);
        anchor("cap", s_.cap.size(), st.line());
        s_.cap.push_back(c);
    } else {
        UNKNOWN_KEY(st, Section::Schedule);
    }
}

void Parser::radio(Statement& st)
{
    const auto& k = st.keyword();
    if (k == "margin" || k == "sync_offset_bias" || k == "noise_sigma") {
        if (!st.arity(1) || !once(st, k))
            return;
        double v = st.number<double>(st.arg(0), k);
        (k == "margin" ? s_.margin_db : k == "sync_offset_bias" ? s_.sync_offset_bias_db : s_.noise_sigma_db) = v;
    } else if (k == "loss") {
        if (!st.arity(1) || !once(st, k))
            return;
        s_.frame_error_rate = st.arg(0) == "ideal" ? 0.0 : st.number<double>(st.arg(0), "frame error rate");
    } else if (k == "default_power") {
        if (!st.arity(1) || !once(st, k))
            return;
        if (st.arg(0) == "none")
            s_.default_power_dbm.reset();
        else
            s_.default_power_dbm = st.number<double>(st.arg(0), "power");
    } else if (k == "power") {
        if (!st.arity(3))
            return;
        PowerEntry p{st.node(st.arg(0)), st.node(st.arg(1)), st.number<double>(st.arg(2), "power")};
        anchor("power", s_.powers.size(), st.line());
        s_.powers.push_back(p);
    } else if (k == "position") {
        if (!st.arity(3))
            return;
        PositionEntry p{st.node(st.arg(0)), st.number<double>(st.arg(1), "x"), st.number<double>(st.arg(2), "y")};
        anchor("position", s_.positions.size(), st.line());
        s_.positions.push_back(p);
    } else if (k == "pathloss") {
        if (!st.arity(0) || !once(st, k))
            return;
        PathLoss pl;
        pl.p0_dbm = st.option<double>("p0", true).value_or(pl.p0_dbm);
        pl.exponent = st.option<double>("exponent", true).value_or(pl.exponent);
        pl.floor_dbm = st.option<double>("floor", false);
        s_.pathloss = pl;
    } else if (k == "lead") {
        if (!st.arity(2))
            return;
        LeadEntry l{st.node(st.arg(0)), st.number<int>(st.arg(1), "lead")};
        anchor("lead", s_.leads.size(), st.line());
        s_.leads.push_back(l);
    } else if (k == "outage") {
        if (!st.arity(1))
            return;
        OutagePlan o;
        o.node = st.node(st.arg(0));
        o.from = st.option<std::int64_t>("from", true).value_or(0);
        o.count = st.option<std::int64_t>("count", true).value_or(1);
        anchor("outage", s_.outages.size(), st.line());
        s_.outages.push_back(o);
    } else {
        UNKNOWN_KEY(st, Section::Radio);
    }
}

void Parser::traffic(Statement& st)
{
    const auto& k = st.keyword();
    if (k == "bytes_per_backoff" || k == "assoc_bytes" || k == "request_bytes" || k == "ack_bytes") {
        if (!st.arity(1) || !once(st, k == "bytes_per_backoff" ? k : "frame_sizes#" + k))
            return;
        if (k != "bytes_per_backoff")
            s_.source.lines["frame_sizes"] = st.line();
        int v = st.number<int>(st.arg(0), k);
        (k == "bytes_per_backoff" ? s_.sizes.bytes_per_period
         : k == "assoc_bytes"     ? s_.sizes.assoc_bytes
         : k == "request_bytes"   ? s_.sizes.request_bytes
                                  : s_.sizes.ack_bytes) = v;
    } else if (k == "csma") {
        if (!st.arity(0) || !once(st, k))
            return;
        auto& c = s_.csma;
        c.min_be = st.option<int>("min_be", false).value_or(c.min_be);
        c.max_be = st.option<int>("max_be", false).value_or(c.max_be);
        c.max_backoffs = st.option<int>("max_backoffs", false).value_or(c.max_backoffs);
        c.cw = st.option<int>("cw", false).value_or(c.cw);
        c.periods_per_tick = st.option<int>("periods_per_tick", false).value_or(c.periods_per_tick);
    } else if (k == "flow") {
        if (!st.arity(1))
            return;
        FlowPlan f;
        f.node = st.node(st.arg(0));
        f.every = st.option<std::int64_t>("every", true).value_or(1);
        f.bytes = st.option<int>("bytes", true).value_or(1);
        f.start = st.option<std::int64_t>("start", false).value_or(0);
        if (auto m = st.text_option("mode")) {
            if (*m == "auto")
                f.mode = FlowMode::Auto;
            else if (*m == "cap")
                f.mode = FlowMode::Cap;
            else
                st.fail("flow mode is 'auto' or 'cap'");
        }
        anchor("flow", s_.flows.size(), st.line());
        s_.flows.push_back(f);
    } else if (k == "request") {
        if (!st.arity(1))
            return;
        RequestPlan r;
        r.node = st.node(st.arg(0));
        r.level = st.option<int>("level", true).value_or(0);
        r.at = st.option<std::int64_t>("at", true).value_or(0);
        r.count = st.option<int>("count", false).value_or(1);
        r.priority = st.option<int>("priority", false).value_or(0);
        anchor("request", s_.requests.size(), st.line());
        s_.requests.push_back(r);
    } else if (k == "sgts") {
        if (!st.arity(4))
            return;
        SgtsPlan g{st.node(st.arg(0)), st.node(st.arg(1)), st.node(st.arg(2)), st.node(st.arg(3)),
                   st.option<std::int64_t>("at", true).value_or(0)};
        anchor("sgts", s_.sgts.size(), st.line());
        s_.sgts.push_back(g);
    } else {
        UNKNOWN_KEY(st, Section::Traffic);
    }
}

void Parser::run(Statement& st)
{
    const auto& k = st.keyword();
    if (k == "seed") {
        if (st.arity(1) && once(st, k))
            s_.seed = st.number<std::uint64_t>(st.arg(0), "seed");
    } else if (k == "superframes") {
        if (st.arity(1) && once(st, k))
            s_.superframes = st.number<std::int64_t>(st.arg(0), "superframe count");
    } else if (k == "trace") {
        if (st.arity(1) && once(st, k))
            s_.trace_capacity = st.number<int>(st.arg(0), "trace capacity");
    } else if (k == "desync_threshold") {
        if (st.arity(1) && once(st, "desync"))
            s_.desync_threshold = st.number<int>(st.arg(0), "threshold");
    } else if (k == "sgts_freshness") {
        if (st.arity(1) && once(st, "freshness"))
            s_.sgts_freshness = st.number<std::int64_t>(st.arg(0), "freshness");
    } else if (k == "stop_when_associated") {
        if (!st.arity(1) || !once(st, k))
            return;
        if (st.arg(0) == "yes")
            s_.stop_when_associated = true;
        else if (st.arg(0) == "no")
            s_.stop_when_associated = false;
        else
            st.fail("stop_when_associated is 'yes' or 'no'");
    } else if (k == "power_on") {
        if (!st.arity(1))
            return;
        PowerOnPlan p;
        p.node = st.node(st.arg(0));
        auto t = st.text_option("tick");
        if (!t)
            st.fail("'power_on' needs tick=<tick> or tick=random");
        else if (*t != "random")
            p.tick = st.number<Tick>(*t, "tick");
        anchor("power_on", s_.power_on.size(), st.line());
        s_.power_on.push_back(p);
    } else if (k == "preassociate") {
        if (!st.arity(1))
            return;
        anchor("preassociate", s_.preassociated.size(), st.line());
        s_.preassociated.push_back(st.node(st.arg(0)));
    } else if (k == "restart") {
        if (!st.arity(1))
            return;
        RestartPlan r{st.node(st.arg(0)), st.option<std::int64_t>("at", true).value_or(0)};
        anchor("restart", s_.restarts.size(), st.line());
        s_.restarts.push_back(r);
    } else {
        UNKNOWN_KEY(st, Section::Run);
    }
}

#undef UNKNOWN_KEY

}  // namespace

Scenario parse_scenario(std::string_view text)
{
    return Parser().parse(text);
}

Scenario load_scenario(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ScenarioError({Diagnostic{0, "cannot read scenario file '" + path + "'"}});
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str());
}

std::string serialize_scenario(const Scenario& s)
{
    std::ostringstream o;
    auto id = [](NodeId n) { return to_string(n); };
    o << "[network]\n";
    for (const auto& n : s.nodes) {
        o << "node " << id(n.id) << ' ' << to_string(n.role);
        if (n.parent)
            o << " parent=" << id(*n.parent);
        o << '\n';
    }
    o << "interference " << (s.interference_all ? "all" : "none") << '\n';
    for (const auto& st : s.interference) {
        switch (st.kind) {
        case InterferenceStatement::Kind::Interfere: o << "interfere "; break;
        case InterferenceStatement::Kind::Isolate: o << "isolate "; break;
        case InterferenceStatement::Kind::IsolateStars: o << "isolate_stars "; break;
        }
        o << id(st.a) << ' ' << id(st.b) << '\n';
    }

    o << "\n[schedule]\n";
    o << "bo " << s.bo << '\n';
    o << "nmax " << s.nmax << '\n';
    o << "policy " << to_string(s.policy) << '\n';
    o << "grant_cap " << (s.grant_cap ? std::to_string(*s.grant_cap) : std::string("none")) << '\n';
    for (const auto& g : s.gbs)
        o << "gbs " << id(g.node) << " slot=" << g.slot << '\n';
    for (const auto& p : s.pds)
        o << "pds " << id(p.node) << " level=" << p.level << '\n';
    for (const auto& c : s.cap)
        o << "cap slot=" << c.slot << " level=" << c.level << " phase=" << c.phase << '\n';

    o << "\n[radio]\n";
    o << "margin " << format_double(s.margin_db) << '\n';
    o << "sync_offset_bias " << format_double(s.sync_offset_bias_db) << '\n';
    o << "noise_sigma " << format_double(s.noise_sigma_db) << '\n';
    o << "loss " << (s.frame_error_rate == 0.0 ? std::string("ideal") : format_double(s.frame_error_rate)) << '\n';
    o << "default_power " << (s.default_power_dbm ? format_double(*s.default_power_dbm) : std::string("none"))
      << '\n';
    for (const auto& p : s.positions)
        o << "position " << id(p.node) << ' ' << format_double(p.x) << ' ' << format_double(p.y) << '\n';
    if (s.pathloss) {
        o << "pathloss p0=" << format_double(s.pathloss->p0_dbm) << " exponent=" << format_double(s.pathloss->exponent);
        if (s.pathloss->floor_dbm)
            o << " floor=" << format_double(*s.pathloss->floor_dbm);
        o << '\n';
    }
    for (const auto& p : s.powers)
        o << "power " << id(p.tx) << ' ' << id(p.rx) << ' ' << format_double(p.dbm) << '\n';
    for (const auto& l : s.leads)
        o << "lead " << id(l.node) << ' ' << l.lead << '\n';
    for (const auto& g : s.outages)
        o << "outage " << id(g.node) << " from=" << g.from << " count=" << g.count << '\n';

    o << "\n[traffic]\n";
    o << "bytes_per_backoff " << s.sizes.bytes_per_period << '\n';
    o << "assoc_bytes " << s.sizes.assoc_bytes << '\n';
    o << "request_bytes " << s.sizes.request_bytes << '\n';
    o << "ack_bytes " << s.sizes.ack_bytes << '\n';
    o << "csma min_be=" << s.csma.min_be << " max_be=" << s.csma.max_be << " max_backoffs=" << s.csma.max_backoffs
      << " cw=" << s.csma.cw << " periods_per_tick=" << s.csma.periods_per_tick << '\n';
    for (const auto& f : s.flows)
        o << "flow " << id(f.node) << " every=" << f.every << " bytes=" << f.bytes << " start=" << f.start
          << " mode=" << (f.mode == FlowMode::Cap ? "cap" : "auto") << '\n';
    for (const auto& r : s.requests)
        o << "request " << id(r.node) << " level=" << r.level << " at=" << r.at << " count=" << r.count
          << " priority=" << r.priority << '\n';
    for (const auto& g : s.sgts)
        o << "sgts " << id(g.c1) << ' ' << id(g.c2) << ' ' << id(g.f1) << ' ' << id(g.f2) << " at=" << g.at << '\n';

    o << "\n[run]\n";
    o << "seed " << s.seed << '\n';
    o << "superframes " << s.superframes << '\n';
    o << "stop_when_associated " << (s.stop_when_associated ? "yes" : "no") << '\n';
    o << "trace " << s.trace_capacity << '\n';
    o << "desync_threshold " << s.desync_threshold << '\n';
    o << "sgts_freshness " << s.sgts_freshness << '\n';
    for (NodeId n : s.preassociated)
        o << "preassociate " << id(n) << '\n';
    for (const auto& p : s.power_on)
        o << "power_on " << id(p.node) << " tick=" << (p.tick ? std::to_string(*p.tick) : std::string("random")) << '\n';
    for (const auto& r : s.restarts)
        o << "restart " << id(r.node) << " at=" << r.at << '\n';
    return o.str();
}

}  // namespace detmac
