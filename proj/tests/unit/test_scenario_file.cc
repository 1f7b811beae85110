#include <doctest.h>

#include <filesystem>
#include <random>

#include "detmac/scenario_file.h"

using namespace detmac;

namespace {

NodeId id(int v) { return NodeId(static_cast<std::uint16_t>(v)); }

std::vector<Diagnostic> errors_of(const std::string& text)
{
    try {
        parse_scenario(text);
    } catch (const ScenarioError& e) {
        return e.diagnostics();
    }
    return {};
}

std::vector<Diagnostic> problems(const std::string& text)
{
    return validate(parse_scenario(text));
}

bool mentions(const std::vector<Diagnostic>& d, int line, const std::string& fragment)
{
    for (const auto& x : d)
        if (x.line == line && x.message.find(fragment) != std::string::npos)
            return true;
    return false;
}

double any_double(std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> d(-100.0, 100.0);
    return d(rng);
}

Scenario random_scenario(std::mt19937_64& rng)
{
    Scenario s;
    auto pick = [&](int n) { return static_cast<int>(rng() % static_cast<std::uint64_t>(n)); };
    s.nodes.push_back({id(0), NodeRole::Supercoordinator, std::nullopt});
    const int coords = 1 + pick(4);
    for (int c = 1; c <= coords; ++c) {
        s.nodes.push_back({id(c), NodeRole::Coordinator, id(0)});
        for (int l = 0; l < pick(3); ++l)
            s.nodes.push_back({id(10 * c + l), NodeRole::Leaf, id(c)});
    }
    s.interference_all = pick(2);
    if (pick(2))
        s.interference.push_back({InterferenceStatement::Kind::IsolateStars, id(1), id(2)});
    if (pick(2))
        s.interference.push_back({InterferenceStatement::Kind::Interfere, id(10), id(20)});
    s.bo = pick(6);
    s.nmax = pick(5);
    s.policy = pick(2) ? PlacementPolicy::Spread : PlacementPolicy::FirstFit;
    if (pick(2))
        s.grant_cap = pick(5);
    if (pick(2))
        s.gbs.push_back({id(1), 1 + pick(15)});
    s.pds.push_back({id(10), pick(3)});
    s.cap.push_back({1 + pick(15), pick(3), pick(4)});
    s.margin_db = any_double(rng);
    s.sync_offset_bias_db = any_double(rng);
    s.noise_sigma_db = std::abs(any_double(rng));
    s.frame_error_rate = pick(2) ? 0.0 : std::uniform_real_distribution<double>(0, 1)(rng);
    if (pick(3) == 0)
        s.default_power_dbm.reset();
    else
        s.default_power_dbm = any_double(rng);
    s.powers.push_back({id(1), id(2), any_double(rng)});
    s.positions.push_back({id(1), any_double(rng), any_double(rng)});
    if (pick(2))
        s.pathloss = PathLoss{any_double(rng), std::abs(any_double(rng)),
                              pick(2) ? std::optional<double>(any_double(rng)) : std::nullopt};
    s.leads.push_back({id(10), pick(5)});
    s.outages.push_back({id(1), pick(9), 1 + pick(4)});
    s.sizes.bytes_per_period = 1 + pick(20);
    s.sizes.assoc_bytes = 1 + pick(40);
    s.csma.min_be = pick(3);
    s.csma.max_be = 3 + pick(3);
    s.flows.push_back({id(10), 1 + pick(3), 1 + pick(100), pick(5), pick(2) ? FlowMode::Cap : FlowMode::Auto});
    s.requests.push_back({id(10), pick(3), 1 + pick(3), pick(20), pick(5) - 2});
    s.sgts.push_back({id(1), id(2), id(10), id(20), pick(30)});
    s.seed = rng();
    s.superframes = 1 + pick(100);
    s.power_on.push_back({id(10), pick(2) ? std::optional<Tick>(8 * pick(50)) : std::nullopt});
    s.preassociated.push_back(id(1));
    s.restarts.push_back({id(10), 1 + pick(10)});
    s.stop_when_associated = pick(2);
    s.trace_capacity = pick(100);
    s.desync_threshold = 1 + pick(3);
    s.sgts_freshness = pick(8);
    return s;
}

}  // namespace

TEST_CASE("format_double is the shortest exact form")
{
    CHECK(format_double(-60.0) == "-60");
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(2.5e-7) == "2.5e-07");
    std::mt19937_64 rng(1);
    for (int i = 0; i < 1000; ++i) {
        double v = any_double(rng);
        CHECK(std::stod(format_double(v)) == v);
    }
}

TEST_CASE("bundled scenarios round-trip")
{
    int seen = 0;
    for (const auto& entry : std::filesystem::directory_iterator(DETMAC_SCENARIO_DIR)) {
        if (entry.path().extension() != ".scn")
            continue;
        ++seen;
        auto s = load_scenario(entry.path().string());
        auto text = serialize_scenario(s);
        auto back = parse_scenario(text);
        CHECK(back == s);
        CHECK(serialize_scenario(back) == text);
    }
    CHECK(seen >= 4);
}

TEST_CASE("random scenarios round-trip losslessly")
{
    std::mt19937_64 rng(99);
    for (int i = 0; i < 300; ++i) {
        auto s = random_scenario(rng);
        auto text = serialize_scenario(s);
        auto back = parse_scenario(text);
        REQUIRE(back == s);
    }
}

TEST_CASE("defaults survive an empty file")
{
    CHECK(parse_scenario("") == Scenario{});
    CHECK(parse_scenario("# nothing\n\n[run]\n") == Scenario{});
}

TEST_CASE("unknown keys, options and sections are rejected with their line")
{
    auto d = errors_of("[network]\nnode 0 supercoordinator\nfrobnicate 3\n[radio]\nmargin 10 extra=1\n[weather]\n");
    CHECK(mentions(d, 3, "unknown key 'frobnicate'"));
    CHECK(mentions(d, 6, "unknown section"));
    auto e = errors_of("[schedule]\ncap slot=3 colour=red\n");
    CHECK(mentions(e, 2, "unknown option 'colour'"));
}

TEST_CASE("every syntax error is reported at once")
{
    auto d = errors_of("node 0 supercoordinator\n[network]\nnode x leaf\nnode 1 wizard\n[run]\nseed 1\nseed 2\n"
                       "power_on 3\n[schedule]\nbo three\npds 1\n");
    CHECK(mentions(d, 1, "before any section"));
    CHECK(mentions(d, 3, "invalid node id"));
    CHECK(mentions(d, 4, "unknown role"));
    CHECK(mentions(d, 7, "given twice"));
    CHECK(mentions(d, 8, "tick="));
    CHECK(mentions(d, 10, "invalid bo"));
    CHECK(mentions(d, 11, "level="));
    CHECK(d.size() == 7);
}

TEST_CASE("validation diagnostics point at the statement")
{
    auto d = problems("[network]\nnode 0 supercoordinator\nnode 1 coordinator parent=0\nnode 5 supercoordinator\n");
    CHECK(mentions(d, 4, "duplicate supercoordinator: node 5"));

    d = problems("[network]\nnode 0 supercoordinator\nnode 1 coordinator parent=0\n[schedule]\npds 7 level=0\n");
    CHECK(mentions(d, 5, "7"));

    d = problems("[network]\nnode 0 supercoordinator\nnode 1 coordinator parent=0\n[run]\npower_on 1 tick=3\n");
    CHECK(mentions(d, 5, "multiple"));

    d = problems("[network]\nnode 0 supercoordinator\nnode 1 coordinator parent=0\nnode 1 leaf parent=1\n");
    CHECK(mentions(d, 4, "duplicate node id 1"));

    d = problems("[network]\nnode 0 supercoordinator\n[schedule]\nbo 15\n");
    CHECK(mentions(d, 4, "beacon order 15"));
}

TEST_CASE("a full schedule makes the scheduler build fail with an anchored diagnostic")
{
    std::string text = "[network]\nnode 0 supercoordinator\nnode 1 coordinator parent=0\n";
    for (int l = 0; l < 16; ++l)
        text += "node " + std::to_string(100 + l) + " leaf parent=1\n";
    text += "[schedule]\n";
    for (int l = 0; l < 16; ++l)
        text += "pds " + std::to_string(100 + l) + " level=0\n";
    auto s = parse_scenario(text);
    try {
        build_scheduler(s);
        FAIL("expected a ScenarioError");
    } catch (const ScenarioError& e) {
        REQUIRE_FALSE(e.diagnostics().empty());
        CHECK(e.diagnostics().back().line == 3 + 16 + 1 + 16);
    }
}

TEST_CASE("missing file")
{
    try {
        load_scenario("/definitely/not/here.scn");
        FAIL("expected a ScenarioError");
    } catch (const ScenarioError& e) {
        CHECK(e.diagnostics().front().message.find("cannot read") != std::string::npos);
    }
}
