#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sys/wait.h>
#include <sstream>

#include <nlohmann/json.hpp>

#include "detmac/cli.h"

using namespace detmac;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result cli(std::vector<std::string> args)
{
    std::ostringstream out, err;
    int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::string scenario(const char* name)
{
    return std::string(DETMAC_SCENARIO_DIR) + "/" + name;
}

std::string model(const char* name)
{
    return std::string(DETMAC_MODEL_DIR) + "/" + name;
}

std::vector<std::string> lines_of(const std::string& text)
{
    std::vector<std::string> v;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);)
        v.push_back(l);
    return v;
}

std::filesystem::path fresh_dir(const std::string& name)
{
    auto d = std::filesystem::temp_directory_path() / ("detmac_cli_" + name);
    std::filesystem::remove_all(d);
    return d;
}

}  // namespace

TEST_CASE("csv quoting")
{
    CHECK(csv_field(Cell{std::string("plain")}) == "plain");
    CHECK(csv_field(Cell{std::string("a,b")}) == "\"a,b\"");
    CHECK(csv_field(Cell{std::string("say \"hi\"")}) == "\"say \"\"hi\"\"\"");
    CHECK(csv_field(Cell{std::int64_t{-3}}) == "-3");
    CHECK(csv_field(Cell{true}) == "true");
    Table t{"t", {"x", "y"}};
    t.add({std::int64_t{1}, 0.5});
    std::ostringstream o;
    write_csv(o, t);
    CHECK(o.str() == "x,y\n1,0.5\n");
}

TEST_CASE("validate")
{
    auto ok = cli({"validate", scenario("five_nodes.scn")});
    CHECK(ok.code == kExitOk);
    CHECK(ok.out.find(": ok, 5 nodes") != std::string::npos);

    auto bad = cli({"validate", scenario("two_supercoordinators.scn")});
    CHECK(bad.code == kExitInputError);
    CHECK(bad.err.find("two_supercoordinators.scn:4:") != std::string::npos);
    CHECK(bad.err.find("node 5") != std::string::npos);

    CHECK(cli({"validate", "/no/such/file.scn"}).code == kExitInputError);
}

TEST_CASE("canonical form re-validates")
{
    auto c = cli({"validate", "--canonical", scenario("five_nodes.scn")});
    REQUIRE(c.code == kExitOk);
    auto path = fresh_dir("canon");
    std::filesystem::create_directories(path);
    std::ofstream(path / "c.scn") << c.out;
    CHECK(cli({"validate", (path / "c.scn").string()}).code == kExitOk);
}

TEST_CASE("usage errors exit 2")
{
    CHECK(cli({}).code == kExitInputError);
    CHECK(cli({"bogus"}).code == kExitInputError);
    CHECK(cli({"sweep-assoc", "--format", "xml"}).code == kExitInputError);
    CHECK(cli({"sweep-assoc", "--npds", "9"}).code == kExitInputError);
    CHECK(cli({"verify", "/no/such/model.net"}).code == kExitInputError);
    CHECK(cli({"sweep-capture", "--step", "0"}).code == kExitInputError);
}

TEST_CASE("simulate is deterministic and honours --seed")
{
    auto a = cli({"simulate", scenario("five_nodes.scn"), "--format", "json-lines"});
    auto b = cli({"simulate", scenario("five_nodes.scn"), "--format", "json-lines"});
    REQUIRE(a.code == kExitOk);
    CHECK(a.out == b.out);
    auto c = cli({"simulate", scenario("five_nodes.scn"), "--format", "json-lines", "--seed", "42"});
    REQUIRE(c.code == kExitOk);
    CHECK(c.out != a.out);
    CHECK(c.out == cli({"simulate", scenario("five_nodes.scn"), "--format", "json-lines", "--seed", "42"}).out);

    std::set<std::string> tables;
    for (const auto& l : lines_of(a.out)) {
        auto j = nlohmann::json::parse(l);
        tables.insert(j.at("table").get<std::string>());
    }
    for (const char* t : {"associations", "frames", "counters", "utilization"})
        CHECK(tables.count(t) == 1);
}

TEST_CASE("simulate writes tables to --out")
{
    auto dir = fresh_dir("sim");
    auto r = cli({"simulate", scenario("five_nodes.scn"), "--out", dir.string()});
    REQUIRE(r.code == kExitOk);
    CHECK(r.out.empty());
    CHECK(std::filesystem::exists(dir / "frames.csv"));
    CHECK(std::filesystem::exists(dir / "associations.csv"));
    CHECK(std::filesystem::exists(dir / "summary.txt"));
    std::ifstream in(dir / "frames.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "trial,type,transmitted,delivered,collided,lost");
}

TEST_CASE("sweep-assoc")
{
    auto dir = fresh_dir("assoc");
    auto r = cli({"sweep-assoc", "--trials", "200", "--seed", "3", "--out", dir.string()});
    REQUIRE(r.code == kExitOk);
    std::ifstream in(dir / "summary.csv");
    std::vector<std::string> rows;
    for (std::string l; std::getline(in, l);)
        rows.push_back(l);
    REQUIRE(rows.size() == 5);
    CHECK(rows[0].rfind("n_pds,bo,trials,min,max", 0) == 0);
    CHECK(std::filesystem::exists(dir / "histogram.csv"));

    auto one = cli({"sweep-assoc", "--trials", "1", "--npds", "2"});
    CHECK(one.code == kExitOk);
}

TEST_CASE("sweep-capture columns and values")
{
    auto r = cli({"sweep-capture", "--trials", "3"});
    REQUIRE(r.code == kExitOk);
    auto lines = lines_of(r.out);
    REQUIRE(lines.size() == 62);
    CHECK(lines[0] == "delta_dB,success_rate_C1,success_rate_C2");
    CHECK(lines[1] == "-30,1,1");
    CHECK(lines[31] == "0,0,0");
    CHECK(lines[41] == "10,1,1");
    CHECK(lines[40] == "9,0,0");
}

TEST_CASE("verify")
{
    for (const char* m : {"association_leaf.net", "association_coordinator.net"}) {
        auto r = cli({"verify", model(m)});
        CHECK(r.code == kExitOk);
        CHECK(r.out.find("bounded: yes, safe (1-bounded)") != std::string::npos);
        CHECK(r.out.find("live: yes") != std::string::npos);
        CHECK(r.out.find("reinitializable: yes") != std::string::npos);
        CHECK(r.out.find("result: all properties hold") != std::string::npos);
    }
    auto toy = cli({"verify", model("deadlock_toy.net")});
    CHECK(toy.code == kExitViolation);
    CHECK(toy.out.find("live: NO") != std::string::npos);
    CHECK(toy.out.find("result: PROPERTY VIOLATION") != std::string::npos);

    auto j = cli({"verify", model("association_leaf.net"), "--format", "json-lines"});
    CHECK(j.code == kExitOk);
    for (const auto& l : lines_of(j.out))
        CHECK(nlohmann::json::accept(l));
}

TEST_CASE("log level comes from the environment")
{
    ::setenv("DETMAC_LOG", "trace", 1);
    CHECK(log_level_from_env() == LogLevel::Trace);
    ::setenv("DETMAC_LOG", "info", 1);
    CHECK(log_level_from_env() == LogLevel::Info);
    ::unsetenv("DETMAC_LOG");
    CHECK(log_level_from_env() == LogLevel::Off);
}

TEST_CASE("installed binary behaves like the library entry point")
{
    const std::string cmd = std::string(DETMAC_CLI_PATH) + " validate " + scenario("two_supercoordinators.scn") +
                            " >/dev/null 2>&1";
    int status = std::system(cmd.c_str());
    REQUIRE(WIFEXITED(status));
    CHECK(WEXITSTATUS(status) == kExitInputError);
}
