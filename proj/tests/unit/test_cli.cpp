#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include <json.hpp>

#include "stfe/cli.hpp"
#include "stfe/gapstats.hpp"
#include "stfe/tightener.hpp"

using namespace stfe;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args)
{
    args.insert(args.begin(), "stfe-hull");
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::string temp_path(const std::string& name)
{
    return (std::filesystem::temp_directory_path() / ("stfe_cli_" + std::to_string(::getpid()) + "_" + name)).string();
}

std::string slurp(const std::string& path)
{
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

/// Writes `text` to a file and asks the CLI to re-read it.
Run inspect(const std::string& kind, const std::string& text)
{
    const auto path = temp_path("inspect_" + kind);
    spit(path, text);
    auto r = run({"inspect", "--kind", kind, path});
    std::filesystem::remove(path);
    return r;
}

} // namespace

TEST_CASE("exit codes")
{
    CHECK(run({"--help"}).code == kExitOk);
    CHECK(run({}).code == kExitUsage);
    CHECK(run({"envelope", "eval", "-w", "1", "--x", "0.5", "--bogus"}).code == kExitUsage);
    CHECK(run({"envelope", "eval", "--x", "0.5"}).code == kExitUsage);

    const auto outside = run({"envelope", "eval", "-w", "1", "--x", "2"});
    CHECK(outside.code == kExitInput);
    CHECK(outside.err.find('\n') == outside.err.size() - 1);
    CHECK(run({"envelope", "eval", "-w", "1,2", "--x", "0.5"}).code == kExitInput);
    CHECK(run({"envelope", "eval", "-w", "1", "--act", "gelu", "--x", "0.5"}).code == kExitInput);
    CHECK(run({"envelope", "eval", "-w", "1", "-b", "5", "--act", "silu", "--x", "0.5"}).code == kExitInput);
    CHECK(run({"tighten", "--net", temp_path("missing.nn.json"), "--mode", "env"}).code == kExitInput);
    CHECK(inspect("net", "{\"input_dim\": 1").code == kExitInput);
    CHECK(inspect("gap", "[]").code == kExitInput);
}

TEST_CASE("envelope eval")
{
    // vertices: both envelopes equal the activation
    for (const auto& x : {"0,0", "1,0", "0,1", "1,1"}) {
        const auto r = run({"envelope", "eval", "-w", "10,5", "-b", "-10", "--x", x});
        REQUIRE(r.code == 0);
        const auto j = nlohmann::json::parse(r.out);
        const double z = 10 * j["x"][0].get<double>() + 5 * j["x"][1].get<double>() - 10;
        const double f = 1 / (1 + std::exp(-z));
        CHECK(j["f"].get<double>() == doctest::Approx(f).epsilon(1e-12));
        CHECK(j["conc"].get<double>() == doctest::Approx(f).epsilon(1e-12));
        CHECK(j["conv"].get<double>() == doctest::Approx(f).epsilon(1e-12));
    }
    // negative values survive argument parsing
    const auto neg = run({"envelope", "eval", "-w", "-3,2", "-b", "-1.5", "--act", "elu:alpha=1.5", "--box", "-1:1,0:2",
                          "--x", "-0.5,0.25"});
    REQUIRE(neg.code == 0);
    const auto j = nlohmann::json::parse(neg.out);
    // z = -3(-0.5) + 2(0.25) - 1.5 = 0.5, on the identity branch of ELU
    CHECK(j["f"].get<double>() == doctest::Approx(0.5));
    CHECK(j["conc"].get<double>() >= j["f"].get<double>() - 1e-12);
    CHECK(j["conv"].get<double>() <= j["f"].get<double>() + 1e-12);
    CHECK(j["h_over"].get<double>() >= j["conc"].get<double>() - 1e-12);
    CHECK(j["supergradient"].size() == 2);

    CHECK(inspect("eval", neg.out).out == neg.out);
}

TEST_CASE("separate")
{
    const auto above = run({"separate", "-w", "10,5", "-b", "-10", "--x", "0.5,0.5", "--y", "0.9", "--mode", "env"});
    REQUIRE(above.code == 0);
    const auto j = nlohmann::json::parse(above.out);
    CHECK_FALSE(j["inside"].get<bool>());
    CHECK(j["sense"] == "upper");
    CHECK(j["violation"].get<double>() > 0);
    const double rhs = j["coeffs"][0].get<double>() * 0.5 + j["coeffs"][1].get<double>() * 0.5 + j["offset"].get<double>();
    CHECK(0.9 - rhs == doctest::Approx(j["violation"].get<double>()));
    CHECK(inspect("separate", above.out).out == above.out);

    const auto inside = run({"separate", "-w", "10,5", "-b", "-10", "--x", "0.5,0.5", "--y", "0.2", "--mode", "hest"});
    REQUIRE(inside.code == 0);
    CHECK(nlohmann::json::parse(inside.out)["inside"].get<bool>());
    CHECK(run({"separate", "-w", "1", "--x", "0.5", "--y", "0.2", "--mode", "both"}).code == kExitUsage);
}

TEST_CASE("make-net, tighten and inspect")
{
    const auto net = temp_path("net.nn.json");
    REQUIRE(run({"make-net", "--layers", "4,5,5,5,2", "--act", "selu", "--seed", "3", "--out", net}).code == 0);
    const auto net_text = slurp(net);
    CHECK(inspect("net", net_text).out == net_text);

    const auto env = temp_path("env.csv"), hest = temp_path("hest.csv"), env4 = temp_path("env4.csv");
    REQUIRE(run({"tighten", "--net", net, "--mode", "env", "--out", env}).code == 0);
    REQUIRE(run({"tighten", "--net", net, "--mode", "hest", "--out", hest}).code == 0);
    REQUIRE(run({"tighten", "--net", net, "--mode", "env", "--out", env4, "--threads", "4"}).code == 0);
    CHECK(slurp(env4) == slurp(env));

    const auto e = BoundsReport::from_csv(slurp(env));
    const auto h = BoundsReport::from_csv(slurp(hest));
    REQUIRE(e.rows.size() == h.rows.size());
    REQUIRE(!e.rows.empty());
    for (std::size_t i = 0; i < e.rows.size(); ++i) CHECK(e.rows[i].improvement >= h.rows[i].improvement - 1e-6);
    CHECK(inspect("bounds", slurp(env)).out == slurp(env));

    // stdout when no --out is given
    const auto piped = run({"tighten", "--net", net, "--mode", "env"});
    CHECK(piped.out == slurp(env));
    for (const auto& p : {net, env, hest, env4}) std::filesystem::remove(p);
}

TEST_CASE("gap-report")
{
    const std::vector<std::string> base{"gap-report", "-w", "10,5", "-b", "-10", "--samples", "50000", "--seed", "1"};
    const auto a = run(base);
    REQUIRE(a.code == 0);
    CHECK(run(base).out == a.out);
    auto threaded = base;
    threaded.insert(threaded.end(), {"--threads", "3"});
    CHECK(run(threaded).out == a.out);

    const auto rep = GapReport::from_json(a.out);
    CHECK(rep.samples == 50000);
    CHECK(rep.seed == 1);
    CHECK(inspect("gap", a.out).out == a.out);

    auto csv = base;
    csv.insert(csv.end(), {"--format", "csv"});
    const auto c = run(csv);
    REQUIRE(c.code == 0);
    CHECK(c.out.rfind(GapReport::csv_header(), 0) == 0);
    CHECK(inspect("gap-csv", c.out).out == c.out);
    const auto row = c.out.substr(c.out.find('\n') + 1);
    CHECK(GapReport::from_csv_row(row.substr(0, row.find('\n'))) == rep);
}

TEST_CASE("surface")
{
    const auto r = run({"surface", "-w", "10,5", "-b", "-10", "--grid", "5"});
    REQUIRE(r.code == 0);
    std::istringstream in(r.out);
    std::string line;
    std::getline(in, line);
    CHECK(line == "x0,x1,f,h_over,conc,conv,h_under,region");
    int rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
        REQUIRE(cells.size() == 8);
        const double f = std::stod(cells[2]), hov = std::stod(cells[3]), conc = std::stod(cells[4]);
        const double conv = std::stod(cells[5]), hun = std::stod(cells[6]);
        CHECK(hov >= conc - 1e-12);
        CHECK(conc >= f - 1e-12);
        CHECK(f >= conv - 1e-12);
        CHECK(conv >= hun - 1e-12);
    }
    CHECK(rows == 25);
    CHECK(inspect("surface", r.out).out == r.out);
    CHECK(run({"surface", "-w", "1,2,3", "--grid", "5"}).code == kExitInput);
}
