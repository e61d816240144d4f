#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "signalcraft/cli.hpp"

using namespace signalcraft;
namespace fs = std::filesystem;
using Catch::Approx;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("signalcraft-test-" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

void spit(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

std::string repo_config(const std::string& name) {
    for (const char* base : {"configs", "../configs", "../../configs"}) {
        const fs::path candidate = fs::path(base) / name;
        if (fs::exists(candidate)) return candidate.string();
    }
    FAIL("config fixture not found: " << name);
    return name;
}

}  // namespace

TEST_CASE("design subcommand emits the threshold optimum") {
    TempDir tmp;
    const std::string out = tmp.file("design.json");
    REQUIRE(cli::run({"design", "--config", repo_config("r2_uniform.json"), "--out", out}) == 0);
    const json res = json::parse(slurp(out));
    CHECK(res.at("regime") == "R2");
    CHECK(res.at("value").get<double>() == Approx(0.6).margin(1e-9));
    CHECK(res.contains("mechanism"));
}

TEST_CASE("design-lp subcommand reproduces the capacity table") {
    TempDir tmp;
    const std::string out = tmp.file("lp.json");
    const std::string dump = tmp.file("lp.txt");
    REQUIRE(cli::run({"design-lp", "--config", repo_config("capacity_three_state.json"), "--out",
                      out, "--dump-lp", dump}) == 0);
    const json res = json::parse(slurp(out));
    CHECK(res.at("value").get<double>() == Approx(0.425).margin(1e-9));
    CHECK(res.at("conditional")[0].get<double>() == Approx(1.0).margin(1e-9));
    CHECK(res.at("conditional")[1].get<double>() == Approx(5.0 / 12.0).margin(1e-9));
    CHECK(res.at("conditional")[2].get<double>() == Approx(0.0).margin(1e-12));

    const std::string lp_text = slurp(dump);
    CHECK(lp_text.rfind("max", 0) == 0);
    CHECK(lp_text.find("eq") != std::string::npos);
    CHECK(lp_text.find("ub") != std::string::npos);
}

TEST_CASE("identical config and seed give byte-identical output") {
    TempDir tmp;
    const std::string out1 = tmp.file("a.json");
    const std::string out2 = tmp.file("b.json");
    REQUIRE(cli::run({"evaluate", "--config", repo_config("pooling_band.json"), "--out", out1}) == 0);
    REQUIRE(cli::run({"evaluate", "--config", repo_config("pooling_band.json"), "--out", out2}) == 0);
    const std::string a = slurp(out1), b = slurp(out2);
    CHECK(a == b);
    CHECK(!a.empty());
    const json res = json::parse(a);
    CHECK(res.at("value").get<double>() == Approx(0.05).margin(1e-9));
    CHECK(std::abs(res.at("mc_value").get<double>() - 0.05) <=
          3.0 * res.at("mc_std_error").get<double>() + 1e-9);
}

TEST_CASE("design output round-trips through check and evaluate") {
    TempDir tmp;
    const std::string designed = tmp.file("designed.json");
    REQUIRE(cli::run({"design", "--config", repo_config("r2_uniform.json"), "--out", designed}) == 0);
    const json res = json::parse(slurp(designed));

    const std::string mech_path = tmp.file("mechanism.json");
    spit(mech_path, res.at("mechanism").dump());
    const std::string prior_path = tmp.file("prior.json");
    spit(prior_path, R"({"kind":"uniform","a":0,"b":1})");

    const std::string report_path = tmp.file("check.json");
    REQUIRE(cli::run({"check", "--mechanism", mech_path, "--prior", prior_path, "--out",
                      report_path}) == 0);
    const json report = json::parse(slurp(report_path));
    CHECK(report.at("feasible").get<bool>());

    const std::string eval_config = tmp.file("eval.json");
    spit(eval_config, R"({
      "prior": {"kind": "uniform", "a": 0, "b": 1},
      "equilibrium": {"kind": "identity"},
      "preference": {"kind": "set", "omegas": [[0.1, 0.3]]},
      "mechanism": ")" + mech_path + R"("
    })");
    const std::string eval_out = tmp.file("eval_out.json");
    REQUIRE(cli::run({"evaluate", "--config", eval_config, "--out", eval_out}) == 0);
    const json eval_res = json::parse(slurp(eval_out));
    CHECK(eval_res.at("value").get<double>() == Approx(0.6).margin(1e-8));
}

TEST_CASE("check reports infeasible spreads without failing") {
    TempDir tmp;
    const std::string mech_path = tmp.file("direct.json");
    spit(mech_path, R"({"pairs": [[0.5, 0.1], [0.5, 0.9]]})");
    const std::string prior_path = tmp.file("prior.json");
    spit(prior_path, R"({"kind":"uniform","a":0,"b":1})");
    const std::string out = tmp.file("report.json");
    REQUIRE(cli::run({"check", "--mechanism", mech_path, "--prior", prior_path, "--out", out}) == 0);
    const json report = json::parse(slurp(out));
    CHECK_FALSE(report.at("feasible").get<bool>());
}

TEST_CASE("sweep emits the CSV schema") {
    TempDir tmp;
    const std::string config = tmp.file("sweep.json");
    spit(config, R"({
      "prior": {"kind": "uniform", "a": 5, "b": 20},
      "value_dist": {"kind": "uniform", "a": 0, "b": 10},
      "cost": {"kind": "linear", "C": 1},
      "b_grid": [0.0, 0.5, 1.0]
    })");
    const std::string out = tmp.file("sweep.csv");
    REQUIRE(cli::run({"sweep", "--config", config, "--out", out, "--jobs", "1"}) == 0);
    const std::string csv = slurp(out);
    CHECK(csv.rfind("b,V_opt,V_ni,V_fi\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
    CHECK(csv.find("0,1,1,1") != std::string::npos);  // everything complies at b = 0
}

TEST_CASE("convergence emits the CSV schema") {
    TempDir tmp;
    const std::string config = tmp.file("conv.json");
    spit(config, R"({
      "prior": {"kind": "uniform", "a": 0, "b": 10},
      "value_dist": {"kind": "uniform", "a": 0, "b": 6},
      "cost": {"kind": "linear", "C": 1},
      "preference": {"kind": "h-rho", "rho": 0.5},
      "levels": [[5, 5], [20, 20]]
    })");
    const std::string out = tmp.file("conv.csv");
    REQUIRE(cli::run({"convergence", "--config", config, "--out", out, "--jobs", "1"}) == 0);
    const std::string csv = slurp(out);
    CHECK(csv.rfind("delta,tau,value,gap\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}

TEST_CASE("usage errors exit with code 2") {
    CHECK(cli::run({"design", "--config", "/nonexistent.json"}) == 2);
    CHECK(cli::run({"design", "--nope"}) == 2);
    CHECK(cli::run({"frobnicate"}) == 2);
    CHECK(cli::run({}) == 2);

    TempDir tmp;
    const std::string bad = tmp.file("bad.json");
    spit(bad, R"({"prior": {"kind": "martian"}})");
    CHECK(cli::run({"design", "--config", bad}) == 2);
}

TEST_CASE("SIGNALCRAFT_SEED overrides the config seed") {
    TempDir tmp;
    const std::string out1 = tmp.file("s1.json");
    const std::string out2 = tmp.file("s2.json");
    ::setenv("SIGNALCRAFT_SEED", "4242", 1);
    REQUIRE(cli::run({"evaluate", "--config", repo_config("pooling_band.json"), "--out", out1}) == 0);
    ::unsetenv("SIGNALCRAFT_SEED");
    REQUIRE(cli::run({"evaluate", "--config", repo_config("pooling_band.json"), "--out", out2}) == 0);
    const json a = json::parse(slurp(out1));
    const json b = json::parse(slurp(out2));
    CHECK(a.at("seed").get<std::uint64_t>() == 4242);
    CHECK(b.at("seed").get<std::uint64_t>() == 99);
}
