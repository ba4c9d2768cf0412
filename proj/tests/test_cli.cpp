#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "treecast/io.hpp"

using nlohmann::json;

namespace {

struct CliResult {
    int exit_code = -1;
    std::string out;
};

CliResult run_cli(const std::string& args) {
    const char* bin = std::getenv("TREECAST_BIN");
    REQUIRE_MESSAGE(bin != nullptr,
                    "TREECAST_BIN must point at the treecast binary");
    CliResult res;
    const std::string cmd = std::string(bin) + " " + args + " 2>/dev/null";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    char buf[4096];
    std::size_t n = 0;
    while ((n = std::fread(buf, 1, sizeof(buf), pipe)) > 0)
        res.out.append(buf, n);
    const int status = pclose(pipe);
    res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return res;
}

std::vector<std::string> lines_of(const std::string& s) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos < s.size()) {
        const std::size_t nl = s.find('\n', pos);
        if (nl == std::string::npos) {
            out.push_back(s.substr(pos));
            break;
        }
        out.push_back(s.substr(pos, nl - pos));
        pos = nl + 1;
    }
    return out;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        const std::size_t c = line.find(',', pos);
        if (c == std::string::npos) {
            out.push_back(line.substr(pos));
            return out;
        }
        out.push_back(line.substr(pos, c - pos));
        pos = c + 1;
    }
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("channel prints the transition matrix and spectrum") {
    const CliResult r = run_cli("channel --theta 0.5 --lambda 0.6");
    REQUIRE(r.exit_code == 0);
    const json j = json::parse(r.out);
    for (int i = 0; i < 4; ++i)
        CHECK(j["matrix"][i][i].get<double>() == doctest::Approx(0.7));
    for (int i = 0; i < 4; ++i)
        CHECK(j["pi"][i].get<double>() == doctest::Approx(0.25));
    CHECK(j["stochastic"].get<bool>());
    CHECK(j["eigenvalues"]["leading"].get<double>() == doctest::Approx(1.0));
    CHECK(j["eigenvalues"]["second"].get<double>() == doctest::Approx(0.6));
    CHECK(j["eigenvalues"]["multiplicity"].get<int>() == 3);
}

TEST_CASE("channel --steps prints the s-step matrix") {
    const CliResult r = run_cli("channel --theta 0.3 --lambda 0.5 --steps 2");
    REQUIRE(r.exit_code == 0);
    const json j = json::parse(r.out);
    CHECK(j["matrix_steps"][0][0].get<double>() == doctest::Approx(0.3625));
    CHECK(j["steps"].get<int>() == 2);
}

TEST_CASE("bad parameters exit with code 2") {
    CHECK(run_cli("channel --theta 1.5 --lambda 0.5").exit_code == 2);
    CHECK(run_cli("popdyn --theta 0.3 --dlambda2 1.2 --levels 1 --pop 0")
              .exit_code == 2);
    CHECK(run_cli("bogus").exit_code == 2);
    CHECK(run_cli("dynsys --theta 0.5").exit_code == 2);
    CHECK(run_cli("channel --theta 0.5 --lambda 0.5 --dlambda2 1.0")
              .exit_code == 2);
}

TEST_CASE("popdyn emits one row per level and reruns identically") {
    const std::string args =
        "popdyn --theta 0.3 --d 2 --dlambda2 1.2 --levels 60 --pop 2000 "
        "--seed 7";
    const CliResult a = run_cli(args);
    REQUIRE(a.exit_code == 0);
    const auto rows = lines_of(a.out);
    REQUIRE(rows.size() == 62);  // header + levels 0..60
    CHECK(rows[0].substr(0, 6) == "level,");
    CHECK(rows[1].substr(0, 2) == "0,");
    const CliResult b = run_cli(args);
    CHECK(a.out == b.out);
}

TEST_CASE("verify exact mode passes on enumerated trees") {
    const CliResult r = run_cli(
        "verify --suite lemma1 --mode exact --theta 0.3 --d 2 --depth 2");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("FAIL") == std::string::npos);
    CHECK(r.out.find("pass") != std::string::npos);

    const CliResult all = run_cli(
        "verify --suite all --mode exact --theta 0.3 --lambda 0.6 --d 2 "
        "--depth 2");
    CHECK(all.exit_code == 0);
    CHECK(all.out.find("FAIL") == std::string::npos);
}

TEST_CASE("verify with a zero sigma reports failures and exits 1") {
    const CliResult r = run_cli(
        "verify --suite lemma1 --theta 0.3 --lambda 0.6 --level 1 "
        "--pop 5000 --seed 3 --sigma 0");
    CHECK(r.exit_code == 1);
    CHECK(r.out.find("FAIL") != std::string::npos);
}

TEST_CASE("verify --json emits a parseable report array") {
    const CliResult r = run_cli(
        "verify --suite lemma2 --mode exact --theta 0.4 --d 2 --depth 1 "
        "--json");
    REQUIRE(r.exit_code == 0);
    const json j = json::parse(r.out);
    REQUIRE(j.is_array());
    CHECK(j.size() == 5);
    for (const json& rep : j) {
        CHECK(rep["pass"].get<bool>());
        CHECK(rep["mode"].get<std::string>() == "exact");
    }
}

TEST_CASE("dynsys --roots prints the two thresholds") {
    const CliResult r = run_cli("dynsys --roots");
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.find("0.2113248654") != std::string::npos);
    CHECK(r.out.find("0.7886751346") != std::string::npos);
}

TEST_CASE("dynsys reports status and final state as JSON") {
    const CliResult r =
        run_cli("dynsys --theta 0.5 --dlambda2 0.9 --steps 50");
    REQUIRE(r.exit_code == 0);
    const json j = json::parse(r.out);
    CHECK(j["status"].get<std::string>() == "completed");
    CHECK(j["roots"][0].get<double>() ==
          doctest::Approx(0.21132486540518713).epsilon(1e-12));
    const double fx = j["final"]["x_th"].get<double>();
    CHECK(fx >= 0);
    CHECK(fx < 0.01);
}

TEST_CASE("simulate reports leaves and a normalized posterior") {
    const CliResult r = run_cli(
        "simulate --theta 0.5 --lambda 0.6 --depth 2 --root 1 --seed 4");
    REQUIRE(r.exit_code == 0);
    const json j = json::parse(r.out);
    REQUIRE(j["leaves"].size() == 4);
    double total = 0;
    for (int i = 0; i < 4; ++i) {
        const double p = j["posterior"][i].get<double>();
        CHECK(p >= 0);
        total += p;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("sweep emits one classification row per grid cell") {
    const CliResult r = run_cli(
        "sweep --theta 0.1,0.5,0.9 --dlambda2 0.9,1.0,1.1 --d 2 "
        "--engine dynsys");
    REQUIRE(r.exit_code == 0);
    const auto rows = lines_of(r.out);
    REQUIRE(rows.size() == 10);
    CHECK(rows[0] ==
          "theta,dlambda2,d,classification,final_x_th,final_x_1mth,se");
    bool saw_sub = false, saw_super = false;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto f = split_csv(rows[i]);
        REQUIRE(f.size() == 7);
        const double theta = std::stod(f[0]);
        const double dl2 = std::stod(f[1]);
        if (theta == 0.5 && dl2 < 0.95) {
            CHECK(f[3] == "collapses");
            saw_sub = true;
        }
        if (theta == 0.5 && dl2 > 1.05) {
            CHECK(f[3] == "reconstructs");
            saw_super = true;
        }
    }
    CHECK(saw_sub);
    CHECK(saw_super);
}

TEST_CASE("popdyn --out writes the CSV plus a checksum manifest") {
    namespace fs = std::filesystem;
    const fs::path dir =
        fs::temp_directory_path() /
        ("treecast_cli_" + std::to_string(static_cast<long>(getpid())));
    fs::create_directories(dir);
    const std::string out = (dir / "traj.csv").string();
    const CliResult r = run_cli(
        "popdyn --theta 0.3 --dlambda2 0.9 --levels 3 --pop 1000 --seed 1 "
        "--out " +
        out);
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.empty());
    REQUIRE(fs::exists(out));
    REQUIRE(fs::exists(out + ".manifest.json"));

    const json m = json::parse(treecast::read_file(out + ".manifest.json"));
    CHECK(m["command"].get<std::string>() == "popdyn");
    CHECK(m["config"]["dlambda2"].get<double>() == doctest::Approx(0.9));
    CHECK(m["config"]["seed"].get<int>() == 1);
    CHECK(m["duration_seconds"].get<double>() >= 0);
    REQUIRE(m["outputs"].size() == 1);
    const std::string data = treecast::read_file(out);
    CHECK(m["outputs"][0]["path"].get<std::string>() == out);
    CHECK(m["outputs"][0]["bytes"].get<std::size_t>() == data.size());
    char expect[17];
    std::snprintf(expect, sizeof(expect), "%016llx",
                  static_cast<unsigned long long>(treecast::fnv1a64(data)));
    CHECK(m["outputs"][0]["fnv1a64"].get<std::string>() == expect);
    fs::remove_all(dir);
}

TEST_CASE("config file supplies flags which the command line overrides") {
    namespace fs = std::filesystem;
    const fs::path dir =
        fs::temp_directory_path() /
        ("treecast_cfg_" + std::to_string(static_cast<long>(getpid())));
    fs::create_directories(dir);
    const std::string cfg = (dir / "run.json").string();
    treecast::write_file(cfg, "{\"theta\": 0.5, \"lambda\": 0.6}\n");
    const CliResult base = run_cli("channel --config " + cfg);
    REQUIRE(base.exit_code == 0);
    CHECK(json::parse(base.out)["theta"].get<double>() ==
          doctest::Approx(0.5));
    const CliResult over =
        run_cli("channel --config " + cfg + " --theta 0.3");
    REQUIRE(over.exit_code == 0);
    CHECK(json::parse(over.out)["theta"].get<double>() ==
          doctest::Approx(0.3));
    fs::remove_all(dir);
}

}  // TEST_SUITE
