#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "json.hpp"
#include "jdc/runner.hpp"

namespace fs = std::filesystem;
using namespace jdc;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("jdc_cli_test_" + std::to_string(::getpid())) / name;
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

int cli(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string(JDC_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
    const int s = std::system(cmd.c_str());
    return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
}

const char* kOu = R"([model]
dim = 1
drift = linear
K = 1

[diffusion]
sigma1 = 1
)";

const char* kMirror = R"([model]
dim = 1
drift = piecewise
a = 2
beta = 1
omega = 4
L = 2
R = 1
Kpos = 1

[levy]
family = stable
alpha = 1.5

[scheme]
variant = mirror

[run]
T = 1
dt = 1e-3
n_paths = 300
seed = 17
x0 = 0.5
y0 = -0.5
record_every = 20
)";

}  // namespace

TEST_CASE("certify on constant curvature reports C = 2") {
    const auto dir = scratch("certify");
    write(dir / "c.ini", std::string(kOu) + "[run]\nseed = 1\n");
    CHECK(cli("certify --config " + (dir / "c.ini").string() + " --out " + (dir / "out").string(), dir / "log") == 0);
    const auto j = nlohmann::json::parse(slurp(dir / "out" / "summary.json"));
    CHECK(j["metrics"]["C"].get<double>() == 2.0);
    CHECK(j["metrics"]["R0"].get<double>() == 0.0);
    CHECK(j["passed"].get<bool>());
    CHECK(fs::exists(dir / "out" / "distance_fn.csv"));
}

TEST_CASE("simulate is bit-identical across repeats and worker counts") {
    const auto dir = scratch("simulate");
    write(dir / "m.ini", kMirror);
    const std::string cfg = "--config " + (dir / "m.ini").string();
    REQUIRE(cli("simulate " + cfg + " --workers 1 --out " + (dir / "a").string(), dir / "log") == 0);
    REQUIRE(cli("simulate " + cfg + " --workers 1 --out " + (dir / "b").string(), dir / "log") == 0);
    REQUIRE(cli("simulate " + cfg + " --workers 3 --out " + (dir / "c").string(), dir / "log") == 0);
    for (const char* f : {"mean_distance.csv", "trace_path0.csv"}) {
        const auto a = slurp(dir / "a" / f);
        CHECK(!a.empty());
        CHECK(a == slurp(dir / "b" / f));
        CHECK(a == slurp(dir / "c" / f));
    }
    const auto ja = nlohmann::json::parse(slurp(dir / "a" / "summary.json"));
    const auto jc = nlohmann::json::parse(slurp(dir / "c" / "summary.json"));
    CHECK(ja["metrics"] == jc["metrics"]);
    CHECK(ja["config_hash"] == jc["config_hash"]);
}

TEST_CASE("seed override changes the output and the hash") {
    const auto dir = scratch("seed");
    write(dir / "m.ini", kMirror);
    const std::string cfg = "simulate --config " + (dir / "m.ini").string();
    REQUIRE(cli(cfg + " --out " + (dir / "a").string(), dir / "log") == 0);
    REQUIRE(cli(cfg + " --seed 99 --out " + (dir / "b").string(), dir / "log") == 0);
    CHECK(slurp(dir / "a" / "trace_path0.csv") != slurp(dir / "b" / "trace_path0.csv"));
    const auto ja = nlohmann::json::parse(slurp(dir / "a" / "summary.json"));
    const auto jb = nlohmann::json::parse(slurp(dir / "b" / "summary.json"));
    CHECK(ja["config_hash"] != jb["config_hash"]);
}

TEST_CASE("configuration errors exit with 2 and name the line") {
    const auto dir = scratch("errors");
    write(dir / "noseed.ini", kOu);
    CHECK(cli("certify --config " + (dir / "noseed.ini").string(), dir / "log1") == 2);
    CHECK(slurp(dir / "log1").find("seed") != std::string::npos);
    write(dir / "badkey.ini", std::string(kOu) + "colour = red\n[run]\nseed = 1\n");
    CHECK(cli("certify --config " + (dir / "badkey.ini").string(), dir / "log2") == 2);
    CHECK(slurp(dir / "log2").find(":8:") != std::string::npos);
    write(dir / "badscheme.ini", std::string(kOu) + "[scheme]\nvariant = sideways\n[run]\nseed = 1\n");
    CHECK(cli("simulate --config " + (dir / "badscheme.ini").string(), dir / "log3") == 2);
    CHECK(cli("certify --config " + (dir / "missing.ini").string(), dir / "log4") == 2);
    CHECK(cli("frobnicate", dir / "log5") == 2);
    // seed supplied on the command line is enough
    CHECK(cli("certify --seed 4 --config " + (dir / "noseed.ini").string() + " --out " + (dir / "o").string(),
              dir / "log6") == 0);
}

TEST_CASE("failed inequality check exits with 1") {
    const auto dir = scratch("fail");
    // a claimed curvature far above the drift makes the coupled decay miss the bound
    write(dir / "f.ini", R"([model]
dim = 1
drift = linear
K = 0.05
kappa = constant:5

[diffusion]
sigma1 = 0.05

[run]
T = 2
dt = 1e-2
n_paths = 400
seed = 3
x0 = 1
y0 = -1
record_every = 10
)");
    CHECK(cli("contract --config " + (dir / "f.ini").string() + " --out " + (dir / "o").string(), dir / "log") == 1);
}

TEST_CASE("contract on the OU reflection config passes") {
    const auto dir = scratch("contract");
    write(dir / "c.ini", std::string(kOu) + R"([scheme]
variant = reflection

[run]
T = 4
dt = 1e-3
n_paths = 2000
seed = 23
x0 = 1
y0 = -1
)");
    CHECK(cli("contract --config " + (dir / "c.ini").string() + " --out " + (dir / "o").string(), dir / "log") == 0);
    const auto j = nlohmann::json::parse(slurp(dir / "o" / "summary.json"));
    CHECK(j["metrics"]["rate_within_band"].get<double>() == 1.0);
}

TEST_CASE("summary json is key-sorted") {
    const auto dir = scratch("sorted");
    write(dir / "c.ini", std::string(kOu) + "[run]\nseed = 1\n");
    REQUIRE(cli("certify --config " + (dir / "c.ini").string() + " --out " + (dir / "o").string(), dir / "log") == 0);
    const std::string text = slurp(dir / "o" / "summary.json");
    CHECK(text.find("\"artifacts\"") < text.find("\"config_hash\""));
    CHECK(text.find("\"config_hash\"") < text.find("\"experiment_id\""));
}

TEST_CASE("plot data: one file per series with four columns") {
    const auto dir = scratch("plot");
    ResultRecord empty;
    CHECK(emit_plotdata(empty, (dir / "none").string()).empty());
    CHECK_FALSE(fs::exists(dir / "none"));
    ResultRecord rec;
    for (int i = 0; i < 5; ++i) rec.series["decay"].push_back({0.5 * i, 1.0, 0.1, std::exp(-0.5 * i)});
    rec.series["other"].push_back({0.0, 2.0, 0.0, 3.0});
    const auto files = emit_plotdata(rec, (dir / "p").string());
    CHECK(files.size() == 2);
    std::ifstream in(dir / "p" / "decay.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "t,value,stderr,bound");
    double prev = 2.0;
    while (std::getline(in, line)) {
        const double b = std::stod(line.substr(line.rfind(',') + 1));
        CHECK(b < prev);
        prev = b;
    }
}

TEST_CASE("config hash ignores workers and output location") {
    auto ini = IniFile::parse(std::string(kMirror) + "[outputs]\ndirectory = x\n");
    const auto a = build_config(ini);
    Overrides ov;
    ov.workers = 5;
    ov.out_dir = "elsewhere";
    const auto b = build_config(ini, ov);
    CHECK(config_hash(a) == config_hash(b));
    ini.set("run", "dt", "2e-3");
    CHECK(config_hash(build_config(ini)) != config_hash(a));
}
