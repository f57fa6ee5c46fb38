#include "qnls/cli.hpp"
#include "qnls/config.hpp"
#include "qnls/experiment.hpp"
#include "qnls/parallel.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <unistd.h>

namespace fs = std::filesystem;
using namespace qnls;

namespace {

struct Sandbox {
    fs::path root;
    Sandbox() {
        root = fs::temp_directory_path() / ("qnls_cli_" + std::to_string(::getpid()));
        fs::remove_all(root);
        fs::create_directories(root);
    }
    ~Sandbox() { fs::remove_all(root); }
    fs::path write(const std::string& name, const std::string& text) const {
        fs::path p = root / name;
        std::ofstream(p) << text;
        return p;
    }
};

struct Result {
    int code;
    std::string out, err;
};

Result cli(std::vector<std::string> args) {
    args.insert(args.begin(), "qnls");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

const char* quick_flat = R"(
scenario = "flat-identities"
seed = 3
diagnostics = ["exact", "density-flux"]

[grid]
dim = 2
points = 16
length = 6.283185307179586

[exact]
fields = 3
)";

const char* quick_fit = R"(
scenario = "transversality-fit"
seed = 7

[fit]
dims = [2]
lambda1_fixed = 2.0
lambda2_values = [8, 16, 32]
lambda2_fixed = 16.0
lambda1_values = [1, 2, 4]
time_samples = 21
max_points = 128
)";

} // namespace

TEST_CASE("schema and input errors exit with code 2") {
    Sandbox sb;
    auto cfg = sb.write("bad_model.toml", "scenario = \"qnls-smalldata-2d\"\nmodel = \"no_such_model.toml\"\n");
    Result r = cli({"run", cfg.string(), "--out", (sb.root / "out").string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("no_such_model.toml") != std::string::npos);
    CHECK_FALSE(fs::exists(sb.root / "out" / "manifest.json"));

    Result missing = cli({"run", (sb.root / "absent.toml").string()});
    CHECK(missing.code == 2);
    CHECK(missing.err.find("absent.toml") != std::string::npos);

    auto unknown = sb.write("unknown.toml", "scenario = \"resonance-tables\"\nsolverz = 1\n");
    CHECK(cli({"run", unknown.string(), "--out", (sb.root / "u").string()}).code == 2);
    auto wrong = sb.write("wrong.toml", "scenario = \"nope\"\n");
    CHECK(cli({"run", wrong.string()}).code == 2);
    auto typed = sb.write("typed.toml", "scenario = \"resonance-tables\"\n[tables]\nsamples = \"many\"\n");
    Result t = cli({"run", typed.string(), "--out", (sb.root / "t").string()});
    CHECK(t.code == 2);
    CHECK(t.err.find("samples") != std::string::npos);
    CHECK(cli({"report", (sb.root / "nowhere").string()}).code == 2);
    CHECK(cli({"frobnicate"}).code == 2);
}

TEST_CASE("run, report, truncation and diff") {
    Sandbox sb;
    auto cfg = sb.write("flat.toml", quick_flat);
    const fs::path a = sb.root / "a", b = sb.root / "b";
    Result r = cli({"run", cfg.string(), "--out", a.string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("all rows pass") != std::string::npos);

    // Every artifact is listed in the manifest.
    auto man = nlohmann::json::parse(slurp(a / "manifest.json"));
    std::set<std::string> listed;
    for (const auto& f : man["files"]) listed.insert(f.get<std::string>());
    for (const auto& e : fs::recursive_directory_iterator(a)) {
        if (!e.is_regular_file()) continue;
        std::string rel = fs::relative(e.path(), a).string();
        if (rel != "manifest.json") CHECK_MESSAGE(listed.count(rel), rel);
    }
    CHECK(man["config_hash"].get<std::string>().size() == 16);
    CHECK(slurp(a / "density_flux_0.csv").rfind("# config_hash=" + man["config_hash"].get<std::string>(), 0) == 0);

    Result rep = cli({"report", a.string()});
    CHECK(rep.code == 0);
    CHECK(rep.out.find("criterion 1: PASS") != std::string::npos);
    CHECK(rep.out.find("criterion 2: PASS") != std::string::npos);

    REQUIRE(cli({"run", cfg.string(), "--out", b.string(), "--set", "density-flux.tol=1e-20"}).code == 0);
    Result d = cli({"report", a.string(), "--diff", b.string()});
    CHECK(d.code == 0);
    CHECK(d.out.find("density-flux.mass") != std::string::npos);
    CHECK(d.out.find("PASS/FAIL") != std::string::npos);

    fs::remove(a / "trajectory" / "snap_00003.qnls");
    Result trunc = cli({"report", a.string()});
    CHECK(trunc.code == 1);
    CHECK(trunc.out.find("insufficient snapshots") != std::string::npos);
    Report rp = load_report(a);
    int insufficient = 0;
    for (const auto& row : rp.rows) insufficient += row.status == "insufficient snapshots";
    CHECK(insufficient == 2);

    std::ofstream(a / "manifest.json") << "{ not json";
    CHECK(cli({"report", a.string()}).code == 2);
}

TEST_CASE("seeded runs are byte-identical") {
    Sandbox sb;
    auto cfg = sb.write("fit.toml", quick_fit);
    REQUIRE(cli({"run", cfg.string(), "--out", (sb.root / "one").string(), "--seed", "7"}).code == 0);
    REQUIRE(cli({"run", cfg.string(), "--out", (sb.root / "two").string(), "--seed", "7", "--threads", "2"}).code == 0);
    const std::string j1 = slurp(sb.root / "one" / "transversality_2d.json");
    CHECK(!j1.empty());
    CHECK(j1 == slurp(sb.root / "two" / "transversality_2d.json"));

    auto flat = sb.write("flat.toml", quick_flat);
    REQUIRE(cli({"run", flat.string(), "--out", (sb.root / "f1").string()}).code == 0);
    set_thread_count(3);
    REQUIRE(cli({"run", flat.string(), "--out", (sb.root / "f2").string()}).code == 0);
    set_thread_count(1);
    for (const auto& e : fs::recursive_directory_iterator(sb.root / "f1")) {
        if (!e.is_regular_file() || e.path().filename() == "manifest.json") continue;
        fs::path other = sb.root / "f2" / fs::relative(e.path(), sb.root / "f1");
        CHECK_MESSAGE(slurp(e.path()) == slurp(other), e.path().string());
    }
}

TEST_CASE("sweep writes one run per value") {
    Sandbox sb;
    auto cfg = sb.write("flat.toml", quick_flat);
    Result r = cli({"sweep", cfg.string(), "--vary", "exact.fields=1,2", "--out", (sb.root / "sw").string()});
    CHECK(r.code == 0);
    int runs = 0;
    for (const auto& e : fs::directory_iterator(sb.root / "sw")) runs += fs::exists(e.path() / "manifest.json");
    CHECK(runs == 2);
    auto m = nlohmann::json::parse(slurp(sb.root / "sw" / "exact.fields_2" / "manifest.json"));
    CHECK(m["config"]["exact"]["fields"] == 2);
}

TEST_CASE("numerical abort exits with code 3 and keeps the partial trajectory") {
    Sandbox sb;
    sb.write("stiff.toml", R"(
dim = 2
[metric]
kind = "identity"
[[nonlinearity]]
coeff = [200000.0, 0.0]
factors = ["u", "ubar", "u"]
)");
    auto cfg = sb.write("abort.toml", R"(
scenario = "qnls-smalldata-2d"
seed = 1
diagnostics = ["mass-drift"]

[mass-drift]
model = "stiff.toml"
points = 16
eps = 0.9
T = 5.0
dt = 0.05
stride = 1
)");
    const fs::path out = sb.root / "ab";
    Result r = cli({"run", cfg.string(), "--out", out.string()});
    CHECK(r.code == 3);
    CHECK(r.err.find("blow-up") != std::string::npos);
    auto man = nlohmann::json::parse(slurp(out / "manifest.json"));
    CHECK(man["status"] == "aborted");
    CHECK(fs::exists(out / "partial_trajectory" / "manifest.json"));
    CHECK(cli({"report", out.string()}).out.find("run aborted") != std::string::npos);
}
