#include "qnls/experiment.hpp"

#include "qnls/config.hpp"
#include "qnls/evolution.hpp"
#include "qnls/model.hpp"

#include <fftw3.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#ifndef QNLS_VERSION
#define QNLS_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;

namespace qnls {

namespace {

bool evaluate(const CriterionRow& r) {
    if (!std::isfinite(r.value)) return false;
    if (r.relation == "<=") return r.value <= r.threshold;
    if (r.relation == ">=") return r.value >= r.threshold;
    return std::abs(r.value - r.target) <= r.threshold;
}

CriterionRow make_row(std::string id, int c, std::string d, double v, std::string rel, double thr,
                      double target) {
    CriterionRow r;
    r.id = std::move(id);
    r.criterion = c;
    r.description = std::move(d);
    r.value = v;
    r.relation = std::move(rel);
    r.threshold = thr;
    r.target = target;
    r.pass = evaluate(r);
    return r;
}

// Non-finite doubles have no JSON form; they are stored as null.
nlohmann::json num(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }
double num(const nlohmann::json& j) { return j.is_number() ? j.get<double>() : std::nan(""); }

const std::set<std::string> top_level_keys{"scenario", "seed",  "output", "model", "grid",
                                           "data",     "solver", "diagnostics", "description"};

nlohmann::json versions() {
    const std::string nl = std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                           std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                           std::to_string(NLOHMANN_JSON_VERSION_PATCH);
    return {{"qnls", QNLS_VERSION},
            {"fftw", std::string(fftw_version)},
            {"compiler", std::string(__VERSION__)},
            {"nlohmann_json", nl}};
}

const ScenarioInfo& find_scenario(const std::string& name) {
    for (const auto& s : scenario_catalog())
        if (s.name == name) return s;
    std::string known;
    for (const auto& s : scenario_catalog()) known += (known.empty() ? "" : ", ") + s.name;
    throw ConfigError("config: unknown scenario '" + name + "' (known: " + known + ")");
}

void validate_schema(const nlohmann::json& cfg) {
    if (!cfg.is_object()) throw ConfigError("config: top level must be a table");
    if (!cfg.contains("scenario") || !cfg["scenario"].is_string())
        throw ConfigError("config: key 'scenario' is required and must be a string");
    const ScenarioInfo& sc = find_scenario(cfg["scenario"]);
    std::set<std::string> diag(sc.diagnostics.begin(), sc.diagnostics.end());
    for (const auto& [k, v] : cfg.items()) {
        if (top_level_keys.count(k)) continue;
        if (diag.count(k)) {
            if (!v.is_object()) throw ConfigError("config: parameters of diagnostic '" + k + "' must be a table");
            continue;
        }
        throw ConfigError("config: unknown key '" + k + "'");
    }
    if (cfg.contains("diagnostics")) {
        if (!cfg["diagnostics"].is_array()) throw ConfigError("config: key 'diagnostics' must be a list");
        for (const auto& d : cfg["diagnostics"]) {
            if (!d.is_string() || !diag.count(d.get<std::string>()))
                throw ConfigError("config: diagnostic " + d.dump() + " is not part of scenario '" + sc.name + "'");
        }
    }
    if (cfg.contains("seed") && !(cfg["seed"].is_number_unsigned() || cfg["seed"].is_number_integer()))
        throw ConfigError("config: key 'seed' must be a nonnegative integer");
    if (cfg.contains("seed") && cfg["seed"].get<long long>() < 0)
        throw ConfigError("config: key 'seed' must be a nonnegative integer");
    for (const char* t : {"grid", "data", "solver"})
        if (cfg.contains(t) && !cfg[t].is_object()) throw ConfigError(std::string("config: key '") + t + "' must be a table");
}

std::string read_file(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

} // namespace

CriterionRow CriterionRow::at_most(std::string id, int c, std::string d, double v, double thr) {
    return make_row(std::move(id), c, std::move(d), v, "<=", thr, 0.0);
}
CriterionRow CriterionRow::at_least(std::string id, int c, std::string d, double v, double thr) {
    return make_row(std::move(id), c, std::move(d), v, ">=", thr, 0.0);
}
CriterionRow CriterionRow::within(std::string id, int c, std::string d, double v, double target, double tol) {
    return make_row(std::move(id), c, std::move(d), v, "within", tol, target);
}

nlohmann::json CriterionRow::to_json() const {
    return {{"id", id},         {"criterion", criterion}, {"description", description},
            {"value", num(value)}, {"relation", relation}, {"threshold", threshold},
            {"target", target}, {"pass", pass},           {"status", status},
            {"detail", detail}};
}

CriterionRow CriterionRow::from_json(const nlohmann::json& j) {
    CriterionRow r;
    r.id = j.at("id").get<std::string>();
    r.criterion = j.value("criterion", 0);
    r.description = j.value("description", std::string());
    r.value = num(j.value("value", nlohmann::json()));
    r.relation = j.value("relation", std::string("<="));
    r.threshold = j.value("threshold", 0.0);
    r.target = j.value("target", 0.0);
    r.pass = j.value("pass", false);
    r.status = j.value("status", std::string("ok"));
    r.detail = j.value("detail", std::string());
    return r;
}

RunContext::RunContext(nlohmann::json cfg, fs::path out_dir, fs::path base_dir)
    : cfg_(std::move(cfg)), dir_(std::move(out_dir)), base_(std::move(base_dir)) {
    hash_ = config_hash(cfg_);
    seed_ = static_cast<unsigned>(cfg_.value("seed", 1LL));
}

const nlohmann::json& RunContext::params(const std::string& diagnostic) const {
    static const nlohmann::json empty = nlohmann::json::object();
    auto it = cfg_.find(diagnostic);
    return it == cfg_.end() ? empty : *it;
}

bool RunContext::wants(const std::string& diagnostic) const {
    if (!cfg_.contains("diagnostics")) return true;
    for (const auto& d : cfg_["diagnostics"])
        if (d == diagnostic) return true;
    return false;
}

fs::path RunContext::resolve(const std::string& path) const {
    fs::path p(path);
    return p.is_absolute() ? p : base_ / p;
}

void RunContext::add(CriterionRow row) { rows_.push_back(std::move(row)); }

void RunContext::write_json(const std::string& name, nlohmann::json j) {
    j["config_hash"] = hash_;
    fs::create_directories((dir_ / name).parent_path());
    std::ofstream os(dir_ / name);
    os << j.dump(2) << "\n";
    files_.push_back(name);
}

void RunContext::write_csv(const std::string& name, const std::function<void(const std::string&)>& writer) {
    const fs::path p = dir_ / name;
    fs::create_directories(p.parent_path());
    writer(p.string());
    std::string body = read_file(p);
    std::ofstream os(p, std::ios::binary | std::ios::trunc);
    os << "# config_hash=" << hash_ << "\n" << body;
    files_.push_back(name);
}

void RunContext::save_trajectory(const std::string& name, const Trajectory& traj,
                                 const std::vector<std::string>& dependent, int min_snapshots) {
    Trajectory t = traj;
    t.meta["config_hash"] = hash_;
    for (const auto& f : t.save((dir_ / name).string())) files_.push_back(name + "/" + f);
    trajectories_.push_back({{"dir", name},
                             {"snapshots", t.size()},
                             {"min_snapshots", min_snapshots},
                             {"criteria", dependent}});
}

nlohmann::json normalize_config(nlohmann::json cfg, const fs::path& base_dir) {
    validate_schema(cfg);
    cfg.erase("output");
    if (cfg.contains("model")) {
        nlohmann::json& m = cfg["model"];
        if (m.is_string()) {
            fs::path p(m.get<std::string>());
            if (!p.is_absolute()) p = base_dir / p;
            if (!fs::exists(p)) throw ConfigError("config: model file not found: " + p.string());
            m = load_config(p.string());
        }
        try {
            (void)ModelSpec::from_json(m);
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw ConfigError(std::string("config: invalid model: ") + e.what());
        }
    }
    // Diagnostic tables may name their own model files.
    for (auto& [k, v] : cfg.items()) {
        if (!v.is_object() || !v.contains("model") || !v["model"].is_string() || k == "model") continue;
        fs::path p(v["model"].get<std::string>());
        if (!p.is_absolute()) p = base_dir / p;
        if (!fs::exists(p)) throw ConfigError("config: model file not found: " + p.string());
        v["model"] = load_config(p.string());
    }
    return cfg;
}

RunOutcome run_experiment(nlohmann::json cfg, const fs::path& out_dir, const fs::path& base_dir) {
    nlohmann::json norm = normalize_config(std::move(cfg), base_dir);
    const ScenarioInfo& sc = find_scenario(norm["scenario"]);
    fs::create_directories(out_dir);
    RunContext ctx(norm, out_dir, base_dir);

    RunOutcome out;
    out.dir = out_dir;
    out.status = "complete";
    const auto t0 = std::chrono::steady_clock::now();
    try {
        sc.body(ctx);
    } catch (const NumericalAbort& e) {
        out.exit_code = 3;
        out.status = "aborted";
        out.message = e.what();
        if (e.partial()) ctx.save_trajectory("partial_trajectory", *e.partial(), {}, 1);
    } catch (const std::invalid_argument& e) {
        // Preconditions rejected by the library trace back to config values.
        out.status = "rejected";
        out.message = e.what();
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : ctx.rows()) rows.push_back(r.to_json());
    nlohmann::json verdicts = nlohmann::json::object();
    for (auto [c, ok] : criterion_verdicts(ctx.rows())) verdicts[std::to_string(c)] = ok;

    out.manifest = {{"scenario", sc.name},
                    {"status", out.status},
                    {"message", out.message},
                    {"config", norm},
                    {"config_hash", ctx.hash()},
                    {"seed", ctx.seed()},
                    {"versions", versions()},
                    {"wall_time_s", wall},
                    {"files", ctx.files()},
                    {"trajectories", ctx.trajectories()},
                    {"summary", ctx.summary()},
                    {"criteria", rows},
                    {"verdicts", verdicts}};
    std::ofstream os(out_dir / "manifest.json");
    os << out.manifest.dump(2) << "\n";
    out.rows = ctx.rows();
    if (out.status == "rejected") throw ConfigError("config rejected by scenario '" + sc.name + "': " + out.message);
    return out;
}

std::vector<std::pair<int, bool>> criterion_verdicts(const std::vector<CriterionRow>& rows) {
    std::map<int, bool> v;
    for (const auto& r : rows) {
        if (r.criterion == 0) continue;
        auto it = v.find(r.criterion);
        const bool ok = r.pass && r.status == "ok";
        if (it == v.end()) v[r.criterion] = ok;
        else it->second = it->second && ok;
    }
    return {v.begin(), v.end()};
}

bool Report::all_pass() const {
    return std::all_of(rows.begin(), rows.end(), [](const CriterionRow& r) { return r.pass && r.status == "ok"; });
}

Report load_report(const fs::path& dir) {
    const fs::path mp = dir / "manifest.json";
    if (!fs::exists(mp)) throw std::runtime_error("report: no manifest.json in " + dir.string());
    Report r;
    try {
        r.manifest = nlohmann::json::parse(read_file(mp));
        for (const auto& j : r.manifest.at("criteria")) r.rows.push_back(CriterionRow::from_json(j));
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("report: corrupt manifest " + mp.string() + ": " + e.what());
    }

    for (const auto& f : r.manifest.value("files", nlohmann::json::array()))
        if (!fs::exists(dir / f.get<std::string>())) r.notes.push_back("missing file " + f.get<std::string>());

    for (const auto& t : r.manifest.value("trajectories", nlohmann::json::array())) {
        const std::string name = t.value("dir", std::string());
        const std::size_t want = t.value("snapshots", std::size_t(0));
        const std::size_t need = t.value("min_snapshots", std::size_t(1));
        std::size_t have = 0;
        try {
            have = Trajectory::load((dir / name).string()).size();
        } catch (const std::exception& e) {
            // Count the readable prefix of a damaged trajectory.
            try {
                auto man = nlohmann::json::parse(read_file(dir / name / "manifest.json"));
                for (const auto& s : man.at("snapshots")) {
                    read_snapshot((dir / name / s.get<std::string>()).string());
                    ++have;
                }
            } catch (const std::exception&) {
            }
            r.notes.push_back("trajectory " + name + ": " + e.what());
        }
        if (have >= want && have >= need) continue;
        std::ostringstream detail;
        detail << have << " of " << want << " snapshots readable, " << need << " needed";
        std::set<std::string> dep;
        for (const auto& c : t.value("criteria", nlohmann::json::array())) dep.insert(c.get<std::string>());
        for (auto& row : r.rows) {
            if (!dep.count(row.id)) continue;
            row.status = "insufficient snapshots";
            row.pass = false;
            row.detail = detail.str();
        }
        if (dep.empty()) {
            CriterionRow row;
            row.id = name;
            row.description = "stored trajectory";
            row.status = "insufficient snapshots";
            row.detail = detail.str();
            r.rows.push_back(row);
        }
    }
    if (r.manifest.value("status", std::string()) == "aborted")
        r.notes.push_back("run aborted: " + r.manifest.value("message", std::string()));
    return r;
}

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(4) << std::scientific << v;
    return os.str();
}

std::string bound(const CriterionRow& r) {
    if (r.relation == "within") return fmt(r.target) + " +- " + fmt(r.threshold);
    return r.relation + " " + fmt(r.threshold);
}

} // namespace

std::string format_report(const Report& r) {
    std::ostringstream os;
    const auto& m = r.manifest;
    os << "scenario " << m.value("scenario", std::string("?")) << "  status "
       << m.value("status", std::string("?")) << "  config " << m.value("config_hash", std::string("?"))
       << "  seed " << m.value("seed", 0) << "\n";
    os << std::left << std::setw(34) << "row" << std::setw(4) << "C" << std::setw(13) << "value"
       << std::setw(28) << "bound" << "result\n";
    for (const auto& row : r.rows) {
        std::string result = row.status != "ok" ? row.status : (row.pass ? "PASS" : "FAIL");
        os << std::left << std::setw(34) << row.id << std::setw(4)
           << (row.criterion ? std::to_string(row.criterion) : "-") << std::setw(13)
           << (row.status == "ok" ? fmt(row.value) : "-") << std::setw(28) << bound(row) << result;
        if (!row.detail.empty()) os << "  (" << row.detail << ")";
        os << "\n";
    }
    for (auto [c, ok] : criterion_verdicts(r.rows))
        os << "criterion " << c << ": " << (ok ? "PASS" : "FAIL") << "\n";
    for (const auto& n : r.notes) os << "note: " << n << "\n";
    os << (r.all_pass() ? "all rows pass" : "some rows fail") << "\n";
    return os.str();
}

std::string format_diff(const Report& a, const Report& b) {
    std::ostringstream os;
    os << "config " << a.manifest.value("config_hash", std::string("?")) << " vs "
       << b.manifest.value("config_hash", std::string("?")) << "\n";
    os << std::left << std::setw(34) << "row" << std::setw(13) << "first" << std::setw(13) << "second"
       << std::setw(13) << "delta" << "results\n";
    std::map<std::string, const CriterionRow*> second;
    for (const auto& r : b.rows) second[r.id] = &r;
    auto res = [](const CriterionRow& r) { return r.status != "ok" ? std::string("n/a") : r.pass ? "PASS" : "FAIL"; };
    for (const auto& r : a.rows) {
        auto it = second.find(r.id);
        os << std::left << std::setw(34) << r.id << std::setw(13) << fmt(r.value);
        if (it == second.end()) {
            os << std::setw(13) << "-" << std::setw(13) << "-" << res(r) << "/absent\n";
            continue;
        }
        const CriterionRow& s = *it->second;
        os << std::setw(13) << fmt(s.value) << std::setw(13) << fmt(s.value - r.value) << res(r) << "/"
           << res(s) << "\n";
        second.erase(it);
    }
    for (const auto& [id, s] : second)
        os << std::left << std::setw(34) << id << std::setw(13) << "-" << std::setw(13) << fmt(s->value)
           << std::setw(13) << "-" << "absent/" << res(*s) << "\n";
    return os.str();
}

} // namespace qnls
