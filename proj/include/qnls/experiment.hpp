#pragma once

#include "qnls/trajectory.hpp"

#include <json.hpp>

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace qnls {

// One checked quantity. `criterion` groups rows under a numbered acceptance
// criterion; 0 means the row is informational.
struct CriterionRow {
    std::string id;
    int criterion = 0;
    std::string description;
    double value = 0.0;
    std::string relation = "<="; // "<=", ">=" or "within" (|value − target| ≤ threshold)
    double threshold = 0.0;
    double target = 0.0;
    bool pass = false;
    std::string status = "ok"; // "ok", "insufficient snapshots", "not run"
    std::string detail;

    static CriterionRow at_most(std::string id, int criterion, std::string description, double value,
                                double threshold);
    static CriterionRow at_least(std::string id, int criterion, std::string description, double value,
                                 double threshold);
    static CriterionRow within(std::string id, int criterion, std::string description, double value,
                               double target, double tol);

    nlohmann::json to_json() const;
    static CriterionRow from_json(const nlohmann::json& j);
};

// Per-run state handed to scenario bodies. Every artifact goes through it so the
// manifest lists each file and each file carries the config hash.
class RunContext {
public:
    RunContext(nlohmann::json cfg, std::filesystem::path out_dir, std::filesystem::path base_dir);

    const nlohmann::json& config() const { return cfg_; }
    const std::string& hash() const { return hash_; }
    unsigned seed() const { return seed_; }
    const std::filesystem::path& dir() const { return dir_; }

    // Parameter table of a diagnostic; an empty object when absent.
    const nlohmann::json& params(const std::string& diagnostic) const;
    bool wants(const std::string& diagnostic) const;
    // Resolves a path from the config against the config file's directory.
    std::filesystem::path resolve(const std::string& path) const;

    void add(CriterionRow row);
    const std::vector<CriterionRow>& rows() const { return rows_; }

    void write_json(const std::string& name, nlohmann::json j);
    // `writer` produces the CSV at the given path; a hash comment line is prepended.
    void write_csv(const std::string& name, const std::function<void(const std::string&)>& writer);
    // Rows named in `dependent` are reported as insufficient if fewer than
    // `min_snapshots` snapshots survive on disk.
    void save_trajectory(const std::string& name, const Trajectory& traj,
                         const std::vector<std::string>& dependent, int min_snapshots);

    void note(const std::string& key, nlohmann::json value) { summary_[key] = std::move(value); }

    const std::vector<std::string>& files() const { return files_; }
    const nlohmann::json& trajectories() const { return trajectories_; }
    const nlohmann::json& summary() const { return summary_; }

private:
    nlohmann::json cfg_;
    std::filesystem::path dir_, base_;
    std::string hash_;
    unsigned seed_ = 0;
    std::vector<std::string> files_;
    std::vector<CriterionRow> rows_;
    nlohmann::json trajectories_ = nlohmann::json::array();
    nlohmann::json summary_ = nlohmann::json::object();
};

using ScenarioBody = std::function<void(RunContext&)>;

struct ScenarioInfo {
    std::string name;
    std::vector<std::string> diagnostics; // all known; run when listed or when the list is absent
    ScenarioBody body;
};

const std::vector<ScenarioInfo>& scenario_catalog();

struct RunOutcome {
    int exit_code = 0; // 0 success, 3 numerical abort
    std::string status; // "complete" or "aborted"
    std::string message;
    std::vector<CriterionRow> rows;
    std::filesystem::path dir;
    nlohmann::json manifest;
};

// Checks the schema, resolves the model file, runs the scenario and writes
// manifest.json. Schema problems throw ConfigError before anything is written.
RunOutcome run_experiment(nlohmann::json cfg, const std::filesystem::path& out_dir,
                          const std::filesystem::path& base_dir = ".");

// The config as stored in the manifest: model file contents inlined, output removed.
nlohmann::json normalize_config(nlohmann::json cfg, const std::filesystem::path& base_dir);

struct Report {
    nlohmann::json manifest;
    std::vector<CriterionRow> rows;
    std::vector<std::string> notes;
    bool all_pass() const;
};

// Reads a run directory and re-checks the stored trajectories; rows that depend on
// missing or truncated snapshots are downgraded. Throws std::runtime_error on a
// missing or corrupt manifest.
Report load_report(const std::filesystem::path& dir);
std::string format_report(const Report& r);
std::string format_diff(const Report& a, const Report& b);

// Pass/fail per numbered criterion; a criterion passes when all of its rows pass.
std::vector<std::pair<int, bool>> criterion_verdicts(const std::vector<CriterionRow>& rows);

} // namespace qnls
