#include "qnls/cli.hpp"

#include "qnls/config.hpp"
#include "qnls/experiment.hpp"
#include "qnls/parallel.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <ostream>

namespace fs = std::filesystem;

namespace qnls {

namespace {

struct Common {
    long long seed = -1;
    std::string out;
    int threads = 0;
    std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--seed", c.seed, "override the config seed")->check(CLI::NonNegativeNumber);
    cmd->add_option("--out", c.out, "output directory");
    cmd->add_option("--threads", c.threads, "worker threads (QNLS_THREADS takes precedence)")->check(CLI::PositiveNumber);
    cmd->add_option("--set", c.sets, "override a config key, key=value");
}

std::pair<std::string, std::string> split_assignment(const std::string& s) {
    auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("expected key=value, got '" + s + "'");
    return {s.substr(0, eq), s.substr(eq + 1)};
}

// Splits on commas outside brackets so list values survive.
std::vector<std::string> split_values(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    int depth = 0;
    for (char ch : s) {
        if (ch == '[') ++depth;
        if (ch == ']') --depth;
        if (ch == ',' && depth == 0) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

nlohmann::json prepared_config(const std::string& path, const Common& c) {
    nlohmann::json cfg = load_config(path);
    for (const auto& s : c.sets) {
        auto [k, v] = split_assignment(s);
        apply_override(cfg, k, v);
    }
    if (c.seed >= 0) cfg["seed"] = c.seed;
    return cfg;
}

fs::path output_dir(const nlohmann::json& cfg, const Common& c) {
    if (!c.out.empty()) return c.out;
    if (cfg.contains("output") && cfg["output"].is_string()) return cfg["output"].get<std::string>();
    return fs::path("runs") / (cfg.value("scenario", std::string("run")) + "-" + config_hash(cfg));
}

fs::path base_of(const std::string& config_path) {
    fs::path b = fs::path(config_path).parent_path();
    return b.empty() ? fs::path(".") : b;
}

std::string safe_name(std::string s) {
    for (char& ch : s)
        if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '.' && ch != '-' && ch != '_') ch = '_';
    return s;
}

} // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Quasilinear Schrodinger numerics: experiment runner"};
    app.require_subcommand(1);

    Common run_opts, sweep_opts;
    std::string run_cfg, sweep_cfg, report_dir, diff_dir;
    std::vector<std::string> vary;

    auto* run = app.add_subcommand("run", "run one scenario config");
    run->add_option("config", run_cfg, "TOML or JSON scenario file")->required();
    add_common(run, run_opts);

    auto* report = app.add_subcommand("report", "summarize a run directory");
    report->add_option("dir", report_dir, "run directory")->required();
    report->add_option("--diff", diff_dir, "second run directory to compare against");

    auto* sweep = app.add_subcommand("sweep", "run a config once per parameter value");
    sweep->add_option("config", sweep_cfg, "TOML or JSON scenario file")->required();
    sweep->add_option("--vary", vary, "key=v1,v2,... (repeat for a product sweep)")->required();
    add_common(sweep, sweep_opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*run) {
            if (run_opts.threads > 0) set_thread_count(run_opts.threads);
            nlohmann::json cfg = prepared_config(run_cfg, run_opts);
            const fs::path dir = output_dir(cfg, run_opts);
            RunOutcome r = run_experiment(cfg, dir, base_of(run_cfg));
            out << format_report(load_report(dir));
            out << "wrote " << (dir / "manifest.json").string() << "\n";
            if (r.exit_code == 3) err << "numerical abort: " << r.message << "\n";
            return r.exit_code;
        }
        if (*report) {
            Report a = load_report(report_dir);
            if (diff_dir.empty()) {
                out << format_report(a);
                return a.all_pass() ? 0 : 1;
            }
            out << format_diff(a, load_report(diff_dir));
            return 0;
        }
        if (*sweep) {
            if (sweep_opts.threads > 0) set_thread_count(sweep_opts.threads);
            nlohmann::json base = prepared_config(sweep_cfg, sweep_opts);
            std::vector<std::pair<std::string, std::vector<std::string>>> axes;
            for (const auto& v : vary) {
                auto [k, vals] = split_assignment(v);
                axes.push_back({k, split_values(vals)});
            }
            const fs::path root = sweep_opts.out.empty() ? output_dir(base, sweep_opts) : fs::path(sweep_opts.out);
            std::vector<std::size_t> idx(axes.size(), 0);
            int worst = 0;
            for (;;) {
                nlohmann::json cfg = base;
                std::string name;
                for (std::size_t a = 0; a < axes.size(); ++a) {
                    apply_override(cfg, axes[a].first, axes[a].second[idx[a]]);
                    name += (name.empty() ? "" : "_") + safe_name(axes[a].first + "=" + axes[a].second[idx[a]]);
                }
                // Each point is an independent run with its own directory.
                const fs::path dir = root / name;
                RunOutcome r = run_experiment(cfg, dir, base_of(sweep_cfg));
                out << "== " << name << " (exit " << r.exit_code << ")\n" << format_report(load_report(dir));
                worst = std::max(worst, r.exit_code);
                std::size_t a = 0;
                for (; a < axes.size(); ++a) {
                    if (++idx[a] < axes[a].second.size()) break;
                    idx[a] = 0;
                }
                if (a == axes.size()) break;
            }
            return worst;
        }
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::runtime_error& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

} // namespace qnls
