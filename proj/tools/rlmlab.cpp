#include "rlm/harness/config.hpp"
#include "rlm/harness/experiments.hpp"
#include "rlm/harness/manifest.hpp"
#include "rlm/verify.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    int threads = 1;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "config file (key-value or JSON)")->required();
    const char* env_out = std::getenv("RLMLAB_OUT");
    opts.out_dir = env_out ? env_out : "out";
    cmd->add_option("--out", opts.out_dir, "output directory");
    cmd->add_option("--seed", opts.seed, "seed override");
    cmd->add_option("--threads", opts.threads, "parallel workers (speed only, never results)");
}

int run_verify(const CommonOpts& opts) {
    const nlohmann::json config = rlm::harness::load_config(opts.config_path);
    rlm::SuiteConfig suite_cfg = rlm::harness::suite_config_from(config);
    if (opts.seed) suite_cfg.seed = *opts.seed;

    rlm::harness::RunManifest manifest;
    manifest.subcommand = "verify";
    manifest.started_at = rlm::harness::utc_timestamp();
    manifest.seed = suite_cfg.seed;
    manifest.config_hash = rlm::harness::config_fingerprint(config, suite_cfg.seed);

    const rlm::SuiteReport report = rlm::run_suite(suite_cfg);
    std::cout << rlm::suite_report_text(report);

    std::filesystem::create_directories(opts.out_dir);
    const std::string report_path = opts.out_dir + "/verify_report.json";
    {
        std::ofstream out(report_path);
        out << rlm::suite_report_json(report).dump(2) << '\n';
    }
    manifest.outputs = {report_path};
    manifest.finished_at = rlm::harness::utc_timestamp();
    rlm::harness::write_manifest_atomic(manifest, opts.out_dir + "/manifest.json");
    return report.all_passed() ? 0 : 1;
}

int run_rlm_cmd(const CommonOpts& opts) {
    const nlohmann::json config = rlm::harness::load_config(opts.config_path);
    const auto outcome = rlm::harness::run_rlm(config, opts.out_dir, opts.seed);
    std::cout << "wrote " << outcome.metrics_path << " (" << outcome.metrics.size()
              << " rows incl. epoch 0)\n";
    return 0;
}

int run_sweep_cmd(const CommonOpts& opts) {
    const nlohmann::json config = rlm::harness::load_config(opts.config_path);
    const auto results = rlm::harness::run_sweep(config, opts.out_dir, opts.threads, opts.seed);
    std::cout << "swept " << results.size() << " cells -> " << opts.out_dir << "/summary.csv\n";
    return 0;
}

int run_game_cmd(const CommonOpts& opts) {
    const nlohmann::json config = rlm::harness::load_config(opts.config_path);
    const auto outcome = rlm::harness::run_game(config, opts.out_dir, opts.seed);
    std::cout << "wrote " << outcome.csv_path << " (" << outcome.cases.size() << " cases)\n";
    return 0;
}

int run_frontier_cmd(const CommonOpts& opts) {
    const nlohmann::json config = rlm::harness::load_config(opts.config_path);
    const auto outcome = rlm::harness::run_frontier(config, opts.out_dir, opts.seed);
    std::cout << "wrote " << outcome.csv_path << " (" << outcome.points.size() << " points)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"bi-objective analysis and reward-dropout training for tabular sequence policies"};
    app.require_subcommand(1);

    CommonOpts verify_opts, rlm_opts, sweep_opts, game_opts, frontier_opts;
    add_common(app.add_subcommand("verify", "run the numerical property suite"), verify_opts);
    add_common(app.add_subcommand("rlm", "train a target policy against a behavior policy"), rlm_opts);
    add_common(app.add_subcommand("sweep", "grid over dropout kind, rate, decoding, seeds"), sweep_opts);
    add_common(app.add_subcommand("game", "run the 10-turn positioning game"), game_opts);
    add_common(app.add_subcommand("frontier", "trace objective-space points of tilted policies"), frontier_opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (app.got_subcommand("verify")) return run_verify(verify_opts);
        if (app.got_subcommand("rlm")) return run_rlm_cmd(rlm_opts);
        if (app.got_subcommand("sweep")) return run_sweep_cmd(sweep_opts);
        if (app.got_subcommand("game")) return run_game_cmd(game_opts);
        if (app.got_subcommand("frontier")) return run_frontier_cmd(frontier_opts);
    } catch (const rlm::harness::ConfigError& err) {
        std::cerr << "config error: " << err.what() << '\n';
        return 2;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << '\n';
        return 1;
    }
    return 2;
}
