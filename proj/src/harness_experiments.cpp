#include "rlm/harness/experiments.hpp"

#include "rlm/harness/csv.hpp"
#include "rlm/harness/manifest.hpp"
#include "rlm/objectives.hpp"

#include <algorithm>
#include <filesystem>
#include <future>
#include <sstream>

namespace rlm::harness {

namespace {

namespace fs = std::filesystem;

const nlohmann::json kEmpty = nlohmann::json::object();

const nlohmann::json& section(const nlohmann::json& config, const char* name) {
    if (config.contains(name) && config.at(name).is_object()) return config.at(name);
    return kEmpty;
}

template <typename T>
T value_or(const nlohmann::json& node, const char* key, T fallback) {
    if (!node.contains(key)) return fallback;
    try {
        return node.at(key).get<T>();
    } catch (const nlohmann::json::exception& err) {
        throw ConfigError(std::string("bad value for '") + key + "': " + err.what());
    }
}

std::string gamma_label(const DropoutConfig& dropout) {
    if (dropout.kind == DropoutConfig::Kind::none) return "-";
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.2f", dropout.gamma);
    return buf;
}

std::string ensure_out_dir(const std::string& out_dir) {
    fs::create_directories(out_dir);
    return out_dir;
}

}  // namespace

Corpus make_attribute_corpus(const SyntheticCorpusSpec& spec) {
    if (spec.vocab < 2 || spec.markers < 1 || spec.markers >= spec.vocab)
        throw ConfigError("corpus: need 1 <= markers < vocab and vocab >= 2");
    if (spec.sequences < 2) throw ConfigError("corpus: need at least 2 sequences");
    Corpus corpus;
    corpus.sequences.reserve(static_cast<std::size_t>(spec.sequences));
    corpus.labels.reserve(static_cast<std::size_t>(spec.sequences));
    RngStream root(spec.seed, 0xc0);
    const int plain = spec.vocab - spec.markers;
    for (int i = 0; i < spec.sequences; ++i) {
        const int label = i % 2;
        const Scalar marker_p = label == 1 ? spec.p_marker_pos : spec.p_marker_neg;
        RngStream rng = root.split(static_cast<std::uint64_t>(i));
        std::vector<TokenId> seq(static_cast<std::size_t>(spec.length));
        for (auto& tok : seq) {
            if (rng.next_double() < marker_p)
                tok = static_cast<TokenId>(plain + rng.next_below(static_cast<std::uint64_t>(spec.markers)));
            else
                tok = static_cast<TokenId>(rng.next_below(static_cast<std::uint64_t>(plain)));
        }
        corpus.sequences.push_back(std::move(seq));
        corpus.labels.push_back(label);
    }
    return corpus;
}

SyntheticCorpusSpec corpus_spec_from(const nlohmann::json& config) {
    const auto& node = section(config, "corpus");
    SyntheticCorpusSpec spec;
    spec.vocab = value_or(node, "vocab", spec.vocab);
    spec.sequences = value_or(node, "sequences", spec.sequences);
    spec.length = value_or(node, "length", spec.length);
    spec.markers = value_or(node, "markers", spec.markers);
    spec.p_marker_pos = value_or(node, "p_marker_pos", spec.p_marker_pos);
    spec.p_marker_neg = value_or(node, "p_marker_neg", spec.p_marker_neg);
    spec.seed = value_or<std::uint64_t>(node, "seed", spec.seed);
    return spec;
}

RlmSetup build_rlm_setup(const nlohmann::json& config, int prefix_len) {
    const SyntheticCorpusSpec spec = corpus_spec_from(config);
    Corpus corpus = make_attribute_corpus(spec);
    const ActionSpace space(spec.vocab);

    const auto& behavior_node = section(config, "behavior");
    const int order = value_or(behavior_node, "order", 1);
    const Scalar smoothing = value_or(behavior_node, "smoothing", 0.5);
    AutoregressivePolicy behavior = fit_ngram(corpus, space, order, smoothing);

    const auto& reward_node = section(config, "reward_model");
    const int target_label = value_or(reward_node, "target_label", 1);
    const int steps = value_or(reward_node, "steps", 300);
    const Scalar rate = value_or(reward_node, "rate", 2.0);
    LogisticRewardModel model = LogisticRewardModel::fit(corpus, space, target_label, steps, rate);

    std::vector<std::vector<TokenId>> pool;
    pool.reserve(corpus.sequences.size());
    for (const auto& seq : corpus.sequences) {
        if (static_cast<int>(seq.size()) < prefix_len) continue;
        pool.emplace_back(seq.begin(), seq.begin() + prefix_len);
    }
    if (pool.empty()) throw ConfigError("prefix pool is empty; corpus sequences are too short");

    return RlmSetup{spec, std::move(corpus), std::move(behavior), std::move(model), std::move(pool)};
}

TrainConfig train_config_from(const nlohmann::json& config) {
    const auto& node = section(config, "train");
    TrainConfig cfg;
    cfg.learning_rate = value_or(node, "learning_rate", cfg.learning_rate);
    cfg.epochs = value_or(node, "epochs", cfg.epochs);
    cfg.batch_size = value_or(node, "batch_size", cfg.batch_size);
    cfg.prefix_len = value_or(node, "prefix_len", cfg.prefix_len);
    cfg.total_len = value_or(node, "total_len", cfg.total_len);
    cfg.decoding = decoding_from_name(value_or<std::string>(node, "decoding", "stochastic"),
                                      value_or(node, "topk", 10),
                                      value_or(node, "temperature", 1.0));
    cfg.dropout.kind = dropout_kind_from_name(value_or<std::string>(node, "dropout", "none"));
    cfg.dropout.gamma = value_or(node, "gamma", 0.0);
    if (cfg.dropout.kind == DropoutConfig::Kind::none) cfg.dropout.gamma = 0;
    cfg.init = init_scheme_from_name(value_or<std::string>(node, "init", "behavior"));
    cfg.entropy_bonus = value_or(node, "entropy_bonus", 0.0);
    cfg.gradient_form = gradient_form_from_name(value_or<std::string>(node, "gradient_form", "score"));
    cfg.seed = value_or<std::uint64_t>(node, "seed", 0);
    cfg.eval_batch = value_or(node, "eval_batch", 0);
    cfg.exact_metrics = value_or(node, "exact_metrics", false);
    cfg.prefix_pool_limit = value_or(node, "prefix_pool_limit", 0);
    return cfg;
}

SuiteConfig suite_config_from(const nlohmann::json& config) {
    const auto& node = section(config, "verify");
    SuiteConfig cfg;
    cfg.seed = value_or<std::uint64_t>(node, "seed", cfg.seed);
    cfg.max_vocab = value_or(node, "max_vocab", cfg.max_vocab);
    cfg.max_suffix_len = value_or(node, "max_suffix_len", cfg.max_suffix_len);
    cfg.rubo_instances = value_or(node, "rubo_instances", cfg.rubo_instances);
    cfg.z1_instances = value_or(node, "z1_instances", cfg.z1_instances);
    cfg.decomposition_instances = value_or(node, "decomposition_instances", cfg.decomposition_instances);
    cfg.optimality_instances = value_or(node, "optimality_instances", cfg.optimality_instances);
    cfg.improvement_instances = value_or(node, "improvement_instances", cfg.improvement_instances);
    cfg.entropy_scaling_instances =
        value_or(node, "entropy_scaling_instances", cfg.entropy_scaling_instances);
    cfg.tilt_instances = value_or(node, "tilt_instances", cfg.tilt_instances);
    cfg.tilt_perturbations = value_or(node, "tilt_perturbations", cfg.tilt_perturbations);
    cfg.dropout_instances = value_or(node, "dropout_instances", cfg.dropout_instances);
    cfg.mutate_dropout_drop_max = value_or(node, "negative_control", false);
    return cfg;
}

void write_metrics_csv(const std::string& path, const std::vector<EpochMetrics>& metrics,
                       const TrainConfig& config) {
    CsvWriter csv(path);
    csv.row({"epoch", "avg_reward", "avg_log_beta", "objective_sum", "entropy", "survivors",
             "dropout_kind", "gamma", "decoding", "seed"});
    for (const auto& m : metrics) {
        csv.row({std::to_string(m.epoch), format_scalar(m.avg_reward),
                 format_scalar(m.avg_log_beta), format_scalar(m.objective_sum),
                 format_scalar(m.entropy_estimate), std::to_string(m.survivors),
                 config.dropout.name(), gamma_label(config.dropout), config.decoding.name(),
                 std::to_string(config.seed)});
    }
}

Scalar nondecreasing_fraction(const std::vector<EpochMetrics>& metrics) {
    if (metrics.size() < 2) return Scalar(1);
    Index ok = 0;
    for (std::size_t i = 1; i < metrics.size(); ++i)
        if (metrics[i].objective_sum >= metrics[i - 1].objective_sum - Scalar(1e-12)) ++ok;
    return static_cast<Scalar>(ok) / static_cast<Scalar>(metrics.size() - 1);
}

RlmRunOutcome run_rlm(const nlohmann::json& config, const std::string& out_dir,
                      std::optional<std::uint64_t> seed_override) {
    RunManifest manifest;
    manifest.subcommand = "rlm";
    manifest.started_at = utc_timestamp();

    TrainConfig train_cfg = train_config_from(config);
    if (seed_override) train_cfg.seed = *seed_override;
    manifest.seed = train_cfg.seed;
    manifest.config_hash = config_fingerprint(config, train_cfg.seed);

    const RlmSetup setup = build_rlm_setup(config, train_cfg.prefix_len);
    const TrainResult result =
        train(setup.behavior, make_reward(setup.reward_model), setup.prefix_pool, train_cfg);

    const std::string dir = ensure_out_dir(out_dir);
    RlmRunOutcome outcome;
    outcome.metrics = result.metrics;
    outcome.metrics_path = dir + "/metrics.csv";
    outcome.behavior_policy_path = dir + "/behavior_policy.json";
    outcome.target_policy_path = dir + "/target_policy.json";
    write_metrics_csv(outcome.metrics_path, result.metrics, train_cfg);
    save_policy(setup.behavior, outcome.behavior_policy_path);
    save_policy(result.policy, outcome.target_policy_path);

    manifest.outputs = {outcome.metrics_path, outcome.behavior_policy_path,
                        outcome.target_policy_path};
    manifest.finished_at = utc_timestamp();
    write_manifest_atomic(manifest, dir + "/manifest.json");
    return outcome;
}

SweepSpec sweep_spec_from(const nlohmann::json& config) {
    const auto& node = section(config, "sweep");
    SweepSpec spec;
    if (node.contains("kinds")) {
        spec.kinds.clear();
        for (const auto& name : node.at("kinds"))
            spec.kinds.push_back(dropout_kind_from_name(name.get<std::string>()));
    }
    if (node.contains("gammas")) spec.gammas = node.at("gammas").get<std::vector<Scalar>>();
    if (node.contains("decodings"))
        spec.decodings = node.at("decodings").get<std::vector<std::string>>();
    if (node.contains("seeds")) spec.seeds = node.at("seeds").get<std::vector<std::uint64_t>>();
    if (spec.gammas.empty() || spec.decodings.empty() || spec.seeds.empty())
        throw ConfigError("sweep: kinds, gammas, decodings, seeds must be nonempty");
    return spec;
}

std::vector<SweepCellResult> run_sweep(const nlohmann::json& config, const std::string& out_dir,
                                       int threads, std::optional<std::uint64_t> seed_override) {
    RunManifest manifest;
    manifest.subcommand = "sweep";
    manifest.started_at = utc_timestamp();
    manifest.seed = seed_override.value_or(0);
    manifest.config_hash = config_fingerprint(config, manifest.seed);

    const SweepSpec spec = sweep_spec_from(config);
    const TrainConfig base_cfg = train_config_from(config);
    const RlmSetup setup = build_rlm_setup(config, base_cfg.prefix_len);
    const std::string dir = ensure_out_dir(out_dir);

    std::vector<DropoutConfig> dropouts;
    for (const auto kind : spec.kinds) {
        if (kind == DropoutConfig::Kind::none) {
            dropouts.push_back({DropoutConfig::Kind::none, 0});
        } else {
            for (const Scalar gamma : spec.gammas) dropouts.push_back({kind, gamma});
        }
    }

    struct Cell {
        TrainConfig cfg;
        std::string decoding;
        std::string path;
    };
    std::vector<Cell> cells;
    for (const auto& dropout : dropouts) {
        for (const auto& decoding : spec.decodings) {
            for (const auto seed : spec.seeds) {
                TrainConfig cfg = base_cfg;
                cfg.dropout = dropout;
                cfg.decoding = decoding_from_name(decoding, base_cfg.decoding.k,
                                                  base_cfg.decoding.temperature);
                cfg.seed = seed;
                std::ostringstream name;
                name << "metrics_" << dropout.name() << '_' << gamma_label(dropout) << '_'
                     << decoding << "_seed" << seed << ".csv";
                cells.push_back({cfg, decoding, dir + "/" + name.str()});
            }
        }
    }

    std::vector<SweepCellResult> results(cells.size());
    auto run_cell = [&](std::size_t i) {
        const Cell& cell = cells[i];
        const TrainResult trained = train(setup.behavior, make_reward(setup.reward_model),
                                          setup.prefix_pool, cell.cfg);
        write_metrics_csv(cell.path, trained.metrics, cell.cfg);
        const EpochMetrics& last = trained.metrics.back();
        results[i] = SweepCellResult{cell.cfg.dropout,   cell.decoding,
                                     cell.cfg.seed,      last.avg_reward,
                                     last.avg_log_beta,  last.objective_sum,
                                     last.entropy_estimate, nondecreasing_fraction(trained.metrics),
                                     cell.path};
    };

    const int workers = std::max(1, threads);
    for (std::size_t begin = 0; begin < cells.size(); begin += static_cast<std::size_t>(workers)) {
        std::vector<std::future<void>> running;
        const std::size_t end = std::min(cells.size(), begin + static_cast<std::size_t>(workers));
        for (std::size_t i = begin; i < end; ++i)
            running.push_back(std::async(std::launch::async, run_cell, i));
        for (auto& f : running) f.get();
    }

    const std::string summary_path = dir + "/summary.csv";
    CsvWriter csv(summary_path);
    csv.row({"dropout_kind", "gamma", "decoding", "seed", "final_avg_reward", "final_avg_log_beta",
             "final_objective_sum", "final_entropy", "nondecreasing_fraction"});
    for (const auto& r : results) {
        csv.row({r.dropout.name(), gamma_label(r.dropout), r.decoding, std::to_string(r.seed),
                 format_scalar(r.final_avg_reward), format_scalar(r.final_avg_log_beta),
                 format_scalar(r.final_objective_sum), format_scalar(r.final_entropy),
                 format_scalar(r.nondecreasing)});
    }

    manifest.outputs.push_back(summary_path);
    for (const auto& cell : cells) manifest.outputs.push_back(cell.path);
    manifest.finished_at = utc_timestamp();
    write_manifest_atomic(manifest, dir + "/manifest.json");
    return results;
}

std::vector<GameCase> game_cases_from(const nlohmann::json& config, std::uint64_t default_seed) {
    const auto& node = section(config, "game");
    const std::uint64_t seed = value_or<std::uint64_t>(node, "seed", default_seed);
    const std::string preset = value_or<std::string>(node, "preset", "");

    std::vector<GameCase> cases;
    if (preset == "cases-fig3") {
        cases = preset_cases_fig3(seed);
    } else if (preset == "fig4") {
        cases = preset_fig4(seed);
    } else if (!preset.empty()) {
        throw ConfigError("unknown game preset: " + preset);
    } else if (node.contains("cases")) {
        for (const auto& entry : node.at("cases")) {
            GameCase c;
            c.name = value_or<std::string>(entry, "name", "case" + std::to_string(cases.size()));
            c.config.mu = value_or(entry, "mu", c.config.mu);
            c.config.sigma = value_or(entry, "sigma", c.config.sigma);
            c.config.support_lo = value_or(entry, "support_lo", c.config.support_lo);
            c.config.support_hi = value_or(entry, "support_hi", c.config.support_hi);
            c.config.entropy_bonus = value_or(entry, "entropy_bonus", c.config.entropy_bonus);
            c.config.seed = value_or<std::uint64_t>(entry, "seed", seed);
            c.config.target_init_noise = value_or(entry, "target_init_noise", c.config.target_init_noise);
            const std::string profile = value_or<std::string>(entry, "profile", "exponential_zone");
            if (profile == "exponential_zone")
                c.config.profile = RewardProfile::exponential_zone(c.config.n_positions);
            else if (profile == "beta")
                c.config.profile = RewardProfile::beta_shape(value_or(entry, "alpha", 2.0),
                                                             value_or(entry, "beta", 2.0),
                                                             c.config.n_positions);
            else
                throw ConfigError("unknown reward profile: " + profile);
            c.train.learning_rate = value_or(entry, "learning_rate", c.train.learning_rate);
            c.train.epochs = value_or(entry, "epochs", c.train.epochs);
            cases.push_back(std::move(c));
        }
    }
    // shared overrides
    for (auto& c : cases) {
        c.config.n_trajectories = value_or(node, "n_trajectories", c.config.n_trajectories);
        c.config.n_turns = value_or(node, "n_turns", c.config.n_turns);
        c.train.learning_rate = value_or(node, "learning_rate", c.train.learning_rate);
        c.train.epochs = value_or(node, "epochs", c.train.epochs);
    }
    return cases;
}

GameRunOutcome run_game(const nlohmann::json& config, const std::string& out_dir,
                        std::optional<std::uint64_t> seed_override) {
    RunManifest manifest;
    manifest.subcommand = "game";
    manifest.started_at = utc_timestamp();
    manifest.seed = seed_override.value_or(
        value_or<std::uint64_t>(section(config, "game"), "seed", 0));
    manifest.config_hash = config_fingerprint(config, manifest.seed);

    std::vector<GameCase> cases = game_cases_from(config, manifest.seed);
    if (seed_override)
        for (auto& c : cases) c.config.seed = *seed_override;

    GameRunOutcome outcome;
    const std::string dir = ensure_out_dir(out_dir);
    outcome.csv_path = dir + "/game.csv";
    CsvWriter csv(outcome.csv_path);
    csv.row({"case", "position", "behavior_freq", "target_freq", "reward", "r_tilde"});
    for (const auto& game_case : cases) {
        GameCaseResult result = run_game_case(game_case);
        for (int i = 0; i < result.behavior_freq.size(); ++i) {
            csv.row({result.name, std::to_string(i + 1), format_scalar(result.behavior_freq[i]),
                     format_scalar(result.target_freq[i]), format_scalar(result.profile[i]),
                     format_scalar(result.r_tilde)});
        }
        outcome.cases.push_back(std::move(result));
    }

    manifest.outputs = {outcome.csv_path};
    manifest.finished_at = utc_timestamp();
    write_manifest_atomic(manifest, dir + "/manifest.json");
    return outcome;
}

FrontierOutcome run_frontier(const nlohmann::json& config, const std::string& out_dir,
                             std::optional<std::uint64_t> seed_override) {
    RunManifest manifest;
    manifest.subcommand = "frontier";
    manifest.started_at = utc_timestamp();
    manifest.seed = seed_override.value_or(0);
    manifest.config_hash = config_fingerprint(config, manifest.seed);

    const auto& node = section(config, "frontier");
    const int total_len = value_or(node, "total_len", 6);
    std::vector<TokenId> prefix{0};
    if (node.contains("prefix")) prefix = node.at("prefix").get<std::vector<TokenId>>();
    std::vector<Scalar> scales{0, 0.25, 0.5, 0.75, 1.0};
    if (node.contains("tilt_scales")) scales = node.at("tilt_scales").get<std::vector<Scalar>>();

    const RlmSetup setup = build_rlm_setup(config, static_cast<int>(prefix.size()));
    const RewardFn reward = make_reward(setup.reward_model);
    const Vector beta_table = trajectory_table(setup.behavior, total_len, prefix);
    const Vector reward_values =
        reward_table(reward, setup.behavior.space(), total_len, prefix);

    FrontierOutcome outcome;
    for (const Scalar scale : scales) {
        const TiltedTable tilt = tilt_table(beta_table, (scale * reward_values.array()).matrix());
        FrontierPoint pt;
        pt.scale = scale;
        pt.source = "tilt";
        pt.point = point_of(tilt.probs, beta_table, reward_values);
        pt.ln_partition = tilt.log_partition();
        outcome.points.push_back(pt);
    }
    if (node.contains("policies")) {
        for (const auto& path : node.at("policies").get<std::vector<std::string>>()) {
            const AutoregressivePolicy policy = load_policy(path);
            FrontierPoint pt;
            pt.scale = 1;
            pt.source = path;
            pt.point = point_of(trajectory_table(policy, total_len, prefix), beta_table,
                                reward_values);
            pt.ln_partition = 0;
            outcome.points.push_back(pt);
        }
    }

    std::vector<ObjectivePoint> coords;
    coords.reserve(outcome.points.size());
    for (const auto& pt : outcome.points) coords.push_back(pt.point);
    const std::vector<bool> keep = mark_non_dominated(coords);
    for (std::size_t i = 0; i < keep.size(); ++i) outcome.points[i].non_dominated = keep[i];

    const std::string dir = ensure_out_dir(out_dir);
    outcome.csv_path = dir + "/frontier.csv";
    CsvWriter csv(outcome.csv_path);
    csv.row({"scale", "source", "e_log_beta", "e_reward", "entropy", "ln_partition",
             "non_dominated"});
    for (const auto& pt : outcome.points) {
        csv.row({format_scalar(pt.scale), pt.source, format_scalar(pt.point.e_log_beta),
                 format_scalar(pt.point.e_reward), format_scalar(pt.point.entropy),
                 format_scalar(pt.ln_partition), pt.non_dominated ? "1" : "0"});
    }

    manifest.outputs = {outcome.csv_path};
    manifest.finished_at = utc_timestamp();
    write_manifest_atomic(manifest, dir + "/manifest.json");
    return outcome;
}

}  // namespace rlm::harness
