#pragma once

#include "rlm/harness/config.hpp"
#include "rlm/posgame.hpp"
#include "rlm/trainer.hpp"
#include "rlm/verify.hpp"

#include <optional>
#include <string>
#include <vector>

namespace rlm::harness {

// Attribute-marked synthetic corpus: the top `markers` token ids carry the
// attribute; positive-label sequences draw them with probability
// p_marker_pos per position, negative-label ones with p_marker_neg.
struct SyntheticCorpusSpec {
    int vocab = 16;
    int sequences = 200;
    int length = 10;
    int markers = 4;
    Scalar p_marker_pos = 0.6;
    Scalar p_marker_neg = 0.1;
    std::uint64_t seed = 11;
};

Corpus make_attribute_corpus(const SyntheticCorpusSpec& spec);
SyntheticCorpusSpec corpus_spec_from(const nlohmann::json& config);

// Everything a training run shares read-only: corpus, fitted behavior policy,
// reward model, prefix pool.
struct RlmSetup {
    SyntheticCorpusSpec corpus_spec;
    Corpus corpus;
    AutoregressivePolicy behavior;
    LogisticRewardModel reward_model;
    std::vector<std::vector<TokenId>> prefix_pool;
};

RlmSetup build_rlm_setup(const nlohmann::json& config, int prefix_len);
TrainConfig train_config_from(const nlohmann::json& config);
SuiteConfig suite_config_from(const nlohmann::json& config);

void write_metrics_csv(const std::string& path, const std::vector<EpochMetrics>& metrics,
                       const TrainConfig& config);

// Fraction of epoch transitions with non-decreasing objective_sum (1e-12 float
// tolerance); 1.0 for runs with fewer than two rows.
Scalar nondecreasing_fraction(const std::vector<EpochMetrics>& metrics);

struct RlmRunOutcome {
    std::vector<EpochMetrics> metrics;
    std::string metrics_path;
    std::string behavior_policy_path;
    std::string target_policy_path;
};

RlmRunOutcome run_rlm(const nlohmann::json& config, const std::string& out_dir,
                      std::optional<std::uint64_t> seed_override);

struct SweepSpec {
    std::vector<DropoutConfig::Kind> kinds{DropoutConfig::Kind::none, DropoutConfig::Kind::random,
                                           DropoutConfig::Kind::quantile};
    std::vector<Scalar> gammas{0.80, 0.90, 0.95};
    std::vector<std::string> decodings{"greedy", "stochastic", "topk"};
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
};

SweepSpec sweep_spec_from(const nlohmann::json& config);

struct SweepCellResult {
    DropoutConfig dropout;
    std::string decoding;
    std::uint64_t seed = 0;
    Scalar final_avg_reward = 0;
    Scalar final_avg_log_beta = 0;
    Scalar final_objective_sum = 0;
    Scalar final_entropy = 0;
    Scalar nondecreasing = 0;
    std::string metrics_path;
};

// One cell per (dropout-kind/gamma pair, decoding, seed); "none" carries a
// single gamma slot, mirroring the usual results-table layout. Cells run in
// parallel up to `threads`; outputs do not depend on the thread count.
std::vector<SweepCellResult> run_sweep(const nlohmann::json& config, const std::string& out_dir,
                                       int threads, std::optional<std::uint64_t> seed_override);

std::vector<GameCase> game_cases_from(const nlohmann::json& config, std::uint64_t default_seed);

struct GameRunOutcome {
    std::vector<GameCaseResult> cases;
    std::string csv_path;
};

GameRunOutcome run_game(const nlohmann::json& config, const std::string& out_dir,
                        std::optional<std::uint64_t> seed_override);

struct FrontierPoint {
    Scalar scale = 0;
    std::string source;  // "tilt" or a policy path
    ObjectivePoint point;
    Scalar ln_partition = 0;
    bool non_dominated = false;
};

struct FrontierOutcome {
    std::vector<FrontierPoint> points;
    std::string csv_path;
};

FrontierOutcome run_frontier(const nlohmann::json& config, const std::string& out_dir,
                             std::optional<std::uint64_t> seed_override);

}  // namespace rlm::harness
