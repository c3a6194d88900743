#pragma once

#include "rlm/policy.hpp"
#include "rlm/rng.hpp"
#include "rlm/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace rlm {

// Per-position reward levels, max-normalized to 1.0 whenever any entry is
// nonzero. Positions are 1-based externally; values[i-1] is position i.
struct RewardProfile {
    enum class Kind { exponential_zone, beta_shape };

    Kind kind = Kind::exponential_zone;
    Vector values;

    // e^(i - n) inside the zone [zone_lo, n], zero elsewhere; peak 1.0 at n.
    static RewardProfile exponential_zone(int n_positions = 10, int zone_lo = 6);
    // Beta(alpha, beta) density at midpoints (i - 0.5)/n, rescaled to max 1.0.
    static RewardProfile beta_shape(Scalar alpha, Scalar beta, int n_positions = 10);

    Scalar at(int position) const { return values[position - 1]; }
};

struct GameConfig {
    int n_positions = 10;
    int n_turns = 10;  // L
    Scalar mu = 5;
    Scalar sigma = 5;
    Scalar support_lo = 1;  // truncation window of the behavior policy
    Scalar support_hi = 10;
    RewardProfile profile = RewardProfile::exponential_zone();
    int n_trajectories = 5000;  // N
    Scalar entropy_bonus = 0;
    // Std of the target agent's initial logits; nonzero keeps the uniform
    // state a training outcome rather than the starting point.
    Scalar target_init_noise = 0.3;
    std::uint64_t seed = 0;

    void validate() const;
};

struct GameTrainConfig {
    Scalar learning_rate = 0.5;
    int epochs = 300;
};

// Cumulative visit counts over one trajectory.
struct GameState {
    std::vector<int> visits;

    explicit GameState(int n_positions) : visits(static_cast<std::size_t>(n_positions), 0) {}
    void record(int position) { ++visits[static_cast<std::size_t>(position - 1)]; }
    int total() const;
};

// Normal(mu, sigma^2) restricted to [lo, hi] via the inverse CDF of the
// truncated quantile function.
double trunc_normal_sample(double mu, double sigma, double lo, double hi, RngStream& rng);

// Nearest integer with halves rounded down, clamped to [lo, hi].
int integerize_position(double sample, int lo, int hi);

struct BehaviorSim {
    std::vector<std::vector<int>> trajectories;  // N rows of L positions
    std::vector<int> start_positions;            // random initial placement per trajectory
    Vector visit_freq;                           // over positions, sums to 1
    Vector reward_sums;                          // per trajectory
    Scalar avg_step_reward = 0;                  // r~ of the behavior agent
};

BehaviorSim simulate_behavior(const GameConfig& config, RngStream rng);

struct TargetTrainResult {
    AutoregressivePolicy policy;   // order-0 categorical over positions
    Vector action_probs;           // the trained distribution
    Vector visit_freq;             // simulated visit frequencies of the target
    Scalar avg_step_reward = 0;    // empirical r~ of the target agent
    Scalar exact_expected_reward = 0;  // probs . profile
    Scalar entropy = 0;            // H of action_probs, nats
    Matrix initial_logits;         // for the zero-gradient contract
};

// Off-policy training of a stateless target agent on the behavior agent's
// step records, one gradient step per epoch over the full batch.
TargetTrainResult train_target_agent(const GameConfig& config, const GameTrainConfig& train);

struct GameCase {
    std::string name;
    GameConfig config;
    GameTrainConfig train;
};

struct GameCaseResult {
    std::string name;
    Vector behavior_freq;
    Vector target_freq;
    Vector profile;
    Scalar r_tilde = 0;
};

GameCaseResult run_game_case(const GameCase& game_case);

// Varying-sigma, shifted-mu, and zero-mass-support presets (six cases).
std::vector<GameCase> preset_cases_fig3(std::uint64_t seed);
// Behavior mu=5, sigma=5 against Beta-shaped reward profiles.
std::vector<GameCase> preset_fig4(std::uint64_t seed);

}  // namespace rlm
