#include "rlm/posgame.hpp"

#include "rlm/normal.hpp"
#include "rlm/objectives.hpp"
#include "rlm/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace rlm {

RewardProfile RewardProfile::exponential_zone(int n_positions, int zone_lo) {
    RewardProfile profile;
    profile.kind = Kind::exponential_zone;
    profile.values = Vector::Zero(n_positions);
    for (int i = zone_lo; i <= n_positions; ++i)
        profile.values[i - 1] = std::exp(static_cast<Scalar>(i - n_positions));
    return profile;
}

RewardProfile RewardProfile::beta_shape(Scalar alpha, Scalar beta, int n_positions) {
    if (!(alpha > Scalar(0)) || !(beta > Scalar(0)))
        throw std::invalid_argument("RewardProfile: beta shape parameters must be positive");
    RewardProfile profile;
    profile.kind = Kind::beta_shape;
    profile.values = Vector::Zero(n_positions);
    for (int i = 1; i <= n_positions; ++i) {
        const Scalar x = (static_cast<Scalar>(i) - Scalar(0.5)) / static_cast<Scalar>(n_positions);
        // unnormalized density; the normalizer cancels in the rescale below
        profile.values[i - 1] = std::pow(x, alpha - 1) * std::pow(1 - x, beta - 1);
    }
    profile.values /= profile.values.maxCoeff();
    return profile;
}

void GameConfig::validate() const {
    if (n_positions < 2) throw std::invalid_argument("GameConfig: need at least 2 positions");
    if (n_turns < 1) throw std::invalid_argument("GameConfig: need at least 1 turn");
    if (!(sigma > Scalar(0))) throw std::invalid_argument("GameConfig: sigma must be positive");
    if (!(support_lo < support_hi))
        throw std::invalid_argument("GameConfig: truncation window is empty");
    if (n_trajectories < 1) throw std::invalid_argument("GameConfig: need at least 1 trajectory");
    if (profile.values.size() != n_positions)
        throw std::invalid_argument("GameConfig: profile does not cover the positions");
}

int GameState::total() const {
    return std::accumulate(visits.begin(), visits.end(), 0);
}

double trunc_normal_sample(double mu, double sigma, double lo, double hi, RngStream& rng) {
    if (!(sigma > 0)) throw std::invalid_argument("trunc_normal_sample: sigma must be positive");
    if (!(lo < hi)) throw std::invalid_argument("trunc_normal_sample: lo must be below hi");
    const double a = (lo - mu) / sigma;
    const double b = (hi - mu) / sigma;
    const double fa = norm_cdf(a);
    const double fb = norm_cdf(b);
    const double u = rng.next_open_double();
    double x;
    if (fb - fa < 1e-14) {
        // window carries no mass at this scale (degenerate sigma or far tail)
        x = std::clamp(mu, lo, hi);
    } else {
        x = mu + sigma * norm_quantile(fa + u * (fb - fa));
    }
    return std::clamp(x, lo, hi);
}

int integerize_position(double sample, int lo, int hi) {
    const double frac = sample - std::floor(sample);
    const int rounded = frac > 0.5 ? static_cast<int>(std::ceil(sample))
                                   : static_cast<int>(std::floor(sample));
    return std::clamp(rounded, lo, hi);
}

BehaviorSim simulate_behavior(const GameConfig& config, RngStream rng) {
    config.validate();
    BehaviorSim sim;
    sim.trajectories.resize(static_cast<std::size_t>(config.n_trajectories));
    sim.start_positions.resize(static_cast<std::size_t>(config.n_trajectories));
    sim.reward_sums = Vector::Zero(config.n_trajectories);
    sim.visit_freq = Vector::Zero(config.n_positions);

    for (int n = 0; n < config.n_trajectories; ++n) {
        RngStream stream = rng.split(static_cast<std::uint64_t>(n));
        sim.start_positions[static_cast<std::size_t>(n)] =
            1 + static_cast<int>(stream.next_below(static_cast<std::uint64_t>(config.n_positions)));
        GameState state(config.n_positions);
        auto& traj = sim.trajectories[static_cast<std::size_t>(n)];
        traj.reserve(static_cast<std::size_t>(config.n_turns));
        for (int t = 0; t < config.n_turns; ++t) {
            const double draw = trunc_normal_sample(config.mu, config.sigma, config.support_lo,
                                                    config.support_hi, stream);
            const int position = integerize_position(draw, 1, config.n_positions);
            traj.push_back(position);
            state.record(position);
            sim.reward_sums[n] += config.profile.at(position);
            sim.visit_freq[position - 1] += Scalar(1);
        }
    }
    const Scalar steps = static_cast<Scalar>(config.n_trajectories) * config.n_turns;
    sim.visit_freq /= steps;
    sim.avg_step_reward = sim.reward_sums.sum() / steps;
    return sim;
}

TargetTrainResult train_target_agent(const GameConfig& config, const GameTrainConfig& train) {
    config.validate();
    RngStream root(config.seed);
    const BehaviorSim sim = simulate_behavior(config, root.split(0x51));

    // every step of every behavior trajectory is one single-action training
    // record with its own per-step reward
    std::vector<Trajectory> steps;
    steps.reserve(static_cast<std::size_t>(config.n_trajectories) *
                  static_cast<std::size_t>(config.n_turns));
    for (const auto& traj : sim.trajectories)
        for (int position : traj)
            steps.emplace_back(std::vector<TokenId>{static_cast<TokenId>(position - 1)}, 0);
    Vector rewards(static_cast<Index>(steps.size()));
    for (Index i = 0; i < rewards.size(); ++i)
        rewards[i] = config.profile.at(steps[static_cast<std::size_t>(i)].tokens[0] + 1);

    AutoregressivePolicy target(ActionSpace(config.n_positions), 0, PolicyRole::target);
    if (config.target_init_noise > Scalar(0)) {
        RngStream noise = root.split(0x53);
        for (Index a = 0; a < static_cast<Index>(config.n_positions); ++a)
            target.logits()(0, a) = config.target_init_noise * norm_quantile(noise.next_open_double());
    }
    TargetTrainResult result{.policy = target,
                             .action_probs = {},
                             .visit_freq = {},
                             .avg_step_reward = 0,
                             .exact_expected_reward = 0,
                             .entropy = 0,
                             .initial_logits = target.logits()};
    for (int epoch = 0; epoch < train.epochs; ++epoch)
        policy_gradient_step(target, steps, rewards, train.learning_rate, config.entropy_bonus,
                             GradientForm::score);

    result.policy = target;
    result.action_probs = target.conditional(0);
    result.entropy = entropy_of(result.action_probs);
    result.exact_expected_reward = result.action_probs.dot(config.profile.values);

    // simulate the trained agent for the empirical r~ and visit histogram
    RngStream eval = root.split(0x52);
    result.visit_freq = Vector::Zero(config.n_positions);
    Scalar reward_total = 0;
    const Categorical dist(result.action_probs);
    for (int n = 0; n < config.n_trajectories; ++n) {
        RngStream stream = eval.split(static_cast<std::uint64_t>(n));
        for (int t = 0; t < config.n_turns; ++t) {
            const int position = 1 + sample_categorical(dist, stream);
            result.visit_freq[position - 1] += Scalar(1);
            reward_total += config.profile.at(position);
        }
    }
    const Scalar total_steps = static_cast<Scalar>(config.n_trajectories) * config.n_turns;
    result.visit_freq /= total_steps;
    result.avg_step_reward = reward_total / total_steps;
    return result;
}

GameCaseResult run_game_case(const GameCase& game_case) {
    RngStream rng(game_case.config.seed);
    const BehaviorSim behavior = simulate_behavior(game_case.config, rng.split(0x51));
    const TargetTrainResult target = train_target_agent(game_case.config, game_case.train);
    return GameCaseResult{game_case.name, behavior.visit_freq, target.visit_freq,
                          game_case.config.profile.values, target.avg_step_reward};
}

std::vector<GameCase> preset_cases_fig3(std::uint64_t seed) {
    std::vector<GameCase> cases;
    auto make = [&](const std::string& name, Scalar mu, Scalar sigma, Scalar lo, Scalar hi,
                    Scalar eta) {
        GameCase c;
        c.name = name;
        c.config.mu = mu;
        c.config.sigma = sigma;
        c.config.support_lo = lo;
        c.config.support_hi = hi;
        c.config.entropy_bonus = eta;
        c.config.seed = seed;
        cases.push_back(std::move(c));
    };
    // varying sigma around an in-zone mean, then means drifting away from the
    // zone, then a behavior whose support misses the zone entirely
    make("case0", 8, 5, 1, 10, 0);
    make("case1", 8, 3, 1, 10, 0);
    make("case2", 8, 1, 1, 10, 0);
    make("case3", 5, 1, 1, 10, 0);
    make("case4", 3, 1, 1, 10, 0);
    make("case5", 2, 0.5, 1, 5, 0.05);
    return cases;
}

std::vector<GameCase> preset_fig4(std::uint64_t seed) {
    std::vector<GameCase> cases;
    auto make = [&](const std::string& name, Scalar alpha, Scalar beta) {
        GameCase c;
        c.name = name;
        c.config.mu = 5.0;
        c.config.sigma = 5.0;
        c.config.profile = RewardProfile::beta_shape(alpha, beta);
        c.config.seed = seed;
        cases.push_back(std::move(c));
    };
    make("beta_1_1", 1, 1);
    make("beta_2_2", 2, 2);
    make("beta_2_5", 2, 5);
    make("beta_5_2", 5, 2);
    return cases;
}

}  // namespace rlm
