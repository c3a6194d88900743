#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "rlm/posgame.hpp"

#include "rlm/objectives.hpp"

#include <cmath>
#include <vector>

using namespace rlm;

namespace {

// analytic truncated-normal mean, written out independently of the sampler
double truncated_mean(double mu, double sigma, double lo, double hi) {
    const double a = (lo - mu) / sigma;
    const double b = (hi - mu) / sigma;
    auto phi = [](double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); };
    auto Phi = [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); };
    return mu + sigma * (phi(a) - phi(b)) / (Phi(b) - Phi(a));
}

}  // namespace

TEST_CASE("degenerate sigma collapses to the clamped mean") {
    RngStream rng(1);
    for (int i = 0; i < 100; ++i) {
        CHECK(trunc_normal_sample(7.0, 1e-9, 1, 10, rng) == doctest::Approx(7.0).epsilon(1e-6));
        CHECK(trunc_normal_sample(-3.0, 1e-9, 1, 10, rng) == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(trunc_normal_sample(42.0, 1e-9, 1, 10, rng) == doctest::Approx(10.0).epsilon(1e-6));
    }
}

TEST_CASE("samples respect the truncation window and the analytic mean") {
    RngStream rng(42);
    const int n = 100000;
    double sum = 0;
    for (int i = 0; i < n; ++i) {
        const double x = trunc_normal_sample(5.0, 5.0, 1, 10, rng);
        REQUIRE(x >= 1.0);
        REQUIRE(x <= 10.0);
        sum += x;
    }
    CHECK(sum / n == doctest::Approx(truncated_mean(5.0, 5.0, 1, 10)).epsilon(0.01));
    CHECK(std::abs(sum / n - truncated_mean(5.0, 5.0, 1, 10)) < 0.05);
}

TEST_CASE("an out-of-window mean still yields in-window samples") {
    RngStream rng(3);
    for (int i = 0; i < 10000; ++i) {
        const double x = trunc_normal_sample(0.0, 1.0, 1, 10, rng);
        REQUIRE(x >= 1.0);
    }
}

TEST_CASE("integerize rounds to the nearest position") {
    CHECK(integerize_position(3.71, 1, 10) == 4);
    CHECK(integerize_position(3.12, 1, 10) == 3);
    CHECK(integerize_position(5.0, 1, 10) == 5);
    CHECK(integerize_position(2.5, 1, 10) == 2);  // halves go down
    CHECK(integerize_position(10.7, 1, 10) == 10);
    CHECK(integerize_position(0.2, 1, 10) == 1);
}

TEST_CASE("reward profiles") {
    const RewardProfile zone = RewardProfile::exponential_zone();
    CHECK(zone.at(10) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(zone.at(5) == 0.0);
    CHECK(zone.at(8) == doctest::Approx(std::exp(-2.0)).epsilon(1e-12));
    CHECK(zone.at(8) == doctest::Approx(0.1353352832366127).epsilon(1e-9));

    const RewardProfile flat = RewardProfile::beta_shape(1.0, 1.0);
    for (int i = 1; i <= 10; ++i) CHECK(flat.at(i) == doctest::Approx(1.0).epsilon(1e-12));

    const RewardProfile skew = RewardProfile::beta_shape(5.0, 2.0);
    CHECK(skew.values.maxCoeff() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(RewardProfile::beta_shape(0.0, 1.0), std::invalid_argument);
}

TEST_CASE("game state accumulates one visit per turn") {
    GameState state(10);
    const std::vector<int> positions{3, 3, 7, 10, 1};
    for (std::size_t t = 0; t < positions.size(); ++t) {
        state.record(positions[t]);
        CHECK(state.total() == static_cast<int>(t) + 1);
    }
    CHECK(state.visits[2] == 2);
}

TEST_CASE("behavior simulation under a degenerate policy") {
    GameConfig config;
    config.mu = 7;
    config.sigma = 1e-9;
    config.n_trajectories = 50;
    config.seed = 5;
    RngStream rng(config.seed);
    const BehaviorSim sim = simulate_behavior(config, rng);
    const Scalar step_reward = config.profile.at(7);
    for (int n = 0; n < config.n_trajectories; ++n) {
        for (int pos : sim.trajectories[static_cast<std::size_t>(n)]) CHECK(pos == 7);
        CHECK(sim.reward_sums[n] == doctest::Approx(10 * step_reward).epsilon(1e-12));
    }
    CHECK(sim.visit_freq[6] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("behavior simulation is seed-reproducible and mass concentrates near mu") {
    GameConfig config;
    config.mu = 8;
    config.sigma = 1;
    config.n_trajectories = 5000;
    config.seed = 11;
    const BehaviorSim a = simulate_behavior(config, RngStream(config.seed));
    const BehaviorSim b = simulate_behavior(config, RngStream(config.seed));
    CHECK(a.trajectories == b.trajectories);
    CHECK(a.visit_freq == b.visit_freq);

    Index mode = 0;
    a.visit_freq.maxCoeff(&mode);
    CHECK(std::abs(static_cast<int>(mode) + 1 - 8) <= 1);
    CHECK(a.visit_freq.sum() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("target training concentrates on the reward zone when behavior covers it") {
    GameConfig config;
    config.mu = 8;
    config.sigma = 2;
    config.n_trajectories = 2000;
    config.seed = 7;
    const TargetTrainResult result = train_target_agent(config, {0.5, 300});
    Scalar zone_mass = 0;
    for (int i = 6; i <= 10; ++i) zone_mass += result.action_probs[i - 1];
    CHECK(zone_mass > 0.9);
    CHECK(result.avg_step_reward > 0.3);
    CHECK(result.exact_expected_reward ==
          doctest::Approx(result.action_probs.dot(config.profile.values)).epsilon(1e-12));
}

TEST_CASE("zero-mass behavior freezes the target exactly when eta is zero") {
    GameConfig config;
    config.mu = 2;
    config.sigma = 0.5;
    config.support_hi = 5;
    config.entropy_bonus = 0;
    config.n_trajectories = 500;
    config.seed = 13;
    const TargetTrainResult result = train_target_agent(config, {0.5, 100});
    CHECK((result.policy.logits() - result.initial_logits).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("zero-mass behavior with an entropy bonus collapses to uniform") {
    GameConfig config;
    config.mu = 2;
    config.sigma = 0.5;
    config.support_hi = 5;
    config.entropy_bonus = 0.05;
    config.n_trajectories = 500;
    config.seed = 13;
    const TargetTrainResult result = train_target_agent(config, {0.5, 400});
    CHECK(result.entropy > 0.98 * std::log(10.0));
    CHECK(result.entropy <= std::log(10.0) + 1e-12);
    // the run started visibly away from uniform, so the collapse is earned
    CHECK((result.initial_logits.row(0).maxCoeff() - result.initial_logits.row(0).minCoeff()) > 0.1);
}

TEST_CASE("wider behavior earns at least as much as a narrow one") {
    Scalar wide_r = 0, narrow_r = 0;
    {
        GameConfig config;
        config.mu = 8;
        config.sigma = 5;
        config.n_trajectories = 2000;
        config.seed = 17;
        wide_r = train_target_agent(config, {0.5, 300}).avg_step_reward;
    }
    {
        GameConfig config;
        config.mu = 8;
        config.sigma = 1;
        config.n_trajectories = 2000;
        config.seed = 17;
        narrow_r = train_target_agent(config, {0.5, 300}).avg_step_reward;
    }
    CHECK(wide_r >= narrow_r);
}

TEST_CASE("game case results normalize and the ill-defined case flattens") {
    GameCase game_case;
    game_case.name = "flat";
    game_case.config.mu = 2;
    game_case.config.sigma = 0.5;
    game_case.config.support_hi = 5;
    game_case.config.entropy_bonus = 0.05;
    game_case.config.n_trajectories = 5000;
    game_case.config.seed = 19;
    game_case.train = {0.5, 400};
    const GameCaseResult result = run_game_case(game_case);
    CHECK(result.behavior_freq.sum() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(result.target_freq.sum() == doctest::Approx(1.0).epsilon(1e-9));
    for (Index i = 0; i < 10; ++i) CHECK(std::abs(result.target_freq[i] - 0.1) < 0.03);
}

TEST_CASE("the preset case lists carry the documented parameters") {
    const auto fig3 = preset_cases_fig3(1);
    CHECK(fig3.size() == 6);
    CHECK(fig3.back().config.support_hi == 5);
    CHECK(fig3.back().config.entropy_bonus > 0);

    const auto fig4 = preset_fig4(1);
    REQUIRE(!fig4.empty());
    for (const auto& c : fig4) {
        CHECK(c.config.mu == 5.0);
        CHECK(c.config.sigma == 5.0);
        CHECK(c.config.profile.kind == RewardProfile::Kind::beta_shape);
    }
}
