#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "rlm/trainer.hpp"

#include <cmath>
#include <vector>

using namespace rlm;

namespace {

AutoregressivePolicy random_policy(int vocab, int order, RngStream& rng) {
    AutoregressivePolicy policy(ActionSpace(vocab), order);
    for (Index c = 0; c < policy.context_count(); ++c)
        for (Index a = 0; a < vocab; ++a)
            policy.logits()(c, a) = 1.5 * (2 * rng.next_double() - 1);
    return policy;
}

// marker-presence corpus: label 1 sequences contain token `marker`
Corpus marker_corpus(int vocab, TokenId marker, int n, RngStream& rng) {
    Corpus corpus;
    for (int i = 0; i < n; ++i) {
        const int label = i % 2;
        std::vector<TokenId> seq(6);
        for (auto& tok : seq)
            tok = static_cast<TokenId>(rng.next_below(static_cast<std::uint64_t>(vocab - 1)));
        if (label == 1) seq[static_cast<std::size_t>(rng.next_below(6))] = marker;
        corpus.sequences.push_back(std::move(seq));
        corpus.labels.push_back(label);
    }
    return corpus;
}

// central finite differences of the surrogate over every logit
Matrix fd_gradient(AutoregressivePolicy policy, const std::vector<Trajectory>& batch,
                   const Vector& rewards, Scalar eta, GradientForm form) {
    const Scalar h = 1e-5;
    Matrix grad(policy.context_count(), policy.vocab());
    for (Index c = 0; c < policy.context_count(); ++c) {
        for (Index a = 0; a < policy.vocab(); ++a) {
            const Scalar saved = policy.logits()(c, a);
            policy.logits()(c, a) = saved + h;
            const Scalar up = surrogate_objective(policy, batch, rewards, eta, form);
            policy.logits()(c, a) = saved - h;
            const Scalar down = surrogate_objective(policy, batch, rewards, eta, form);
            policy.logits()(c, a) = saved;
            grad(c, a) = (up - down) / (2 * h);
        }
    }
    return grad;
}

}  // namespace

TEST_CASE("reward model separates a separable corpus") {
    RngStream rng(101);
    const Corpus corpus = marker_corpus(8, 7, 120, rng);
    const auto model = LogisticRewardModel::fit(corpus, ActionSpace(8), 1, 400, 4.0);
    CHECK(model.accuracy(corpus, 1) >= 0.95);
}

TEST_CASE("reward model stays at coin-flip for uninformative features") {
    Corpus corpus;
    for (int i = 0; i < 40; ++i) {
        corpus.sequences.push_back({1, 2, 3});
        corpus.labels.push_back(i % 2);
    }
    const auto model = LogisticRewardModel::fit(corpus, ActionSpace(5), 1, 200, 1.0);
    CHECK(model.score(Trajectory({1, 2, 3}, 1)) == doctest::Approx(0.5).epsilon(0.05));
    CHECK(model.score(Trajectory({0, 4, 4}, 1)) == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("reward model scoring is deterministic and loss non-increasing in steps") {
    RngStream rng(55);
    const Corpus corpus = marker_corpus(6, 5, 80, rng);
    const auto model_a = LogisticRewardModel::fit(corpus, ActionSpace(6), 1, 150, 2.0);
    const auto model_b = LogisticRewardModel::fit(corpus, ActionSpace(6), 1, 150, 2.0);
    const Trajectory probe({5, 1, 2, 0}, 1);
    CHECK(model_a.score(probe) == model_b.score(probe));

    const auto early = LogisticRewardModel::fit(corpus, ActionSpace(6), 1, 20, 2.0);
    CHECK(model_a.loss(corpus, 1) <= early.loss(corpus, 1) + 1e-12);

    Corpus single_class = corpus;
    for (auto& label : single_class.labels) label = 0;
    CHECK_THROWS_AS(LogisticRewardModel::fit(single_class, ActionSpace(6), 1, 10, 1.0),
                    std::invalid_argument);
}

TEST_CASE("greedy batches collapse to one trajectory per prefix") {
    RngStream rng(9);
    const auto behavior = random_policy(5, 1, rng);
    std::vector<std::vector<TokenId>> pool{{2, 0}};
    TrainConfig cfg;
    cfg.batch_size = 12;
    cfg.prefix_len = 2;
    cfg.total_len = 6;
    cfg.decoding = DecodingStrategy::greedy();
    RngStream gen(1);
    const auto batch = generate_batch(behavior, pool, cfg, gen);
    for (const auto& traj : batch) CHECK(traj.tokens == batch.front().tokens);
}

TEST_CASE("stochastic batches are reproducible and top-1 equals greedy") {
    RngStream rng(10);
    const auto behavior = random_policy(5, 1, rng);
    std::vector<std::vector<TokenId>> pool{{0, 1}, {3, 2}};
    TrainConfig cfg;
    cfg.batch_size = 16;
    cfg.prefix_len = 2;
    cfg.total_len = 6;
    cfg.decoding = DecodingStrategy::stochastic(0.8);

    RngStream a(42), b(42);
    const auto batch_a = generate_batch(behavior, pool, cfg, a);
    const auto batch_b = generate_batch(behavior, pool, cfg, b);
    for (std::size_t i = 0; i < batch_a.size(); ++i) CHECK(batch_a[i].tokens == batch_b[i].tokens);

    TrainConfig greedy_cfg = cfg;
    greedy_cfg.decoding = DecodingStrategy::greedy();
    TrainConfig top1_cfg = cfg;
    top1_cfg.decoding = DecodingStrategy::top_k(1, 0.5);
    RngStream g(3), t(3);
    const auto greedy_batch = generate_batch(behavior, pool, greedy_cfg, g);
    const auto top1_batch = generate_batch(behavior, pool, top1_cfg, t);
    for (std::size_t i = 0; i < greedy_batch.size(); ++i)
        CHECK(greedy_batch[i].tokens == top1_batch[i].tokens);
}

TEST_CASE("zero rewards with zero entropy bonus leave parameters untouched") {
    RngStream rng(11);
    auto policy = random_policy(4, 1, rng);
    const Matrix before = policy.logits();
    std::vector<Trajectory> batch{Trajectory({0, 1, 2}, 1), Trajectory({0, 3, 3}, 1)};
    policy_gradient_step(policy, batch, Vector::Zero(2), 0.5, 0.0, GradientForm::score);
    CHECK((policy.logits() - before).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("analytic gradient matches central finite differences") {
    RngStream rng(2025);
    for (int rep = 0; rep < 30; ++rep) {
        const int vocab = 3 + static_cast<int>(rng.next_below(2));
        auto policy = random_policy(vocab, 1, rng);
        TrainConfig cfg;
        cfg.batch_size = 6;
        cfg.prefix_len = 1;
        cfg.total_len = 4;
        cfg.decoding = DecodingStrategy::stochastic(1.0);
        std::vector<std::vector<TokenId>> pool{{0}, {1}};
        RngStream gen(static_cast<std::uint64_t>(rep));
        auto behavior = random_policy(vocab, 1, rng);
        const auto batch = generate_batch(behavior, pool, cfg, gen);
        Vector rewards(6);
        for (Index i = 0; i < 6; ++i) rewards[i] = rng.next_double();

        const Scalar eta = rep % 3 == 0 ? 0.2 : 0.0;
        const GradientForm form = rep % 2 == 0 ? GradientForm::score : GradientForm::raw;
        const Matrix analytic = policy_gradient(policy, batch, rewards, eta, form);
        const Matrix numeric = fd_gradient(policy, batch, rewards, eta, form);
        const Scalar rel = (analytic - numeric).norm() / std::max(numeric.norm(), Scalar(1e-12));
        CHECK(rel < 1e-5);
    }
}

TEST_CASE("zero-reward batch entries are exact no-ops in the gradient") {
    RngStream rng(61);
    auto policy = random_policy(4, 1, rng);
    const std::vector<Trajectory> batch{Trajectory({0, 1, 2}, 1), Trajectory({0, 3, 3}, 1),
                                        Trajectory({0, 0, 1}, 1)};
    Vector rewards(3);
    rewards << 0.7, 0.0, 0.4;
    const Matrix grad = policy_gradient(policy, batch, rewards, 0.0, GradientForm::score);

    // replacing the zero-reward trajectory with anything else changes nothing
    std::vector<Trajectory> swapped = batch;
    swapped[1] = Trajectory({0, 2, 0}, 1);
    const Matrix grad_swapped = policy_gradient(policy, swapped, rewards, 0.0, GradientForm::score);
    CHECK((grad - grad_swapped).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("a rewarded trajectory's log-probability rises after one step") {
    RngStream rng(77);
    auto policy = random_policy(4, 1, rng);
    const Trajectory traj({0, 2, 1, 3}, 1);
    const Scalar before = log_prob(policy, traj);
    std::vector<Trajectory> batch{traj};
    policy_gradient_step(policy, batch, Vector::Ones(1), 0.05, 0.0, GradientForm::score);
    CHECK(log_prob(policy, traj) > before);
}

TEST_CASE("non-finite rewards abort the step with a diagnostic") {
    RngStream rng(13);
    auto policy = random_policy(3, 0, rng);
    std::vector<Trajectory> batch{Trajectory({0, 1}, 1)};
    Vector bad(1);
    bad[0] = std::numeric_limits<Scalar>::quiet_NaN();
    CHECK_THROWS_AS(policy_gradient_step(policy, batch, bad, 0.1, 0.0, GradientForm::score),
                    std::runtime_error);
}

TEST_CASE("training is deterministic and never mutates the behavior policy") {
    RngStream rng(21);
    const auto behavior = random_policy(5, 1, rng);
    const Matrix behavior_logits = behavior.logits();
    RewardFn reward = RewardFn([](const Trajectory& t) {
        return t.tokens.back() == 4 ? 0.9 : 0.1;
    });
    std::vector<std::vector<TokenId>> pool{{0, 1}, {2, 3}};

    TrainConfig cfg;
    cfg.learning_rate = 2.0;
    cfg.epochs = 5;
    cfg.batch_size = 16;
    cfg.prefix_len = 2;
    cfg.total_len = 5;
    cfg.decoding = DecodingStrategy::stochastic(1.0);
    cfg.dropout = {DropoutConfig::Kind::quantile, 0.5};
    cfg.seed = 3;

    const TrainResult a = train(behavior, reward, pool, cfg);
    const TrainResult b = train(behavior, reward, pool, cfg);
    REQUIRE(a.metrics.size() == b.metrics.size());
    REQUIRE(a.metrics.size() == 6);  // epoch 0 plus five epochs
    for (std::size_t i = 0; i < a.metrics.size(); ++i) {
        CHECK(a.metrics[i].avg_reward == b.metrics[i].avg_reward);
        CHECK(a.metrics[i].avg_log_beta == b.metrics[i].avg_log_beta);
        CHECK(a.metrics[i].entropy_estimate == b.metrics[i].entropy_estimate);
        CHECK(a.metrics[i].survivors == 16 - 8);
    }
    CHECK((behavior.logits() - behavior_logits).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK((a.policy.logits() - b.policy.logits()).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("dropout kind none matches random at gamma zero") {
    RngStream rng(22);
    const auto behavior = random_policy(4, 1, rng);
    RewardFn reward = RewardFn([](const Trajectory& t) { return t.tokens[2] == 1 ? 0.8 : 0.2; });
    std::vector<std::vector<TokenId>> pool{{1, 0}};
    TrainConfig cfg;
    cfg.learning_rate = 1.0;
    cfg.epochs = 4;
    cfg.batch_size = 8;
    cfg.prefix_len = 2;
    cfg.total_len = 5;
    cfg.seed = 9;
    TrainConfig cfg_none = cfg;
    cfg_none.dropout = {DropoutConfig::Kind::none, 0.0};
    TrainConfig cfg_r0 = cfg;
    cfg_r0.dropout = {DropoutConfig::Kind::random, 0.0};
    const TrainResult none = train(behavior, reward, pool, cfg_none);
    const TrainResult r0 = train(behavior, reward, pool, cfg_r0);
    for (std::size_t i = 0; i < none.metrics.size(); ++i)
        CHECK(none.metrics[i].objective_sum == r0.metrics[i].objective_sum);
}

TEST_CASE("epoch zero of a behavior-initialized run scores the behavior policy") {
    RngStream rng(31);
    const auto behavior = random_policy(3, 1, rng);
    std::vector<std::vector<TokenId>> pool{{0}, {2}};
    TrainConfig cfg;
    cfg.learning_rate = 0.5;
    cfg.epochs = 1;
    cfg.batch_size = 8;
    cfg.prefix_len = 1;
    cfg.total_len = 4;
    cfg.init = InitScheme::behavior;
    cfg.exact_metrics = true;
    cfg.seed = 4;
    const TrainResult result = train(behavior, RewardFn::constant(0.3), pool, cfg);

    // independent brute force: E over the behavior decoding distribution of
    // ln beta, averaged over the two prefixes
    Scalar expected = 0;
    for (const auto& prefix : pool) {
        TrajectoryEnumerator walk(behavior.space(), 4, prefix);
        Scalar prefix_term = 0;
        walk.for_each([&](const Trajectory& t, std::uint64_t) {
            const Scalar lp = log_prob(behavior, t);
            prefix_term += std::exp(lp) * lp;
        });
        expected += 0.5 * prefix_term;
    }
    CHECK(result.metrics[0].avg_log_beta == doctest::Approx(expected).epsilon(1e-9));
    CHECK(result.metrics[0].entropy_estimate == doctest::Approx(-expected).epsilon(1e-9));
    CHECK(result.metrics[0].avg_reward == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("prefix pool limit truncates deterministically") {
    RngStream rng(41);
    const auto behavior = random_policy(3, 0, rng);
    std::vector<std::vector<TokenId>> pool{{0}, {1}, {2}};
    TrainConfig cfg;
    cfg.learning_rate = 0.1;
    cfg.epochs = 1;
    cfg.batch_size = 4;
    cfg.prefix_len = 1;
    cfg.total_len = 3;
    cfg.seed = 5;
    cfg.prefix_pool_limit = 1;
    cfg.exact_metrics = true;
    const TrainResult limited = train(behavior, RewardFn::constant(0.5), pool, cfg);
    std::vector<std::vector<TokenId>> first_only{{0}};
    const TrainResult explicit_pool = train(behavior, RewardFn::constant(0.5), first_only, cfg);
    CHECK(limited.metrics[0].avg_log_beta == explicit_pool.metrics[0].avg_log_beta);
}
