#include "rlm/trainer.hpp"

#include "rlm/normal.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <stdexcept>

namespace rlm {

InitScheme init_scheme_from_name(const std::string& name) {
    if (name == "behavior") return InitScheme::behavior;
    if (name == "random") return InitScheme::random;
    throw std::invalid_argument("unknown init scheme: " + name);
}

GradientForm gradient_form_from_name(const std::string& name) {
    if (name == "score") return GradientForm::score;
    if (name == "raw") return GradientForm::raw;
    throw std::invalid_argument("unknown gradient form: " + name);
}

void TrainConfig::validate() const {
    if (!(learning_rate > Scalar(0))) throw std::invalid_argument("TrainConfig: learning_rate <= 0");
    if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (prefix_len < 0 || prefix_len >= total_len)
        throw std::invalid_argument("TrainConfig: need 0 <= prefix_len < total_len");
    if (entropy_bonus < Scalar(0)) throw std::invalid_argument("TrainConfig: entropy_bonus < 0");
    dropout.validate();
}

LogisticRewardModel LogisticRewardModel::fit(const Corpus& corpus, ActionSpace space,
                                             int target_label, int steps, Scalar rate) {
    if (!corpus.has_labels()) throw std::invalid_argument("reward model: corpus has no labels");
    corpus.validate(space);
    const auto n = static_cast<Index>(corpus.sequences.size());

    Matrix x(n, space.size);
    Vector y(n);
    for (Index i = 0; i < n; ++i) {
        const auto& seq = corpus.sequences[static_cast<std::size_t>(i)];
        Eigen::RowVectorXd counts = Eigen::RowVectorXd::Zero(space.size);
        for (TokenId id : seq) counts[id] += Scalar(1);
        x.row(i) = counts / std::max<Scalar>(Scalar(1), static_cast<Scalar>(seq.size()));
        y[i] = corpus.labels[static_cast<std::size_t>(i)] == target_label ? Scalar(1) : Scalar(0);
    }
    const Scalar positives = y.sum();
    if (positives == Scalar(0) || positives == static_cast<Scalar>(n))
        throw std::invalid_argument("reward model: need at least one example of each class");

    LogisticRewardModel model(space.size);
    auto loss_at = [&](const Vector& w, Scalar b) {
        Vector z = x * w;
        z.array() += b;
        // -[y ln s + (1-y) ln(1-s)] via the stable log1p(exp(.)) form
        Scalar total = 0;
        for (Index i = 0; i < n; ++i) {
            const Scalar zi = z[i];
            const Scalar softplus = zi > 0 ? zi + std::log1p(std::exp(-zi)) : std::log1p(std::exp(zi));
            total += softplus - y[i] * zi;
        }
        return total / static_cast<Scalar>(n);
    };

    Scalar current = loss_at(model.weights_, model.bias_);
    Scalar step = rate;
    for (int it = 0; it < steps; ++it) {
        Vector z = x * model.weights_;
        z.array() += model.bias_;
        Vector s = (Scalar(1) / (Scalar(1) + (-z.array()).exp())).matrix();
        Vector err = (s - y) / static_cast<Scalar>(n);
        Vector gw = x.transpose() * err;
        Scalar gb = err.sum();

        // halve the step until the loss does not increase
        while (step > Scalar(1e-12)) {
            Vector w_next = model.weights_ - step * gw;
            Scalar b_next = model.bias_ - step * gb;
            const Scalar next = loss_at(w_next, b_next);
            if (next <= current) {
                model.weights_ = std::move(w_next);
                model.bias_ = b_next;
                current = next;
                break;
            }
            step *= Scalar(0.5);
        }
    }
    return model;
}

Vector LogisticRewardModel::features(const Trajectory& traj) const {
    Vector counts = Vector::Zero(weights_.size());
    for (TokenId id : traj.tokens) counts[id] += Scalar(1);
    return counts / std::max<Scalar>(Scalar(1), static_cast<Scalar>(traj.tokens.size()));
}

Scalar LogisticRewardModel::score(const Trajectory& traj) const {
    const Scalar z = weights_.dot(features(traj)) + bias_;
    return Scalar(1) / (Scalar(1) + std::exp(-z));
}

Scalar LogisticRewardModel::loss(const Corpus& corpus, int target_label) const {
    Scalar total = 0;
    for (std::size_t i = 0; i < corpus.sequences.size(); ++i) {
        const Scalar s = score(Trajectory(corpus.sequences[i], 0));
        const Scalar y = corpus.labels[i] == target_label ? Scalar(1) : Scalar(0);
        total -= y * std::log(std::max(s, Scalar(1e-300))) +
                 (Scalar(1) - y) * std::log(std::max(Scalar(1) - s, Scalar(1e-300)));
    }
    return total / static_cast<Scalar>(corpus.sequences.size());
}

Scalar LogisticRewardModel::accuracy(const Corpus& corpus, int target_label) const {
    Index hits = 0;
    for (std::size_t i = 0; i < corpus.sequences.size(); ++i) {
        const bool predicted = score(Trajectory(corpus.sequences[i], 0)) >= Scalar(0.5);
        const bool actual = corpus.labels[i] == target_label;
        if (predicted == actual) ++hits;
    }
    return static_cast<Scalar>(hits) / static_cast<Scalar>(corpus.sequences.size());
}

RewardFn make_reward(const LogisticRewardModel& model) {
    return RewardFn([model](const Trajectory& traj) { return model.score(traj); });
}

std::vector<Trajectory> generate_batch(const AutoregressivePolicy& behavior,
                                       std::span<const std::vector<TokenId>> prefixes,
                                       const TrainConfig& config, RngStream& rng) {
    if (prefixes.empty()) throw std::invalid_argument("generate_batch: empty prefix pool");
    std::vector<Trajectory> batch;
    batch.reserve(static_cast<std::size_t>(config.batch_size));
    for (int n = 0; n < config.batch_size; ++n) {
        const auto& prefix = prefixes[static_cast<std::size_t>(n) % prefixes.size()];
        RngStream slot = rng.split(static_cast<std::uint64_t>(n));
        batch.push_back(decode(behavior, prefix, config.total_len, config.decoding, slot));
    }
    return batch;
}

namespace {

Scalar conditional_entropy(const AutoregressivePolicy& pi, Index ctx) {
    return entropy_of(pi.conditional(ctx));
}

}  // namespace

Scalar surrogate_objective(const AutoregressivePolicy& pi, std::span<const Trajectory> batch,
                           const Vector& rewards, Scalar entropy_bonus, GradientForm form) {
    if (static_cast<Index>(batch.size()) != rewards.size())
        throw std::invalid_argument("surrogate_objective: batch/reward size mismatch");
    const auto b = static_cast<Scalar>(batch.size());
    Scalar total = 0;
    for (std::size_t n = 0; n < batch.size(); ++n) {
        const Trajectory& traj = batch[n];
        const Scalar lp = log_prob(pi, traj);
        const Scalar r = rewards[static_cast<Index>(n)];
        total += form == GradientForm::score ? r * lp : r * std::exp(lp);
        if (entropy_bonus > Scalar(0)) {
            for (int t = traj.prefix_len; t < traj.length(); ++t)
                total += entropy_bonus * conditional_entropy(pi, pi.context_index(traj, t));
        }
    }
    return total / b;
}

Matrix policy_gradient(const AutoregressivePolicy& pi, std::span<const Trajectory> batch,
                       const Vector& rewards, Scalar entropy_bonus, GradientForm form) {
    if (static_cast<Index>(batch.size()) != rewards.size())
        throw std::invalid_argument("policy_gradient: batch/reward size mismatch");
    const auto b = static_cast<Scalar>(batch.size());
    Matrix grad = Matrix::Zero(pi.context_count(), pi.vocab());

    // conditionals and entropy-gradient rows per visited context, computed once
    std::map<Index, std::pair<Vector, Vector>> cache;
    auto rows_for = [&](Index ctx) -> const std::pair<Vector, Vector>& {
        auto it = cache.find(ctx);
        if (it != cache.end()) return it->second;
        Vector probs = pi.conditional(ctx);
        Vector entropy_grad;
        if (entropy_bonus > Scalar(0)) {
            // d H(p) / d logits = -p .* (ln p + H(p))
            const Scalar h = entropy_of(probs);
            Vector lp = probs.array().max(Scalar(1e-300)).log().matrix();
            entropy_grad = -(probs.array() * (lp.array() + h)).matrix();
        }
        return cache.emplace(ctx, std::make_pair(std::move(probs), std::move(entropy_grad)))
            .first->second;
    };

    for (std::size_t n = 0; n < batch.size(); ++n) {
        const Trajectory& traj = batch[n];
        Scalar coeff = rewards[static_cast<Index>(n)] / b;
        if (form == GradientForm::raw) coeff *= std::exp(log_prob(pi, traj));
        for (int t = traj.prefix_len; t < traj.length(); ++t) {
            const Index ctx = pi.context_index(traj, t);
            const auto& [probs, entropy_grad] = rows_for(ctx);
            if (coeff != Scalar(0)) {
                // d ln pi(a|ctx) / d logits = onehot(a) - probs
                grad.row(ctx) -= coeff * probs.transpose();
                grad(ctx, traj.tokens[static_cast<std::size_t>(t)]) += coeff;
            }
            if (entropy_bonus > Scalar(0))
                grad.row(ctx) += (entropy_bonus / b) * entropy_grad.transpose();
        }
    }
    return grad;
}

Scalar policy_gradient_step(AutoregressivePolicy& pi, std::span<const Trajectory> batch,
                            const Vector& rewards, Scalar learning_rate, Scalar entropy_bonus,
                            GradientForm form) {
    const Matrix grad = policy_gradient(pi, batch, rewards, entropy_bonus, form);
    const Scalar norm = grad.norm();
    if (!std::isfinite(norm))
        throw std::runtime_error("policy_gradient_step: non-finite gradient, aborting epoch");
    pi.logits() += learning_rate * grad;
    return norm;
}

namespace {

AutoregressivePolicy make_initial_target(const AutoregressivePolicy& behavior,
                                         const TrainConfig& config, RngStream& rng) {
    if (config.init == InitScheme::behavior) {
        AutoregressivePolicy target = behavior;
        target.set_role(PolicyRole::target);
        return target;
    }
    AutoregressivePolicy target(behavior.space(), behavior.order(), PolicyRole::target);
    RngStream noise = rng.split(0x1a17);
    for (Index c = 0; c < target.context_count(); ++c)
        for (Index a = 0; a < static_cast<Index>(target.vocab()); ++a)
            target.logits()(c, a) = Scalar(0.1) * norm_quantile(noise.next_open_double());
    return target;
}

// Reward tables are epoch-invariant; only the policy tables change.
struct ExactEvalContext {
    struct PrefixSlot {
        std::vector<TokenId> prefix;
        Scalar weight;
        Vector rewards_by_rank;
    };
    std::vector<PrefixSlot> slots;

    ExactEvalContext(const AutoregressivePolicy& behavior, const RewardFn& reward,
                     std::span<const std::vector<TokenId>> prefixes, const TrainConfig& config) {
        std::map<std::vector<TokenId>, Scalar> pool_weight;
        for (const auto& prefix : prefixes) pool_weight[prefix] += Scalar(1);
        const auto pool_size = static_cast<Scalar>(prefixes.size());
        for (const auto& [prefix, count] : pool_weight) {
            slots.push_back({prefix, count / pool_size,
                             reward_table(reward, behavior.space(), config.total_len, prefix)});
        }
    }
};

// Expectations under the decoding distribution of pi, computed by exhaustive
// enumeration. Distinct prefixes are weighted by their pool multiplicity.
EpochMetrics evaluate_policy_exact(const AutoregressivePolicy& pi,
                                   const AutoregressivePolicy& behavior,
                                   const ExactEvalContext& eval_ctx, const TrainConfig& config,
                                   int epoch, Index survivors) {
    const Index contexts = pi.context_count();
    const int vocab = pi.vocab();
    Matrix decode_p(contexts, vocab), log_pi(contexts, vocab), log_beta(contexts, vocab);
    for (Index c = 0; c < contexts; ++c) {
        decode_p.row(c) = next_token_distribution(pi, c, config.decoding).probs.transpose();
        log_pi.row(c) = pi.log_conditional(c).transpose();
        log_beta.row(c) = behavior.log_conditional(c).transpose();
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.survivors = survivors;
    std::vector<TokenId> tokens;
    const Vector* rewards_by_rank = nullptr;
    Scalar weight = 0;
    auto walk = [&](auto&& self, Scalar path_p, Scalar path_lpi, Scalar path_lbeta,
                    std::uint64_t rank) -> void {
        if (static_cast<int>(tokens.size()) == config.total_len) {
            m.avg_reward += weight * path_p * (*rewards_by_rank)[static_cast<Index>(rank)];
            m.avg_log_beta += weight * path_p * path_lbeta;
            m.entropy_estimate -= weight * path_p * path_lpi;
            return;
        }
        const Index ctx = pi.context_index(std::span<const TokenId>(tokens.data(), tokens.size()));
        for (int a = 0; a < vocab; ++a) {
            const Scalar p = decode_p(ctx, a);
            if (p <= Scalar(0)) continue;
            tokens.push_back(static_cast<TokenId>(a));
            self(self, path_p * p, path_lpi + log_pi(ctx, a), path_lbeta + log_beta(ctx, a),
                 rank * static_cast<std::uint64_t>(vocab) + static_cast<std::uint64_t>(a));
            tokens.pop_back();
        }
    };
    for (const auto& slot : eval_ctx.slots) {
        tokens = slot.prefix;
        rewards_by_rank = &slot.rewards_by_rank;
        weight = slot.weight;
        walk(walk, Scalar(1), Scalar(0), Scalar(0), 0);
    }
    m.objective_sum = m.avg_reward + m.avg_log_beta;
    return m;
}

EpochMetrics evaluate_policy(const AutoregressivePolicy& pi, const AutoregressivePolicy& behavior,
                             const RewardFn& reward,
                             std::span<const std::vector<TokenId>> prefixes,
                             const TrainConfig& config, int epoch, Index survivors,
                             RngStream eval_rng, const ExactEvalContext* eval_ctx) {
    if (eval_ctx)
        return evaluate_policy_exact(pi, behavior, *eval_ctx, config, epoch, survivors);
    const int eval_n = config.eval_batch > 0 ? config.eval_batch : config.batch_size;
    EpochMetrics m;
    m.epoch = epoch;
    m.survivors = survivors;
    for (int n = 0; n < eval_n; ++n) {
        const auto& prefix = prefixes[static_cast<std::size_t>(n) % prefixes.size()];
        RngStream slot = eval_rng.split(static_cast<std::uint64_t>(n));
        const Trajectory traj = decode(pi, prefix, config.total_len, config.decoding, slot);
        m.avg_reward += reward(traj);
        m.avg_log_beta += log_prob(behavior, traj);
        m.entropy_estimate -= log_prob(pi, traj);
    }
    const auto n = static_cast<Scalar>(eval_n);
    m.avg_reward /= n;
    m.avg_log_beta /= n;
    m.entropy_estimate /= n;
    m.objective_sum = m.avg_reward + m.avg_log_beta;
    return m;
}

}  // namespace

TrainResult train(const AutoregressivePolicy& behavior, const RewardFn& reward,
                  std::span<const std::vector<TokenId>> prefixes, const TrainConfig& config) {
    config.validate();
    if (prefixes.empty()) throw std::invalid_argument("train: empty prefix pool");
    if (config.prefix_pool_limit > 0 &&
        static_cast<std::size_t>(config.prefix_pool_limit) < prefixes.size())
        prefixes = prefixes.first(static_cast<std::size_t>(config.prefix_pool_limit));
    for (const auto& prefix : prefixes)
        if (static_cast<int>(prefix.size()) != config.prefix_len)
            throw std::invalid_argument("train: prefix length does not match config");
    if (config.exact_metrics)
        suffix_space_size(behavior.vocab(), config.total_len - config.prefix_len);

    RngStream root(config.seed);
    AutoregressivePolicy target = make_initial_target(behavior, config, root);

    const Index survivors_per_epoch =
        static_cast<Index>(config.batch_size) -
        (config.dropout.kind == DropoutConfig::Kind::none
             ? Index(0)
             : dropout_count(config.batch_size, config.dropout.gamma));

    // Metrics reuse one eval sub-stream every epoch: common random numbers
    // keep the epoch-to-epoch trend readable through sampling noise.
    const RngStream eval_rng = root.split(0xe7a1);
    std::unique_ptr<ExactEvalContext> eval_ctx;
    if (config.exact_metrics)
        eval_ctx = std::make_unique<ExactEvalContext>(behavior, reward, prefixes, config);

    TrainResult result{.metrics = {}, .policy = target};
    result.metrics.reserve(static_cast<std::size_t>(config.epochs) + 1);
    result.metrics.push_back(evaluate_policy(target, behavior, reward, prefixes, config, 0,
                                             survivors_per_epoch, eval_rng, eval_ctx.get()));

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        RngStream gen_rng = root.split(0x6e00 + static_cast<std::uint64_t>(epoch));
        RngStream drop_rng = root.split(0xd000 + static_cast<std::uint64_t>(epoch));

        const std::vector<Trajectory> batch = generate_batch(behavior, prefixes, config, gen_rng);
        Vector rewards(config.batch_size);
        for (int n = 0; n < config.batch_size; ++n)
            rewards[n] = reward(batch[static_cast<std::size_t>(n)]);
        const Vector kept = apply_dropout(config.dropout, rewards, drop_rng);

        policy_gradient_step(target, batch, kept, config.learning_rate, config.entropy_bonus,
                             config.gradient_form);
        result.metrics.push_back(evaluate_policy(target, behavior, reward, prefixes, config, epoch,
                                                 survivors_per_epoch, eval_rng, eval_ctx.get()));
    }
    result.policy = std::move(target);
    return result;
}

}  // namespace rlm
