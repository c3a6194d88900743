#pragma once

#include "rlm/dropout.hpp"
#include "rlm/objectives.hpp"
#include "rlm/policy.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace rlm {

enum class InitScheme { behavior, random };
// score: R * grad ln pi (score-function form, the numerically usable default).
// raw:   grad pi * R, i.e. the score form additionally weighted by pi(tau);
//        exact on tiny spaces, vanishing at any realistic length.
enum class GradientForm { score, raw };

InitScheme init_scheme_from_name(const std::string& name);
GradientForm gradient_form_from_name(const std::string& name);

struct TrainConfig {
    Scalar learning_rate = 5e-4;
    int epochs = 20;
    int batch_size = 256;
    int prefix_len = 2;
    int total_len = 15;
    DecodingStrategy decoding = DecodingStrategy::stochastic();
    DropoutConfig dropout;
    InitScheme init = InitScheme::behavior;
    Scalar entropy_bonus = 0;
    GradientForm gradient_form = GradientForm::score;
    std::uint64_t seed = 0;
    int eval_batch = 0;  // 0 means batch_size
    // Evaluate metrics by exhaustive enumeration instead of sampling; needs
    // vocab^(total_len - prefix_len) within the enumeration cap.
    bool exact_metrics = false;
    int prefix_pool_limit = 0;  // 0 means the whole pool

    void validate() const;
};

struct EpochMetrics {
    int epoch = 0;
    Scalar avg_reward = 0;       // r~ under the target policy's decoding distribution
    Scalar avg_log_beta = 0;     // mean ln beta(tau), tau from the target policy
    Scalar objective_sum = 0;    // avg_reward + avg_log_beta
    Scalar entropy_estimate = 0; // mean -ln pi(tau)
    Index survivors = 0;         // batch entries with nonzero reward weight after dropout
};

// Logistic scorer over per-token count features; the reward model of the
// training loop.
class LogisticRewardModel {
public:
    LogisticRewardModel() = default;
    explicit LogisticRewardModel(int vocab) : weights_(Vector::Zero(vocab)), bias_(0) {}

    // Full-batch gradient descent on cross-entropy with step halving, so the
    // training loss never increases. Labels are 1 where the sequence label
    // equals target_label.
    static LogisticRewardModel fit(const Corpus& corpus, ActionSpace space, int target_label,
                                   int steps, Scalar rate);

    Scalar score(const Trajectory& traj) const;
    Vector features(const Trajectory& traj) const;
    Scalar loss(const Corpus& corpus, int target_label) const;
    Scalar accuracy(const Corpus& corpus, int target_label) const;

    const Vector& weights() const noexcept { return weights_; }
    Scalar bias() const noexcept { return bias_; }

private:
    Vector weights_;
    Scalar bias_ = 0;
};

RewardFn make_reward(const LogisticRewardModel& model);

// One trajectory per batch slot, decoded from the behavior policy; prefixes
// cycle through the pool in order, rng is split per slot.
std::vector<Trajectory> generate_batch(const AutoregressivePolicy& behavior,
                                       std::span<const std::vector<TokenId>> prefixes,
                                       const TrainConfig& config, RngStream& rng);

// The quantity the gradient step ascends:
//   score: (1/B) sum_n r_n ln pi(tau_n) + eta * (1/B) sum_n sum_t H(pi(.|ctx_nt))
//   raw:   (1/B) sum_n r_n pi(tau_n)   + the same entropy term
Scalar surrogate_objective(const AutoregressivePolicy& pi, std::span<const Trajectory> batch,
                           const Vector& rewards, Scalar entropy_bonus, GradientForm form);

Matrix policy_gradient(const AutoregressivePolicy& pi, std::span<const Trajectory> batch,
                       const Vector& rewards, Scalar entropy_bonus, GradientForm form);

// Ascent step; returns the gradient's Frobenius norm. Non-finite gradients
// abort the epoch.
Scalar policy_gradient_step(AutoregressivePolicy& pi, std::span<const Trajectory> batch,
                            const Vector& rewards, Scalar learning_rate, Scalar entropy_bonus,
                            GradientForm form);

struct TrainResult {
    std::vector<EpochMetrics> metrics;  // epoch 0 is the pre-training state
    AutoregressivePolicy policy;
};

TrainResult train(const AutoregressivePolicy& behavior, const RewardFn& reward,
                  std::span<const std::vector<TokenId>> prefixes, const TrainConfig& config);

}  // namespace rlm
