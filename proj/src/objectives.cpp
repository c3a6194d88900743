#include "rlm/objectives.hpp"

#include <cmath>
#include <limits>
#include <memory>

namespace rlm {

RewardFn RewardFn::constant(Scalar value) {
    return RewardFn([value](const Trajectory&) { return value; });
}

RewardFn RewardFn::from_table(Vector by_rank, int vocab) {
    auto table = std::make_shared<Vector>(std::move(by_rank));
    return RewardFn([table, vocab](const Trajectory& traj) {
        return (*table)[static_cast<Index>(trajectory_rank(traj, vocab))];
    });
}

RewardFn RewardFn::scaled(Scalar factor) const {
    RewardFn inner = *this;
    return RewardFn([inner, factor](const Trajectory& traj) { return factor * inner(traj); });
}

Scalar total_variation(const Vector& p, const Vector& q) {
    return Scalar(0.5) * (p - q).lpNorm<1>();
}

TiltedTable tilt_table(const Vector& beta, const Vector& reward) {
    Vector weights = (beta.array() * reward.array().exp()).matrix();
    const Scalar z = weights.sum();
    if (!(z > Scalar(0)))
        throw std::invalid_argument("tilt_table: behavior distribution has no mass");
    return TiltedTable{weights / z, z};
}

ObjectivePoint point_of(const Vector& pi, const Vector& beta, const Vector& reward) {
    ObjectivePoint pt;
    pt.e_reward = pi.dot(reward);
    pt.entropy = entropy_of(pi);
    Scalar elb = 0;
    for (Index i = 0; i < pi.size(); ++i) {
        if (pi[i] <= Scalar(0)) continue;
        elb += beta[i] > Scalar(0) ? pi[i] * std::log(beta[i])
                                   : -std::numeric_limits<Scalar>::infinity();
    }
    pt.e_log_beta = elb;
    return pt;
}

Scalar kl_tilted_of(const Vector& pi, const Vector& beta, const Vector& reward) {
    return kl_of(pi, beta) - pi.dot(reward);
}

Vector trajectory_table(const AutoregressivePolicy& policy, int total_len,
                        std::span<const TokenId> prefix, std::uint64_t cap) {
    TrajectoryEnumerator walk(policy.space(), total_len,
                              std::vector<TokenId>(prefix.begin(), prefix.end()), cap);
    Vector table(static_cast<Index>(walk.count()));
    walk.for_each([&](const Trajectory& traj, std::uint64_t rank) {
        table[static_cast<Index>(rank)] = std::exp(log_prob(policy, traj));
    });
    return table;
}

Vector reward_table(const RewardFn& reward, ActionSpace space, int total_len,
                    std::span<const TokenId> prefix, std::uint64_t cap) {
    TrajectoryEnumerator walk(space, total_len,
                              std::vector<TokenId>(prefix.begin(), prefix.end()), cap);
    Vector table(static_cast<Index>(walk.count()));
    walk.for_each([&](const Trajectory& traj, std::uint64_t rank) {
        table[static_cast<Index>(rank)] = reward(traj);
    });
    return table;
}

ObjectivePoint exact_point(const AutoregressivePolicy& pi, const AutoregressivePolicy& beta,
                           const RewardFn& reward, int total_len, std::span<const TokenId> prefix,
                           std::uint64_t cap) {
    return point_of(trajectory_table(pi, total_len, prefix, cap),
                    trajectory_table(beta, total_len, prefix, cap),
                    reward_table(reward, pi.space(), total_len, prefix, cap));
}

ObjectivePoint exact_point_averaged(const AutoregressivePolicy& pi, const AutoregressivePolicy& beta,
                                    const RewardFn& reward, int total_len,
                                    std::span<const std::vector<TokenId>> prefixes,
                                    std::uint64_t cap) {
    if (prefixes.empty()) throw std::invalid_argument("exact_point_averaged: no prefixes");
    ObjectivePoint mean;
    for (const auto& prefix : prefixes) {
        const ObjectivePoint pt = exact_point(pi, beta, reward, total_len, prefix, cap);
        mean.e_log_beta += pt.e_log_beta;
        mean.e_reward += pt.e_reward;
        mean.entropy += pt.entropy;
    }
    const auto n = static_cast<Scalar>(prefixes.size());
    mean.e_log_beta /= n;
    mean.e_reward /= n;
    mean.entropy /= n;
    return mean;
}

Scalar kl(const AutoregressivePolicy& pi, const AutoregressivePolicy& beta, int total_len,
          std::span<const TokenId> prefix, std::uint64_t cap) {
    return kl_of(trajectory_table(pi, total_len, prefix, cap),
                 trajectory_table(beta, total_len, prefix, cap));
}

Scalar kl_tilted(const AutoregressivePolicy& pi, const AutoregressivePolicy& beta,
                 const RewardFn& reward, int total_len, std::span<const TokenId> prefix,
                 std::uint64_t cap) {
    return kl_tilted_of(trajectory_table(pi, total_len, prefix, cap),
                        trajectory_table(beta, total_len, prefix, cap),
                        reward_table(reward, pi.space(), total_len, prefix, cap));
}

TiltedPolicy tilted_optimal(const AutoregressivePolicy& beta, const RewardFn& reward,
                            int total_len, std::span<const TokenId> prefix, std::uint64_t cap) {
    TiltedTable table = tilt_table(trajectory_table(beta, total_len, prefix, cap),
                                   reward_table(reward, beta.space(), total_len, prefix, cap));
    return TiltedPolicy(std::move(table.probs), table.partition, beta.space(), total_len,
                        std::vector<TokenId>(prefix.begin(), prefix.end()));
}

Scalar improvement_margin(const AutoregressivePolicy& pi, const AutoregressivePolicy& beta,
                          const RewardFn& reward, int total_len, std::span<const TokenId> prefix,
                          std::uint64_t cap) {
    const ObjectivePoint pt = exact_point(pi, beta, reward, total_len, prefix, cap);
    return pt.objective_sum();
}

McPoint mc_point(std::span<const Trajectory> samples, const AutoregressivePolicy& beta,
                 const AutoregressivePolicy& pi, const RewardFn& reward,
                 std::optional<Vector> weights) {
    if (samples.empty()) throw std::invalid_argument("mc_point: empty sample set");
    const auto n = static_cast<Index>(samples.size());
    Vector w = weights ? std::move(*weights) : Vector::Ones(n);
    if (w.size() != n) throw std::invalid_argument("mc_point: weight/sample size mismatch");
    const Scalar wsum = w.sum();
    if (!(wsum > Scalar(0))) throw std::invalid_argument("mc_point: weights must have positive mass");

    Vector r(n), lb(n), nlp(n);
    for (Index i = 0; i < n; ++i) {
        const Trajectory& traj = samples[static_cast<std::size_t>(i)];
        r[i] = reward(traj);
        lb[i] = log_prob(beta, traj);
        nlp[i] = -log_prob(pi, traj);
    }

    auto mean_se = [&](const Vector& x, Scalar& mean, Scalar& se) {
        mean = w.dot(x) / wsum;
        const Vector centered = x.array() - mean;
        const Scalar var = w.dot(centered.cwiseProduct(centered)) / wsum;
        se = n > 1 ? std::sqrt(var / static_cast<Scalar>(n)) : Scalar(0);
    };

    McPoint out;
    out.sample_count = samples.size();
    mean_se(r, out.point.e_reward, out.std_error.e_reward);
    mean_se(lb, out.point.e_log_beta, out.std_error.e_log_beta);
    mean_se(nlp, out.point.entropy, out.std_error.entropy);
    out.avg_reward = out.point.e_reward;
    return out;
}

}  // namespace rlm
