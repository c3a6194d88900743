#pragma once

#include "rlm/policy.hpp"
#include "rlm/seqcore.hpp"
#include "rlm/types.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace rlm {

// Bounded trajectory score in [0, 1]; evaluation clamps and is deterministic
// for fixed parameters.
class RewardFn {
public:
    using Fn = std::function<Scalar(const Trajectory&)>;

    RewardFn() : fn_([](const Trajectory&) { return Scalar(0); }) {}
    explicit RewardFn(Fn fn) : fn_(std::move(fn)) {}

    Scalar operator()(const Trajectory& traj) const {
        return std::clamp(fn_(traj), Scalar(0), Scalar(1));
    }

    static RewardFn constant(Scalar value);
    // Reward looked up by lexicographic suffix rank; handy for exact instances.
    static RewardFn from_table(Vector by_rank, int vocab);
    RewardFn scaled(Scalar factor) const;

private:
    Fn fn_;
};

// Coordinates of a policy in objective space.
struct ObjectivePoint {
    Scalar e_log_beta = 0;  // E_pi[ln beta], nats
    Scalar e_reward = 0;    // E_pi[R]
    Scalar entropy = 0;     // H[pi], nats

    Scalar objective_sum() const noexcept { return e_log_beta + e_reward; }
};

// ---- Table space ----------------------------------------------------------
// Vectors indexed by lexicographic suffix rank for one fixed prefix. These are
// the exact kernels everything else reduces to.

template <typename D>
Scalar entropy_of(const Eigen::MatrixBase<D>& p) {
    Scalar h = 0;
    for (Index i = 0; i < p.size(); ++i) h -= xlogy(p[i], p[i]);
    return h < Scalar(0) ? Scalar(0) : h;
}

// KL(p||q); +inf when p puts mass where q has none.
template <typename D1, typename D2>
Scalar kl_of(const Eigen::MatrixBase<D1>& p, const Eigen::MatrixBase<D2>& q) {
    Scalar kl = 0;
    for (Index i = 0; i < p.size(); ++i) {
        if (p[i] <= Scalar(0)) continue;
        if (q[i] <= Scalar(0)) return std::numeric_limits<Scalar>::infinity();
        kl += p[i] * std::log(p[i] / q[i]);
    }
    return kl;
}

Scalar total_variation(const Vector& p, const Vector& q);

struct TiltedTable {
    Vector probs;      // beta * exp(reward), normalized
    Scalar partition;  // Z = sum beta * exp(reward)

    Scalar log_partition() const { return std::log(partition); }
};

TiltedTable tilt_table(const Vector& beta, const Vector& reward);

ObjectivePoint point_of(const Vector& pi, const Vector& beta, const Vector& reward);
Scalar kl_tilted_of(const Vector& pi, const Vector& beta, const Vector& reward);

// ---- Policy space ---------------------------------------------------------

// Materializes the policy's suffix distribution for a fixed prefix.
Vector trajectory_table(const AutoregressivePolicy& policy, int total_len,
                        std::span<const TokenId> prefix,
                        std::uint64_t cap = kDefaultEnumerationCap);

Vector reward_table(const RewardFn& reward, ActionSpace space, int total_len,
                    std::span<const TokenId> prefix,
                    std::uint64_t cap = kDefaultEnumerationCap);

ObjectivePoint exact_point(const AutoregressivePolicy& pi, const AutoregressivePolicy& beta,
                           const RewardFn& reward, int total_len, std::span<const TokenId> prefix,
                           std::uint64_t cap = kDefaultEnumerationCap);

// Plain average over a prefix set.
ObjectivePoint exact_point_averaged(const AutoregressivePolicy& pi, const AutoregressivePolicy& beta,
                                    const RewardFn& reward, int total_len,
                                    std::span<const std::vector<TokenId>> prefixes,
                                    std::uint64_t cap = kDefaultEnumerationCap);

Scalar kl(const AutoregressivePolicy& pi, const AutoregressivePolicy& beta, int total_len,
          std::span<const TokenId> prefix, std::uint64_t cap = kDefaultEnumerationCap);

Scalar kl_tilted(const AutoregressivePolicy& pi, const AutoregressivePolicy& beta,
                 const RewardFn& reward, int total_len, std::span<const TokenId> prefix,
                 std::uint64_t cap = kDefaultEnumerationCap);

// Distribution proportional to beta * exp(R) over the suffixes of one prefix,
// with its partition recorded.
class TiltedPolicy {
public:
    TiltedPolicy(Vector probs, Scalar partition, ActionSpace space, int total_len,
                 std::vector<TokenId> prefix)
        : probs_(std::move(probs)), partition_(partition), space_(space), total_len_(total_len),
          prefix_(std::move(prefix)) {}

    const Vector& probs() const noexcept { return probs_; }
    Scalar partition() const noexcept { return partition_; }
    Scalar log_partition() const { return std::log(partition_); }
    Scalar prob(const Trajectory& traj) const {
        return probs_[static_cast<Index>(trajectory_rank(traj, space_.size))];
    }
    int total_len() const noexcept { return total_len_; }
    std::span<const TokenId> prefix() const noexcept { return prefix_; }

private:
    Vector probs_;
    Scalar partition_;
    ActionSpace space_;
    int total_len_;
    std::vector<TokenId> prefix_;
};

TiltedPolicy tilted_optimal(const AutoregressivePolicy& beta, const RewardFn& reward,
                            int total_len, std::span<const TokenId> prefix,
                            std::uint64_t cap = kDefaultEnumerationCap);

// Delta = E_pi[R] + E_pi[ln beta]; positive values witness room for
// simultaneous improvement of both objectives.
Scalar improvement_margin(const AutoregressivePolicy& pi, const AutoregressivePolicy& beta,
                          const RewardFn& reward, int total_len, std::span<const TokenId> prefix,
                          std::uint64_t cap = kDefaultEnumerationCap);

// Sample-mean estimates with standard errors.
struct McPoint {
    ObjectivePoint point;
    ObjectivePoint std_error;
    Scalar avg_reward = 0;
    std::size_t sample_count = 0;
};

McPoint mc_point(std::span<const Trajectory> samples, const AutoregressivePolicy& beta,
                 const AutoregressivePolicy& pi, const RewardFn& reward,
                 std::optional<Vector> weights = std::nullopt);

}  // namespace rlm
