#pragma once

#include "rlm/objectives.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace rlm {

// Two sides of the reward upper bound, generalized with the tilt partition:
// E_pi[R] <= KL(pi||beta) + ln Z. The slack is KL(pi||tilt) and is therefore
// nonnegative for every instance; Z = 1 recovers the exact bound
// E_pi[R] <= KL(pi||beta).
struct RuboReport {
    Scalar e_reward = 0;
    Scalar kl_div = 0;
    Scalar ln_partition = 0;
    Scalar slack = 0;  // kl_div + ln_partition - e_reward
    bool holds = false;
};

RuboReport check_rubo(const Vector& pi, const Vector& beta, const Vector& reward);
RuboReport check_rubo(const AutoregressivePolicy& beta, const RewardFn& reward,
                      const AutoregressivePolicy& pi, int total_len,
                      std::span<const TokenId> prefix);

// Point-mass identity R(tau*) = -ln beta(tau*): residual of a constructed
// instance. Instances with beta(tau*) < 1/e cannot carry a reward in [0,1]
// and are rejected.
Scalar check_optimality_identity(Scalar beta_at_star, Scalar reward_at_star);
Scalar check_optimality_identity(const AutoregressivePolicy& beta, const RewardFn& reward,
                                 const Trajectory& tau_star);

struct ImprovementReport {
    Scalar delta = 0;       // E_pi[R] + E_pi[ln beta]
    Scalar tv_to_tilt = 0;  // total variation between pi and the normalized tilt
    bool consistent = false;  // delta <= 0 or tv > 1e-9
};

ImprovementReport check_improvement(const Vector& pi, const Vector& beta, const Vector& reward);
ImprovementReport check_improvement(const AutoregressivePolicy& beta, const RewardFn& reward,
                                    const AutoregressivePolicy& pi, int total_len,
                                    std::span<const TokenId> prefix);

// |(-sum beta e^k ln beta) - e^k H(beta)| over the unnormalized tilt beta*e^k,
// exactly as the constant-reward scaling identity states it.
Scalar check_entropy_scaling(const Vector& beta, Scalar k);

struct DominanceVerdict {
    ObjectivePoint point_a;
    ObjectivePoint point_b;
    bool a_dominates_b = false;
};

// Componentwise comparison on (e_log_beta, e_reward): both at least as good,
// at least one strictly better.
DominanceVerdict check_dominance(const ObjectivePoint& a, const ObjectivePoint& b);

// Stable non-dominated marking over a point list; exact duplicates keep only
// their first occurrence.
std::vector<bool> mark_non_dominated(std::span<const ObjectivePoint> points);

struct SuiteConfig {
    std::uint64_t seed = 1;
    int max_vocab = 4;
    int max_suffix_len = 4;
    long rubo_instances = 10000;
    long z1_instances = 200;
    long decomposition_instances = 1000;
    long optimality_instances = 100;
    long improvement_instances = 10000;
    long entropy_scaling_instances = 1000;
    long tilt_instances = 100;
    long tilt_perturbations = 100;
    long dropout_instances = 500;
    // Negative control: replaces quantile dropout with a variant that zeroes
    // the largest rewards, which must make the contract check fail.
    bool mutate_dropout_drop_max = false;
};

struct CheckResult {
    std::string name;
    long instances = 0;
    long failures = 0;
    Scalar worst_slack = 0;
    std::string note;

    bool passed() const noexcept { return failures == 0; }
};

struct SuiteReport {
    std::vector<CheckResult> checks;

    bool all_passed() const noexcept {
        for (const auto& c : checks)
            if (!c.passed()) return false;
        return true;
    }
};

SuiteReport run_suite(const SuiteConfig& config);

nlohmann::json suite_report_json(const SuiteReport& report);
std::string suite_report_text(const SuiteReport& report);

// Random trajectory-space instance used by the suite and by tests.
struct TableInstance {
    int vocab = 2;
    int suffix_len = 1;
    Vector pi;
    Vector beta;
    Vector reward;
};

TableInstance random_table_instance(RngStream& rng, int max_vocab = 4, int max_suffix_len = 4);

}  // namespace rlm
