#include "rlm/verify.hpp"

#include "rlm/dropout.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace rlm {

RuboReport check_rubo(const Vector& pi, const Vector& beta, const Vector& reward) {
    RuboReport report;
    report.e_reward = pi.dot(reward);
    report.kl_div = kl_of(pi, beta);
    report.ln_partition = tilt_table(beta, reward).log_partition();
    report.slack = report.kl_div + report.ln_partition - report.e_reward;
    report.holds = report.slack >= Scalar(-1e-9);
    return report;
}

RuboReport check_rubo(const AutoregressivePolicy& beta, const RewardFn& reward,
                      const AutoregressivePolicy& pi, int total_len,
                      std::span<const TokenId> prefix) {
    return check_rubo(trajectory_table(pi, total_len, prefix),
                      trajectory_table(beta, total_len, prefix),
                      reward_table(reward, beta.space(), total_len, prefix));
}

Scalar check_optimality_identity(Scalar beta_at_star, Scalar reward_at_star) {
    if (beta_at_star < std::exp(Scalar(-1)) || beta_at_star > Scalar(1))
        throw std::invalid_argument(
            "check_optimality_identity: beta(tau*) outside [1/e, 1], instance unconstructible "
            "under rewards in [0, 1]");
    return std::abs(reward_at_star + std::log(beta_at_star));
}

Scalar check_optimality_identity(const AutoregressivePolicy& beta, const RewardFn& reward,
                                 const Trajectory& tau_star) {
    return check_optimality_identity(std::exp(log_prob(beta, tau_star)), reward(tau_star));
}

ImprovementReport check_improvement(const Vector& pi, const Vector& beta, const Vector& reward) {
    ImprovementReport report;
    const ObjectivePoint pt = point_of(pi, beta, reward);
    report.delta = pt.objective_sum();
    report.tv_to_tilt = total_variation(pi, tilt_table(beta, reward).probs);
    report.consistent = report.delta <= Scalar(0) || report.tv_to_tilt > Scalar(1e-9);
    return report;
}

ImprovementReport check_improvement(const AutoregressivePolicy& beta, const RewardFn& reward,
                                    const AutoregressivePolicy& pi, int total_len,
                                    std::span<const TokenId> prefix) {
    return check_improvement(trajectory_table(pi, total_len, prefix),
                             trajectory_table(beta, total_len, prefix),
                             reward_table(reward, beta.space(), total_len, prefix));
}

Scalar check_entropy_scaling(const Vector& beta, Scalar k) {
    const Scalar scale = std::exp(k);
    Scalar lhs = 0;
    for (Index i = 0; i < beta.size(); ++i) lhs -= scale * xlogy(beta[i], beta[i]);
    return std::abs(lhs - scale * entropy_of(beta));
}

DominanceVerdict check_dominance(const ObjectivePoint& a, const ObjectivePoint& b) {
    DominanceVerdict verdict{a, b, false};
    const bool no_worse =
        a.e_log_beta >= b.e_log_beta && a.e_reward >= b.e_reward;
    const bool strictly_better =
        a.e_log_beta > b.e_log_beta || a.e_reward > b.e_reward;
    verdict.a_dominates_b = no_worse && strictly_better;
    return verdict;
}

std::vector<bool> mark_non_dominated(std::span<const ObjectivePoint> points) {
    const std::size_t n = points.size();
    std::vector<bool> keep(n, true);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < n && keep[j]; ++i) {
            if (i == j) continue;
            if (check_dominance(points[i], points[j]).a_dominates_b) keep[j] = false;
            // duplicates keep only the first occurrence
            if (i < j && points[i].e_log_beta == points[j].e_log_beta &&
                points[i].e_reward == points[j].e_reward)
                keep[j] = false;
        }
    }
    return keep;
}

namespace {

Vector random_distribution(RngStream& rng, Index dim) {
    Vector v(dim);
    for (Index i = 0; i < dim; ++i) v[i] = rng.next_open_double();
    return v / v.sum();
}

Vector random_rewards(RngStream& rng, Index dim) {
    Vector v(dim);
    for (Index i = 0; i < dim; ++i) v[i] = rng.next_double();
    return v;
}

// Concentrates mass at one cell so that improvement margins go positive often
// enough to exercise the non-vacuous branch of the improvement check.
void concentrate(RngStream& rng, TableInstance& inst) {
    const Index at = static_cast<Index>(rng.next_below(static_cast<std::uint64_t>(inst.pi.size())));
    const Scalar w = 0.7 + 0.25 * rng.next_double();
    inst.beta = (1 - w) * inst.beta;
    inst.beta[at] += w;
    inst.pi = (1 - w) * inst.pi;
    inst.pi[at] += w;
    inst.reward[at] = 0.5 + 0.5 * rng.next_double();
}

}  // namespace

TableInstance random_table_instance(RngStream& rng, int max_vocab, int max_suffix_len) {
    TableInstance inst;
    inst.vocab = 2 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(max_vocab - 1)));
    inst.suffix_len = 1 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(max_suffix_len)));
    Index dim = 1;
    for (int i = 0; i < inst.suffix_len; ++i) dim *= inst.vocab;
    inst.pi = random_distribution(rng, dim);
    inst.beta = random_distribution(rng, dim);
    inst.reward = random_rewards(rng, dim);
    if (rng.next_double() < 0.25) concentrate(rng, inst);
    return inst;
}

namespace {

// Mutant used by the negative control: zeroes the m *largest* rewards.
Vector quantile_dropout_drop_max(const Vector& rewards, Scalar gamma) {
    const Index b = rewards.size();
    const Index m = dropout_count(b, gamma);
    Vector out = rewards;
    std::vector<Index> order(static_cast<std::size_t>(b));
    std::iota(order.begin(), order.end(), Index(0));
    std::stable_sort(order.begin(), order.end(),
                     [&](Index x, Index y) { return rewards[x] > rewards[y]; });
    for (Index i = 0; i < m; ++i) out[order[static_cast<std::size_t>(i)]] = Scalar(0);
    return out;
}

CheckResult run_rubo_check(const SuiteConfig& config) {
    CheckResult result{.name = "rubo_generalized",
                       .instances = config.rubo_instances,
                       .failures = 0,
                       .worst_slack = std::numeric_limits<Scalar>::infinity(),
                       .note = "slack = KL + ln Z - E[R], must be >= -1e-9"};
    RngStream rng(config.seed, 0xb0);
    for (long i = 0; i < config.rubo_instances; ++i) {
        const TableInstance inst = random_table_instance(rng, config.max_vocab, config.max_suffix_len);
        const RuboReport report = check_rubo(inst.pi, inst.beta, inst.reward);
        if (!report.holds) ++result.failures;
        result.worst_slack = std::min(result.worst_slack, report.slack);
    }
    if (config.rubo_instances == 0) result.worst_slack = 0;
    return result;
}

CheckResult run_z1_check(const SuiteConfig& config) {
    CheckResult result{.name = "rubo_exact_z1",
                       .instances = config.z1_instances,
                       .failures = 0,
                       .worst_slack = std::numeric_limits<Scalar>::infinity(),
                       .note = "constructed sum(beta e^R) = 1 instances: E[R] <= KL exactly"};
    RngStream rng(config.seed, 0xb1);
    for (long i = 0; i < config.z1_instances; ++i) {
        TableInstance inst = random_table_instance(rng, config.max_vocab, config.max_suffix_len);
        const Index dim = inst.beta.size();
        // support of beta is a strict subset; rewards vanish on it, so Z = 1
        const Index cut = 1 + static_cast<Index>(rng.next_below(static_cast<std::uint64_t>(dim - 1)));
        for (Index j = cut; j < dim; ++j) inst.beta[j] = 0;
        inst.beta /= inst.beta.sum();
        for (Index j = 0; j < cut; ++j) inst.reward[j] = 0;
        // pi restricted to beta's support keeps the KL finite
        for (Index j = cut; j < dim; ++j) inst.pi[j] = 0;
        inst.pi /= inst.pi.sum();

        const RuboReport report = check_rubo(inst.pi, inst.beta, inst.reward);
        const Scalar exact_slack = report.kl_div - report.e_reward;
        if (exact_slack < Scalar(-1e-9) || std::abs(report.ln_partition) > Scalar(1e-9))
            ++result.failures;
        result.worst_slack = std::min(result.worst_slack, exact_slack);
    }
    if (config.z1_instances == 0) result.worst_slack = 0;
    return result;
}

CheckResult run_decomposition_check(const SuiteConfig& config) {
    CheckResult result{.name = "kl_decomposition",
                       .instances = config.decomposition_instances,
                       .failures = 0,
                       .worst_slack = 0,
                       .note = "max |KL(pi||beta e^R) + E[R] + E[ln beta] + H|, must be < 1e-9"};
    RngStream rng(config.seed, 0xb2);
    for (long i = 0; i < config.decomposition_instances; ++i) {
        const TableInstance inst = random_table_instance(rng, config.max_vocab, config.max_suffix_len);
        const ObjectivePoint pt = point_of(inst.pi, inst.beta, inst.reward);
        const Scalar lhs = kl_tilted_of(inst.pi, inst.beta, inst.reward);
        const Scalar residual = std::abs(lhs - (-pt.e_reward - pt.e_log_beta - pt.entropy));
        const Scalar kl_residual =
            std::abs(kl_of(inst.pi, inst.beta) - (-pt.e_log_beta - pt.entropy));
        const Scalar worst = std::max(residual, kl_residual);
        if (worst >= Scalar(1e-9)) ++result.failures;
        result.worst_slack = std::max(result.worst_slack, worst);
    }
    return result;
}

CheckResult run_optimality_check(const SuiteConfig& config) {
    CheckResult result{.name = "optimality_identity",
                       .instances = config.optimality_instances,
                       .failures = 0,
                       .worst_slack = 0,
                       .note = "constructed R = -ln beta point-mass instances; includes one "
                               "negative control that must be detected"};
    RngStream rng(config.seed, 0xb3);
    for (long i = 0; i < config.optimality_instances; ++i) {
        const Scalar b = std::exp(Scalar(-1)) + (1 - std::exp(Scalar(-1))) * rng.next_double();
        const Scalar residual = check_optimality_identity(b, -std::log(b));
        if (residual >= Scalar(1e-9)) ++result.failures;
        result.worst_slack = std::max(result.worst_slack, residual);
    }
    if (config.optimality_instances > 0) {
        // negative control: mismatched reward must be flagged by the residual
        if (check_optimality_identity(Scalar(0.9), Scalar(0.2)) <= Scalar(1e-6)) ++result.failures;
        bool rejected = false;
        try {
            check_optimality_identity(Scalar(0.2), Scalar(1));
        } catch (const std::invalid_argument&) {
            rejected = true;
        }
        if (!rejected) ++result.failures;
    }
    return result;
}

CheckResult run_improvement_check(const SuiteConfig& config) {
    CheckResult result{.name = "improvement_tv",
                       .instances = config.improvement_instances,
                       .failures = 0,
                       .worst_slack = std::numeric_limits<Scalar>::infinity(),
                       .note = "delta > 0 must imply TV(pi, tilt) > 1e-9; worst = min TV among "
                               "positive-delta instances"};
    RngStream rng(config.seed, 0xb4);
    long positive_delta = 0;
    for (long i = 0; i < config.improvement_instances; ++i) {
        const TableInstance inst = random_table_instance(rng, config.max_vocab, config.max_suffix_len);
        const ImprovementReport report = check_improvement(inst.pi, inst.beta, inst.reward);
        if (!report.consistent) ++result.failures;
        if (report.delta > Scalar(0)) {
            ++positive_delta;
            result.worst_slack = std::min(result.worst_slack, report.tv_to_tilt);
        }
    }
    if (positive_delta == 0) result.worst_slack = 0;
    result.note += " (" + std::to_string(positive_delta) + " positive-delta instances)";
    return result;
}

CheckResult run_entropy_scaling_check(const SuiteConfig& config) {
    CheckResult result{.name = "entropy_scaling",
                       .instances = config.entropy_scaling_instances,
                       .failures = 0,
                       .worst_slack = 0,
                       .note = "checked on the unnormalized tilt beta*e^k, as the statement is "
                               "written; max residual must be < 1e-9"};
    RngStream rng(config.seed, 0xb5);
    for (long i = 0; i < config.entropy_scaling_instances; ++i) {
        const TableInstance inst = random_table_instance(rng, config.max_vocab, config.max_suffix_len);
        const Scalar residual = check_entropy_scaling(inst.beta, rng.next_double());
        if (residual >= Scalar(1e-9)) ++result.failures;
        result.worst_slack = std::max(result.worst_slack, residual);
    }
    return result;
}

CheckResult run_tilt_optimality_check(const SuiteConfig& config) {
    CheckResult result{.name = "tilt_optimality",
                       .instances = config.tilt_instances,
                       .failures = 0,
                       .worst_slack = 0,
                       .note = "KL(pi'||beta e^R) - (-ln Z) over random perturbations pi', must "
                               "be >= -1e-12"};
    RngStream rng(config.seed, 0xb6);
    result.worst_slack = std::numeric_limits<Scalar>::infinity();
    for (long i = 0; i < config.tilt_instances; ++i) {
        const TableInstance inst = random_table_instance(rng, config.max_vocab, config.max_suffix_len);
        const TiltedTable tilt = tilt_table(inst.beta, inst.reward);
        const Scalar best = kl_tilted_of(tilt.probs, inst.beta, inst.reward);
        if (std::abs(best + tilt.log_partition()) > Scalar(1e-9)) ++result.failures;
        for (long p = 0; p < config.tilt_perturbations; ++p) {
            const Scalar w = 0.5 * rng.next_open_double();
            const Vector other =
                (1 - w) * tilt.probs + w * random_distribution(rng, tilt.probs.size());
            const Scalar slack = kl_tilted_of(other, inst.beta, inst.reward) - best;
            if (slack < Scalar(-1e-12)) ++result.failures;
            result.worst_slack = std::min(result.worst_slack, slack);
        }
    }
    if (config.tilt_instances == 0 || config.tilt_perturbations == 0) result.worst_slack = 0;
    return result;
}

CheckResult run_dominance_check(const SuiteConfig& config) {
    CheckResult result{.name = "dominance_predicates",
                       .instances = 3,
                       .failures = 0,
                       .worst_slack = 0,
                       .note = "componentwise dominance on (E[ln beta], E[R])"};
    if (config.improvement_instances == 0 && config.rubo_instances == 0) {
        result.instances = 0;
        return result;
    }
    const ObjectivePoint a{-1.0, 0.8, 0};
    const ObjectivePoint b{-1.5, 0.5, 0};
    const ObjectivePoint c{-1.0, 0.5, 0};
    const ObjectivePoint d{-1.5, 0.8, 0};
    if (!check_dominance(a, b).a_dominates_b) ++result.failures;
    if (check_dominance(c, d).a_dominates_b || check_dominance(d, c).a_dominates_b)
        ++result.failures;
    if (check_dominance(a, a).a_dominates_b) ++result.failures;
    return result;
}

CheckResult run_dropout_check(const SuiteConfig& config) {
    CheckResult result{.name = "dropout_contracts",
                       .instances = config.dropout_instances,
                       .failures = 0,
                       .worst_slack = 0,
                       .note = "count, max preservation, survivor nesting, value preservation"};
    if (config.mutate_dropout_drop_max) result.note += " [NEGATIVE CONTROL ACTIVE]";
    RngStream rng(config.seed, 0xb7);
    auto drop = [&](const Vector& r, Scalar gamma) {
        return config.mutate_dropout_drop_max ? quantile_dropout_drop_max(r, gamma)
                                              : quantile_dropout(r, gamma);
    };
    for (long i = 0; i < config.dropout_instances; ++i) {
        const Index b = 1 + static_cast<Index>(rng.next_below(12));
        Vector rewards(b);
        for (Index j = 0; j < b; ++j) rewards[j] = rng.next_open_double();
        const Scalar gamma = 0.999 * rng.next_double();
        const Vector out = drop(rewards, gamma);

        const bool count_ok = (out.array() == Scalar(0)).count() == dropout_count(b, gamma);
        const bool max_ok = out.maxCoeff() == rewards.maxCoeff();
        bool values_ok = true;
        for (Index j = 0; j < b; ++j)
            if (out[j] != Scalar(0) && out[j] != rewards[j]) values_ok = false;
        // survivors under a higher rate must be survivors under the lower one
        bool nested_ok = true;
        const Scalar gamma_hi = gamma + (Scalar(0.999) - gamma) * rng.next_double();
        const Vector out_hi = drop(rewards, gamma_hi);
        for (Index j = 0; j < b; ++j)
            if (out_hi[j] != Scalar(0) && out[j] == Scalar(0)) nested_ok = false;
        if (!count_ok || !max_ok || !values_ok || !nested_ok) ++result.failures;
    }
    return result;
}

}  // namespace

SuiteReport run_suite(const SuiteConfig& config) {
    SuiteReport report;
    auto add = [&](CheckResult result) {
        if (result.instances > 0) report.checks.push_back(std::move(result));
    };
    add(run_rubo_check(config));
    add(run_z1_check(config));
    add(run_decomposition_check(config));
    add(run_optimality_check(config));
    add(run_improvement_check(config));
    add(run_entropy_scaling_check(config));
    add(run_tilt_optimality_check(config));
    add(run_dominance_check(config));
    add(run_dropout_check(config));
    return report;
}

nlohmann::json suite_report_json(const SuiteReport& report) {
    nlohmann::json checks = nlohmann::json::array();
    for (const auto& c : report.checks)
        checks.push_back({{"name", c.name},
                          {"instances", c.instances},
                          {"failures", c.failures},
                          {"worst_slack", c.worst_slack},
                          {"passed", c.passed()},
                          {"note", c.note}});
    return {{"checks", std::move(checks)}, {"all_passed", report.all_passed()}};
}

std::string suite_report_text(const SuiteReport& report) {
    std::ostringstream out;
    for (const auto& c : report.checks) {
        out << (c.passed() ? "PASS" : "FAIL") << "  " << c.name << "  instances=" << c.instances
            << "  failures=" << c.failures << "  worst_slack=" << c.worst_slack << "\n      "
            << c.note << "\n";
    }
    out << (report.all_passed() ? "all checks passed" : "SUITE FAILED") << "\n";
    return out.str();
}

}  // namespace rlm
