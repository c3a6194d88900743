#pragma once

#include "rlm/seqcore.hpp"
#include "rlm/types.hpp"

#include <json.hpp>

#include <span>
#include <string>
#include <vector>

namespace rlm {

enum class PolicyRole { behavior, target };

// Next-token selection rule used when generating from a policy.
struct DecodingStrategy {
    enum class Kind { greedy, stochastic, topk };

    Kind kind = Kind::stochastic;
    int k = 10;                // topk only
    Scalar temperature = 1.0;  // stochastic and topk

    static DecodingStrategy greedy() { return {Kind::greedy, 1, 1.0}; }
    static DecodingStrategy stochastic(Scalar temp = 1.0) { return {Kind::stochastic, 1, temp}; }
    static DecodingStrategy top_k(int k = 10, Scalar temp = 0.3) { return {Kind::topk, k, temp}; }

    void validate(int vocab) const;
    const char* name() const noexcept;
};

DecodingStrategy decoding_from_name(const std::string& name, int k, Scalar temperature);

// Token-id sequences with optional per-sequence attribute labels.
struct Corpus {
    std::vector<std::vector<TokenId>> sequences;
    std::vector<int> labels;  // empty or one per sequence

    bool has_labels() const noexcept { return !labels.empty(); }
    void validate(const ActionSpace& space) const;
};

// Order-k tabular autoregressive policy. Conditionals are softmax rows of a
// dense logits table indexed by the k most recent tokens; positions before
// the sequence start are padded with a begin marker (id == vocab), so the
// context alphabet has vocab+1 symbols and the table is total.
class AutoregressivePolicy {
public:
    AutoregressivePolicy(ActionSpace space, int order, PolicyRole role = PolicyRole::target);

    int vocab() const noexcept { return space_.size; }
    int order() const noexcept { return order_; }
    const ActionSpace& space() const noexcept { return space_; }
    PolicyRole role() const noexcept { return role_; }
    void set_role(PolicyRole role) noexcept { role_ = role; }
    TokenId begin_marker() const noexcept { return static_cast<TokenId>(space_.size); }

    Index context_count() const noexcept { return logits_.rows(); }
    Matrix& logits() noexcept { return logits_; }
    const Matrix& logits() const noexcept { return logits_; }

    // Row index for the context ending just before position t of traj.
    Index context_index(const Trajectory& traj, int t) const;
    Index context_index(std::span<const TokenId> history) const;

    Vector conditional(Index ctx) const;      // softmax of the row
    Vector log_conditional(Index ctx) const;  // log-softmax of the row

private:
    ActionSpace space_;
    int order_;
    PolicyRole role_;
    Matrix logits_;  // context_count x vocab
};

// Additive-smoothed n-gram estimate of the corpus, the stand-in for a
// pre-trained behavior model: logits[ctx][a] = ln(count+kappa) - ln(total+V*kappa).
AutoregressivePolicy fit_ngram(const Corpus& corpus, ActionSpace space, int order, Scalar smoothing);

// Sum of log conditionals over the generated positions only; the prefix is
// conditioned on, never scored.
Scalar log_prob(const AutoregressivePolicy& policy, const Trajectory& traj);

// The effective next-token distribution a strategy induces at one context:
// greedy is a point mass on the argmax (ties to the lowest id), stochastic is
// the temperature-scaled conditional, topk renormalizes the k most probable
// temperature-scaled tokens.
Categorical next_token_distribution(const AutoregressivePolicy& policy, Index ctx,
                                    const DecodingStrategy& strategy);

Trajectory decode(const AutoregressivePolicy& policy, std::span<const TokenId> prefix,
                  int total_len, const DecodingStrategy& strategy, RngStream& rng);

// Exact entropy of the trajectory distribution conditioned on the prefix.
Scalar policy_entropy_exact(const AutoregressivePolicy& policy, int total_len,
                            std::span<const TokenId> prefix,
                            std::uint64_t cap = kDefaultEnumerationCap);

nlohmann::json policy_to_json(const AutoregressivePolicy& policy);
AutoregressivePolicy policy_from_json(const nlohmann::json& doc);
void save_policy(const AutoregressivePolicy& policy, const std::string& path);
AutoregressivePolicy load_policy(const std::string& path);

}  // namespace rlm
