#include "rlm/policy.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace rlm {

void DecodingStrategy::validate(int vocab) const {
    if (temperature <= Scalar(0))
        throw std::invalid_argument("DecodingStrategy: temperature must be positive");
    if (kind == Kind::topk && (k < 1 || k > vocab))
        throw std::invalid_argument("DecodingStrategy: topk requires 1 <= k <= vocab");
}

const char* DecodingStrategy::name() const noexcept {
    switch (kind) {
        case Kind::greedy: return "greedy";
        case Kind::stochastic: return "stochastic";
        case Kind::topk: return "topk";
    }
    return "?";
}

DecodingStrategy decoding_from_name(const std::string& name, int k, Scalar temperature) {
    if (name == "greedy") return DecodingStrategy::greedy();
    if (name == "stochastic") return DecodingStrategy::stochastic(temperature);
    if (name == "topk") return DecodingStrategy::top_k(k, temperature);
    throw std::invalid_argument("unknown decoding strategy: " + name);
}

void Corpus::validate(const ActionSpace& space) const {
    for (const auto& seq : sequences)
        for (TokenId id : seq)
            if (!space.contains(id))
                throw std::invalid_argument("Corpus: token id outside action space");
    if (!labels.empty() && labels.size() != sequences.size())
        throw std::invalid_argument("Corpus: labels must cover every sequence");
}

namespace {

Index context_table_rows(int vocab, int order) {
    std::uint64_t rows = 1;
    const auto alphabet = static_cast<std::uint64_t>(vocab) + 1;  // + begin marker
    for (int i = 0; i < order; ++i) {
        rows *= alphabet;
        if (rows > (std::uint64_t(1) << 24))
            throw std::invalid_argument("AutoregressivePolicy: context table too large");
    }
    return static_cast<Index>(rows);
}

Vector log_softmax(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
    const Scalar m = row.maxCoeff();
    Vector shifted = (row.transpose().array() - m).matrix();
    const Scalar lse = std::log(shifted.array().exp().sum());
    return (shifted.array() - lse).matrix();
}

}  // namespace

AutoregressivePolicy::AutoregressivePolicy(ActionSpace space, int order, PolicyRole role)
    : space_(space), order_(order), role_(role) {
    if (order < 0) throw std::invalid_argument("AutoregressivePolicy: order must be >= 0");
    logits_ = Matrix::Zero(context_table_rows(space_.size, order_), space_.size);
}

Index AutoregressivePolicy::context_index(std::span<const TokenId> history) const {
    const auto alphabet = static_cast<Index>(space_.size) + 1;
    Index idx = 0;
    const int have = static_cast<int>(history.size());
    for (int i = 0; i < order_; ++i) {
        // oldest slot first; missing history slots hold the begin marker
        const int pos = have - order_ + i;
        const TokenId sym = pos >= 0 ? history[static_cast<std::size_t>(pos)] : begin_marker();
        idx = idx * alphabet + static_cast<Index>(sym);
    }
    return idx;
}

Index AutoregressivePolicy::context_index(const Trajectory& traj, int t) const {
    return context_index(std::span<const TokenId>(traj.tokens.data(), static_cast<std::size_t>(t)));
}

Vector AutoregressivePolicy::conditional(Index ctx) const {
    Vector lp = log_conditional(ctx);
    return lp.array().exp().matrix();
}

Vector AutoregressivePolicy::log_conditional(Index ctx) const {
    return log_softmax(logits_.row(ctx));
}

AutoregressivePolicy fit_ngram(const Corpus& corpus, ActionSpace space, int order, Scalar smoothing) {
    if (corpus.sequences.empty()) throw std::invalid_argument("fit_ngram: empty corpus");
    if (!(smoothing > Scalar(0))) throw std::invalid_argument("fit_ngram: smoothing must be > 0");
    corpus.validate(space);

    AutoregressivePolicy policy(space, order, PolicyRole::behavior);
    Matrix counts = Matrix::Zero(policy.context_count(), space.size);
    for (const auto& seq : corpus.sequences) {
        Trajectory traj(seq, 0);
        traj.prefix_len = 0;
        for (int t = 0; t < static_cast<int>(seq.size()); ++t) {
            const Index ctx = policy.context_index(traj, t);
            counts(ctx, seq[static_cast<std::size_t>(t)]) += Scalar(1);
        }
    }
    const Scalar v = static_cast<Scalar>(space.size);
    for (Index c = 0; c < counts.rows(); ++c) {
        const Scalar total = counts.row(c).sum() + v * smoothing;
        policy.logits().row(c) =
            ((counts.row(c).array() + smoothing).log() - std::log(total)).matrix();
    }
    return policy;
}

Scalar log_prob(const AutoregressivePolicy& policy, const Trajectory& traj) {
    validate(traj, policy.space());
    Scalar total = 0;
    for (int t = traj.prefix_len; t < traj.length(); ++t) {
        const Index ctx = policy.context_index(traj, t);
        total += policy.log_conditional(ctx)[traj.tokens[static_cast<std::size_t>(t)]];
    }
    return total;
}

Categorical next_token_distribution(const AutoregressivePolicy& policy, Index ctx,
                                    const DecodingStrategy& strategy) {
    strategy.validate(policy.vocab());
    const int v = policy.vocab();

    if (strategy.kind == DecodingStrategy::Kind::greedy) {
        const auto row = policy.logits().row(ctx);
        Index best = 0;
        for (Index i = 1; i < row.size(); ++i)
            if (row[i] > row[best]) best = i;  // ties keep the lowest id
        Vector point = Vector::Zero(v);
        point[best] = Scalar(1);
        return Categorical(std::move(point));
    }

    Vector scaled = log_softmax(policy.logits().row(ctx) / strategy.temperature);
    Vector probs = scaled.array().exp().matrix();
    if (strategy.kind == DecodingStrategy::Kind::stochastic) return Categorical(std::move(probs));

    // topk: keep the k most probable tokens (ties to the lowest id), renormalize
    std::vector<Index> order(static_cast<std::size_t>(v));
    std::iota(order.begin(), order.end(), Index(0));
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return probs[a] > probs[b]; });
    Vector kept = Vector::Zero(v);
    Scalar mass = 0;
    for (int i = 0; i < strategy.k; ++i) mass += probs[order[static_cast<std::size_t>(i)]];
    for (int i = 0; i < strategy.k; ++i) {
        const Index id = order[static_cast<std::size_t>(i)];
        kept[id] = probs[id] / mass;
    }
    return Categorical(std::move(kept));
}

Trajectory decode(const AutoregressivePolicy& policy, std::span<const TokenId> prefix,
                  int total_len, const DecodingStrategy& strategy, RngStream& rng) {
    if (static_cast<int>(prefix.size()) >= total_len)
        throw std::invalid_argument("decode: prefix must be shorter than total length");
    strategy.validate(policy.vocab());

    Trajectory traj(std::vector<TokenId>(prefix.begin(), prefix.end()),
                    static_cast<int>(prefix.size()));
    traj.tokens.reserve(static_cast<std::size_t>(total_len));
    for (int t = traj.prefix_len; t < total_len; ++t) {
        const Index ctx = policy.context_index(
            std::span<const TokenId>(traj.tokens.data(), traj.tokens.size()));
        const Categorical dist = next_token_distribution(policy, ctx, strategy);
        traj.tokens.push_back(sample_categorical(dist, rng));
    }
    return traj;
}

Scalar policy_entropy_exact(const AutoregressivePolicy& policy, int total_len,
                            std::span<const TokenId> prefix, std::uint64_t cap) {
    TrajectoryEnumerator walk(policy.space(), total_len,
                              std::vector<TokenId>(prefix.begin(), prefix.end()), cap);
    Scalar h = 0;
    walk.for_each([&](const Trajectory& traj, std::uint64_t) {
        const Scalar lp = log_prob(policy, traj);
        h -= std::exp(lp) * lp;
    });
    return std::max(h, Scalar(0));
}

nlohmann::json policy_to_json(const AutoregressivePolicy& policy) {
    nlohmann::json rows = nlohmann::json::array();
    const auto alphabet = static_cast<Index>(policy.vocab()) + 1;
    for (Index c = 0; c < policy.context_count(); ++c) {
        std::vector<int> ctx(static_cast<std::size_t>(policy.order()));
        Index rem = c;
        for (int i = policy.order() - 1; i >= 0; --i) {
            ctx[static_cast<std::size_t>(i)] = static_cast<int>(rem % alphabet);
            rem /= alphabet;
        }
        std::vector<Scalar> row(policy.logits().row(c).begin(), policy.logits().row(c).end());
        rows.push_back({{"context", ctx}, {"logits", row}});
    }
    return {{"format", "rlm-policy-v1"},
            {"vocab", policy.vocab()},
            {"order", policy.order()},
            {"role", policy.role() == PolicyRole::behavior ? "behavior" : "target"},
            {"rows", std::move(rows)}};
}

AutoregressivePolicy policy_from_json(const nlohmann::json& doc) {
    if (doc.value("format", "") != "rlm-policy-v1")
        throw std::invalid_argument("policy_from_json: unrecognized format");
    const int vocab = doc.at("vocab").get<int>();
    const int order = doc.at("order").get<int>();
    const auto role =
        doc.value("role", "target") == std::string("behavior") ? PolicyRole::behavior : PolicyRole::target;
    AutoregressivePolicy policy(ActionSpace(vocab), order, role);
    const auto& rows = doc.at("rows");
    if (static_cast<Index>(rows.size()) != policy.context_count())
        throw std::invalid_argument("policy_from_json: row count does not match order/vocab");
    for (Index c = 0; c < policy.context_count(); ++c) {
        const auto row = rows[static_cast<std::size_t>(c)].at("logits").get<std::vector<Scalar>>();
        if (static_cast<Index>(row.size()) != static_cast<Index>(vocab))
            throw std::invalid_argument("policy_from_json: logit row has wrong width");
        for (Index a = 0; a < static_cast<Index>(vocab); ++a)
            policy.logits()(c, a) = row[static_cast<std::size_t>(a)];
    }
    return policy;
}

void save_policy(const AutoregressivePolicy& policy, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_policy: cannot open " + path);
    out << policy_to_json(policy).dump(2) << '\n';
}

AutoregressivePolicy load_policy(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_policy: cannot open " + path);
    nlohmann::json doc;
    in >> doc;
    return policy_from_json(doc);
}

}  // namespace rlm
