#include "rlm/dropout.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace rlm {

void DropoutConfig::validate() const {
    if (gamma < Scalar(0) || gamma >= Scalar(1))
        throw std::invalid_argument("DropoutConfig: gamma must lie in [0, 1)");
}

const char* DropoutConfig::name() const noexcept {
    switch (kind) {
        case Kind::none: return "none";
        case Kind::random: return "random";
        case Kind::quantile: return "quantile";
    }
    return "?";
}

DropoutConfig::Kind dropout_kind_from_name(const std::string& name) {
    if (name == "none") return DropoutConfig::Kind::none;
    if (name == "random") return DropoutConfig::Kind::random;
    if (name == "quantile") return DropoutConfig::Kind::quantile;
    throw std::invalid_argument("unknown dropout kind: " + name);
}

Index dropout_count(Index batch, Scalar gamma) {
    if (batch < 1) throw std::invalid_argument("dropout_count: batch must be >= 1");
    if (gamma < Scalar(0) || gamma >= Scalar(1))
        throw std::invalid_argument("dropout_count: gamma must lie in [0, 1)");
    return static_cast<Index>(std::floor(gamma * static_cast<Scalar>(batch) + 1e-9));
}

Vector quantile_dropout(const Vector& rewards, Scalar gamma) {
    const Index b = rewards.size();
    const Index m = dropout_count(b, gamma);
    Vector out = rewards;
    if (m == 0) return out;

    std::vector<Index> order(static_cast<std::size_t>(b));
    std::iota(order.begin(), order.end(), Index(0));
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index c) { return rewards[a] < rewards[c]; });
    for (Index i = 0; i < m; ++i) out[order[static_cast<std::size_t>(i)]] = Scalar(0);
    return out;
}

Vector random_dropout(const Vector& rewards, Scalar gamma, RngStream& rng) {
    const Index b = rewards.size();
    const Index m = dropout_count(b, gamma);
    Vector out = rewards;
    if (m == 0) return out;

    // partial Fisher-Yates over the index set
    std::vector<Index> order(static_cast<std::size_t>(b));
    std::iota(order.begin(), order.end(), Index(0));
    for (Index i = 0; i < m; ++i) {
        const auto j = i + static_cast<Index>(rng.next_below(static_cast<std::uint64_t>(b - i)));
        std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
        out[order[static_cast<std::size_t>(i)]] = Scalar(0);
    }
    return out;
}

Vector apply_dropout(const DropoutConfig& config, const Vector& rewards, RngStream& rng) {
    config.validate();
    switch (config.kind) {
        case DropoutConfig::Kind::none: return rewards;
        case DropoutConfig::Kind::random: return random_dropout(rewards, config.gamma, rng);
        case DropoutConfig::Kind::quantile: return quantile_dropout(rewards, config.gamma);
    }
    return rewards;
}

}  // namespace rlm
