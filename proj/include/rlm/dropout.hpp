#pragma once

#include "rlm/rng.hpp"
#include "rlm/types.hpp"

#include <string>

namespace rlm {

struct DropoutConfig {
    enum class Kind { none, random, quantile };

    Kind kind = Kind::none;
    Scalar gamma = 0;  // fraction of the batch whose rewards are zeroed

    void validate() const;
    const char* name() const noexcept;
};

DropoutConfig::Kind dropout_kind_from_name(const std::string& name);

// floor(gamma * batch), with a guard against 0.3*10 == 2.999... artifacts.
Index dropout_count(Index batch, Scalar gamma);

// Zeroes the floor(gamma*B) smallest rewards, ascending sort with stable
// original-index tie-breaking. Positions of survivors are preserved.
Vector quantile_dropout(const Vector& rewards, Scalar gamma);

// Zeroes floor(gamma*B) positions chosen uniformly without replacement.
Vector random_dropout(const Vector& rewards, Scalar gamma, RngStream& rng);

Vector apply_dropout(const DropoutConfig& config, const Vector& rewards, RngStream& rng);

}  // namespace rlm
