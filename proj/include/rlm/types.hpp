#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>

namespace rlm {

using Scalar = double;
using Index = Eigen::Index;
using TokenId = std::int32_t;

// Dense column vector / row-major table. Rows of Matrix are per-context slots,
// so row access must be contiguous.
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// x*ln(y) with the 0*ln(0) = 0 convention used by entropy and KL sums.
inline Scalar xlogy(Scalar x, Scalar y) noexcept {
    return x > Scalar(0) ? x * std::log(y) : Scalar(0);
}

}  // namespace rlm
