#include "rlm/seqcore.hpp"

#include <cmath>
#include <limits>

namespace rlm {

void validate(const Trajectory& traj, const ActionSpace& space) {
    if (traj.prefix_len < 0 || traj.prefix_len >= traj.length())
        throw std::invalid_argument("Trajectory: prefix_len must satisfy 0 <= p < T");
    for (TokenId id : traj.tokens)
        if (!space.contains(id))
            throw std::invalid_argument("Trajectory: token id outside action space");
}

TokenId sample_categorical(const Categorical& dist, RngStream& rng) {
    if (!dist.is_valid())
        throw std::invalid_argument("sample_categorical: probabilities must sum to 1 within 1e-9");
    const Scalar u = rng.next_double();
    Scalar acc = 0;
    const Index n = dist.probs.size();
    Index last_positive = 0;
    for (Index i = 0; i < n; ++i) {
        const Scalar p = dist.probs[i];
        if (p <= Scalar(0)) continue;
        acc += p;
        last_positive = i;
        if (u < acc) return static_cast<TokenId>(i);
    }
    return static_cast<TokenId>(last_positive);  // u landed in rounding residue
}

std::uint64_t suffix_space_size(int vocab, int suffix_len, std::uint64_t cap) {
    if (vocab < 2) throw std::invalid_argument("suffix_space_size: vocab < 2");
    if (suffix_len < 0) throw std::invalid_argument("suffix_space_size: negative length");
    std::uint64_t n = 1;
    for (int i = 0; i < suffix_len; ++i) {
        if (n > cap / static_cast<std::uint64_t>(vocab))
            throw EnumerationCapExceeded(
                "enumeration would exceed cap of " + std::to_string(cap) +
                " trajectories; use Monte Carlo estimates instead");
        n *= static_cast<std::uint64_t>(vocab);
    }
    if (n > cap)
        throw EnumerationCapExceeded(
            "enumeration would exceed cap of " + std::to_string(cap) +
            " trajectories; use Monte Carlo estimates instead");
    return n;
}

std::uint64_t trajectory_rank(const Trajectory& traj, int vocab) {
    std::uint64_t rank = 0;
    for (int t = traj.prefix_len; t < traj.length(); ++t)
        rank = rank * static_cast<std::uint64_t>(vocab) +
               static_cast<std::uint64_t>(traj.tokens[static_cast<std::size_t>(t)]);
    return rank;
}

TrajectoryEnumerator::TrajectoryEnumerator(ActionSpace space, int total_len,
                                           std::vector<TokenId> prefix, std::uint64_t cap)
    : space_(space), total_len_(total_len), prefix_(std::move(prefix)) {
    const int p = static_cast<int>(prefix_.size());
    if (p >= total_len_)
        throw std::invalid_argument("TrajectoryEnumerator: prefix must be shorter than total length");
    for (TokenId id : prefix_)
        if (!space_.contains(id))
            throw std::invalid_argument("TrajectoryEnumerator: prefix token outside action space");
    count_ = suffix_space_size(space_.size, total_len_ - p, cap);
}

}  // namespace rlm
