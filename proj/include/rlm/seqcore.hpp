#pragma once

#include "rlm/rng.hpp"
#include "rlm/types.hpp"

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rlm {

// Discrete action/token alphabet with ids 0..size-1.
struct ActionSpace {
    int size = 2;

    explicit ActionSpace(int v) : size(v) {
        if (v < 2) throw std::invalid_argument("ActionSpace: need at least 2 actions");
    }
    bool contains(TokenId id) const noexcept { return id >= 0 && id < size; }
};

// Fixed-length token sequence. The first prefix_len positions are the given
// initial state; positions prefix_len..size()-1 are generated.
struct Trajectory {
    std::vector<TokenId> tokens;
    int prefix_len = 0;

    Trajectory() = default;
    Trajectory(std::vector<TokenId> toks, int prefix)
        : tokens(std::move(toks)), prefix_len(prefix) {}

    int length() const noexcept { return static_cast<int>(tokens.size()); }
    int generated_len() const noexcept { return length() - prefix_len; }
    std::span<const TokenId> prefix() const noexcept {
        return {tokens.data(), static_cast<std::size_t>(prefix_len)};
    }
    std::span<const TokenId> suffix() const noexcept {
        return {tokens.data() + prefix_len, static_cast<std::size_t>(generated_len())};
    }
};

void validate(const Trajectory& traj, const ActionSpace& space);

// Probability vector over an action space.
struct Categorical {
    Vector probs;

    Categorical() = default;
    explicit Categorical(Vector p) : probs(std::move(p)) {}

    bool is_valid(Scalar tol = 1e-9) const noexcept {
        if (probs.size() == 0) return false;
        if ((probs.array() < Scalar(0)).any() || (probs.array() > Scalar(1) + tol).any())
            return false;
        return std::abs(probs.sum() - Scalar(1)) <= tol;
    }
};

// Draws an index distributed per dist.probs. Rejects distributions whose mass
// deviates from 1 by more than 1e-9.
TokenId sample_categorical(const Categorical& dist, RngStream& rng);

class EnumerationCapExceeded : public std::runtime_error {
public:
    explicit EnumerationCapExceeded(const std::string& what) : std::runtime_error(what) {}
};

inline constexpr std::uint64_t kDefaultEnumerationCap = 10'000'000;

// V^suffix_len, refusing (by exception) any count above cap.
std::uint64_t suffix_space_size(int vocab, int suffix_len, std::uint64_t cap = kDefaultEnumerationCap);

// Lexicographic rank of the generated suffix among all suffixes of its length.
std::uint64_t trajectory_rank(const Trajectory& traj, int vocab);

// Exhaustive walk over every trajectory sharing a prefix, in lexicographic
// suffix order. The callback sees a mutable-in-place trajectory; callers must
// copy if they keep it.
class TrajectoryEnumerator {
public:
    TrajectoryEnumerator(ActionSpace space, int total_len, std::vector<TokenId> prefix,
                         std::uint64_t cap = kDefaultEnumerationCap);

    std::uint64_t count() const noexcept { return count_; }
    int total_len() const noexcept { return total_len_; }

    template <typename F>
    void for_each(F&& fn) const {
        Trajectory traj(prefix_, static_cast<int>(prefix_.size()));
        traj.tokens.resize(static_cast<std::size_t>(total_len_), 0);
        const int p = traj.prefix_len;
        for (std::uint64_t rank = 0; rank < count_; ++rank) {
            fn(static_cast<const Trajectory&>(traj), rank);
            // odometer increment on the suffix, last position fastest
            for (int t = total_len_ - 1; t >= p; --t) {
                if (++traj.tokens[static_cast<std::size_t>(t)] < space_.size) break;
                traj.tokens[static_cast<std::size_t>(t)] = 0;
            }
        }
    }

private:
    ActionSpace space_;
    int total_len_;
    std::vector<TokenId> prefix_;
    std::uint64_t count_;
};

}  // namespace rlm
