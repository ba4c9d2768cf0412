#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "treecast/channel.hpp"
#include "treecast/moment_vector.hpp"

namespace treecast {

// Complete d-ary tree of the given depth; the root sits at depth 0 and the
// observed leaves at depth `depth`.
struct TreeConfig {
    int d = 2;
    int depth = 1;
};

void validate(const TreeConfig& cfg);

// d^depth, with overflow guard.
std::uint64_t leaf_count(const TreeConfig& cfg);

// Leaf states 1..4 in breadth-first order (children of leaf-parent k occupy
// positions k*d .. k*d + d-1).
using LeafConfiguration = std::vector<std::uint8_t>;

// Nonnegative 4-vector summing to 1.
using PosteriorVector = Vec4;

// Forward simulation: root_state at the root, each child drawn from its
// parent's row of the transition matrix. Output depends only on
// (cfg, params, root_state, seed).
LeafConfiguration broadcast_sample(const TreeConfig& cfg,
                                   const ChannelParams& params, int root_state,
                                   std::uint64_t seed);

// Exact Bayes posterior of the root given the leaves, by leaf-to-root
// pruning with per-node renormalization (no underflow at any depth).
PosteriorVector posterior_root(const TreeConfig& cfg,
                               const ChannelParams& params,
                               const LeafConfiguration& leaves);

// Exhaustive enumeration over all 4^(d^depth) leaf configurations, guarded by
// d^depth <= 10. The callback receives the per-root-state likelihoods
// lik[c-1] = P(leaves | root = c) and the posterior for each configuration.
void for_each_leaf_configuration(
    const TreeConfig& cfg, const ChannelParams& params,
    const std::function<void(const Vec4& lik, const PosteriorVector& post)>&
        fn);

// Exact twelve moments by enumeration (same guard).
MomentVector exact_moments_bruteforce(const TreeConfig& cfg,
                                      const ChannelParams& params);

// Exact five cross moments by enumeration (same guard).
CrossMoments exact_cross_moments_bruteforce(const TreeConfig& cfg,
                                            const ChannelParams& params);

// Exact law of one child's posterior seen from a root in state 1: the child
// state is drawn from row 1 of P, then the leaves below it from the depth-n
// conditioned law. First and second moments of the offset components
// (offsets theta/2 for components 1,2 and (1-theta)/2 for 3,4).
struct ChildPosteriorMoments {
    Vec4 mean{};                      // E(p_i - off_i)
    Vec4 mean_sq{};                   // E(p_i - off_i)^2
    std::array<double, 6> cross{};    // pairs (1,2),(1,3),(1,4),(2,3),(2,4),(3,4)
};

ChildPosteriorMoments exact_child_posterior_moments(const TreeConfig& cfg,
                                                    const ChannelParams& params);

// Exact E(Z_i) and E(Z_i Z_j) for the likelihood-ratio products built from d
// iid children of a root in state 1 over depth-n subtrees: each expectation
// is the d-th power of the per-child bracket expectation.
struct ZProductExpectations {
    Vec4 z{};                          // E Z_i
    std::array<std::array<double, 4>, 4> zz{};  // E Z_i Z_j (symmetric)
};

ZProductExpectations exact_z_products(const TreeConfig& cfg,
                                      const ChannelParams& params);

}  // namespace treecast
