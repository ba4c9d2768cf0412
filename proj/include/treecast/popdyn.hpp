#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "treecast/channel.hpp"
#include "treecast/moment_vector.hpp"
#include "treecast/treesim.hpp"

namespace treecast {

// Monte Carlo representation of the four conditioned posterior laws at one
// tree level: samples[c-1] holds draws from the law of the root posterior
// given root state c. theta is the channel bias the population was built
// under (the moment offsets depend on it).
struct Population {
    int level = 0;
    double theta = 0.5;
    std::size_t size = 0;
    std::array<std::vector<PosteriorVector>, 4> samples;
};

// Level-0 law is deterministic: samples[c-1] = {e_c repeated}.
Population init_population(std::size_t size, double theta);

// One level of the distributional recursion. For each target root state c and
// each output sample: draw d child states from row c of P, resample one
// posterior uniformly with replacement from the matching pool per child,
// multiply the per-child likelihood-ratio brackets into Z_1..Z_4, and emit
// (pi_1 Z_1, ..., pi_4 Z_4) normalized. Deterministic given seed for any
// thread count.
Population evolve_one_level(const Population& pop, const ChannelParams& params,
                            std::size_t new_size, std::uint64_t seed,
                            int threads = 1);

// Plug-in sample means and standard errors of the twelve statistics.
MomentEstimate estimate_moments(const Population& pop);

// Plug-in means/standard errors of the five posterior cross products.
CrossMomentEstimate estimate_cross_moments(const Population& pop);

// Level-0 estimate followed by `levels` evolve/estimate rounds; one estimate
// per level 0..levels.
std::vector<MomentEstimate> run_trajectory(const ChannelParams& params,
                                           int levels, std::size_t size,
                                           std::uint64_t seed,
                                           int threads = 1);

enum class Classification { reconstructs, collapses, undecided };

std::string to_string(Classification c);

// Tail-window heuristic over the last third of the trajectory (>= 10 levels
// required):
//  - "reconstructs": every tail level separates the conditioned pools, i.e.
//    the discrimination x - z (matching-root minus crossed-root pool mean,
//    per block) clears both tol and 5 std errs in at least one block, and no
//    tail level drives x_th or x_1mth below -4 std errs (first moments are
//    nonnegative in law, so significant negatives disqualify the run
//    instead of certifying it);
//  - "collapses": no significant negatives and the final x_th sits below
//    max(tol, 5 std errs); x rather than the discrimination because the
//    frozen post-coalescence offset it carries is itself the quantity the
//    tolerance is calibrated against;
//  - otherwise "undecided".
Classification classify_reconstruction(const std::vector<MomentEstimate>& traj,
                                       double tol);

// Monte Carlo draws of the Z products for one fresh step on top of pop, with
// the root conditioned on state 1 (child states from row 1 of P).
struct ZProductStats {
    std::array<double, 4> z_mean{}, z_se{};
    std::array<std::array<double, 4>, 4> zz_mean{}, zz_se{};
    double diff_mean = 0, diff_se = 0;  // per-draw Z1*Z2 - Z2^2
    std::size_t n = 0;
};

ZProductStats sample_z_products(const Population& pop,
                                const ChannelParams& params, std::size_t count,
                                std::uint64_t seed);

// 25-column CSV: level, then value/std-err pairs of the twelve statistics in
// MomentVector order; header row included, 17 significant digits.
std::string trajectory_csv(const std::vector<MomentEstimate>& traj);

}  // namespace treecast
