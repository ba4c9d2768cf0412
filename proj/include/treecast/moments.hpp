#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "treecast/channel.hpp"
#include "treecast/moment_vector.hpp"
#include "treecast/popdyn.hpp"
#include "treecast/treesim.hpp"

namespace treecast {

enum class CheckMode { exact, statistical };

// pass <=> |lhs - rhs| <= tolerance. One-sided constraints are encoded with
// lhs clamped against the allowed side (e.g. lhs = min(x, 0), rhs = 0 for
// x >= 0) so the invariant holds uniformly.
struct IdentityReport {
    std::string name;
    double lhs = 0;
    double rhs = 0;
    double tolerance = 0;
    bool pass = false;
    CheckMode mode = CheckMode::exact;
};

inline constexpr double exact_identity_tol = 1e-10;
inline constexpr double statistical_sigma = 4.0;

// First-moment identities and sign constraints of the twelve statistics.
// Exact mode: tol is an absolute tolerance and std errors are ignored.
// Statistical mode: tol is a sigma multiplier on propagated std errors.
std::vector<IdentityReport> check_lemma1(const MomentEstimate& est,
                                         double theta, CheckMode mode,
                                         double tol);
std::vector<IdentityReport> check_lemma1(const MomentVector& mv, double theta,
                                         double tol = exact_identity_tol);

// Cross-product identities linking the five cross moments to the twelve.
std::vector<IdentityReport> check_lemma2(const CrossMomentEstimate& cross,
                                         const MomentEstimate& est,
                                         double theta, CheckMode mode,
                                         double tol);
std::vector<IdentityReport> check_lemma2(const CrossMoments& cross,
                                         const MomentVector& mv, double theta,
                                         double tol = exact_identity_tol);
std::vector<IdentityReport> check_lemma2(const Population& pop,
                                         double tol_sigma = statistical_sigma);

// Ten identities for the law of a child posterior seen from a root in state 1
// (mixture over the child state of the conditioned level-n laws) against the
// parent-level statistics. Letters c,f,h,i cover components 3 and 4; the
// worse of the two is reported.
std::vector<IdentityReport> check_lemma3(const Population& pop,
                                         const ChannelParams& params,
                                         double tol_sigma = statistical_sigma);
std::vector<IdentityReport> check_lemma3(const ChildPosteriorMoments& child,
                                         const MomentVector& mv,
                                         const ChannelParams& params,
                                         double tol = exact_identity_tol);

// Quadratic coefficients Pi of the six distinct per-child bracket products
// (linear in the twelve statistics), plus the second-order predictions
// 1 + d*Pi + (d(d-1)/2)*Pi^2 for E(Z_i Z_j) and the first-moment expansions.
// For d = 2 the second-order prediction is exact in Pi.
struct PiExpansion {
    std::array<double, 6> pi{};  // products (1,1),(2,2)/(1,2),(3,3),(1,3),(2,3),(3,4)
    double ez1 = 0, ez2 = 0, ez3 = 0;
    double ez1_sq = 0, ez2_sq = 0, ez3_sq = 0;
    double ez1z2 = 0, ez1z3 = 0, ez2z3 = 0, ez3z4 = 0;
};

PiExpansion compute_pi(const MomentVector& mv, const ChannelParams& params);

// Linear propagation of moment std errors through the Pi coefficients.
std::array<double, 6> pi_std_err(const MomentVector& std_err,
                                 const ChannelParams& params);

// Monte Carlo Z products from one fresh step against the Pi predictions, plus
// the exact-in-law identity E(Z1 Z2) = E(Z2^2). count = 0 means pop.size.
// cubic_slack C widens each prediction tolerance to
// max(sigma * se, C * hypot(x_th, x_1mth)^3) for d > 2 truncation error.
std::vector<IdentityReport> check_z_products(
    const Population& pop, const ChannelParams& params,
    double tol_sigma = statistical_sigma, std::uint64_t seed = 0,
    std::size_t count = 0, double cubic_slack = 0.0);

// Second-moment recursion u_{n+1} = (th/2) x_{n+1} + d lambda^3
// (u_n - (th/2) x_n) + O(x_n^2), checked on consecutive trajectory levels.
// Tolerance per transition: max(tol_sigma * combined se, quad_slack * x_n^2).
std::vector<IdentityReport> check_u_recursion(
    const std::vector<MomentEstimate>& traj, const ChannelParams& params,
    double tol_sigma = statistical_sigma, double quad_slack = 0.0);

}  // namespace treecast
