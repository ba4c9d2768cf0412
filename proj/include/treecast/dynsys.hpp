#pragma once

#include <string>
#include <utility>
#include <vector>

#include "treecast/channel.hpp"

namespace treecast {

// Truncated 4-dimensional second-order map over the leading statistics.
// Z_th tracks the sign-flipped cross statistic of the opposite block
// (Z_th = -z_1mth, Z_1mth = -z_th), so the admissible cone is
// x_th >= Z_th >= 0 and x_1mth >= Z_1mth >= 0.
struct DynState {
    double x_th = 0;
    double Z_th = 0;
    double x_1mth = 0;
    double Z_1mth = 0;
};

// (1 - theta/2, (1-theta)/2, 1 - (1-theta)/2, theta/2).
DynState initial_state(double theta);

// One step of the truncated map; quadratic coefficients mirrored across the
// two blocks by the theta <-> 1-theta community symmetry, y closed via
// y = 2Z - x. Outputs clamped at 0 from below. Throws validation_error on
// states outside the admissible cone.
DynState dyn_step(const DynState& s, const ChannelParams& params);

enum class IterateStatus { completed, diverged };

struct IterateResult {
    std::vector<DynState> states;  // states[0] = s0
    IterateStatus status = IterateStatus::completed;
    int divergence_index = -1;  // step at which a component first exceeded 1
};

// n applications of dyn_step; stops early with a divergence flag when any
// component exceeds 1 (posterior statistics are bounded by 1).
IterateResult iterate(const DynState& s0, const ChannelParams& params, int n);

// 4/th - 4/(1-th) - 8 - 2(1-th)^2/th + 2 th^3/(1-th)^2; positive exactly on
// (0, r1) U (r2, 1) with (r1, r2) = threshold_roots().
double quadratic_coefficient(double theta);

// Bisection roots of quadratic_coefficient on (0, 1/2) and (1/2, 1),
// accurate to 1e-12; equal to (3 -+ sqrt(3))/6.
std::pair<double, double> threshold_roots();

struct ZBoundParams {
    double zeta = 0;
    double Gamma = 0;
    double xi = 0;
};

// Gamma = min{ zeta * 2(1-th)^2/th,
//              zeta^2 * (4/th - 4/(1-th) - 8 - 2(1-th)^2/(zeta th)
//                        + 2 zeta th^3/(1-th)^2) },
// xi = ab/(a+b) with a = 1/8, b = (1-th)^2/(16 th). Requires zeta in
// (1/2, 1); throws parameter_error "zeta admits no positive Gamma for this
// theta" when Gamma <= 0.
ZBoundParams zbound_params(double theta, double zeta);

struct ZBoundReport {
    bool pass = true;
    int first_violation = -1;  // transition index n (traj[n] -> traj[n+1])
    std::string which;         // "zbound" or "alternative"
    double lhs = 0, rhs = 0;   // values at the violation
    int steps_checked = 0;
};

// Checks, for every transition of the trajectory,
//   Z_{n+1} >= Z_n * (d lambda^2 + (d(d-1)/4) lambda^4 Gamma x_n)   [zbound]
//   Z_{n+1} >= xi * x_n^2                                      [alternative]
// on the th block, and reports the first violation or a full pass.
ZBoundReport verify_zbound(const std::vector<DynState>& traj,
                           const ChannelParams& params,
                           const ZBoundParams& zb);

// CSV: step, x_th, Z_th, x_1mth, Z_1mth; header row, 17 significant digits.
std::string trajectory_csv(const std::vector<DynState>& traj);

}  // namespace treecast
