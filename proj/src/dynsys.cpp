#include "treecast/dynsys.hpp"

#include <algorithm>
#include <cmath>

#include "treecast/errors.hpp"
#include "treecast/io.hpp"

namespace treecast {

namespace {

// Quadratic part of the x update for one block, with (xo, Zo) the other
// block's state and yo its derived y = 2 Zo - xo.
double quad_x(double x, double Z, double xo, double yo, double th) {
    return (-6 + 2 * (1 - th) / th + 2 * th) * x * x +
           (-4 * th / (1 - th) - 16) * Z * Z + (16 - 4 * th) * x * Z +
           th * (xo * xo + yo * yo);
}

double quad_z(double x, double Z, double xo, double yo, double th) {
    const double c = (1 - th) * (1 - th) / th;
    return 2 * c * x * x - 4 * c * x * Z +
           (4 / th - 4 / (1 - th) - 8) * Z * Z + th * (xo * xo + yo * yo);
}

}  // namespace

DynState initial_state(double theta) {
    if (!(theta > 0.0) || !(theta < 1.0))
        throw parameter_error("theta must lie in (0, 1)");
    DynState s;
    s.x_th = 1 - theta / 2;
    s.Z_th = (1 - theta) / 2;
    s.x_1mth = 1 - (1 - theta) / 2;
    s.Z_1mth = theta / 2;
    return s;
}

DynState dyn_step(const DynState& s, const ChannelParams& params) {
    validate(params);
    if (!(s.x_th >= s.Z_th) || !(s.Z_th >= 0) || !(s.x_1mth >= s.Z_1mth) ||
        !(s.Z_1mth >= 0))
        throw validation_error("state outside admissible cone x >= Z >= 0");

    const double th = params.theta;
    const double lam = params.lambda;
    const double d = params.d;
    const double dl2 = d * lam * lam;
    const double c2 = d * (d - 1) / 2 * lam * lam * lam * lam;
    const double y_th = 2 * s.Z_th - s.x_th;
    const double y_1mth = 2 * s.Z_1mth - s.x_1mth;

    DynState n;
    n.x_th = dl2 * s.x_th +
             c2 * quad_x(s.x_th, s.Z_th, s.x_1mth, y_1mth, th);
    n.Z_th = dl2 * s.Z_th +
             c2 * quad_z(s.x_th, s.Z_th, s.x_1mth, y_1mth, th);
    n.x_1mth = dl2 * s.x_1mth +
               c2 * quad_x(s.x_1mth, s.Z_1mth, s.x_th, y_th, 1 - th);
    n.Z_1mth = dl2 * s.Z_1mth +
               c2 * quad_z(s.x_1mth, s.Z_1mth, s.x_th, y_th, 1 - th);
    n.x_th = std::max(n.x_th, 0.0);
    n.Z_th = std::max(n.Z_th, 0.0);
    n.x_1mth = std::max(n.x_1mth, 0.0);
    n.Z_1mth = std::max(n.Z_1mth, 0.0);
    return n;
}

IterateResult iterate(const DynState& s0, const ChannelParams& params,
                      int n) {
    if (n < 0) throw parameter_error("step count must be nonnegative");
    IterateResult res;
    res.states.reserve(static_cast<std::size_t>(n) + 1);
    res.states.push_back(s0);
    for (int k = 0; k < n; ++k) {
        const DynState& cur = res.states.back();
        if (std::max({cur.x_th, cur.Z_th, cur.x_1mth, cur.Z_1mth}) > 1.0) {
            res.status = IterateStatus::diverged;
            res.divergence_index = k;
            break;
        }
        res.states.push_back(dyn_step(cur, params));
    }
    return res;
}

double quadratic_coefficient(double theta) {
    if (!(theta > 0.0) || !(theta < 1.0))
        throw parameter_error("theta must lie in (0, 1)");
    const double m = 1 - theta;
    return 4 / theta - 4 / m - 8 - 2 * m * m / theta +
           2 * theta * theta * theta / (m * m);
}

std::pair<double, double> threshold_roots() {
    const auto bisect = [](double lo, double hi) {
        double flo = quadratic_coefficient(lo);
        for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
            const double mid = 0.5 * (lo + hi);
            const double fm = quadratic_coefficient(mid);
            if ((flo > 0) == (fm > 0)) {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
        }
        return 0.5 * (lo + hi);
    };
    return {bisect(1e-6, 0.5), bisect(0.5, 1 - 1e-9)};
}

ZBoundParams zbound_params(double theta, double zeta) {
    if (!(theta > 0.0) || !(theta < 1.0))
        throw parameter_error("theta must lie in (0, 1)");
    if (!(zeta > 0.5) || !(zeta < 1.0))
        throw parameter_error("zeta must lie in (1/2, 1)");
    const double m = 1 - theta;
    const double lin = zeta * 2 * m * m / theta;
    const double quad =
        zeta * zeta *
        (4 / theta - 4 / m - 8 - 2 * m * m / (zeta * theta) +
         2 * zeta * theta * theta * theta / (m * m));
    ZBoundParams zb;
    zb.zeta = zeta;
    zb.Gamma = std::min(lin, quad);
    const double a = 1.0 / 8.0;
    const double b = m * m / (16 * theta);
    zb.xi = a * b / (a + b);
    if (!(zb.Gamma > 0))
        throw parameter_error("zeta admits no positive Gamma for this theta");
    return zb;
}

ZBoundReport verify_zbound(const std::vector<DynState>& traj,
                           const ChannelParams& params,
                           const ZBoundParams& zb) {
    validate(params);
    const double slack = 1e-14;
    const double d = params.d;
    const double lam = params.lambda;
    const double l4 = lam * lam * lam * lam;

    ZBoundReport rep;
    for (std::size_t n = 0; n + 1 < traj.size(); ++n) {
        const DynState& cur = traj[n];
        const DynState& nxt = traj[n + 1];
        const double mult =
            d * lam * lam + d * (d - 1) / 4 * l4 * zb.Gamma * cur.x_th;
        if (nxt.Z_th < cur.Z_th * mult - slack) {
            rep.pass = false;
            rep.first_violation = static_cast<int>(n);
            rep.which = "zbound";
            rep.lhs = nxt.Z_th;
            rep.rhs = cur.Z_th * mult;
            rep.steps_checked = static_cast<int>(n) + 1;
            return rep;
        }
        if (nxt.Z_th < zb.xi * cur.x_th * cur.x_th - slack) {
            rep.pass = false;
            rep.first_violation = static_cast<int>(n);
            rep.which = "alternative";
            rep.lhs = nxt.Z_th;
            rep.rhs = zb.xi * cur.x_th * cur.x_th;
            rep.steps_checked = static_cast<int>(n) + 1;
            return rep;
        }
    }
    rep.steps_checked =
        traj.empty() ? 0 : static_cast<int>(traj.size()) - 1;
    return rep;
}

std::string trajectory_csv(const std::vector<DynState>& traj) {
    std::string out = "step,x_th,Z_th,x_1mth,Z_1mth\n";
    for (std::size_t n = 0; n < traj.size(); ++n) {
        out += std::to_string(n);
        out += "," + fmt17(traj[n].x_th);
        out += "," + fmt17(traj[n].Z_th);
        out += "," + fmt17(traj[n].x_1mth);
        out += "," + fmt17(traj[n].Z_1mth);
        out += "\n";
    }
    return out;
}

}  // namespace treecast
