#include "treecast/moments.hpp"

#include <cmath>
#include <initializer_list>
#include <utility>

namespace treecast {

namespace {

constexpr double tol_floor = 1e-14;

IdentityReport report(std::string name, double lhs, double rhs, double tol,
                      CheckMode mode) {
    IdentityReport r;
    r.name = std::move(name);
    r.lhs = lhs;
    r.rhs = rhs;
    r.tolerance = tol;
    r.pass = std::abs(lhs - rhs) <= tol;
    r.mode = mode;
    return r;
}

double rss(std::initializer_list<double> terms) {
    double s = 0;
    for (double t : terms) s += t * t;
    return std::sqrt(s);
}

// Picks the worse of two sub-checks sharing one identity (components 3/4 are
// exchangeable, so each gets the same right side).
IdentityReport worse(const IdentityReport& a, const IdentityReport& b) {
    const double ma = std::abs(a.lhs - a.rhs) - a.tolerance;
    const double mb = std::abs(b.lhs - b.rhs) - b.tolerance;
    return mb > ma ? b : a;
}

}  // namespace

std::vector<IdentityReport> check_lemma1(const MomentEstimate& est,
                                         double theta, CheckMode mode,
                                         double tol) {
    const MomentVector& m = est.value;
    const MomentVector& s = est.std_err;
    const bool stat = mode == CheckMode::statistical;
    const auto width = [&](std::initializer_list<double> ses) {
        return stat ? tol * rss(ses) + tol_floor : tol;
    };

    std::vector<IdentityReport> out;
    out.push_back(report("lemma1.a", m.x_th,
                         m.u_th + m.v_th + 2 * (1 - theta) / theta * m.w_th,
                         width({s.x_th, s.u_th, s.v_th,
                                2 * (1 - theta) / theta * s.w_th}),
                         mode));
    out.push_back(report("lemma1.a_nonneg", std::min(m.x_th, 0.0), 0.0,
                         width({s.x_th}), mode));
    out.push_back(
        report("lemma1.a_mirror", m.x_1mth,
               m.u_1mth + m.v_1mth + 2 * theta / (1 - theta) * m.w_1mth,
               width({s.x_1mth, s.u_1mth, s.v_1mth,
                      2 * theta / (1 - theta) * s.w_1mth}),
               mode));
    out.push_back(report("lemma1.a_mirror_nonneg", std::min(m.x_1mth, 0.0),
                         0.0, width({s.x_1mth}), mode));
    out.push_back(report("lemma1.b_z1mth", m.z_1mth, -(m.x_th + m.y_th) / 2,
                         width({s.z_1mth, s.x_th / 2, s.y_th / 2}), mode));
    out.push_back(report("lemma1.b_zth", m.z_th, -(m.x_1mth + m.y_1mth) / 2,
                         width({s.z_th, s.x_1mth / 2, s.y_1mth / 2}), mode));
    out.push_back(report("lemma1.b_z1mth_nonpos", std::max(m.z_1mth, 0.0),
                         0.0, width({s.z_1mth}), mode));
    out.push_back(report("lemma1.b_zth_nonpos", std::max(m.z_th, 0.0), 0.0,
                         width({s.z_th}), mode));
    out.push_back(report("lemma1.b_sum_th", std::min(m.x_th + m.z_1mth, 0.0),
                         0.0, width({s.x_th, s.z_1mth}), mode));
    out.push_back(report("lemma1.b_sum_1mth",
                         std::min(m.x_1mth + m.z_th, 0.0), 0.0,
                         width({s.x_1mth, s.z_th}), mode));
    out.push_back(report("lemma1.c", theta * m.z_1mth, (1 - theta) * m.z_th,
                         width({theta * s.z_1mth, (1 - theta) * s.z_th}),
                         mode));
    return out;
}

std::vector<IdentityReport> check_lemma1(const MomentVector& mv, double theta,
                                         double tol) {
    MomentEstimate est;
    est.value = mv;
    est.n_samples = 0;
    return check_lemma1(est, theta, CheckMode::exact, tol);
}

std::vector<IdentityReport> check_lemma2(const CrossMomentEstimate& cross,
                                         const MomentEstimate& est,
                                         double theta, CheckMode mode,
                                         double tol) {
    const MomentVector& m = est.value;
    const MomentVector& s = est.std_err;
    const CrossMoments& c = cross.value;
    const CrossMoments& cs = cross.std_err;
    const double h = theta / 2;
    const double uo = m.u_th - h * m.x_th;
    const double vo = m.v_th - h * m.x_th;
    const double wo = m.w_1mth - (1 - theta) / 2 * m.x_1mth;
    const bool stat = mode == CheckMode::statistical;
    const auto width = [&](std::initializer_list<double> ses) {
        return stat ? tol * rss(ses) + tol_floor : tol;
    };

    std::vector<IdentityReport> out;
    out.push_back(report("lemma2.a", c.c12, h * m.y_th + vo,
                         width({cs.c12, h * s.y_th, s.v_th, h * s.x_th}),
                         mode));
    out.push_back(report(
        "lemma2.b", c.c13, h * m.z_1mth - uo / 2 - vo / 2,
        width({cs.c13, h * s.z_1mth, s.u_th / 2, s.v_th / 2, h * s.x_th}),
        mode));
    out.push_back(report(
        "lemma2.c", c.c23, h * m.z_1mth - vo,
        width({cs.c23, h * s.z_1mth, s.v_th, h * s.x_th}), mode));
    out.push_back(report(
        "lemma2.d", c.c34,
        (1 - theta) / 2 * m.y_1mth + uo / 2 + 1.5 * vo - wo,
        width({cs.c34, (1 - theta) / 2 * s.y_1mth, s.u_th / 2, 1.5 * s.v_th,
               theta * s.x_th, s.w_1mth, (1 - theta) / 2 * s.x_1mth}),
        mode));
    out.push_back(report(
        "lemma2.e", c.e12, h * m.y_th - theta / (1 - theta) * vo,
        width({cs.e12, h * s.y_th, theta / (1 - theta) * s.v_th,
               theta / (1 - theta) * h * s.x_th}),
        mode));
    return out;
}

std::vector<IdentityReport> check_lemma2(const CrossMoments& cross,
                                         const MomentVector& mv, double theta,
                                         double tol) {
    CrossMomentEstimate ce;
    ce.value = cross;
    MomentEstimate me;
    me.value = mv;
    return check_lemma2(ce, me, theta, CheckMode::exact, tol);
}

std::vector<IdentityReport> check_lemma2(const Population& pop,
                                         double tol_sigma) {
    return check_lemma2(estimate_cross_moments(pop), estimate_moments(pop),
                        pop.theta, CheckMode::statistical, tol_sigma);
}

namespace {

// The fourteen mixture statistics of one child posterior (means, squares,
// pairwise products of the offset components) with standard errors.
struct ChildStats {
    std::array<double, 4> mean{}, mean_se{};
    std::array<double, 4> sq{}, sq_se{};
    std::array<double, 6> cross{}, cross_se{};
};

ChildStats mixture_child_stats(const Population& pop,
                               const ChannelParams& params) {
    const Mat4 p = make_transition(params);
    const double off1 = params.theta / 2;
    const double off3 = (1 - params.theta) / 2;

    ChildStats out;
    for (int c = 0; c < 4; ++c) {
        const double wgt = p[0][c];
        const std::size_t n = pop.samples[c].size();
        std::array<double, 14> sum{}, sumsq{};
        for (const PosteriorVector& q : pop.samples[c]) {
            const Vec4 dev = {q[0] - off1, q[1] - off1, q[2] - off3,
                              q[3] - off3};
            const std::array<double, 14> vals = {
                dev[0],          dev[1],          dev[2],
                dev[3],          dev[0] * dev[0], dev[1] * dev[1],
                dev[2] * dev[2], dev[3] * dev[3], dev[0] * dev[1],
                dev[0] * dev[2], dev[0] * dev[3], dev[1] * dev[2],
                dev[1] * dev[3], dev[2] * dev[3]};
            for (int k = 0; k < 14; ++k) {
                sum[k] += vals[k];
                sumsq[k] += vals[k] * vals[k];
            }
        }
        for (int k = 0; k < 14; ++k) {
            const double mean = sum[k] / static_cast<double>(n);
            double se = 0;
            if (n > 1) {
                const double var =
                    std::max(0.0, (sumsq[k] - static_cast<double>(n) * mean *
                                                  mean) /
                                      static_cast<double>(n - 1));
                se = std::sqrt(var / static_cast<double>(n));
            }
            double* tgt = nullptr;
            double* tgt_se = nullptr;
            if (k < 4) {
                tgt = &out.mean[k];
                tgt_se = &out.mean_se[k];
            } else if (k < 8) {
                tgt = &out.sq[k - 4];
                tgt_se = &out.sq_se[k - 4];
            } else {
                tgt = &out.cross[k - 8];
                tgt_se = &out.cross_se[k - 8];
            }
            *tgt += wgt * mean;
            *tgt_se = std::sqrt(*tgt_se * *tgt_se + wgt * wgt * se * se);
        }
    }
    return out;
}

std::vector<IdentityReport> lemma3_reports(
    const ChildStats& y, const MomentVector& m, const MomentVector& s,
    const ChannelParams& params, CheckMode mode, double tol) {
    const double theta = params.theta;
    const double lam = params.lambda;
    const double al = std::abs(lam);
    const double h = theta / 2;
    const double h3 = (1 - theta) / 2;
    const double uo = m.u_th - h * m.x_th;
    const double vo = m.v_th - h * m.x_th;
    const double wo = m.w_1mth - h3 * m.x_1mth;
    const bool stat = mode == CheckMode::statistical;
    const auto width = [&](double lhs_se, std::initializer_list<double> ses) {
        return stat ? tol * rss({lhs_se, rss(ses)}) + tol_floor : tol;
    };

    std::vector<IdentityReport> out;
    out.push_back(report("lemma3.a", y.mean[0], lam * m.x_th,
                         width(y.mean_se[0], {al * s.x_th}), mode));
    out.push_back(report("lemma3.b", y.mean[1], lam * m.y_th,
                         width(y.mean_se[1], {al * s.y_th}), mode));
    {
        const double rhs = lam * m.z_1mth;
        const auto c3 = report("lemma3.c", y.mean[2], rhs,
                               width(y.mean_se[2], {al * s.z_1mth}), mode);
        const auto c4 = report("lemma3.c", y.mean[3], rhs,
                               width(y.mean_se[3], {al * s.z_1mth}), mode);
        out.push_back(worse(c3, c4));
    }
    out.push_back(report(
        "lemma3.d", y.sq[0], h * m.x_th + lam * uo,
        width(y.sq_se[0], {std::abs(h - lam * h) * s.x_th, al * s.u_th}),
        mode));
    out.push_back(report(
        "lemma3.e", y.sq[1], h * m.x_th + lam * vo,
        width(y.sq_se[1], {std::abs(h - lam * h) * s.x_th, al * s.v_th}),
        mode));
    {
        const double rhs = h3 * m.x_1mth + lam * wo;
        const auto se = [&](double lhs_se) {
            return width(lhs_se, {std::abs(h3 - lam * h3) * s.x_1mth,
                                  al * s.w_1mth});
        };
        out.push_back(worse(
            report("lemma3.f", y.sq[2], rhs, se(y.sq_se[2]), mode),
            report("lemma3.f", y.sq[3], rhs, se(y.sq_se[3]), mode)));
    }
    out.push_back(report(
        "lemma3.g", y.cross[0], h * m.y_th + lam * vo,
        width(y.cross_se[0], {h * s.y_th, al * s.v_th, al * h * s.x_th}),
        mode));
    {
        const double rhs = h * m.z_1mth - lam / 2 * (uo + vo);
        const auto se = [&](double lhs_se) {
            return width(lhs_se, {h * s.z_1mth, al / 2 * s.u_th,
                                  al / 2 * s.v_th, al * h * s.x_th});
        };
        out.push_back(worse(
            report("lemma3.h", y.cross[1], rhs, se(y.cross_se[1]), mode),
            report("lemma3.h", y.cross[2], rhs, se(y.cross_se[2]), mode)));
    }
    {
        const double rhs = h * m.z_1mth - lam * vo;
        const auto se = [&](double lhs_se) {
            return width(lhs_se,
                         {h * s.z_1mth, al * s.v_th, al * h * s.x_th});
        };
        out.push_back(worse(
            report("lemma3.i", y.cross[3], rhs, se(y.cross_se[3]), mode),
            report("lemma3.i", y.cross[4], rhs, se(y.cross_se[4]), mode)));
    }
    out.push_back(report(
        "lemma3.j", y.cross[5],
        h3 * m.y_1mth + lam / 2 * uo + 1.5 * lam * vo - lam * wo,
        width(y.cross_se[5],
              {h3 * s.y_1mth, al / 2 * s.u_th, 1.5 * al * s.v_th,
               al * theta * s.x_th, al * s.w_1mth, al * h3 * s.x_1mth}),
        mode));
    return out;
}

}  // namespace

std::vector<IdentityReport> check_lemma3(const Population& pop,
                                         const ChannelParams& params,
                                         double tol_sigma) {
    const ChildStats y = mixture_child_stats(pop, params);
    const MomentEstimate est = estimate_moments(pop);
    return lemma3_reports(y, est.value, est.std_err, params,
                          CheckMode::statistical, tol_sigma);
}

std::vector<IdentityReport> check_lemma3(const ChildPosteriorMoments& child,
                                         const MomentVector& mv,
                                         const ChannelParams& params,
                                         double tol) {
    ChildStats y;
    y.mean = child.mean;
    y.sq = child.mean_sq;
    y.cross = child.cross;
    return lemma3_reports(y, mv, MomentVector{}, params, CheckMode::exact,
                          tol);
}

PiExpansion compute_pi(const MomentVector& m, const ChannelParams& params) {
    validate(params);
    const double th = params.theta;
    const double lam = params.lambda;
    const double l2 = lam * lam;
    const double l3 = l2 * lam;
    const double uo = m.u_th - th / 2 * m.x_th;
    const double vo = m.v_th - th / 2 * m.x_th;
    const double wo = m.w_1mth - (1 - th) / 2 * m.x_1mth;

    PiExpansion pe;
    pe.pi[0] = 6 * l2 / th * m.x_th + 4 * l3 / (th * th) * uo;
    pe.pi[1] = 2 * l2 / th * m.x_th + 4 * l2 / th * m.y_th +
               4 * l3 / (th * th) * vo;
    pe.pi[2] = 4 * l2 / (1 - th) * m.z_1mth + 2 * l2 / (1 - th) * m.x_1mth +
               4 * l3 / ((1 - th) * (1 - th)) * wo;
    pe.pi[3] = 2 * l2 / th * m.x_th + 4 * l2 / (1 - th) * m.z_1mth -
               2 * l3 / (th * (1 - th)) * (uo + vo);
    pe.pi[4] = 2 * l2 / th * m.y_th + 4 * l2 / (1 - th) * m.z_1mth -
               4 * l3 / (th * (1 - th)) * vo;
    pe.pi[5] = 4 * l2 / (1 - th) * m.z_1mth + 2 * l2 / (1 - th) * m.y_1mth +
               2 * l3 / ((1 - th) * (1 - th)) * (uo + 3 * vo) -
               4 * l3 / ((1 - th) * (1 - th)) * wo;

    const double d = params.d;
    const double c2 = d * (d - 1) / 2;
    const auto second_order = [&](double a) { return 1 + d * a + c2 * a * a; };
    pe.ez1 = second_order(2 * l2 / th * m.x_th);
    pe.ez2 = second_order(2 * l2 / th * m.y_th);
    pe.ez3 = second_order(2 * l2 / (1 - th) * m.z_1mth);
    pe.ez1_sq = second_order(pe.pi[0]);
    pe.ez2_sq = second_order(pe.pi[1]);
    pe.ez1z2 = pe.ez2_sq;
    pe.ez3_sq = second_order(pe.pi[2]);
    pe.ez1z3 = second_order(pe.pi[3]);
    pe.ez2z3 = second_order(pe.pi[4]);
    pe.ez3z4 = second_order(pe.pi[5]);
    return pe;
}

std::array<double, 6> pi_std_err(const MomentVector& s,
                                 const ChannelParams& params) {
    const double th = params.theta;
    const double l2 = params.lambda * params.lambda;
    const double al3 = std::abs(l2 * params.lambda);
    // Triangle-inequality propagation: sum of |coefficient| * se over every
    // moment appearance.
    std::array<double, 6> out{};
    out[0] = 6 * l2 / th * s.x_th +
             4 * al3 / (th * th) * (s.u_th + th / 2 * s.x_th);
    out[1] = 2 * l2 / th * s.x_th + 4 * l2 / th * s.y_th +
             4 * al3 / (th * th) * (s.v_th + th / 2 * s.x_th);
    out[2] = 4 * l2 / (1 - th) * s.z_1mth + 2 * l2 / (1 - th) * s.x_1mth +
             4 * al3 / ((1 - th) * (1 - th)) *
                 (s.w_1mth + (1 - th) / 2 * s.x_1mth);
    out[3] = 2 * l2 / th * s.x_th + 4 * l2 / (1 - th) * s.z_1mth +
             2 * al3 / (th * (1 - th)) * (s.u_th + s.v_th + th * s.x_th);
    out[4] = 2 * l2 / th * s.y_th + 4 * l2 / (1 - th) * s.z_1mth +
             4 * al3 / (th * (1 - th)) * (s.v_th + th / 2 * s.x_th);
    out[5] = 4 * l2 / (1 - th) * s.z_1mth + 2 * l2 / (1 - th) * s.y_1mth +
             2 * al3 / ((1 - th) * (1 - th)) *
                 (s.u_th + 3 * s.v_th + 2 * th * s.x_th) +
             4 * al3 / ((1 - th) * (1 - th)) *
                 (s.w_1mth + (1 - th) / 2 * s.x_1mth);
    return out;
}

std::vector<IdentityReport> check_z_products(const Population& pop,
                                             const ChannelParams& params,
                                             double tol_sigma,
                                             std::uint64_t seed,
                                             std::size_t count,
                                             double cubic_slack) {
    const ZProductStats st = sample_z_products(pop, params, count, seed);
    const MomentEstimate est = estimate_moments(pop);
    const PiExpansion pe = compute_pi(est.value, params);
    const std::array<double, 6> pse = pi_std_err(est.std_err, params);
    const double scale = std::hypot(est.value.x_th, est.value.x_1mth);
    const double cubic = cubic_slack * scale * scale * scale;
    const double d = params.d;
    const double th = params.theta;
    const double l2 = params.lambda * params.lambda;

    std::vector<IdentityReport> out;
    out.push_back(report("z_products.z1z2_equals_z2sq", st.diff_mean, 0.0,
                         tol_sigma * st.diff_se + tol_floor,
                         CheckMode::statistical));

    const auto add_first = [&](std::string name, double mc, double mc_se,
                               double pred, double a, double a_se) {
        const double pred_se = (d + d * (d - 1) * std::abs(a)) * a_se;
        const double tol = std::max(
            tol_sigma * rss({mc_se, pred_se}) + tol_floor, cubic);
        out.push_back(report(std::move(name), mc, pred, tol,
                             CheckMode::statistical));
    };
    add_first("z_products.ez1", st.z_mean[0], st.z_se[0], pe.ez1,
              2 * l2 / th * est.value.x_th, 2 * l2 / th * est.std_err.x_th);
    add_first("z_products.ez2", st.z_mean[1], st.z_se[1], pe.ez2,
              2 * l2 / th * est.value.y_th, 2 * l2 / th * est.std_err.y_th);
    add_first("z_products.ez3", st.z_mean[2], st.z_se[2], pe.ez3,
              2 * l2 / (1 - th) * est.value.z_1mth,
              2 * l2 / (1 - th) * est.std_err.z_1mth);
    add_first("z_products.ez4", st.z_mean[3], st.z_se[3], pe.ez3,
              2 * l2 / (1 - th) * est.value.z_1mth,
              2 * l2 / (1 - th) * est.std_err.z_1mth);

    const auto add_second = [&](std::string name, double mc, double mc_se,
                                double pred, int k) {
        const double pred_se =
            (d + d * (d - 1) * std::abs(pe.pi[k])) * pse[k];
        const double tol = std::max(
            tol_sigma * rss({mc_se, pred_se}) + tol_floor, cubic);
        out.push_back(report(std::move(name), mc, pred, tol,
                             CheckMode::statistical));
    };
    add_second("z_products.ez1_sq", st.zz_mean[0][0], st.zz_se[0][0],
               pe.ez1_sq, 0);
    add_second("z_products.ez2_sq", st.zz_mean[1][1], st.zz_se[1][1],
               pe.ez2_sq, 1);
    add_second("z_products.ez1z2", st.zz_mean[0][1], st.zz_se[0][1],
               pe.ez1z2, 1);
    add_second("z_products.ez3_sq", st.zz_mean[2][2], st.zz_se[2][2],
               pe.ez3_sq, 2);
    add_second("z_products.ez4_sq", st.zz_mean[3][3], st.zz_se[3][3],
               pe.ez3_sq, 2);
    add_second("z_products.ez1z3", st.zz_mean[0][2], st.zz_se[0][2],
               pe.ez1z3, 3);
    add_second("z_products.ez1z4", st.zz_mean[0][3], st.zz_se[0][3],
               pe.ez1z3, 3);
    add_second("z_products.ez2z3", st.zz_mean[1][2], st.zz_se[1][2],
               pe.ez2z3, 4);
    add_second("z_products.ez2z4", st.zz_mean[1][3], st.zz_se[1][3],
               pe.ez2z3, 4);
    add_second("z_products.ez3z4", st.zz_mean[2][3], st.zz_se[2][3],
               pe.ez3z4, 5);
    return out;
}

std::vector<IdentityReport> check_u_recursion(
    const std::vector<MomentEstimate>& traj, const ChannelParams& params,
    double tol_sigma, double quad_slack) {
    if (traj.size() < 2)
        throw parameter_error("need at least two trajectory levels");
    const double h = params.theta / 2;
    const double dl3 = params.d * std::pow(params.lambda, 3);
    const double adl3 = std::abs(dl3);

    std::vector<IdentityReport> out;
    for (std::size_t n = 0; n + 1 < traj.size(); ++n) {
        const auto& cur = traj[n];
        const auto& nxt = traj[n + 1];
        const double pred =
            h * nxt.value.x_th + dl3 * (cur.value.u_th - h * cur.value.x_th);
        const double se =
            rss({nxt.std_err.u_th, h * nxt.std_err.x_th,
                 adl3 * cur.std_err.u_th, adl3 * h * cur.std_err.x_th});
        const double tol =
            std::max(tol_sigma * se + tol_floor,
                     quad_slack * cur.value.x_th * cur.value.x_th);
        out.push_back(report("u_recursion." + std::to_string(n),
                             nxt.value.u_th, pred, tol,
                             CheckMode::statistical));
    }
    return out;
}

}  // namespace treecast
