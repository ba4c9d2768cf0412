#include "treecast/channel.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <string>

namespace treecast {

void validate(const ChannelParams& params) {
    if (!(params.theta > 0.0 && params.theta < 1.0))
        throw parameter_error("theta must lie in (0,1), got " +
                              std::to_string(params.theta));
    if (!(params.lambda >= -1.0 && params.lambda <= 1.0))
        throw parameter_error("lambda must lie in [-1,1], got " +
                              std::to_string(params.lambda));
    if (params.d < 2)
        throw parameter_error("d must be >= 2, got " +
                              std::to_string(params.d));
}

Vec4 stationary_distribution(double theta) {
    if (!(theta > 0.0 && theta < 1.0))
        throw parameter_error("theta must lie in (0,1), got " +
                              std::to_string(theta));
    return {theta / 2, theta / 2, (1 - theta) / 2, (1 - theta) / 2};
}

Mat4 make_rate_matrix(double theta) {
    if (!(theta > 0.0 && theta < 1.0))
        throw parameter_error("theta must lie in (0,1), got " +
                              std::to_string(theta));
    const double t = theta;
    return Mat4{{{(-2 + t) / 2, t / 2, (1 - t) / 2, (1 - t) / 2},
                 {t / 2, (-2 + t) / 2, (1 - t) / 2, (1 - t) / 2},
                 {t / 2, t / 2, (-1 - t) / 2, (1 - t) / 2},
                 {t / 2, t / 2, (1 - t) / 2, (-1 - t) / 2}}};
}

Mat4 make_transition(const ChannelParams& params) {
    validate(params);
    const Vec4 pi = stationary_distribution(params.theta);
    Mat4 p{};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            p[i][j] = (i == j ? params.lambda : 0.0) +
                      (1 - params.lambda) * pi[j];
    return p;
}

double branch_length_to_lambda(double v, double theta) {
    if (!(theta > 0.0 && theta < 1.0))
        throw parameter_error("theta must lie in (0,1), got " +
                              std::to_string(theta));
    if (!(v >= 0.0))
        throw parameter_error("branch length must be >= 0, got " +
                              std::to_string(v));
    return std::exp(-v / (0.5 + theta * (1 - theta)));
}

Mat4 multi_step_closed_form(const ChannelParams& params, int s) {
    validate(params);
    if (s < 0)
        throw parameter_error("step count must be >= 0, got " +
                              std::to_string(s));
    const Vec4 pi = stationary_distribution(params.theta);
    const double ls = std::pow(params.lambda, s);
    Mat4 p{};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            p[i][j] = (i == j ? ls : 0.0) + (1 - ls) * pi[j];
    return p;
}

double ks_threshold_lambda(int d) {
    if (d < 2)
        throw parameter_error("d must be >= 2, got " + std::to_string(d));
    return 1.0 / std::sqrt(static_cast<double>(d));
}

SpectralReport spectral_check(const Mat4& m) {
    for (int i = 0; i < 4; ++i) {
        const double row = m[i][0] + m[i][1] + m[i][2] + m[i][3];
        if (std::abs(row - 1.0) > 1e-9)
            throw validation_error("row " + std::to_string(i + 1) +
                                   " sums to " + std::to_string(row) +
                                   ", expected 1");
    }
    Eigen::Matrix4d em;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) em(i, j) = m[i][j];
    const Eigen::EigenSolver<Eigen::Matrix4d> solver(em);
    std::array<double, 4> ev{};
    for (int i = 0; i < 4; ++i) {
        const auto z = solver.eigenvalues()[i];
        if (std::abs(z.imag()) > 1e-9)
            throw validation_error("complex eigenvalue found");
        ev[i] = z.real();
    }
    std::sort(ev.begin(), ev.end(), std::greater<>());
    SpectralReport rep;
    rep.leading = ev[0];
    double second = ev[1];
    for (int i = 2; i < 4; ++i)
        if (std::abs(ev[i]) > std::abs(second)) second = ev[i];
    rep.second = second;
    rep.multiplicity = 0;
    for (int i = 1; i < 4; ++i)
        if (std::abs(ev[i] - second) <= 1e-9) ++rep.multiplicity;
    return rep;
}

bool is_stochastic(const Mat4& m, double tol) {
    for (int i = 0; i < 4; ++i) {
        double row = 0;
        for (int j = 0; j < 4; ++j) {
            if (m[i][j] < -tol) return false;
            row += m[i][j];
        }
        if (std::abs(row - 1.0) > 1e-9) return false;
    }
    return true;
}

Mat4 identity4() {
    Mat4 m{};
    for (int i = 0; i < 4; ++i) m[i][i] = 1.0;
    return m;
}

Mat4 mat_mul(const Mat4& a, const Mat4& b) {
    Mat4 c{};
    for (int i = 0; i < 4; ++i)
        for (int k = 0; k < 4; ++k)
            for (int j = 0; j < 4; ++j) c[i][j] += a[i][k] * b[k][j];
    return c;
}

Mat4 mat_pow(const Mat4& m, int s) {
    if (s < 0)
        throw parameter_error("matrix power must be >= 0, got " +
                              std::to_string(s));
    Mat4 r = identity4();
    for (int i = 0; i < s; ++i) r = mat_mul(r, m);
    return r;
}

}  // namespace treecast
