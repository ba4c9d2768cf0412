#pragma once

#include <array>

#include "treecast/errors.hpp"

namespace treecast {

using Vec4 = std::array<double, 4>;
using Mat4 = std::array<Vec4, 4>;

// Four states 1..4 (A,T,G,C) in two communities {1,2} and {3,4}.
// theta in (0,1) sets the stationary law (theta/2, theta/2, (1-theta)/2,
// (1-theta)/2); lambda in [-1,1] is the second eigenvalue of the transition
// matrix; d >= 2 is the offspring count per tree vertex.
struct ChannelParams {
    double theta = 0.5;
    double lambda = 0.5;
    int d = 2;
};

void validate(const ChannelParams& params);

// Stationary law (theta/2, theta/2, (1-theta)/2, (1-theta)/2).
Vec4 stationary_distribution(double theta);

// Generator with stationary law as above; rows sum to zero.
Mat4 make_rate_matrix(double theta);

// P = lambda*I + (1-lambda)*1*pi^T. Entries may be negative for lambda below
// -pi_min/(1-pi_min); validity is reported by is_stochastic, not assumed.
Mat4 make_transition(const ChannelParams& params);

// lambda = exp(-v / (1/2 + theta(1-theta))) for branch length v >= 0.
double branch_length_to_lambda(double v, double theta);

// Closed form for P^s: lambda^s*I + (1-lambda^s)*1*pi^T, s >= 0.
Mat4 multi_step_closed_form(const ChannelParams& params, int s);

// lambda at which d*lambda^2 = 1.
double ks_threshold_lambda(int d);

struct SpectralReport {
    double leading = 0;    // eigenvalue of largest real part
    double second = 0;     // largest-modulus eigenvalue among the rest
    int multiplicity = 0;  // count of non-leading eigenvalues equal to second
};

// Requires rows summing to 1 within 1e-9 (throws validation_error otherwise);
// negative entries are allowed and show up in the spectrum, not as errors.
SpectralReport spectral_check(const Mat4& m);

bool is_stochastic(const Mat4& m, double tol = 1e-12);

Mat4 identity4();
Mat4 mat_mul(const Mat4& a, const Mat4& b);
Mat4 mat_pow(const Mat4& m, int s);

}  // namespace treecast
