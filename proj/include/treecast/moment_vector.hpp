#pragma once

#include <array>
#include <cstddef>
#include <string_view>

namespace treecast {

// Twelve level-n statistics of the root posterior. The "th" block conditions
// the root on state 1 for x,y,u,v and on state 3 for z,w, with component
// offsets theta/2; the "1mth" block mirrors this (root state 3, offsets
// (1-theta)/2, cross terms conditioned on state 1).
//   x_th = E1[p1 - th/2]     y_th = E1[p2 - th/2]     z_th = E3[p1 - th/2]
//   u_th = E1[(p1 - th/2)^2] v_th = E1[(p2 - th/2)^2] w_th = E3[(p1 - th/2)^2]
// where Ec is the mean under root state c, and the mirrored block swaps the
// roles of states 1 and 3 and uses offset (1-theta)/2 on components 3,4.
struct MomentVector {
    double x_th = 0, y_th = 0, z_th = 0, u_th = 0, v_th = 0, w_th = 0;
    double x_1mth = 0, y_1mth = 0, z_1mth = 0, u_1mth = 0, v_1mth = 0,
           w_1mth = 0;

    static constexpr std::size_t count = 12;
    static constexpr std::array<std::string_view, count> names = {
        "x_th",   "y_th",   "z_th",   "u_th",   "v_th",   "w_th",
        "x_1mth", "y_1mth", "z_1mth", "u_1mth", "v_1mth", "w_1mth"};

    std::array<double, count> as_array() const {
        return {x_th,   y_th,   z_th,   u_th,   v_th,   w_th,
                x_1mth, y_1mth, z_1mth, u_1mth, v_1mth, w_1mth};
    }

    static MomentVector from_array(const std::array<double, count>& a) {
        return {a[0], a[1], a[2], a[3], a[4], a[5],
                a[6], a[7], a[8], a[9], a[10], a[11]};
    }
};

struct MomentEstimate {
    MomentVector value;
    MomentVector std_err;
    std::size_t n_samples = 0;
};

// Means of the five posterior cross products used by the covariance
// identities. Offsets: components 1,2 use theta/2; components 3,4 use
// (1-theta)/2. c12..c34 are means under root state 1; e12 under root state 3.
struct CrossMoments {
    double c12 = 0;  // (p1-off1)(p2-off2), root 1
    double c13 = 0;  // (p1-off1)(p3-off3), root 1
    double c23 = 0;  // (p2-off2)(p3-off3), root 1
    double c34 = 0;  // (p3-off3)(p4-off4), root 1
    double e12 = 0;  // (p1-off1)(p2-off2), root 3

    static constexpr std::size_t count = 5;
    static constexpr std::array<std::string_view, count> names = {
        "c12", "c13", "c23", "c34", "e12"};

    std::array<double, count> as_array() const {
        return {c12, c13, c23, c34, e12};
    }
};

struct CrossMomentEstimate {
    CrossMoments value;
    CrossMoments std_err;
    std::size_t n_samples = 0;
};

}  // namespace treecast
