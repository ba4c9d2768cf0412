#include "treecast/popdyn.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>

#include "treecast/io.hpp"
#include "treecast/rng.hpp"

namespace treecast {

namespace {

struct Acc {
    double sum = 0, sumsq = 0;
    void add(double v) {
        sum += v;
        sumsq += v * v;
    }
    double mean(std::size_t n) const { return sum / static_cast<double>(n); }
    double se(std::size_t n) const {
        if (n < 2) return 0;
        const double m = mean(n);
        const double var =
            std::max(0.0, (sumsq - static_cast<double>(n) * m * m) /
                              static_cast<double>(n - 1));
        return std::sqrt(var / static_cast<double>(n));
    }
};

int draw_from_row(const Vec4& row, double u) {
    double acc = 0;
    for (int s = 0; s < 3; ++s) {
        acc += row[s];
        if (u < acc) return s + 1;
    }
    return 4;
}

void require_nonempty(const Population& pop) {
    if (pop.size == 0) throw state_error("population is empty");
    for (const auto& pool : pop.samples)
        if (pool.size() != pop.size)
            throw state_error("population pools are inconsistent");
}

}  // namespace

Population init_population(std::size_t size, double theta) {
    if (size < 1) throw parameter_error("population size must be >= 1");
    if (!(theta > 0.0 && theta < 1.0))
        throw parameter_error("theta must lie in (0,1)");
    Population pop;
    pop.level = 0;
    pop.theta = theta;
    pop.size = size;
    for (int c = 0; c < 4; ++c) {
        PosteriorVector e{};
        e[c] = 1.0;
        pop.samples[c].assign(size, e);
    }
    return pop;
}

Population evolve_one_level(const Population& pop, const ChannelParams& params,
                            std::size_t new_size, std::uint64_t seed,
                            int threads) {
    validate(params);
    require_nonempty(pop);
    if (params.theta != pop.theta)
        throw parameter_error(
            "channel theta differs from the population's theta");
    if (new_size < 1) throw parameter_error("new size must be >= 1");
    if (threads < 1) threads = 1;

    const Mat4 p = make_transition(params);
    if (!is_stochastic(p, 1e-15))
        throw parameter_error(
            "transition matrix has negative entries; sampling requires a "
            "stochastic matrix");
    const Vec4 pi = stationary_distribution(params.theta);
    const double off1 = params.theta / 2;
    const double off3 = (1 - params.theta) / 2;
    const double g1 = 2 * params.lambda / params.theta;
    const double g3 = 2 * params.lambda / (1 - params.theta);
    const std::uint32_t level_word =
        static_cast<std::uint32_t>(pop.level + 1);

    Population out;
    out.level = pop.level + 1;
    out.theta = pop.theta;
    out.size = new_size;
    for (int c = 0; c < 4; ++c) out.samples[c].resize(new_size);

    auto fill_range = [&](int c, std::size_t k0, std::size_t k1) {
        for (std::size_t k = k0; k < k1; ++k) {
            Vec4 z = {1, 1, 1, 1};
            for (int j = 0; j < params.d; ++j) {
                const auto w = draw_words(
                    seed, rng_domain::pop_evolve, level_word,
                    static_cast<std::uint32_t>(k),
                    (static_cast<std::uint32_t>(c + 1) << 24) |
                        static_cast<std::uint32_t>(j));
                const int i = draw_from_row(p[c], unit_double(w.hi));
                const PosteriorVector& q =
                    pop.samples[i - 1][bounded_index(w.lo, pop.size)];
                z[0] *= std::max(0.0, 1 + g1 * (q[0] - off1));
                z[1] *= std::max(0.0, 1 + g1 * (q[1] - off1));
                z[2] *= std::max(0.0, 1 + g3 * (q[2] - off3));
                z[3] *= std::max(0.0, 1 + g3 * (q[3] - off3));
            }
            PosteriorVector post{};
            double tot = 0;
            for (int i = 0; i < 4; ++i) {
                post[i] = pi[i] * z[i];
                tot += post[i];
            }
            if (tot <= 0.0)
                throw degenerate_evidence_error(
                    "conflicting children rule out every root state");
            for (double& v : post) v /= tot;
            out.samples[c][k] = post;
        }
    };

    if (threads == 1) {
        for (int c = 0; c < 4; ++c) fill_range(c, 0, new_size);
        return out;
    }
    const std::size_t t = static_cast<std::size_t>(threads);
    std::vector<std::exception_ptr> errors(t);
    for (int c = 0; c < 4; ++c) {
        std::vector<std::thread> workers;
        workers.reserve(t);
        const std::size_t chunk = (new_size + t - 1) / t;
        for (std::size_t w = 0; w < t; ++w) {
            const std::size_t k0 = std::min(w * chunk, new_size);
            const std::size_t k1 = std::min(k0 + chunk, new_size);
            workers.emplace_back([&, c, k0, k1, w] {
                try {
                    fill_range(c, k0, k1);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        for (auto& th : workers) th.join();
        for (auto& err : errors)
            if (err) std::rethrow_exception(err);
    }
    return out;
}

MomentEstimate estimate_moments(const Population& pop) {
    require_nonempty(pop);
    const double off1 = pop.theta / 2;
    const double off3 = (1 - pop.theta) / 2;

    Acc x, y, u, v, z1m, w1m;  // over the root-1 pool
    for (const PosteriorVector& q : pop.samples[0]) {
        const double d1 = q[0] - off1, d2 = q[1] - off1, d3 = q[2] - off3;
        x.add(d1);
        y.add(d2);
        u.add(d1 * d1);
        v.add(d2 * d2);
        z1m.add(d3);
        w1m.add(d3 * d3);
    }
    Acc z, w, x1m, y1m, u1m, v1m;  // over the root-3 pool
    for (const PosteriorVector& q : pop.samples[2]) {
        const double d1 = q[0] - off1, d3 = q[2] - off3, d4 = q[3] - off3;
        z.add(d1);
        w.add(d1 * d1);
        x1m.add(d3);
        y1m.add(d4);
        u1m.add(d3 * d3);
        v1m.add(d4 * d4);
    }

    const std::size_t n = pop.size;
    MomentEstimate est;
    est.n_samples = n;
    est.value = {x.mean(n),   y.mean(n),   z.mean(n),   u.mean(n),
                 v.mean(n),   w.mean(n),   x1m.mean(n), y1m.mean(n),
                 z1m.mean(n), u1m.mean(n), v1m.mean(n), w1m.mean(n)};
    est.std_err = {x.se(n),   y.se(n),   z.se(n),   u.se(n),
                   v.se(n),   w.se(n),   x1m.se(n), y1m.se(n),
                   z1m.se(n), u1m.se(n), v1m.se(n), w1m.se(n)};
    return est;
}

CrossMomentEstimate estimate_cross_moments(const Population& pop) {
    require_nonempty(pop);
    const double off1 = pop.theta / 2;
    const double off3 = (1 - pop.theta) / 2;

    Acc c12, c13, c23, c34;
    for (const PosteriorVector& q : pop.samples[0]) {
        const double d1 = q[0] - off1, d2 = q[1] - off1;
        const double d3 = q[2] - off3, d4 = q[3] - off3;
        c12.add(d1 * d2);
        c13.add(d1 * d3);
        c23.add(d2 * d3);
        c34.add(d3 * d4);
    }
    Acc e12;
    for (const PosteriorVector& q : pop.samples[2])
        e12.add((q[0] - off1) * (q[1] - off1));

    const std::size_t n = pop.size;
    CrossMomentEstimate est;
    est.n_samples = n;
    est.value = {c12.mean(n), c13.mean(n), c23.mean(n), c34.mean(n),
                 e12.mean(n)};
    est.std_err = {c12.se(n), c13.se(n), c23.se(n), c34.se(n), e12.se(n)};
    return est;
}

std::vector<MomentEstimate> run_trajectory(const ChannelParams& params,
                                           int levels, std::size_t size,
                                           std::uint64_t seed, int threads) {
    if (levels < 0) throw parameter_error("levels must be >= 0");
    Population pop = init_population(size, params.theta);
    std::vector<MomentEstimate> traj;
    traj.reserve(static_cast<std::size_t>(levels) + 1);
    traj.push_back(estimate_moments(pop));
    for (int n = 0; n < levels; ++n) {
        pop = evolve_one_level(pop, params, size, seed, threads);
        traj.push_back(estimate_moments(pop));
    }
    return traj;
}

std::string to_string(Classification c) {
    switch (c) {
        case Classification::reconstructs:
            return "reconstructs";
        case Classification::collapses:
            return "collapses";
        default:
            return "undecided";
    }
}

Classification classify_reconstruction(const std::vector<MomentEstimate>& traj,
                                       double tol) {
    if (traj.size() < 10)
        throw parameter_error("trajectory must cover at least 10 levels");
    const std::size_t len = traj.size();
    const std::size_t tail = (len + 2) / 3;
    const std::size_t start = len - tail;

    bool plateau = true, sign_ok = true;
    for (std::size_t i = start; i < len; ++i) {
        const auto& v = traj[i].value;
        const auto& s = traj[i].std_err;
        // x - z is the gap between the matching-root and crossed-root pool
        // means. Coalesced pools (the finite-size signature of collapse)
        // drive it to zero even though x itself freezes at a noise-floor
        // offset, so it separates reconstruction from the frozen state.
        const double disc_th = v.x_th - v.z_th;
        const double disc_se_th = std::hypot(s.x_th, s.z_th);
        const double disc_m = v.x_1mth - v.z_1mth;
        const double disc_se_m = std::hypot(s.x_1mth, s.z_1mth);
        if (!((disc_th > tol && disc_th > 5 * disc_se_th) ||
              (disc_m > tol && disc_m > 5 * disc_se_m)))
            plateau = false;
        if (v.x_th < -4 * s.x_th || v.x_1mth < -4 * s.x_1mth) sign_ok = false;
    }
    if (plateau && sign_ok) return Classification::reconstructs;

    const auto& fv = traj[len - 1].value;
    const auto& fs = traj[len - 1].std_err;
    if (sign_ok && fv.x_th < std::max(tol, 5 * fs.x_th))
        return Classification::collapses;
    return Classification::undecided;
}

ZProductStats sample_z_products(const Population& pop,
                                const ChannelParams& params, std::size_t count,
                                std::uint64_t seed) {
    validate(params);
    require_nonempty(pop);
    if (params.theta != pop.theta)
        throw parameter_error(
            "channel theta differs from the population's theta");
    if (count == 0) count = pop.size;

    const Mat4 p = make_transition(params);
    if (!is_stochastic(p, 1e-15))
        throw parameter_error(
            "transition matrix has negative entries; sampling requires a "
            "stochastic matrix");
    const double off1 = params.theta / 2;
    const double off3 = (1 - params.theta) / 2;
    const double g1 = 2 * params.lambda / params.theta;
    const double g3 = 2 * params.lambda / (1 - params.theta);

    std::array<Acc, 4> z_acc;
    std::array<std::array<Acc, 4>, 4> zz_acc;
    Acc diff_acc;
    for (std::size_t k = 0; k < count; ++k) {
        Vec4 z = {1, 1, 1, 1};
        for (int j = 0; j < params.d; ++j) {
            const auto w = draw_words(seed, rng_domain::z_products,
                                      static_cast<std::uint32_t>(pop.level),
                                      static_cast<std::uint32_t>(k),
                                      static_cast<std::uint32_t>(j));
            const int i = draw_from_row(p[0], unit_double(w.hi));
            const PosteriorVector& q =
                pop.samples[i - 1][bounded_index(w.lo, pop.size)];
            z[0] *= std::max(0.0, 1 + g1 * (q[0] - off1));
            z[1] *= std::max(0.0, 1 + g1 * (q[1] - off1));
            z[2] *= std::max(0.0, 1 + g3 * (q[2] - off3));
            z[3] *= std::max(0.0, 1 + g3 * (q[3] - off3));
        }
        for (int i = 0; i < 4; ++i) {
            z_acc[i].add(z[i]);
            for (int j = i; j < 4; ++j) zz_acc[i][j].add(z[i] * z[j]);
        }
        diff_acc.add(z[0] * z[1] - z[1] * z[1]);
    }

    ZProductStats st;
    st.n = count;
    for (int i = 0; i < 4; ++i) {
        st.z_mean[i] = z_acc[i].mean(count);
        st.z_se[i] = z_acc[i].se(count);
        for (int j = i; j < 4; ++j) {
            st.zz_mean[i][j] = st.zz_mean[j][i] = zz_acc[i][j].mean(count);
            st.zz_se[i][j] = st.zz_se[j][i] = zz_acc[i][j].se(count);
        }
    }
    st.diff_mean = diff_acc.mean(count);
    st.diff_se = diff_acc.se(count);
    return st;
}

std::string trajectory_csv(const std::vector<MomentEstimate>& traj) {
    std::string out = "level";
    for (const auto name : MomentVector::names) {
        out += ",";
        out += name;
        out += ",se_";
        out += name;
    }
    out += "\n";
    for (std::size_t i = 0; i < traj.size(); ++i) {
        out += std::to_string(i);
        const auto vals = traj[i].value.as_array();
        const auto ses = traj[i].std_err.as_array();
        for (std::size_t k = 0; k < MomentVector::count; ++k) {
            out += "," + fmt17(vals[k]) + "," + fmt17(ses[k]);
        }
        out += "\n";
    }
    return out;
}

}  // namespace treecast
