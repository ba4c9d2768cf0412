#include "treecast/treesim.hpp"

#include <cmath>
#include <string>

#include "treecast/rng.hpp"

namespace treecast {

namespace {

constexpr std::uint64_t enumeration_guard = 10;  // 4^10 = 2^20 configurations

void require_stochastic(const Mat4& p) {
    if (!is_stochastic(p, 1e-15))
        throw parameter_error(
            "transition matrix has negative entries; sampling requires a "
            "stochastic matrix");
}

int draw_from_row(const Vec4& row, double u) {
    double acc = 0;
    for (int s = 0; s < 3; ++s) {
        acc += row[s];
        if (u < acc) return s + 1;
    }
    return 4;
}

// Messages L[i] = P(leaves below node | node = i), combined bottom-up.
// renormalize keeps messages on unit sum (scale drops out of the posterior);
// the enumeration paths keep raw products so the likelihood weights stay
// exact.
Vec4 upward_pass(const std::vector<Vec4>& leaf_messages, const Mat4& p, int d,
                 int depth, bool renormalize) {
    std::vector<Vec4> cur = leaf_messages;
    for (int level = depth; level > 0; --level) {
        std::vector<Vec4> next(cur.size() / d);
        for (std::size_t k = 0; k < next.size(); ++k) {
            Vec4 prod = {1, 1, 1, 1};
            for (int j = 0; j < d; ++j) {
                const Vec4& child = cur[k * static_cast<std::size_t>(d) + j];
                for (int i = 0; i < 4; ++i) {
                    const double m = p[i][0] * child[0] + p[i][1] * child[1] +
                                     p[i][2] * child[2] + p[i][3] * child[3];
                    prod[i] *= m;
                }
            }
            if (renormalize) {
                const double tot = prod[0] + prod[1] + prod[2] + prod[3];
                if (tot <= 0.0)
                    throw degenerate_evidence_error(
                        "evidence rules out every state at an internal node");
                for (double& v : prod) v /= tot;
            }
            next[k] = prod;
        }
        cur = std::move(next);
    }
    return cur[0];
}

}  // namespace

void validate(const TreeConfig& cfg) {
    if (cfg.d < 2)
        throw parameter_error("d must be >= 2, got " + std::to_string(cfg.d));
    if (cfg.depth < 0)
        throw parameter_error("depth must be >= 0, got " +
                              std::to_string(cfg.depth));
    leaf_count(cfg);
}

std::uint64_t leaf_count(const TreeConfig& cfg) {
    std::uint64_t n = 1;
    for (int i = 0; i < cfg.depth; ++i) {
        if (n > (std::uint64_t{1} << 62) / static_cast<std::uint64_t>(cfg.d))
            throw size_error("leaf count d^depth overflows");
        n *= static_cast<std::uint64_t>(cfg.d);
    }
    return n;
}

LeafConfiguration broadcast_sample(const TreeConfig& cfg,
                                   const ChannelParams& params, int root_state,
                                   std::uint64_t seed) {
    validate(cfg);
    validate(params);
    if (root_state < 1 || root_state > 4)
        throw parameter_error("root state must be in 1..4, got " +
                              std::to_string(root_state));
    const Mat4 p = make_transition(params);
    require_stochastic(p);

    std::vector<std::uint8_t> states{static_cast<std::uint8_t>(root_state)};
    for (int level = 0; level < cfg.depth; ++level) {
        std::vector<std::uint8_t> next(states.size() *
                                       static_cast<std::size_t>(cfg.d));
        for (std::size_t parent = 0; parent < states.size(); ++parent) {
            for (int j = 0; j < cfg.d; ++j) {
                const std::uint64_t child =
                    parent * static_cast<std::uint64_t>(cfg.d) +
                    static_cast<std::uint64_t>(j);
                const auto w = draw_words(
                    seed, rng_domain::tree_broadcast,
                    static_cast<std::uint32_t>(level + 1),
                    static_cast<std::uint32_t>(child),
                    static_cast<std::uint32_t>(child >> 32) ^
                        (static_cast<std::uint32_t>(root_state) << 28));
                next[child] = static_cast<std::uint8_t>(
                    draw_from_row(p[states[parent] - 1], unit_double(w.hi)));
            }
        }
        states = std::move(next);
    }
    return states;
}

PosteriorVector posterior_root(const TreeConfig& cfg,
                               const ChannelParams& params,
                               const LeafConfiguration& leaves) {
    validate(cfg);
    validate(params);
    const std::uint64_t nl = leaf_count(cfg);
    if (leaves.size() != nl)
        throw shape_error("expected " + std::to_string(nl) + " leaves, got " +
                          std::to_string(leaves.size()));
    std::vector<Vec4> messages(leaves.size());
    for (std::size_t k = 0; k < leaves.size(); ++k) {
        if (leaves[k] < 1 || leaves[k] > 4)
            throw parameter_error("leaf state out of range 1..4");
        messages[k] = Vec4{};
        messages[k][leaves[k] - 1] = 1.0;
    }
    const Mat4 p = make_transition(params);
    const Vec4 root =
        upward_pass(messages, p, cfg.d, cfg.depth, /*renormalize=*/true);
    const Vec4 pi = stationary_distribution(params.theta);
    Vec4 post{};
    double tot = 0;
    for (int i = 0; i < 4; ++i) {
        post[i] = pi[i] * root[i];
        tot += post[i];
    }
    if (tot <= 0.0)
        throw degenerate_evidence_error(
            "evidence rules out every root state");
    for (double& v : post) v /= tot;
    return post;
}

void for_each_leaf_configuration(
    const TreeConfig& cfg, const ChannelParams& params,
    const std::function<void(const Vec4&, const PosteriorVector&)>& fn) {
    validate(cfg);
    validate(params);
    const std::uint64_t nl = leaf_count(cfg);
    if (nl > enumeration_guard)
        throw size_error("enumeration needs d^depth <= " +
                         std::to_string(enumeration_guard) + ", got " +
                         std::to_string(nl));
    const Mat4 p = make_transition(params);
    const Vec4 pi = stationary_distribution(params.theta);

    std::vector<std::uint8_t> digits(nl, 0);  // states - 1
    std::vector<Vec4> messages(nl);
    const std::uint64_t total = std::uint64_t{1} << (2 * nl);
    for (std::uint64_t idx = 0; idx < total; ++idx) {
        for (std::size_t k = 0; k < nl; ++k) {
            messages[k] = Vec4{};
            messages[k][digits[k]] = 1.0;
        }
        const Vec4 lik =
            upward_pass(messages, p, cfg.d, cfg.depth, /*renormalize=*/false);
        Vec4 post{};
        double tot = 0;
        for (int i = 0; i < 4; ++i) {
            post[i] = pi[i] * lik[i];
            tot += post[i];
        }
        if (tot > 0.0) {
            for (double& v : post) v /= tot;
            fn(lik, post);
        }
        // base-4 odometer
        for (std::size_t k = 0; k < nl; ++k) {
            if (++digits[k] < 4) break;
            digits[k] = 0;
        }
    }
}

MomentVector exact_moments_bruteforce(const TreeConfig& cfg,
                                      const ChannelParams& params) {
    const double off1 = params.theta / 2;
    const double off3 = (1 - params.theta) / 2;
    MomentVector m;
    for_each_leaf_configuration(
        cfg, params, [&](const Vec4& lik, const Vec4& post) {
            const double d1 = post[0] - off1, d2 = post[1] - off1;
            const double d3 = post[2] - off3, d4 = post[3] - off3;
            const double w1 = lik[0], w3 = lik[2];
            m.x_th += w1 * d1;
            m.y_th += w1 * d2;
            m.z_th += w3 * d1;
            m.u_th += w1 * d1 * d1;
            m.v_th += w1 * d2 * d2;
            m.w_th += w3 * d1 * d1;
            m.x_1mth += w3 * d3;
            m.y_1mth += w3 * d4;
            m.z_1mth += w1 * d3;
            m.u_1mth += w3 * d3 * d3;
            m.v_1mth += w3 * d4 * d4;
            m.w_1mth += w1 * d3 * d3;
        });
    return m;
}

CrossMoments exact_cross_moments_bruteforce(const TreeConfig& cfg,
                                            const ChannelParams& params) {
    const double off1 = params.theta / 2;
    const double off3 = (1 - params.theta) / 2;
    CrossMoments c;
    for_each_leaf_configuration(
        cfg, params, [&](const Vec4& lik, const Vec4& post) {
            const double d1 = post[0] - off1, d2 = post[1] - off1;
            const double d3 = post[2] - off3, d4 = post[3] - off3;
            c.c12 += lik[0] * d1 * d2;
            c.c13 += lik[0] * d1 * d3;
            c.c23 += lik[0] * d2 * d3;
            c.c34 += lik[0] * d3 * d4;
            c.e12 += lik[2] * d1 * d2;
        });
    return c;
}

ChildPosteriorMoments exact_child_posterior_moments(
    const TreeConfig& cfg, const ChannelParams& params) {
    const double off1 = params.theta / 2;
    const double off3 = (1 - params.theta) / 2;
    const Mat4 p = make_transition(params);

    // Per conditioning state: sums of the deviations, squares, and pairs.
    std::array<Vec4, 4> mean{};
    std::array<Vec4, 4> mean_sq{};
    std::array<std::array<double, 6>, 4> cross{};
    for_each_leaf_configuration(
        cfg, params, [&](const Vec4& lik, const Vec4& post) {
            const Vec4 dev = {post[0] - off1, post[1] - off1, post[2] - off3,
                              post[3] - off3};
            const std::array<double, 6> pairs = {
                dev[0] * dev[1], dev[0] * dev[2], dev[0] * dev[3],
                dev[1] * dev[2], dev[1] * dev[3], dev[2] * dev[3]};
            for (int c = 0; c < 4; ++c) {
                for (int i = 0; i < 4; ++i) {
                    mean[c][i] += lik[c] * dev[i];
                    mean_sq[c][i] += lik[c] * dev[i] * dev[i];
                }
                for (int k = 0; k < 6; ++k) cross[c][k] += lik[c] * pairs[k];
            }
        });

    ChildPosteriorMoments out;
    for (int c = 0; c < 4; ++c) {
        const double w = p[0][c];
        for (int i = 0; i < 4; ++i) {
            out.mean[i] += w * mean[c][i];
            out.mean_sq[i] += w * mean_sq[c][i];
        }
        for (int k = 0; k < 6; ++k) out.cross[k] += w * cross[c][k];
    }
    return out;
}

ZProductExpectations exact_z_products(const TreeConfig& cfg,
                                      const ChannelParams& params) {
    const double off1 = params.theta / 2;
    const double off3 = (1 - params.theta) / 2;
    const double g1 = 2 * params.lambda / params.theta;
    const double g3 = 2 * params.lambda / (1 - params.theta);
    const Mat4 p = make_transition(params);

    std::array<Vec4, 4> bsum{};
    std::array<std::array<std::array<double, 4>, 4>, 4> bbsum{};
    for_each_leaf_configuration(
        cfg, params, [&](const Vec4& lik, const Vec4& post) {
            const Vec4 b = {1 + g1 * (post[0] - off1),
                            1 + g1 * (post[1] - off1),
                            1 + g3 * (post[2] - off3),
                            1 + g3 * (post[3] - off3)};
            for (int c = 0; c < 4; ++c) {
                for (int i = 0; i < 4; ++i) {
                    bsum[c][i] += lik[c] * b[i];
                    for (int j = i; j < 4; ++j)
                        bbsum[c][i][j] += lik[c] * b[i] * b[j];
                }
            }
        });

    Vec4 eb{};
    std::array<std::array<double, 4>, 4> ebb{};
    for (int c = 0; c < 4; ++c) {
        const double w = p[0][c];
        for (int i = 0; i < 4; ++i) {
            eb[i] += w * bsum[c][i];
            for (int j = i; j < 4; ++j) ebb[i][j] += w * bbsum[c][i][j];
        }
    }
    ZProductExpectations out;
    for (int i = 0; i < 4; ++i) {
        out.z[i] = std::pow(eb[i], params.d);
        for (int j = i; j < 4; ++j) {
            out.zz[i][j] = std::pow(ebb[i][j], params.d);
            out.zz[j][i] = out.zz[i][j];
        }
    }
    return out;
}

}  // namespace treecast
