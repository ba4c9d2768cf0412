#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "treecast/channel.hpp"
#include "treecast/dynsys.hpp"
#include "treecast/errors.hpp"
#include "treecast/io.hpp"
#include "treecast/moments.hpp"
#include "treecast/popdyn.hpp"
#include "treecast/treesim.hpp"
#include "treecast/version.hpp"

using nlohmann::json;
using namespace treecast;

namespace {

std::string json_scalar(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

// Flat JSON config: keys are long option names of the invoked subcommand.
// File values are appended as extra flags, skipping any flag already on the
// command line, so explicit flags always win.
std::vector<std::string> merge_config(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    std::string path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size())
            path = args[i + 1];
        else if (args[i].rfind("--config=", 0) == 0)
            path = args[i].substr(9);
    }
    if (path.empty()) return args;
    const json j = json::parse(read_file(path));
    if (!j.is_object())
        throw parameter_error("config file must hold a JSON object: " + path);
    const auto given = [&args](const std::string& flag) {
        for (const std::string& a : args)
            if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
        return false;
    };
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string flag = "--" + it.key();
        if (given(flag)) continue;
        const json& v = it.value();
        if (v.is_boolean()) {
            if (v.get<bool>()) args.push_back(flag);
            continue;
        }
        args.push_back(flag);
        if (v.is_array()) {
            std::string joined;
            for (const json& e : v) {
                if (!joined.empty()) joined += ",";
                joined += json_scalar(e);
            }
            args.push_back(joined);
        } else {
            args.push_back(json_scalar(v));
        }
    }
    return args;
}

// Exactly-one-of --lambda/--dlambda2 (or at-most-one with a default).
struct RateFlags {
    double lambda = 0;
    double dlambda2 = 0;
    CLI::Option* lambda_opt = nullptr;
    CLI::Option* dlambda2_opt = nullptr;

    void attach(CLI::App* sub, bool required) {
        auto* grp = sub->add_option_group(
            "rate", "channel strength, one of the two parametrizations");
        lambda_opt = grp->add_option(
            "--lambda", lambda, "second transition eigenvalue in [-1,1]");
        dlambda2_opt = grp->add_option(
            "--dlambda2", dlambda2,
            "d*lambda^2; resolves to lambda = sqrt(dlambda2/d)");
        if (required)
            grp->require_option(1);
        else
            grp->require_option(0, 1);
    }

    bool given() const {
        return lambda_opt->count() > 0 || dlambda2_opt->count() > 0;
    }

    double resolve(int d, double fallback) const {
        if (dlambda2_opt->count() > 0) {
            if (dlambda2 < 0)
                throw parameter_error("dlambda2 must be nonnegative");
            return std::sqrt(dlambda2 / static_cast<double>(d));
        }
        if (lambda_opt->count() > 0) return lambda;
        return fallback;
    }

    void echo(json& cfg, double resolved) const {
        cfg["lambda"] = resolved;
        if (dlambda2_opt->count() > 0) cfg["dlambda2"] = dlambda2;
    }
};

int resolve_threads(int flag_value) {
    if (flag_value > 0) return flag_value;
    if (const char* env = std::getenv("TREECAST_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    return 1;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(v));
    return buf;
}

void write_manifest(const std::string& command, const json& cfg,
                    double seconds,
                    const std::vector<std::string>& outputs) {
    if (outputs.empty()) return;
    json m;
    m["version"] = version;
    m["command"] = command;
    m["config"] = cfg;
    m["duration_seconds"] = seconds;
    m["outputs"] = json::array();
    for (const std::string& path : outputs) {
        const std::string data = read_file(path);
        m["outputs"].push_back(json{{"path", path},
                                    {"bytes", data.size()},
                                    {"fnv1a64", hex64(fnv1a64(data))}});
    }
    write_file(outputs.front() + ".manifest.json", m.dump(2) + "\n");
}

json matrix_json(const Mat4& m) {
    json rows = json::array();
    for (const Vec4& r : m) rows.push_back(json{r[0], r[1], r[2], r[3]});
    return rows;
}

json reports_json(const std::vector<IdentityReport>& reports) {
    json arr = json::array();
    for (const IdentityReport& r : reports) {
        arr.push_back(json{
            {"name", r.name},
            {"lhs", r.lhs},
            {"rhs", r.rhs},
            {"tolerance", r.tolerance},
            {"pass", r.pass},
            {"mode",
             r.mode == CheckMode::exact ? "exact" : "statistical"}});
    }
    return arr;
}

int print_report_table(const std::vector<IdentityReport>& reports,
                       bool as_json) {
    int failures = 0;
    for (const IdentityReport& r : reports)
        if (!r.pass) ++failures;
    if (as_json) {
        std::cout << reports_json(reports).dump(2) << "\n";
        return failures;
    }
    std::printf("%-28s %-11s %14s %14s %12s  %s\n", "identity", "mode",
                "lhs", "rhs", "tolerance", "status");
    for (const IdentityReport& r : reports) {
        std::printf("%-28s %-11s %14.6e %14.6e %12.4e  %s\n",
                    r.name.c_str(),
                    r.mode == CheckMode::exact ? "exact" : "statistical",
                    r.lhs, r.rhs, r.tolerance, r.pass ? "pass" : "FAIL");
    }
    std::printf("%zu checks, %d failed\n", reports.size(), failures);
    return failures;
}

void emit(const std::string& content, const std::string& out_path,
          std::vector<std::string>& outputs) {
    if (out_path.empty()) {
        std::cout << content;
    } else {
        write_file(out_path, content);
        outputs.push_back(out_path);
    }
}

// Exact-route Z-product reports: the per-child bracket expectations raised to
// the d-th power must equal 1 + Pi (or the first-moment argument) exactly.
std::vector<IdentityReport> exact_z_product_reports(
    const TreeConfig& cfg, const ChannelParams& params, double tol) {
    const MomentVector m = exact_moments_bruteforce(cfg, params);
    const PiExpansion pe = compute_pi(m, params);
    const ZProductExpectations ez = exact_z_products(cfg, params);
    const double d = params.d;
    const double l2 = params.lambda * params.lambda;

    std::vector<IdentityReport> out;
    const auto add = [&](std::string name, double lhs, double arg) {
        IdentityReport r;
        r.name = std::move(name);
        r.lhs = lhs;
        r.rhs = std::pow(1 + arg, d);
        r.tolerance = tol;
        r.pass = std::abs(r.lhs - r.rhs) <= tol;
        r.mode = CheckMode::exact;
        out.push_back(std::move(r));
    };
    add("z_products.ez1", ez.z[0], 2 * l2 / params.theta * m.x_th);
    add("z_products.ez2", ez.z[1], 2 * l2 / params.theta * m.y_th);
    add("z_products.ez3", ez.z[2],
        2 * l2 / (1 - params.theta) * m.z_1mth);
    add("z_products.ez4", ez.z[3],
        2 * l2 / (1 - params.theta) * m.z_1mth);
    add("z_products.ez1_sq", ez.zz[0][0], pe.pi[0]);
    add("z_products.ez2_sq", ez.zz[1][1], pe.pi[1]);
    add("z_products.ez1z2", ez.zz[0][1], pe.pi[1]);
    add("z_products.ez3_sq", ez.zz[2][2], pe.pi[2]);
    add("z_products.ez1z3", ez.zz[0][2], pe.pi[3]);
    add("z_products.ez2z3", ez.zz[1][2], pe.pi[4]);
    add("z_products.ez3z4", ez.zz[2][3], pe.pi[5]);
    {
        IdentityReport r;
        r.name = "z_products.z1z2_equals_z2sq";
        r.lhs = ez.zz[0][1];
        r.rhs = ez.zz[1][1];
        r.tolerance = tol;
        r.pass = std::abs(r.lhs - r.rhs) <= tol;
        r.mode = CheckMode::exact;
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"broadcast channel, tree reconstruction statistics, and the "
                 "associated dynamical system"};
    app.set_version_flag("--version", version);
    app.require_subcommand(1);

    std::string config_path;
    const auto attach_config = [&config_path](CLI::App* sub) {
        sub->add_option("--config", config_path,
                        "flat JSON config file; explicit flags override it");
    };

    int rc = 0;

    // ---------------- channel ----------------
    auto* channel = app.add_subcommand(
        "channel", "print the transition matrix, stationary law, spectrum");
    attach_config(channel);
    double ch_theta = 0.5;
    int ch_d = 2;
    int ch_steps = -1;
    RateFlags ch_rate;
    channel->add_option("--theta", ch_theta, "community weight in (0,1)")
        ->required();
    ch_rate.attach(channel, /*required=*/true);
    channel->add_option("--d", ch_d, "offspring count (default 2)");
    channel->add_option("--steps", ch_steps,
                        "also print the s-step transition matrix");
    channel->callback([&] {
        const ChannelParams params{ch_theta, ch_rate.resolve(ch_d, 0.5),
                                   ch_d};
        validate(params);
        const Mat4 p = make_transition(params);
        const Vec4 pi = stationary_distribution(params.theta);
        const SpectralReport spec = spectral_check(p);
        json out;
        out["theta"] = params.theta;
        out["lambda"] = params.lambda;
        out["d"] = params.d;
        out["pi"] = json{pi[0], pi[1], pi[2], pi[3]};
        out["matrix"] = matrix_json(p);
        out["stochastic"] = is_stochastic(p);
        out["eigenvalues"] = json{{"leading", spec.leading},
                                  {"second", spec.second},
                                  {"multiplicity", spec.multiplicity}};
        out["ks_threshold_lambda"] = ks_threshold_lambda(params.d);
        if (ch_steps >= 0) {
            out["steps"] = ch_steps;
            out["matrix_steps"] =
                matrix_json(multi_step_closed_form(params, ch_steps));
        }
        std::cout << out.dump(2) << "\n";
    });

    // ---------------- simulate ----------------
    auto* simulate = app.add_subcommand(
        "simulate", "broadcast one tree and report leaves and posterior");
    attach_config(simulate);
    double sim_theta = 0.5;
    int sim_d = 2, sim_depth = 0, sim_root = 1;
    std::uint64_t sim_seed = 0;
    std::string sim_out;
    RateFlags sim_rate;
    simulate->add_option("--theta", sim_theta, "community weight in (0,1)")
        ->required();
    sim_rate.attach(simulate, /*required=*/true);
    simulate->add_option("--d", sim_d, "offspring count (default 2)");
    simulate->add_option("--depth", sim_depth, "tree depth")->required();
    simulate->add_option("--root", sim_root, "root state in 1..4")
        ->required();
    simulate->add_option("--seed", sim_seed, "rng seed (default 0)");
    simulate->add_option("--out", sim_out,
                         "write JSON here instead of stdout");
    simulate->callback([&] {
        const auto t0 = std::chrono::steady_clock::now();
        const ChannelParams params{sim_theta, sim_rate.resolve(sim_d, 0.5),
                                   sim_d};
        const TreeConfig cfg{sim_d, sim_depth};
        const LeafConfiguration leaves =
            broadcast_sample(cfg, params, sim_root, sim_seed);
        const PosteriorVector post = posterior_root(cfg, params, leaves);
        json cfg_echo{{"theta", params.theta},
                      {"d", sim_d},
                      {"depth", sim_depth},
                      {"root", sim_root},
                      {"seed", sim_seed}};
        sim_rate.echo(cfg_echo, params.lambda);
        json out;
        out["config"] = cfg_echo;
        out["leaves"] = json(leaves);
        out["posterior"] = json{post[0], post[1], post[2], post[3]};
        std::vector<std::string> outputs;
        emit(out.dump(2) + "\n", sim_out, outputs);
        const std::chrono::duration<double> dt =
            std::chrono::steady_clock::now() - t0;
        write_manifest("simulate", cfg_echo, dt.count(), outputs);
    });

    // ---------------- popdyn ----------------
    auto* popdyn = app.add_subcommand(
        "popdyn", "population-dynamics moment trajectory as CSV");
    attach_config(popdyn);
    double pd_theta = 0.5;
    int pd_d = 2, pd_levels = 10, pd_threads = 0;
    std::size_t pd_pop = 100000;
    std::uint64_t pd_seed = 0;
    std::string pd_out;
    RateFlags pd_rate;
    popdyn->add_option("--theta", pd_theta, "community weight in (0,1)")
        ->required();
    pd_rate.attach(popdyn, /*required=*/true);
    popdyn->add_option("--d", pd_d, "offspring count (default 2)");
    popdyn->add_option("--levels", pd_levels, "levels to evolve (default 10)");
    popdyn->add_option("--pop", pd_pop, "population size (default 100000)");
    popdyn->add_option("--seed", pd_seed, "rng seed (default 0)");
    popdyn->add_option("--threads", pd_threads,
                       "worker threads (default TREECAST_THREADS or 1)");
    popdyn->add_option("--out", pd_out, "CSV path (default stdout)");
    popdyn->callback([&] {
        const auto t0 = std::chrono::steady_clock::now();
        const ChannelParams params{pd_theta, pd_rate.resolve(pd_d, 0.5),
                                   pd_d};
        const int threads = resolve_threads(pd_threads);
        const std::vector<MomentEstimate> traj =
            run_trajectory(params, pd_levels, pd_pop, pd_seed, threads);
        json cfg_echo{{"theta", params.theta}, {"d", pd_d},
                      {"levels", pd_levels}, {"pop", pd_pop},
                      {"seed", pd_seed},     {"threads", threads}};
        pd_rate.echo(cfg_echo, params.lambda);
        std::vector<std::string> outputs;
        emit(trajectory_csv(traj), pd_out, outputs);
        const std::chrono::duration<double> dt =
            std::chrono::steady_clock::now() - t0;
        write_manifest("popdyn", cfg_echo, dt.count(), outputs);
    });

    // ---------------- verify ----------------
    auto* verify = app.add_subcommand(
        "verify", "run identity suites in exact or statistical mode");
    attach_config(verify);
    std::string vf_suite, vf_mode = "statistical";
    double vf_theta = 0.5, vf_sigma = 4.0, vf_tol = exact_identity_tol;
    double vf_cubic = 0.0, vf_quad = 0.5;
    int vf_d = 2, vf_depth = 2, vf_level = 2, vf_threads = 0;
    std::size_t vf_pop = 100000;
    std::uint64_t vf_seed = 0;
    bool vf_json = false;
    RateFlags vf_rate;
    verify->add_option("--suite", vf_suite, "which identity suite")
        ->required()
        ->check(CLI::IsMember(
            {"lemma1", "lemma2", "lemma3", "zproducts", "urec", "all"}));
    verify->add_option("--mode", vf_mode, "exact or statistical")
        ->check(CLI::IsMember({"exact", "statistical"}));
    verify->add_option("--theta", vf_theta, "community weight in (0,1)")
        ->required();
    vf_rate.attach(verify, /*required=*/false);
    verify->add_option("--d", vf_d, "offspring count (default 2)");
    verify->add_option("--depth", vf_depth,
                       "tree depth for exact mode (default 2)");
    verify->add_option("--level", vf_level,
                       "population level for statistical mode (default 2)");
    verify->add_option("--pop", vf_pop, "population size (default 100000)");
    verify->add_option("--seed", vf_seed, "rng seed (default 0)");
    verify->add_option("--sigma", vf_sigma,
                       "statistical tolerance multiplier (default 4)");
    verify->add_option("--tol", vf_tol,
                       "exact-mode absolute tolerance (default 1e-10)");
    verify->add_option("--cubic-slack", vf_cubic,
                       "truncation slack for zproducts, d > 2");
    verify->add_option("--quad-slack", vf_quad,
                       "quadratic slack for the u recursion (default 0.5)");
    verify->add_option("--threads", vf_threads,
                       "worker threads (default TREECAST_THREADS or 1)");
    verify->add_flag("--json", vf_json, "emit a JSON array instead of text");
    verify->callback([&] {
        const ChannelParams params{vf_theta, vf_rate.resolve(vf_d, 0.5),
                                   vf_d};
        validate(params);
        std::vector<IdentityReport> reports;
        const bool exact = vf_mode == "exact";
        const auto want = [&](const char* s) {
            return vf_suite == s || vf_suite == "all";
        };
        if (exact) {
            const TreeConfig cfg{vf_d, vf_depth};
            const MomentVector m = exact_moments_bruteforce(cfg, params);
            if (want("lemma1")) {
                const auto r = check_lemma1(m, vf_theta, vf_tol);
                reports.insert(reports.end(), r.begin(), r.end());
            }
            if (want("lemma2")) {
                const auto r = check_lemma2(
                    exact_cross_moments_bruteforce(cfg, params), m,
                    vf_theta, vf_tol);
                reports.insert(reports.end(), r.begin(), r.end());
            }
            if (want("lemma3")) {
                const auto r = check_lemma3(
                    exact_child_posterior_moments(cfg, params), m, params,
                    vf_tol);
                reports.insert(reports.end(), r.begin(), r.end());
            }
            if (want("zproducts")) {
                const auto r = exact_z_product_reports(cfg, params, vf_tol);
                reports.insert(reports.end(), r.begin(), r.end());
            }
            if (want("urec")) {
                std::vector<MomentEstimate> traj;
                for (int n = 0; n <= vf_depth; ++n) {
                    MomentEstimate e;
                    e.value = exact_moments_bruteforce({vf_d, n}, params);
                    traj.push_back(e);
                }
                const auto r =
                    check_u_recursion(traj, params, vf_sigma, vf_quad);
                reports.insert(reports.end(), r.begin(), r.end());
            }
        } else {
            const int threads = resolve_threads(vf_threads);
            Population pop = init_population(vf_pop, vf_theta);
            std::vector<MomentEstimate> traj = {estimate_moments(pop)};
            for (int l = 0; l < vf_level; ++l) {
                pop = evolve_one_level(pop, params, vf_pop, vf_seed,
                                       threads);
                traj.push_back(estimate_moments(pop));
            }
            if (want("lemma1")) {
                const auto r =
                    check_lemma1(traj.back(), vf_theta,
                                 CheckMode::statistical, vf_sigma);
                reports.insert(reports.end(), r.begin(), r.end());
            }
            if (want("lemma2")) {
                const auto r = check_lemma2(pop, vf_sigma);
                reports.insert(reports.end(), r.begin(), r.end());
            }
            if (want("lemma3")) {
                const auto r = check_lemma3(pop, params, vf_sigma);
                reports.insert(reports.end(), r.begin(), r.end());
            }
            if (want("zproducts")) {
                const auto r = check_z_products(pop, params, vf_sigma,
                                                vf_seed + 1, 0, vf_cubic);
                reports.insert(reports.end(), r.begin(), r.end());
            }
            if (want("urec") && traj.size() >= 2) {
                const auto r =
                    check_u_recursion(traj, params, vf_sigma, vf_quad);
                reports.insert(reports.end(), r.begin(), r.end());
            }
        }
        if (print_report_table(reports, vf_json) > 0) rc = 1;
    });

    // ---------------- dynsys ----------------
    auto* dynsys = app.add_subcommand(
        "dynsys", "iterate the truncated map; thresholds and Z bounds");
    attach_config(dynsys);
    double dy_theta = 0.5, dy_t0 = 1.0, dy_zeta = 0.99;
    int dy_d = 2, dy_steps = 500;
    bool dy_roots = false, dy_zbound = false;
    std::string dy_out;
    RateFlags dy_rate;
    dynsys->add_option("--theta", dy_theta, "community weight in (0,1)");
    dy_rate.attach(dynsys, /*required=*/false);
    dynsys->add_option("--d", dy_d, "offspring count (default 2)");
    dynsys->add_option("--steps", dy_steps, "iterations (default 500)");
    dynsys->add_option("--t0", dy_t0,
                       "start-state scale multiplier (default 1)");
    dynsys->add_option("--zeta", dy_zeta,
                       "zeta for the Z bound constants (default 0.99)");
    dynsys->add_flag("--roots", dy_roots,
                     "print the sign-change points of the quadratic "
                     "coefficient and exit");
    dynsys->add_flag("--zbound", dy_zbound,
                     "verify the Z growth bounds along the trajectory");
    dynsys->add_option("--out", dy_out, "trajectory CSV path");
    dynsys->callback([&] {
        if (dy_roots) {
            const auto [r1, r2] = threshold_roots();
            std::printf("%.10f\n%.10f\n", r1, r2);
            return;
        }
        const auto t0 = std::chrono::steady_clock::now();
        if (!dy_rate.given())
            throw parameter_error(
                "one of --lambda/--dlambda2 is required (or use --roots)");
        const ChannelParams params{dy_theta, dy_rate.resolve(dy_d, 0.5),
                                   dy_d};
        validate(params);
        DynState s0 = initial_state(dy_theta);
        s0.x_th *= dy_t0;
        s0.Z_th *= dy_t0;
        s0.x_1mth *= dy_t0;
        s0.Z_1mth *= dy_t0;
        const IterateResult res = iterate(s0, params, dy_steps);

        const auto [r1, r2] = threshold_roots();
        json out;
        out["roots"] = json{r1, r2};
        out["quadratic_coefficient"] = quadratic_coefficient(dy_theta);
        out["status"] = res.status == IterateStatus::completed
                            ? "completed"
                            : "diverged";
        out["divergence_index"] = res.divergence_index;
        out["steps"] = static_cast<int>(res.states.size()) - 1;
        const DynState& fin = res.states.back();
        out["final"] = json{{"x_th", fin.x_th},
                            {"Z_th", fin.Z_th},
                            {"x_1mth", fin.x_1mth},
                            {"Z_1mth", fin.Z_1mth}};
        if (dy_zbound) {
            const ZBoundParams zb = zbound_params(dy_theta, dy_zeta);
            const ZBoundReport rep = verify_zbound(res.states, params, zb);
            out["zbound"] = json{{"zeta", zb.zeta},
                                 {"Gamma", zb.Gamma},
                                 {"xi", zb.xi},
                                 {"pass", rep.pass},
                                 {"first_violation", rep.first_violation},
                                 {"which", rep.which},
                                 {"steps_checked", rep.steps_checked}};
            if (!rep.pass) rc = 1;
        }
        json cfg_echo{{"theta", dy_theta},
                      {"d", dy_d},
                      {"steps", dy_steps},
                      {"t0", dy_t0}};
        dy_rate.echo(cfg_echo, params.lambda);
        std::vector<std::string> outputs;
        if (!dy_out.empty()) emit(trajectory_csv(res.states), dy_out, outputs);
        std::cout << out.dump(2) << "\n";
        const std::chrono::duration<double> dt =
            std::chrono::steady_clock::now() - t0;
        write_manifest("dynsys", cfg_echo, dt.count(), outputs);
    });

    // ---------------- sweep ----------------
    auto* sweep = app.add_subcommand(
        "sweep", "classify reconstruction over a (theta, dlambda2) grid");
    attach_config(sweep);
    std::vector<double> sw_thetas, sw_dl2s;
    std::string sw_engine, sw_out;
    int sw_d = 2, sw_levels = 60, sw_steps = 500, sw_threads = 0;
    std::size_t sw_pop = 100000;
    std::uint64_t sw_seed = 0;
    double sw_tol = 1e-4, sw_t0 = 1.0;
    sweep->add_option("--theta", sw_thetas, "theta grid (comma separated)")
        ->required()
        ->delimiter(',');
    sweep->add_option("--dlambda2", sw_dl2s,
                      "d*lambda^2 grid (comma separated)")
        ->required()
        ->delimiter(',');
    sweep->add_option("--engine", sw_engine, "dynsys or popdyn")
        ->required()
        ->check(CLI::IsMember({"dynsys", "popdyn"}));
    sweep->add_option("--d", sw_d, "offspring count (default 2)");
    sweep->add_option("--levels", sw_levels,
                      "popdyn levels per cell (default 60)");
    sweep->add_option("--steps", sw_steps,
                      "dynsys iterations per cell (default 500)");
    sweep->add_option("--pop", sw_pop, "population size (default 100000)");
    sweep->add_option("--seed", sw_seed, "rng seed (default 0)");
    sweep->add_option("--tol", sw_tol,
                      "collapse tolerance for popdyn (default 1e-4)");
    sweep->add_option("--t0", sw_t0,
                      "dynsys start-state scale (default 1)");
    sweep->add_option("--threads", sw_threads,
                      "worker threads (default TREECAST_THREADS or 1)");
    sweep->add_option("--out", sw_out, "CSV path (default stdout)");
    sweep->callback([&] {
        const auto t0 = std::chrono::steady_clock::now();
        const int threads = resolve_threads(sw_threads);
        std::string csv =
            "theta,dlambda2,d,classification,final_x_th,final_x_1mth,se\n";
        for (const double theta : sw_thetas) {
            for (const double dl2 : sw_dl2s) {
                const ChannelParams params{
                    theta, std::sqrt(dl2 / static_cast<double>(sw_d)),
                    sw_d};
                validate(params);
                std::string cls;
                double fx = 0, fx2 = 0, se = 0;
                if (sw_engine == "dynsys") {
                    DynState s0 = initial_state(theta);
                    s0.x_th *= sw_t0;
                    s0.Z_th *= sw_t0;
                    s0.x_1mth *= sw_t0;
                    s0.Z_1mth *= sw_t0;
                    const IterateResult res =
                        iterate(s0, params, sw_steps);
                    const DynState& fin = res.states.back();
                    fx = fin.x_th;
                    fx2 = fin.x_1mth;
                    const double mag = std::max(fx, fx2);
                    if (res.status == IterateStatus::diverged ||
                        mag > std::max(s0.x_th, s0.x_1mth)) {
                        cls = "reconstructs";
                    } else if (mag < 1e-8) {
                        cls = "collapses";
                    } else {
                        cls = "undecided";
                    }
                } else {
                    const std::vector<MomentEstimate> traj = run_trajectory(
                        params, sw_levels, sw_pop, sw_seed, threads);
                    cls = to_string(
                        classify_reconstruction(traj, sw_tol));
                    fx = traj.back().value.x_th;
                    fx2 = traj.back().value.x_1mth;
                    se = std::max(traj.back().std_err.x_th,
                                  traj.back().std_err.x_1mth);
                }
                csv += fmt17(theta) + "," + fmt17(dl2) + "," +
                       std::to_string(sw_d) + "," + cls + "," + fmt17(fx) +
                       "," + fmt17(fx2) + "," + fmt17(se) + "\n";
            }
        }
        json cfg_echo{{"theta", sw_thetas}, {"dlambda2", sw_dl2s},
                      {"d", sw_d},          {"engine", sw_engine},
                      {"levels", sw_levels}, {"steps", sw_steps},
                      {"pop", sw_pop},      {"seed", sw_seed},
                      {"tol", sw_tol},      {"t0", sw_t0},
                      {"threads", threads}};
        std::vector<std::string> outputs;
        emit(csv, sw_out, outputs);
        const std::chrono::duration<double> dt =
            std::chrono::steady_clock::now() - t0;
        write_manifest("sweep", cfg_echo, dt.count(), outputs);
    });

    try {
        std::vector<std::string> args = merge_config(argc, argv);
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const io_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return rc;
}
