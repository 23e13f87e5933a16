// Command-line front end: simulation, Gramian computation, balancing,
// reduction, comparison and checks, with CSV/JSON artifacts and a manifest
// written alongside every output set.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "diffbal/artifacts.hpp"
#include "diffbal/balancing.hpp"
#include "diffbal/gramian.hpp"
#include "diffbal/models.hpp"
#include "diffbal/simulate.hpp"
#include "diffbal/symmetry.hpp"

namespace fs = std::filesystem;
using namespace diffbal;

namespace {

struct GridFlags {
    double t0 = 0.0;
    double tf = 0.0;
    double dt = 0.0;
    std::string scheme = "rk4";
    std::string x0 = "zeros";
    std::string input = "zero";
};

void add_grid_flags(CLI::App* cmd, GridFlags& g, bool required = true) {
    auto* t0 = cmd->add_option("--t0", g.t0, "start time");
    auto* tf = cmd->add_option("--tf", g.tf, "end time");
    auto* dt = cmd->add_option("--dt", g.dt, "step size");
    if (required) {
        t0->required();
        tf->required();
        dt->required();
    }
    cmd->add_option("--scheme", g.scheme, "integration scheme: euler|rk4");
    cmd->add_option("--x0", g.x0, "initial state: zeros, inline list, or file");
    cmd->add_option("--input", g.input,
                    "input signal: zero or expression(s) in t, ';'-separated");
}

Scheme parse_scheme(const std::string& s) {
    if (s == "euler") return Scheme::euler;
    if (s == "rk4") return Scheme::rk4;
    throw ConfigError("unknown scheme '" + s + "' (use euler or rk4)");
}

TimeGrid make_grid(const GridFlags& g) {
    try {
        return TimeGrid::make(g.t0, g.tf, g.dt);
    } catch (const ConfigError&) {
        throw ConfigError("--t0/--tf/--dt do not form a uniform grid: dt=" +
                          std::to_string(g.dt) + " must divide tf-t0=" +
                          std::to_string(g.tf - g.t0));
    }
}

Eigen::VectorXd parse_x0(const std::string& spec, Index n) {
    if (spec == "zeros") {
        return Eigen::VectorXd::Zero(n);
    }
    std::vector<double> vals;
    if (fs::exists(spec)) {
        std::ifstream in(spec);
        double v;
        while (in >> v) {
            vals.push_back(v);
            in >> std::ws;
            if (in.peek() == ',') in.get();
        }
    } else {
        std::string token;
        std::stringstream ss(spec);
        while (std::getline(ss, token, ',')) {
            try {
                vals.push_back(std::stod(token));
            } catch (const std::logic_error&) {
                throw ConfigError("bad --x0 entry: " + token);
            }
        }
    }
    if (static_cast<Index>(vals.size()) != n) {
        throw ConfigError("--x0 has " + std::to_string(vals.size()) +
                          " entries, system expects " + std::to_string(n));
    }
    return Eigen::Map<const Eigen::VectorXd>(vals.data(), vals.size());
}

std::string resolve_out(const std::string& out) {
    const char* dir = std::getenv("DIFFBAL_OUT_DIR");
    fs::path path(out);
    if (dir && *dir && path.is_relative()) {
        path = fs::path(dir) / path;
    }
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    return path.string();
}

Eigen::MatrixXd parse_S(const std::string& spec, Index n) {
    if (spec == "identity") {
        return Eigen::MatrixXd::Identity(n, n);
    }
    const Eigen::MatrixXd S = read_matrix_csv(spec);
    if (S.rows() != n || S.cols() != n) {
        throw ConfigError("--S matrix must be " + std::to_string(n) + "x" +
                          std::to_string(n));
    }
    return S;
}

struct CommonFlags {
    std::uint64_t seed = 0;
    int threads = 1;
};

void add_common_flags(CLI::App* cmd, CommonFlags& c) {
    if (const char* env = std::getenv("DIFFBAL_THREADS"); env && *env) {
        try {
            c.threads = std::stoi(env);
        } catch (const std::logic_error&) {
            c.threads = 0;  // rejected later with a clear message
        }
    }
    cmd->add_option("--seed", c.seed, "seed recorded in the manifest");
    cmd->add_option("--threads", c.threads,
                    "worker count (env DIFFBAL_THREADS); 1 forces the "
                    "deterministic sequential mode");
}

void finish_run(const std::string& manifest_path, RunManifest manifest,
                const CommonFlags& common) {
    if (common.threads < 1) {
        throw ConfigError("--threads must be >= 1");
    }
    manifest.seed = common.seed;
    write_manifest(manifest_path, manifest);
}

int run_cli(const std::vector<std::string>& args, int depth);

int dispatch(const std::vector<std::string>& args, int depth) {
    CLI::App app{"differential balanced truncation toolkit"};
    app.require_subcommand(1);

    // --- simulate ---------------------------------------------------------
    auto* sim = app.add_subcommand("simulate", "integrate a model and write a trajectory CSV");
    std::string sim_model, sim_out;
    GridFlags sim_grid;
    CommonFlags sim_common;
    sim->add_option("--model", sim_model, "model: rl:<n> or JSON config path")->required();
    add_grid_flags(sim, sim_grid);
    sim->add_option("--out", sim_out, "output trajectory CSV")->required();
    add_common_flags(sim, sim_common);

    // --- gramian ----------------------------------------------------------
    auto* gram = app.add_subcommand("gramian", "compute a Gramian along a trajectory");
    std::string g_model, g_out, g_kind = "reach", g_method = "exact", g_S = "identity";
    double g_s = 0.01;
    std::optional<double> g_t1, g_t2;
    GridFlags g_grid;
    CommonFlags g_common;
    gram->add_option("--model", g_model)->required();
    gram->add_option("--kind", g_kind, "reach|obs|dual");
    gram->add_option("--method", g_method, "exact|frechet");
    gram->add_option("--s", g_s, "Frechet perturbation size");
    gram->add_option("--S", g_S, "symmetry matrix for --kind dual: identity or CSV file");
    gram->add_option("--t1", g_t1, "Gramian interval start (default t0)");
    gram->add_option("--t2", g_t2, "Gramian interval end (default tf)");
    add_grid_flags(gram, g_grid);
    gram->add_option("--out", g_out, "output prefix (<prefix>.csv + <prefix>.json)")->required();
    add_common_flags(gram, g_common);

    // --- balance ----------------------------------------------------------
    auto* bal = app.add_subcommand("balance", "balancing transform from Gramian files");
    std::string b_wr, b_wo, b_out;
    bool b_symmetric = false;
    CommonFlags b_common;
    bal->add_option("--wr", b_wr, "reachability Gramian CSV")->required();
    bal->add_option("--wo", b_wo, "observability Gramian CSV");
    bal->add_flag("--symmetric", b_symmetric,
                  "single-Gramian eigendecomposition path (no --wo)");
    bal->add_option("--out", b_out, "output prefix")->required();
    add_common_flags(bal, b_common);

    // --- reduce -----------------------------------------------------------
    auto* red = app.add_subcommand("reduce", "simulate a reduced-order model");
    std::string r_model, r_transform, r_out;
    Index r_k = 0;
    GridFlags r_grid;
    CommonFlags r_common;
    red->add_option("--model", r_model)->required();
    red->add_option("--transform", r_transform, "prefix written by balance")->required();
    red->add_option("--k", r_k, "reduced order")->required();
    add_grid_flags(red, r_grid);
    red->add_option("--out", r_out, "output reduced trajectory CSV")->required();
    add_common_flags(red, r_common);

    // --- compare ----------------------------------------------------------
    auto* cmp = app.add_subcommand("compare", "output error between two trajectory CSVs");
    std::string c_full, c_reduced, c_out;
    CommonFlags c_common;
    cmp->add_option("--full", c_full, "reference trajectory CSV")->required();
    cmp->add_option("--reduced", c_reduced, "candidate trajectory CSV")->required();
    cmp->add_option("--out", c_out, "output error-report JSON")->required();
    add_common_flags(cmp, c_common);

    // --- check ------------------------------------------------------------
    auto* check = app.add_subcommand("check", "positivity and symmetry probes");
    check->require_subcommand(1);

    auto* chk_sym = check->add_subcommand("symmetry", "variational symmetry certificate");
    std::string cs_model, cs_S = "identity", cs_out;
    GridFlags cs_grid;
    CommonFlags cs_common;
    bool cs_has_grid = false;
    chk_sym->add_option("--model", cs_model)->required();
    chk_sym->add_option("--S", cs_S, "identity or CSV file");
    add_grid_flags(chk_sym, cs_grid, /*required=*/false);
    chk_sym->add_option("--out", cs_out)->required();
    add_common_flags(chk_sym, cs_common);

    auto* chk_pd = check->add_subcommand("pd", "positive-definiteness sweep");
    std::string cp_model, cp_kind = "reach", cp_out;
    Index cp_subintervals = 1;
    GridFlags cp_grid;
    CommonFlags cp_common;
    chk_pd->add_option("--model", cp_model)->required();
    chk_pd->add_option("--kind", cp_kind, "reach|obs");
    chk_pd->add_option("--subintervals", cp_subintervals, "minimum subinterval count");
    add_grid_flags(chk_pd, cp_grid);
    chk_pd->add_option("--out", cp_out)->required();
    add_common_flags(chk_pd, cp_common);

    // --- rerun ------------------------------------------------------------
    auto* rerun = app.add_subcommand("rerun", "replay a run from its manifest");
    std::string rr_manifest;
    rerun->add_option("--manifest", rr_manifest)->required();

    std::vector<std::string> cli_args(args.rbegin(), args.rend());
    app.parse(cli_args);

    if (sim->parsed()) {
        const SystemModel sys = model_from_designator(sim_model);
        const TimeGrid grid = make_grid(sim_grid);
        const InputSignal u = input_from_text(sim_grid.input, sys.m());
        const Eigen::VectorXd x0 = parse_x0(sim_grid.x0, sys.n());
        const Trajectory traj = integrate(sys, x0, u, grid, parse_scheme(sim_grid.scheme));
        const std::string out = resolve_out(sim_out);
        write_trajectory_csv(out, traj);
        RunManifest mf{"simulate", args, sim_model, grid, sim_grid.scheme,
                       "",         {},   0,         out,  {out}};
        finish_run(out + ".manifest.json", mf, sim_common);
        std::cout << "wrote " << out << " (" << grid.N + 1 << " rows)\n";
        return 0;
    }

    if (gram->parsed()) {
        const SystemModel sys = model_from_designator(g_model);
        const TimeGrid grid = make_grid(g_grid);
        const InputSignal u = input_from_text(g_grid.input, sys.m());
        const Eigen::VectorXd x0 = parse_x0(g_grid.x0, sys.n());
        const Scheme scheme = parse_scheme(g_grid.scheme);
        const Trajectory base = integrate(sys, x0, u, grid, scheme);
        const Interval iv{g_t1.value_or(grid.t0), g_t2.value_or(grid.tf)};

        GramianOptions opts;
        opts.scheme = scheme;
        opts.s = g_s;
        if (g_method == "exact") {
            opts.method = GramianMethod::exact_variational;
        } else if (g_method == "frechet") {
            opts.method = GramianMethod::frechet_approx;
        } else {
            throw ConfigError("--method must be exact or frechet");
        }

        Gramian result;
        if (g_kind == "reach") {
            result = reachability_gramian(sys, base, u, iv, opts);
        } else if (g_kind == "obs") {
            result = observability_gramian(sys, base, u, iv, opts);
        } else if (g_kind == "dual") {
            if (g_method != "exact") {
                throw ConfigError("--kind dual supports --method exact only");
            }
            const Eigen::MatrixXd S = parse_S(g_S, sys.n());
            const DualGramianResult dual =
                dual_reachability_gramian(sys, S, base, iv, scheme);
            std::cout << "dual congruence mismatch: S^T W S " << dual.mismatch_St_W_S
                      << ", S W S^T " << dual.mismatch_S_W_St << "\n";
            result = dual.W;
        } else {
            throw ConfigError("--kind must be reach, obs or dual");
        }

        const std::string out = resolve_out(g_out);
        write_gramian(out, result);
        RunManifest mf{"gramian", args, g_model, grid, g_grid.scheme,
                       g_method,  g_s,  0,       out,  {out + ".csv", out + ".json"}};
        finish_run(out + ".manifest.json", mf, g_common);
        std::cout << "wrote " << out << ".csv\n";
        return 0;
    }

    if (bal->parsed()) {
        if (b_symmetric == !b_wo.empty()) {
            throw ConfigError("balance needs either --wo or --symmetric");
        }
        const std::string out = resolve_out(b_out);
        const Gramian WR = read_gramian(b_wr);
        if (b_symmetric) {
            const EigenBasis basis = eigen_truncate_basis(WR);
            write_eigen_basis(out, basis);
        } else {
            Gramian WO = read_gramian(b_wo);
            const BalancingResult res = balance(WR, WO);
            write_balancing_result(out, res);
        }
        RunManifest mf{"balance",
                       args,
                       b_symmetric ? b_wr : b_wr + "," + b_wo,
                       {},
                       "",
                       b_symmetric ? "symmetric" : "two_gramian",
                       {},
                       0,
                       out,
                       {out + "_T.csv", out + "_Tinv.csv", out + "_sigma.json"}};
        finish_run(out + ".manifest.json", mf, b_common);
        std::cout << "wrote " << out << "_T.csv\n";
        return 0;
    }

    if (red->parsed()) {
        const SystemModel sys = model_from_designator(r_model);
        const StoredTransform tr = read_transform(r_transform);
        if (tr.T.rows() != sys.n()) {
            throw ConfigError("transform dimension does not match model");
        }
        if (r_k > tr.effective_rank) {
            throw RankError("requested order k=" + std::to_string(r_k) +
                            " exceeds effective rank " +
                            std::to_string(tr.effective_rank));
        }
        const ReducedModel reduced(sys, tr.T, tr.Tinv, r_k);
        const TimeGrid grid = make_grid(r_grid);
        const InputSignal u = input_from_text(r_grid.input, sys.m());
        const Eigen::VectorXd x0 = parse_x0(r_grid.x0, sys.n());
        const Trajectory traj =
            integrate(reduced.reduced_system(), reduced.project_state(x0), u, grid,
                      parse_scheme(r_grid.scheme));
        const std::string out = resolve_out(r_out);
        write_trajectory_csv(out, traj);
        RunManifest mf{"reduce", args, r_model, grid, r_grid.scheme,
                       "",       {},   0,       out,  {out}};
        finish_run(out + ".manifest.json", mf, r_common);
        std::cout << "wrote " << out << " (order " << r_k << ")\n";
        return 0;
    }

    if (cmp->parsed()) {
        const Trajectory full = read_trajectory_csv(c_full);
        const Trajectory reduced = read_trajectory_csv(c_reduced);
        const OutputErrorReport rep = compare_trajectories(full, reduced);
        const std::string out = resolve_out(c_out);
        write_error_report(out, rep);
        RunManifest mf{"compare", args, c_full + "," + c_reduced,
                       {},        "",   "",
                       {},        0,    out,
                       {out}};
        finish_run(out + ".manifest.json", mf, c_common);
        std::cout << "rel_l2 " << rep.rel_l2 << ", max_abs " << rep.max_abs
                  << " at t=" << rep.argmax_t << "\n";
        return 0;
    }

    if (chk_sym->parsed()) {
        const SystemModel sys = model_from_designator(cs_model);
        const Eigen::MatrixXd S = parse_S(cs_S, sys.n());
        cs_has_grid = chk_sym->count("--t0") > 0;
        std::vector<Eigen::VectorXd> samples;
        std::optional<TimeGrid> grid;
        if (cs_has_grid) {
            const TimeGrid g = make_grid(cs_grid);
            const InputSignal u = input_from_text(cs_grid.input, sys.m());
            const Eigen::VectorXd x0 = parse_x0(cs_grid.x0, sys.n());
            const Trajectory base =
                integrate(sys, x0, u, g, parse_scheme(cs_grid.scheme));
            samples = default_symmetry_samples(base);
            grid = g;
        } else {
            samples.push_back(Eigen::VectorXd::Zero(sys.n()));
        }
        const SymmetryCertificate cert = check_variational_symmetry(sys, S, samples);
        const std::string out = resolve_out(cs_out);
        write_symmetry_certificate(out, cert);
        RunManifest mf{"check symmetry", args, cs_model, grid, cs_grid.scheme,
                       "",               {},   0,        out,  {out}};
        finish_run(out + ".manifest.json", mf, cs_common);
        std::cout << (cert.positive ? "symmetry certificate positive"
                                    : "symmetry certificate NEGATIVE")
                  << " (res_dyn " << cert.res_dyn << ", res_out " << cert.res_out
                  << ")\n";
        return 0;
    }

    if (chk_pd->parsed()) {
        const SystemModel sys = model_from_designator(cp_model);
        const TimeGrid grid = make_grid(cp_grid);
        const InputSignal u = input_from_text(cp_grid.input, sys.m());
        const Eigen::VectorXd x0 = parse_x0(cp_grid.x0, sys.n());
        const Scheme scheme = parse_scheme(cp_grid.scheme);
        const Trajectory base = integrate(sys, x0, u, grid, scheme);
        GramianKind kind;
        if (cp_kind == "reach") {
            kind = GramianKind::reachability;
        } else if (cp_kind == "obs") {
            kind = GramianKind::observability;
        } else {
            throw ConfigError("--kind must be reach or obs");
        }
        const PDReport rep = pd_probe(sys, base, kind, cp_subintervals, scheme);
        const std::string out = resolve_out(cp_out);
        write_pd_report(out, rep);
        RunManifest mf{"check pd", args, cp_model, grid, cp_grid.scheme,
                       "",         {},   0,        out,  {out}};
        finish_run(out + ".manifest.json", mf, cp_common);
        std::cout << (rep.all_positive ? "verdict positive" : "verdict NEGATIVE")
                  << " over " << rep.subintervals.size() << " subintervals\n";
        return 0;
    }

    if (rerun->parsed()) {
        if (depth > 0) {
            throw ConfigError("rerun manifests may not nest");
        }
        return run_cli(read_manifest_args(rr_manifest), depth + 1);
    }

    return 0;
}

int run_cli(const std::vector<std::string>& args, int depth) {
    try {
        return dispatch(args, depth);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            // --help and friends
            std::cout << e.what() << "\n";
            return 0;
        }
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DivergenceError& e) {
        std::cerr << "divergence: " << e.what() << "\n";
        return 3;
    } catch (const EvalError& e) {
        std::cerr << "evaluation failure: " << e.what() << "\n";
        return 3;
    } catch (const GramianError& e) {
        std::cerr << "gramian validity: " << e.what() << "\n";
        return 4;
    } catch (const RankError& e) {
        std::cerr << "rank: " << e.what() << "\n";
        return 5;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run_cli(args, 0);
}
