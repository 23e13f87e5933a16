#include "diffbal/artifacts.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace diffbal {

using nlohmann::json;

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw ConfigError("cannot write file: " + path);
    }
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open file: " + path);
    }
    return in;
}

std::vector<double> parse_csv_row(const std::string& line, const std::string& path) {
    std::vector<double> row;
    std::size_t start = 0;
    while (start <= line.size()) {
        const std::size_t sep = line.find(',', start);
        const std::string tok =
            line.substr(start, sep == std::string::npos ? sep : sep - start);
        try {
            std::size_t used = 0;
            row.push_back(std::stod(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::logic_error&) {
            throw ConfigError("bad numeric field \"" + tok + "\" in " + path);
        }
        if (sep == std::string::npos) break;
        start = sep + 1;
    }
    return row;
}

void write_json_file(const std::string& path, const json& j) {
    auto out = open_out(path);
    out << j.dump(2) << '\n';
}

json load_json_file(const std::string& path) {
    auto in = open_in(path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(path + " is not valid JSON: " + e.what());
    }
    return j;
}

} // namespace

void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
    auto out = open_out(path);
    out << 't';
    for (Index i = 1; i <= traj.n(); ++i) out << ",x" << i;
    for (Index i = 1; i <= traj.m(); ++i) out << ",u" << i;
    for (Index i = 1; i <= traj.p(); ++i) out << ",y" << i;
    out << '\n';
    for (Index k = 0; k <= traj.grid.N; ++k) {
        out << format_double(traj.grid.time(k));
        for (Index i = 0; i < traj.n(); ++i) out << ',' << format_double(traj.X(k, i));
        for (Index i = 0; i < traj.m(); ++i) out << ',' << format_double(traj.U(k, i));
        for (Index i = 0; i < traj.p(); ++i) out << ',' << format_double(traj.Y(k, i));
        out << '\n';
    }
}

Trajectory read_trajectory_csv(const std::string& path) {
    auto in = open_in(path);
    std::string header;
    if (!std::getline(in, header)) {
        throw ConfigError("empty trajectory file: " + path);
    }
    Index n = 0, m = 0, p = 0;
    {
        std::stringstream ss(header);
        std::string col;
        bool first = true;
        while (std::getline(ss, col, ',')) {
            if (first) {
                if (col != "t") throw ConfigError(path + ": first column must be t");
                first = false;
            } else if (col.rfind('x', 0) == 0) {
                ++n;
            } else if (col.rfind('u', 0) == 0) {
                ++m;
            } else if (col.rfind('y', 0) == 0) {
                ++p;
            } else {
                throw ConfigError(path + ": unexpected column " + col);
            }
        }
    }
    if (n == 0 || m == 0 || p == 0) {
        throw ConfigError(path + ": header must list x, u and y columns");
    }

    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto row = parse_csv_row(line, path);
        if (static_cast<Index>(row.size()) != 1 + n + m + p) {
            throw ConfigError(path + ": row has wrong field count");
        }
        rows.push_back(std::move(row));
    }
    if (rows.size() < 2) {
        throw ConfigError(path + ": need at least two grid points");
    }

    const auto N = static_cast<Index>(rows.size()) - 1;
    const double t0 = rows.front()[0];
    const double tf = rows.back()[0];
    const double dt = rows[1][0] - rows[0][0];
    const TimeGrid grid = TimeGrid::make(t0, tf, dt);
    if (grid.N != N) {
        throw ConfigError(path + ": time column is not a uniform grid");
    }
    for (Index k = 0; k <= N; ++k) {
        if (std::abs(rows[k][0] - grid.time(k)) > 1e-9 * std::max(1.0, tf - t0)) {
            throw ConfigError(path + ": time column is not a uniform grid");
        }
    }

    Trajectory traj;
    traj.grid = grid;
    traj.model_id = "file:" + path;
    traj.X.resize(N + 1, n);
    traj.U.resize(N + 1, m);
    traj.Y.resize(N + 1, p);
    for (Index k = 0; k <= N; ++k) {
        for (Index i = 0; i < n; ++i) traj.X(k, i) = rows[k][1 + i];
        for (Index i = 0; i < m; ++i) traj.U(k, i) = rows[k][1 + n + i];
        for (Index i = 0; i < p; ++i) traj.Y(k, i) = rows[k][1 + n + m + i];
    }
    return traj;
}

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& M) {
    auto out = open_out(path);
    for (Index i = 0; i < M.rows(); ++i) {
        for (Index j = 0; j < M.cols(); ++j) {
            if (j) out << ',';
            out << format_double(M(i, j));
        }
        out << '\n';
    }
}

Eigen::MatrixXd read_matrix_csv(const std::string& path) {
    auto in = open_in(path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        rows.push_back(parse_csv_row(line, path));
        if (rows.back().size() != rows.front().size()) {
            throw ConfigError(path + ": ragged rows");
        }
    }
    if (rows.empty()) {
        throw ConfigError(path + ": empty matrix");
    }
    Eigen::MatrixXd M(rows.size(), rows[0].size());
    for (Index i = 0; i < M.rows(); ++i) {
        for (Index j = 0; j < M.cols(); ++j) M(i, j) = rows[i][j];
    }
    return M;
}

std::string gramian_kind_name(GramianKind k) {
    switch (k) {
        case GramianKind::reachability: return "reachability";
        case GramianKind::observability: return "observability";
        case GramianKind::dual_reachability: return "dual_reachability";
    }
    return "?";
}

std::string gramian_method_name(GramianMethod m) {
    switch (m) {
        case GramianMethod::exact_variational: return "exact_variational";
        case GramianMethod::frechet_approx: return "frechet_approx";
        case GramianMethod::lti_analytic: return "lti_analytic";
    }
    return "?";
}

namespace {

GramianKind kind_from_name(const std::string& s) {
    if (s == "reachability") return GramianKind::reachability;
    if (s == "observability") return GramianKind::observability;
    if (s == "dual_reachability") return GramianKind::dual_reachability;
    throw ConfigError("unknown Gramian kind: " + s);
}

GramianMethod method_from_name(const std::string& s) {
    if (s == "exact_variational") return GramianMethod::exact_variational;
    if (s == "frechet_approx") return GramianMethod::frechet_approx;
    if (s == "lti_analytic") return GramianMethod::lti_analytic;
    throw ConfigError("unknown Gramian method: " + s);
}

} // namespace

void write_gramian(const std::string& prefix, const Gramian& g) {
    write_matrix_csv(prefix + ".csv", g.W);
    const Eigen::VectorXd eig = gramian_eigenvalues(g);
    json j;
    j["schema_version"] = kSchemaVersion;
    j["kind"] = gramian_kind_name(g.kind);
    j["interval"] = {g.interval.t1, g.interval.t2};
    j["method"] = gramian_method_name(g.method);
    j["quadrature"] = g.quadrature;
    j["base_id"] = g.base_id;
    j["eigenvalues"] = std::vector<double>(eig.data(), eig.data() + eig.size());
    write_json_file(prefix + ".json", j);
}

Gramian read_gramian(const std::string& csv_path) {
    Gramian g;
    g.W = read_matrix_csv(csv_path);
    if (g.W.rows() != g.W.cols()) {
        throw ConfigError(csv_path + ": Gramian must be square");
    }
    g.base_id = "file:" + csv_path;

    std::string sidecar = csv_path;
    if (sidecar.size() > 4 && sidecar.substr(sidecar.size() - 4) == ".csv") {
        sidecar = sidecar.substr(0, sidecar.size() - 4);
    }
    sidecar += ".json";
    std::ifstream probe(sidecar);
    if (probe) {
        const json j = load_json_file(sidecar);
        if (j.contains("kind")) g.kind = kind_from_name(j["kind"].get<std::string>());
        if (j.contains("method")) {
            g.method = method_from_name(j["method"].get<std::string>());
        }
        if (j.contains("interval")) {
            g.interval.t1 = j["interval"][0].get<double>();
            g.interval.t2 = j["interval"][1].get<double>();
        }
        if (j.contains("base_id")) g.base_id = j["base_id"].get<std::string>();
    }
    return g;
}

void write_balancing_result(const std::string& prefix, const BalancingResult& bal) {
    write_matrix_csv(prefix + "_T.csv", bal.T);
    write_matrix_csv(prefix + "_Tinv.csv", bal.Tinv);
    json j;
    j["schema_version"] = kSchemaVersion;
    j["sigma"] = std::vector<double>(bal.sigma.data(), bal.sigma.data() + bal.sigma.size());
    j["effective_rank"] = bal.effective_rank;
    j["residuals"] = {{"reach", bal.residual_reach}, {"obs", bal.residual_obs}};
    write_json_file(prefix + "_sigma.json", j);
}

void write_eigen_basis(const std::string& prefix, const EigenBasis& basis) {
    write_matrix_csv(prefix + "_T.csv", basis.U.transpose());
    write_matrix_csv(prefix + "_Tinv.csv", basis.U);
    const Eigen::VectorXd& ev = basis.eigenvalues;
    const double emax = ev.size() ? std::abs(ev[0]) : 0.0;
    Index rank = 0;
    for (Index i = 0; i < ev.size(); ++i) {
        if (ev[i] > kClampThreshold * emax) ++rank;
    }
    json j;
    j["schema_version"] = kSchemaVersion;
    j["sigma"] = std::vector<double>(ev.data(), ev.data() + ev.size());
    j["effective_rank"] = rank;
    j["residuals"] = {{"reach", 0.0}, {"obs", 0.0}};
    write_json_file(prefix + "_sigma.json", j);
}

StoredTransform read_transform(const std::string& prefix) {
    StoredTransform tr;
    tr.T = read_matrix_csv(prefix + "_T.csv");
    tr.Tinv = read_matrix_csv(prefix + "_Tinv.csv");
    const json j = load_json_file(prefix + "_sigma.json");
    const auto sig = j.at("sigma").get<std::vector<double>>();
    tr.sigma = Eigen::Map<const Eigen::VectorXd>(sig.data(), sig.size());
    tr.effective_rank = j.at("effective_rank").get<Index>();
    return tr;
}

void write_error_report(const std::string& path, const OutputErrorReport& rep) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["rel_l2"] = rep.rel_l2;
    j["max_abs"] = rep.max_abs;
    j["argmax_t"] = rep.argmax_t;
    j["per_channel_rel_l2"] = std::vector<double>(
        rep.per_channel_rel_l2.data(),
        rep.per_channel_rel_l2.data() + rep.per_channel_rel_l2.size());
    j["degenerate"] = rep.degenerate;
    j["diverged"] = rep.diverged;
    if (rep.diverged) j["diverged_step"] = rep.diverged_step;
    write_json_file(path, j);
}

void write_pd_report(const std::string& path, const PDReport& rep) {
    json subs = json::array();
    for (const auto& s : rep.subintervals) {
        subs.push_back({{"t1", s.t1},
                        {"t2", s.t2},
                        {"lambda_min", s.lambda_min},
                        {"lambda_max", s.lambda_max},
                        {"positive", s.positive}});
    }
    json j;
    j["schema_version"] = kSchemaVersion;
    j["kind"] = gramian_kind_name(rep.kind);
    j["threshold"] = rep.threshold;
    j["subintervals"] = subs;
    j["verdict_positive"] = rep.all_positive;
    write_json_file(path, j);
}

void write_symmetry_certificate(const std::string& path,
                                const SymmetryCertificate& cert) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["res_dyn"] = cert.res_dyn;
    j["res_out"] = cert.res_out;
    j["verdict_positive"] = cert.positive;
    j["cond_S"] = cert.cond_S;
    j["tolerance"] = cert.tolerance;
    j["sample_count"] = cert.sample_count;
    write_json_file(path, j);
}

std::string file_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot hash missing file: " + path);
    }
    std::uint64_t h = 1469598103934665603ull;
    char buf[4096];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        const auto got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ull;
        }
        if (!in) break;
    }
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

void write_manifest(const std::string& path, const RunManifest& manifest) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["command"] = manifest.command;
    j["args"] = manifest.args;
    j["model"] = manifest.model;
    if (manifest.grid) {
        j["grid"] = {{"t0", manifest.grid->t0},
                     {"tf", manifest.grid->tf},
                     {"dt", manifest.grid->dt}};
    } else {
        j["grid"] = nullptr;
    }
    j["scheme"] = manifest.scheme;
    j["method"] = manifest.method;
    if (manifest.s) {
        j["s"] = *manifest.s;
    } else {
        j["s"] = nullptr;
    }
    j["seed"] = manifest.seed;
    j["out"] = manifest.out;
    json artifacts = json::array();
    for (const auto& a : manifest.artifacts) {
        artifacts.push_back({{"path", a}, {"fnv1a64", file_hash(a)}});
    }
    j["artifacts"] = artifacts;
    write_json_file(path, j);
}

std::vector<std::string> read_manifest_args(const std::string& path) {
    const json j = load_json_file(path);
    return j.at("args").get<std::vector<std::string>>();
}

} // namespace diffbal
