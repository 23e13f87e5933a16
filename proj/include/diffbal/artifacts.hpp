#ifndef DIFFBAL_ARTIFACTS_HPP
#define DIFFBAL_ARTIFACTS_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "diffbal/balancing.hpp"
#include "diffbal/gramian.hpp"
#include "diffbal/symmetry.hpp"
#include "diffbal/trajectory.hpp"

namespace diffbal {

inline constexpr int kSchemaVersion = 1;

/// All numeric output is written with 17 significant digits so that reading
/// back reproduces the doubles exactly.
std::string format_double(double v);

/// Trajectory CSV: header `t,x1..xn,u1..um,y1..yp`, one row per grid point.
void write_trajectory_csv(const std::string& path, const Trajectory& traj);
Trajectory read_trajectory_csv(const std::string& path);

/// Bare matrix CSV: one comma-separated row per line, no header.
void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& M);
Eigen::MatrixXd read_matrix_csv(const std::string& path);

/// Gramian artifacts: `<prefix>.csv` (the matrix) and `<prefix>.json`
/// sidecar with kind, interval, method, descending eigenvalues and base id.
void write_gramian(const std::string& prefix, const Gramian& g);

/// Reads `<path>` as the matrix and, when present, `<path minus .csv>.json`
/// for the metadata.
Gramian read_gramian(const std::string& csv_path);

std::string gramian_kind_name(GramianKind k);
std::string gramian_method_name(GramianMethod m);

void write_balancing_result(const std::string& prefix, const BalancingResult& bal);
void write_eigen_basis(const std::string& prefix, const EigenBasis& basis);

/// Reads `<prefix>_T.csv`, `<prefix>_Tinv.csv` and `<prefix>_sigma.json`.
struct StoredTransform {
    Eigen::MatrixXd T;
    Eigen::MatrixXd Tinv;
    Eigen::VectorXd sigma;
    Index effective_rank = 0;
};
StoredTransform read_transform(const std::string& prefix);

void write_error_report(const std::string& path, const OutputErrorReport& rep);
void write_pd_report(const std::string& path, const PDReport& rep);
void write_symmetry_certificate(const std::string& path,
                                const SymmetryCertificate& cert);

/// FNV-1a 64-bit hash of a file's bytes, as a fixed-width hex string.
std::string file_hash(const std::string& path);

/// Reproducibility record written alongside every output set. `args` is the
/// exact argument vector, so a run can be replayed verbatim.
struct RunManifest {
    std::string command;
    std::vector<std::string> args;
    std::string model;
    std::optional<TimeGrid> grid;
    std::string scheme;
    std::string method;
    std::optional<double> s;
    std::uint64_t seed = 0;
    std::string out;
    std::vector<std::string> artifacts;  // paths, hashed at write time
};

void write_manifest(const std::string& path, const RunManifest& manifest);

/// Reads back the argument vector of a stored manifest.
std::vector<std::string> read_manifest_args(const std::string& path);

} // namespace diffbal

#endif // DIFFBAL_ARTIFACTS_HPP
