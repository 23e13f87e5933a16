#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <json.hpp>

#include "diffbal/artifacts.hpp"
#include "diffbal/gramian.hpp"
#include "diffbal/models.hpp"

using namespace diffbal;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("diffbal_cli_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

int run(const std::string& args) {
    const std::string cmd = std::string(DIFFBAL_CLI_PATH) + " " + args +
                            " >/dev/null 2>/dev/null";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const std::string kRlFlags =
    " --x0 zeros --input \"sin(t)+sin(3*t)\" --t0 0 --tf 2 --dt 0.01";

} // namespace

TEST_CASE("simulate writes the trajectory, manifest, and is byte-deterministic") {
    TempDir tmp;
    const std::string out = tmp.file("base.csv");
    const std::string cmd = "simulate --model rl:6" + kRlFlags +
                            " --scheme euler --out " + out;
    REQUIRE(run(cmd) == 0);
    REQUIRE(fs::exists(out));
    REQUIRE(fs::exists(out + ".manifest.json"));

    // the CSV matches an in-process integration bitwise
    const SystemModel sys = rl_network(6);
    const TimeGrid grid = TimeGrid::make(0.0, 2.0, 0.01);
    const Trajectory want = integrate(sys, Eigen::VectorXd::Zero(6),
                                      input_from_text("sin(t)+sin(3*t)", 1), grid,
                                      Scheme::euler);
    const Trajectory got = read_trajectory_csv(out);
    CHECK((got.X - want.X).norm() == 0.0);

    // manifest records a hash that matches the artifact on disk
    const nlohmann::json mf =
        nlohmann::json::parse(std::ifstream(out + ".manifest.json"));
    CHECK(mf["artifacts"][0]["fnv1a64"] == file_hash(out));

    const std::string first_bytes = slurp(out);
    const std::string first_manifest = slurp(out + ".manifest.json");
    REQUIRE(run(cmd) == 0);
    CHECK(slurp(out) == first_bytes);
    CHECK(slurp(out + ".manifest.json") == first_manifest);
}

TEST_CASE("rerun replays a manifest verbatim") {
    TempDir tmp;
    const std::string out = tmp.file("r.csv");
    REQUIRE(run("simulate --model rl:4" + kRlFlags + " --scheme rk4 --out " + out) ==
            0);
    const std::string bytes = slurp(out);
    fs::remove(out);
    REQUIRE(run("rerun --manifest " + out + ".manifest.json") == 0);
    CHECK(slurp(out) == bytes);
}

TEST_CASE("config errors exit with code 2") {
    TempDir tmp;
    // dt does not divide tf - t0
    CHECK(run("simulate --model rl:4 --x0 zeros --input zero --t0 0 --tf 1 "
              "--dt 0.3 --scheme euler --out " +
              tmp.file("x.csv")) == 2);
    // unknown scheme
    CHECK(run("simulate --model rl:4 --x0 zeros --input zero --t0 0 --tf 1 "
              "--dt 0.1 --scheme leapfrog --out " +
              tmp.file("x.csv")) == 2);
    // bad input expression
    CHECK(run("simulate --model rl:4 --x0 zeros --input \"2*-3\" --t0 0 --tf 1 "
              "--dt 0.1 --out " +
              tmp.file("x.csv")) == 2);
    // missing required flag
    CHECK(run("simulate --model rl:4") == 2);
    // x0 with wrong length
    CHECK(run("simulate --model rl:4 --x0 1,2 --input zero --t0 0 --tf 1 "
              "--dt 0.1 --out " +
              tmp.file("x.csv")) == 2);
}

TEST_CASE("divergence exits with code 3") {
    TempDir tmp;
    const std::string model = tmp.file("blowup.json");
    std::ofstream(model) << R"({"name":"blowup","n":1,"m":1,"p":1,
        "B":[[0.0]],"f":["x1^2"],"h":["x1"]})";
    CHECK(run("simulate --model " + model +
              " --x0 1 --input zero --t0 0 --tf 5 --dt 0.05 --scheme euler --out " +
              tmp.file("d.csv")) == 3);
}

TEST_CASE("gramian command writes matrix plus sidecar and honors --kind") {
    TempDir tmp;
    const std::string prefix = tmp.file("GR");
    REQUIRE(run("gramian --kind reach --method frechet --s 0.01 --model rl:6" +
                kRlFlags + " --scheme euler --out " + prefix) == 0);
    REQUIRE(fs::exists(prefix + ".csv"));
    REQUIRE(fs::exists(prefix + ".json"));
    const nlohmann::json j = nlohmann::json::parse(std::ifstream(prefix + ".json"));
    CHECK(j["kind"] == "reachability");
    CHECK(j["method"] == "frechet_approx");
    const auto ev = j["eigenvalues"].get<std::vector<double>>();
    CHECK(ev.size() == 6);
    CHECK(ev.front() >= ev.back());

    // subinterval flags restrict the integration window
    const std::string sub = tmp.file("GRsub");
    REQUIRE(run("gramian --kind reach --method exact --t1 0.5 --t2 1.5 "
                "--model rl:6" +
                kRlFlags + " --scheme euler --out " + sub) == 0);
    const nlohmann::json js = nlohmann::json::parse(std::ifstream(sub + ".json"));
    CHECK(js["interval"][0] == 0.5);
    CHECK(js["interval"][1] == 1.5);
    // misaligned subinterval is a config error
    CHECK(run("gramian --kind reach --t1 0.503 --model rl:6" + kRlFlags +
              " --out " + tmp.file("GRbad")) == 2);
}

TEST_CASE("gramian on an LTI config matches the oracle") {
    TempDir tmp;
    const std::string model = tmp.file("lti.json");
    std::ofstream(model) << R"({"builtin":"lti",
        "A": [[-1.0, 0.2], [0.0, -2.0]],
        "B": [[1.0], [0.5]],
        "C": [[1.0, 0.0]]})";
    const std::string prefix = tmp.file("GO");
    REQUIRE(run("gramian --kind obs --method exact --model " + model +
                " --x0 zeros --input zero --t0 0 --tf 8 --dt 0.001 --out " +
                prefix) == 0);
    Eigen::MatrixXd A(2, 2), B(2, 1), C(1, 2);
    A << -1.0, 0.2, 0.0, -2.0;
    B << 1.0, 0.5;
    C << 1.0, 0.0;
    const auto [wc, wo] = lti_gramian_oracle(A, B, C, {0.0, 8.0});
    const Eigen::MatrixXd got = read_matrix_csv(prefix + ".csv");
    CHECK((got - wo.W).norm() <= 1e-6 * wo.W.norm());
}

TEST_CASE("dual gramian without a positive certificate exits with code 4") {
    TempDir tmp;
    const std::string S = tmp.file("S.csv");
    std::ofstream(S) << "1,0,0,0\n0,2,0,0\n0,0,3,0\n0,0,0,4\n";
    CHECK(run("gramian --kind dual --method exact --S " + S + " --model rl:4" +
              kRlFlags + " --out " + tmp.file("GD")) == 4);
    // with the identity it passes
    CHECK(run("gramian --kind dual --method exact --S identity --model rl:4" +
              kRlFlags + " --out " + tmp.file("GD2")) == 0);
}

TEST_CASE("balance, reduce and compare round trip on a small model") {
    TempDir tmp;
    const std::string base = tmp.file("base.csv");
    const std::string flags = kRlFlags + " --scheme rk4";
    REQUIRE(run("simulate --model rl:6" + flags + " --out " + base) == 0);

    const std::string gr = tmp.file("GR");
    const std::string go = tmp.file("GO");
    REQUIRE(run("gramian --kind reach --method exact --model rl:6" + flags +
                " --out " + gr) == 0);
    REQUIRE(run("gramian --kind obs --method exact --model rl:6" + flags +
                " --out " + go) == 0);

    const std::string bal = tmp.file("bal");
    REQUIRE(run("balance --wr " + gr + ".csv --wo " + go + ".csv --out " + bal) == 0);
    REQUIRE(fs::exists(bal + "_T.csv"));
    REQUIRE(fs::exists(bal + "_Tinv.csv"));
    REQUIRE(fs::exists(bal + "_sigma.json"));

    // full order: the reduced output must reproduce the original
    const std::string red = tmp.file("red6.csv");
    REQUIRE(run("reduce --model rl:6 --transform " + bal + " --k 6" + flags +
                " --out " + red) == 0);
    const std::string report = tmp.file("err6.json");
    REQUIRE(run("compare --full " + base + " --reduced " + red + " --out " +
                report) == 0);
    const nlohmann::json j = nlohmann::json::parse(std::ifstream(report));
    CHECK(j["rel_l2"].get<double>() <= 1e-10);

    // order beyond the effective rank exits with code 5
    CHECK(run("reduce --model rl:6 --transform " + bal + " --k 7" + flags +
              " --out " + tmp.file("red7.csv")) == 5);

    // the symmetric single-Gramian path also works
    const std::string sym = tmp.file("sym");
    REQUIRE(run("balance --wr " + gr + ".csv --symmetric --out " + sym) == 0);
    REQUIRE(run("reduce --model rl:6 --transform " + sym + " --k 3" + flags +
                " --out " + tmp.file("red3.csv")) == 0);

    // balance flag validation
    CHECK(run("balance --wr " + gr + ".csv --out " + tmp.file("b2")) == 2);
    CHECK(run("balance --wr " + gr + ".csv --wo " + go +
              ".csv --symmetric --out " + tmp.file("b3")) == 2);
}

TEST_CASE("check symmetry and check pd write verdict JSON") {
    TempDir tmp;
    const std::string cert = tmp.file("cert.json");
    REQUIRE(run("check symmetry --model rl:8 --S identity" + kRlFlags +
                " --out " + cert) == 0);
    const nlohmann::json jc = nlohmann::json::parse(std::ifstream(cert));
    CHECK(jc["verdict_positive"].get<bool>());
    CHECK(jc["res_dyn"] == 0.0);
    CHECK(jc["res_out"] == 0.0);

    // without base-trajectory flags the certificate samples the origin only
    const std::string cert0 = tmp.file("cert0.json");
    REQUIRE(run("check symmetry --model rl:8 --S identity --out " + cert0) == 0);
    const nlohmann::json j0 = nlohmann::json::parse(std::ifstream(cert0));
    CHECK(j0["verdict_positive"].get<bool>());
    CHECK(j0["sample_count"] == 1);

    // unreachable block: pd verdict negative
    const std::string model = tmp.file("block.json");
    std::ofstream(model) << R"({"builtin":"lti",
        "A": [[-1.0, 0.0], [0.0, -2.0]],
        "B": [[1.0], [0.0]],
        "C": [[1.0, 1.0]]})";
    const std::string pd = tmp.file("pd.json");
    REQUIRE(run("check pd --kind reach --subintervals 3 --model " + model +
                " --x0 zeros --input zero --t0 0 --tf 4 --dt 0.01 --out " + pd) ==
            0);
    const nlohmann::json jp = nlohmann::json::parse(std::ifstream(pd));
    CHECK_FALSE(jp["verdict_positive"].get<bool>());
    CHECK(jp["subintervals"].size() == 3);
}

TEST_CASE("environment overrides relocate relative outputs") {
    TempDir tmp;
    const std::string sub = (tmp.path / "nested").string();
    const std::string cmd = std::string(DIFFBAL_CLI_PATH) +
                            " simulate --model rl:3" + kRlFlags +
                            " --scheme euler --out env.csv >/dev/null 2>&1";
    const std::string env = "DIFFBAL_OUT_DIR=" + sub + " ";
    REQUIRE(WEXITSTATUS(std::system((env + cmd).c_str())) == 0);
    CHECK(fs::exists(fs::path(sub) / "env.csv"));
}
