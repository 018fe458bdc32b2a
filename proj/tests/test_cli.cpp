#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "dynprice/cli.h"
#include "dynprice/scenario_io.h"
#include "dynprice/twostage.h"

using namespace dynprice;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = 0;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "dynprice");
    std::ostringstream out, err;
    Run r;
    r.code = cli::run(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

fs::path scratch() {
    static const fs::path dir = [] {
        auto d = fs::temp_directory_path() / ("dynprice_cli_" + std::to_string(::getpid()));
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

const std::string data_dir = DYNPRICE_DATA_DIR;

}  // namespace

TEST_CASE("twostage writes the table rows") {
    const auto path = (scratch() / "t.csv").string();
    const auto r = run({"twostage", "--E", "0", "--b0", "1.12", "--out", path});
    REQUIRE(r.code == cli::kOk);
    const auto text = slurp(path);
    CHECK(text.find("0,1.12,proposed,1.090080762,1.2,21.47348105,4.440107683,6.760820046,-4.440107683,5.65615") !=
          std::string::npos);
    CHECK(text.find("0,1.12,mcp,1,1.2,21.16,2,11.2,0,7.018181818") != std::string::npos);
    CHECK(text.find("0,1.12,flat,1,1.2,21.16,2,11.2,0,7.018181818") != std::string::npos);
}

TEST_CASE("twostage sweep to stdout") {
    const auto r = run({"twostage", "--E-grid", "0", "0.1", "0.05", "--b0", "1.2", "--threads", "2"});
    REQUIRE(r.code == cli::kOk);
    CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 1 + 3 * 3);
}

TEST_CASE("missing scenario file") {
    const auto r = run({"solve", "--scenario", "missing.cfg"});
    CHECK(r.code == cli::kInvalid);
    CHECK(r.err.find("file not found") != std::string::npos);
}

TEST_CASE("solve on the shipped scenario") {
    const auto r = run({"solve", "--scenario", data_dir + "/two_stage.json"});
    REQUIRE(r.code == cli::kOk);
    CHECK(r.out.rfind("mechanism,E,b0,stage,history_id,type,action,A,p,w,q,welfare,kkt_residual\n", 0) == 0);
    CHECK(r.out.find("proposed,,,0,0,consumer,1.09008") != std::string::npos);
    const auto m = run({"solve", "--scenario", data_dir + "/two_stage_E008.json", "--mechanism", "mcp"});
    REQUIRE(m.code == cli::kOk);
    CHECK(m.out.find("mcp,,,1,0-0,consumer,1.18686") != std::string::npos);
    const auto f = run({"solve", "--scenario", data_dir + "/two_stage_E008.json", "--mechanism", "flat"});
    REQUIRE(f.code == cli::kOk);
    CHECK(f.out.find("flat,,,0,0,consumer,1,1,") != std::string::npos);
}

TEST_CASE("invalid scenarios exit 1 and name the invariant") {
    auto sc = build_two_stage({0.0, 1.12});
    sc.costs.primary = {CostFunction{{0.0, -1.0}, {}}};
    const auto path = scratch() / "bad.json";
    std::ofstream(path) << dump_scenario(sc);
    const auto r = run({"solve", "--scenario", path.string()});
    CHECK(r.code == cli::kInvalid);
    CHECK(r.err.find("primary cost decreasing") != std::string::npos);
}

TEST_CASE("non-convergence exits 2") {
    const auto r =
        run({"solve", "--scenario", data_dir + "/two_stage_E008.json", "--mechanism", "mcp", "--max-iters", "2"});
    CHECK(r.code == cli::kNonConvergence);
    CHECK(r.err.find("convergence error") != std::string::npos);
}

TEST_CASE("golden mismatch exits 3") {
    const auto path = scratch() / "golden.txt";
    std::ofstream(path) << "0 1.12 proposed a0 1.0901 2e-3\n0 1.12 mcp welfare 25.0 1e-3\n";
    const auto r = run({"verify", "--golden", path.string()});
    CHECK(r.code == cli::kGoldenMismatch);
    CHECK(r.out.find("MISMATCH") != std::string::npos);
    CHECK(r.out.find("1 mismatches") != std::string::npos);
}

TEST_CASE("argument errors and help") {
    CHECK(run({}).code == cli::kInvalid);
    CHECK(run({"solve"}).code == cli::kInvalid);
    CHECK(run({"solve", "--scenario", "x", "--mechanism", "cheap"}).code == cli::kInvalid);
    CHECK(run({"twostage", "--E", "0.5"}).code == cli::kInvalid);
    const auto h = run({"--help"});
    CHECK(h.code == cli::kOk);
    CHECK(h.out.find("verify") != std::string::npos);
}

TEST_CASE("ancillary output is byte-identical across thread counts") {
    const std::vector<std::string> base{"ancillary", "--ratios", "1", "5", "2", "--draws", "3000", "--seed", "9"};
    auto a = base, b = base;
    a.insert(a.end(), {"--threads", "1"});
    b.insert(b.end(), {"--threads", "3"});
    const auto ra = run(a), rb = run(b);
    REQUIRE(ra.code == cli::kOk);
    CHECK(ra.out == rb.out);
    CHECK(std::count(ra.out.begin(), ra.out.end(), '\n') == 4);
}

TEST_CASE("seed environment variable sets the default seed") {
    const std::vector<std::string> args{"simulate", "--experiment", "realized", "--n", "10", "--draws", "200"};
    auto explicit_seed = args;
    explicit_seed.insert(explicit_seed.end(), {"--seed", "12345"});
    const auto plain = run(args);
    ::setenv(cli::kSeedEnv, "12345", 1);
    const auto from_env = run(args);
    ::unsetenv(cli::kSeedEnv);
    const auto flagged = run(explicit_seed);
    REQUIRE(plain.code == cli::kOk);
    CHECK(from_env.out == flagged.out);
    CHECK(from_env.out != plain.out);
    CHECK(plain.out.find(",20140601,") != std::string::npos);

    ::setenv(cli::kSeedEnv, "abc", 1);
    CHECK(run(args).code == cli::kInvalid);
    ::unsetenv(cli::kSeedEnv);
}
