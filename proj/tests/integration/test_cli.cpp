// Drives the ebpca executable end to end: exit codes, output files,
// byte-identical reruns.

#include "ebpca/matrix_io.hpp"
#include "ebpca/spiked_model.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace ebpca;
namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "ebpca_cli_tests";

int run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + std::string(EBPCA_BIN) + " " + args +
                          " >" + (kRoot / "last.out").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path fresh(const std::string& name) {
  const fs::path p = kRoot / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json load_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

std::size_t count_lines(const fs::path& p) {
  const std::string s = slurp(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

fs::path write_config(const fs::path& dir, const std::string& body) {
  const fs::path cfg = dir / "run.cfg";
  std::ofstream(cfg) << body;
  return cfg;
}

Matrix planted(Index n, Index d, std::vector<double> signals, std::uint64_t seed) {
  const Index k = static_cast<Index>(signals.size());
  return generate_instance({n, d, std::move(signals), seed}, PriorSpec::two_point(k), PriorSpec::two_point(k)).Y;
}

Matrix pure_noise(Index n, Index d, std::uint64_t seed) {
  Rng rng = make_stream(seed, streams::kNoise);
  Matrix Y(n, d);
  fill_normal(rng, Y.data(), Y.size());
  return Y;
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
  fs::create_directories(kRoot);
  CHECK(run("") == 2);
  CHECK(run("frobnicate") == 2);
  CHECK(run("fit --input x.csv --iters 3 --out o") == 2);  // missing --k
  CHECK(run("fit --input x.csv --k 1 --iters 3 --format xml --out o") == 2);
  CHECK(run("--help") == 0);
}

TEST_CASE("simulate writes reproducible outputs") {
  const fs::path dir = fresh("sim");
  const std::string body = "n=300\nd=450\nsignals=2.5\nprior=two_point\nmethods=pca,ebpca,vb\niters=3\nseeds=3\nout=";
  const fs::path a = dir / "a", b = dir / "b";
  const fs::path cfg_a = write_config(dir, body + a.string() + "\n");
  REQUIRE(run("simulate --config " + cfg_a.string(), "EBPCA_THREADS=1") == 0);
  const fs::path cfg_b = dir / "b.cfg";
  std::ofstream(cfg_b) << body + b.string() + "\n";
  REQUIRE(run("simulate --config " + cfg_b.string(), "EBPCA_THREADS=3") == 0);

  for (const char* f : {"per_seed.csv", "summary.csv", "manifest.json"}) CHECK(fs::exists(a / f));
  CHECK(slurp(a / "per_seed.csv") == slurp(b / "per_seed.csv"));
  CHECK(slurp(a / "summary.csv") == slurp(b / "summary.csv"));
  const auto ma = load_json(a / "manifest.json"), mb = load_json(b / "manifest.json");
  CHECK(ma["seeds"].size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(ma["seeds"][i]["y_hash"] == mb["seeds"][i]["y_hash"]);
  CHECK(slurp(a / "per_seed.csv").rfind("method,seed,iteration", 0) == 0);
}

TEST_CASE("simulate rejects bad configs with 2") {
  const fs::path dir = fresh("badcfg");
  CHECK(run("simulate --config " + write_config(dir, "n=100\nwhatever=3\n").string()) == 2);
  CHECK(run("simulate --config " + write_config(dir, "signals=2,3\n").string()) == 2);
  CHECK(run("simulate --config " + (dir / "missing.cfg").string()) == 2);
}

TEST_CASE("fit on a planted spike") {
  const fs::path dir = fresh("fit");
  const Matrix Y = planted(300, 500, {3.0}, 5);
  write_csv((dir / "y.csv").string(), Y);
  write_binary((dir / "y.bin").string(), Y);

  REQUIRE(run("fit --input " + (dir / "y.csv").string() + " --k 1 --iters 4 --out " + (dir / "csv").string()) == 0);
  for (const char* f : {"U.csv", "V.csv", "S_hat.csv", "history.csv", "report.json"}) CHECK(fs::exists(dir / "csv" / f));
  CHECK(count_lines(dir / "csv" / "U.csv") == 300);
  CHECK(count_lines(dir / "csv" / "V.csv") == 500);
  const auto rep = load_json(dir / "csv" / "report.json");
  CHECK(rep["k_kept"] == 1);
  CHECK(rep["n"] == 300);

  REQUIRE(run("fit --input " + (dir / "y.bin").string() + " --format bin --k 1 --iters 4 --out " +
              (dir / "bin").string()) == 0);
  CHECK(slurp(dir / "csv" / "U.csv") == slurp(dir / "bin" / "U.csv"));

  REQUIRE(run("fit --input " + (dir / "y.csv").string() + " --k 1 --iters 4 --no-standardize-rows --out " +
              (dir / "raw").string()) == 0);
  CHECK(load_json(dir / "raw" / "report.json")["standardized_rows"] == false);
}

TEST_CASE("fit error paths") {
  const fs::path dir = fresh("fiterr");
  std::ofstream(dir / "empty.csv") << "";
  std::ofstream(dir / "ragged.csv") << "1,2,3\n4,5\n";
  CHECK(run("fit --input " + (dir / "empty.csv").string() + " --k 1 --iters 2 --out " + (dir / "o").string()) == 2);
  CHECK(run("fit --input " + (dir / "ragged.csv").string() + " --k 1 --iters 2 --out " + (dir / "o").string()) == 2);
  CHECK(run("fit --input " + (dir / "nope.csv").string() + " --k 1 --iters 2 --out " + (dir / "o").string()) == 2);
  // Nothing separates from the noise: numeric failure.
  write_csv((dir / "noise.csv").string(), pure_noise(200, 200, 3));
  CHECK(run("fit --input " + (dir / "noise.csv").string() + " --k 1 --iters 2 --out " + (dir / "o").string()) == 3);
}

TEST_CASE("diagnose counts outliers") {
  const fs::path dir = fresh("diag");
  write_csv((dir / "noise.csv").string(), pure_noise(500, 500, 7));
  REQUIRE(run("diagnose --input " + (dir / "noise.csv").string() + " --k 1 --out " + (dir / "n").string()) == 0);
  const auto sn = load_json(dir / "n" / "summary.json");
  CHECK(sn["outliers"] == 0);
  CHECK(sn["bulk_edges"][0].get<double>() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(sn["bulk_edges"][1].get<double>() == doctest::Approx(2.0));
  for (const char* f : {"singular_values.csv", "histogram.csv", "mp_overlay.csv"}) CHECK(fs::exists(dir / "n" / f));

  write_csv((dir / "spikes.csv").string(), planted(500, 500, {5.0, 4.0, 3.0}, 11));
  REQUIRE(run("diagnose --input " + (dir / "spikes.csv").string() + " --k 3 --out " + (dir / "s").string()) == 0);
  const auto ss = load_json(dir / "s" / "summary.json");
  CHECK(ss["outliers"] == 3);
  CHECK(ss["s_hat"].size() == 3);
}
