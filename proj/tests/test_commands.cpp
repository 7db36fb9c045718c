#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>

#include <unistd.h>

#include "ewa/commands.hpp"

using namespace ewa;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("ewa_test_" + std::to_string(::getpid()) + "_" + std::to_string(++counter));
    fs::remove_all(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string l;
  while (std::getline(in, l)) out.push_back(l);
  return out;
}

std::string header(Command cmd) {
  std::string h;
  for (auto c : csv_columns(cmd)) h += (h.empty() ? "" : ",") + std::string(c);
  return h;
}

const char* kReference =
    "n = 64\nnoise.sigma = 1\nagg.beta = 20\nsignal.amplitude = 2\n"
    "signal.frequency = 3\nrun.seed = 2024\n";

}  // namespace

TEST_CASE("command names") {
  CHECK(parse_command("sweep-delta") == Command::sweep_delta);
  CHECK(to_string(Command::check_mgf) == "check-mgf");
  CHECK_THROWS_AS(parse_command("sweep"), ValidationError);
  CHECK(header(Command::simulate) ==
        "trial,seed,lhs,rhs,holds,best_t,nu_star,gamma,pen_total,price_total,kl_term");
}

TEST_CASE("simulate with one trial") {
  TempDir dir;
  CommandOptions opts;
  opts.out_dir = dir.path;
  opts.trials = 1;
  CHECK(execute(Command::simulate, parse_config(kReference), opts) == 0);
  const auto rows = lines(slurp(dir.path / "trials.csv"));
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == header(Command::simulate));
  CHECK(rows[1].rfind("0,", 0) == 0);
  CHECK(slurp(dir.path / "trials.csv").find('\r') == std::string::npos);

  const auto summary = nlohmann::ordered_json::parse(slurp(dir.path / "summary.json"));
  std::vector<std::string> keys;
  for (const auto& [k, v] : summary.items()) keys.push_back(k);
  CHECK(keys == std::vector<std::string>{
                    "command", "code_version", "n_trials", "coverage", "target",
                    "coverage_ok", "mean_lhs", "stderr_lhs", "mean_rhs",
                    "expectation_rhs", "expectation_best_t", "expectation_ok",
                    "c_tilde", "config"});
  CHECK(summary["n_trials"] == 1);
  CHECK(summary["config"]["run.trials"] == "1");
  CHECK(summary["config"]["agg.beta"] == "20");
  CHECK(summary["code_version"] == std::string(kCodeVersion));
}

TEST_CASE("simulate is byte-for-byte deterministic") {
  TempDir a, b;
  CommandOptions oa, ob;
  oa.out_dir = a.path;
  ob.out_dir = b.path;
  oa.trials = ob.trials = 50;
  oa.threads = 1;
  ob.threads = 3;
  const RunConfig cfg = parse_config(kReference);
  CHECK(execute(Command::simulate, cfg, oa) == 0);
  CHECK(execute(Command::simulate, cfg, ob) == 0);
  CHECK(slurp(a.path / "trials.csv") == slurp(b.path / "trials.csv"));
  CHECK(slurp(a.path / "summary.json") == slurp(b.path / "summary.json"));

  TempDir c;
  CommandOptions oc = oa;
  oc.out_dir = c.path;
  oc.seed = 7;
  CHECK(execute(Command::simulate, cfg, oc) == 0);
  CHECK(slurp(a.path / "trials.csv") != slurp(c.path / "trials.csv"));
}

TEST_CASE("sweep-beta over 20, 24, 28") {
  TempDir dir;
  CommandOptions opts;
  opts.out_dir = dir.path;
  opts.trials = 200;
  opts.grid = {20, 24, 28};
  CHECK(execute(Command::sweep_beta, parse_config(kReference), opts) == 0);
  const auto rows = lines(slurp(dir.path / "sweep.csv"));
  REQUIRE(rows.size() == 4);
  CHECK(rows[0] == header(Command::sweep_beta));
  for (std::size_t i = 1; i < 4; ++i) {
    CHECK(rows[i].find(",true,") != std::string::npos);
    CHECK(rows[i].substr(rows[i].rfind(',') + 1) == "true");
  }
  CHECK(rows[2].rfind("24,24,1,200,", 0) == 0);
}

TEST_CASE("sweep-delta and inadmissible grid points") {
  TempDir dir;
  CommandOptions opts;
  opts.out_dir = dir.path;
  opts.trials = 50;
  opts.grid = {0.0, 0.5, 1.0};
  const RunConfig cfg = parse_config(
      "n = 32\nnoise.sigma = 1\nagg.beta = 24\nsignal.kind = step\n");
  CHECK(execute(Command::sweep_delta, cfg, opts) == 0);
  CHECK(lines(slurp(dir.path / "sweep.csv")).size() == 4);

  TempDir bad;
  opts.out_dir = bad.path;
  opts.grid = {0.5, 1.5};
  CHECK_THROWS_WITH_AS(execute(Command::sweep_delta, cfg, opts),
                       doctest::Contains("--grid point 1.5"), ValidationError);
  CHECK_FALSE(fs::exists(bad.path / "sweep.csv"));

  opts.grid.clear();
  CHECK_THROWS_AS(execute(Command::sweep_beta, cfg, opts), ValidationError);

  opts.grid = {19.0};
  std::ostringstream err;
  CHECK(execute_noexcept(Command::sweep_beta, cfg, opts, err) == 1);
  CHECK(err.str().find("agg.beta") != std::string::npos);
}

TEST_CASE("check-mgf on Rademacher noise") {
  TempDir dir;
  CommandOptions opts;
  opts.out_dir = dir.path;
  const RunConfig cfg = parse_config(
      "n = 8\nnoise.kind = rademacher\nnoise.sigma = 1\nagg.beta = 20\n"
      "mgf.samples = 20000\nmgf.directions = 5\n");
  CHECK(execute(Command::check_mgf, cfg, opts) == 0);
  const auto rows = lines(slurp(dir.path / "mgf.csv"));
  REQUIRE(rows.size() == 6);
  CHECK(rows[0] == header(Command::check_mgf));
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(rows[i].substr(rows[i].rfind(',') + 1) == "true");
  }
}

TEST_CASE("check-moments") {
  TempDir dir;
  CommandOptions opts;
  opts.out_dir = dir.path;
  const RunConfig cfg = parse_config(
      "n = 16\nnoise.sigma = 1\nagg.beta = 8\nagg.delta = 0\n"
      "collection.ranks = 2,4\nmoments.samples = 100000\nmoments.form = both\n");
  CHECK(execute(Command::check_moments, cfg, opts) == 0);
  const auto rows = lines(slurp(dir.path / "moments.csv"));
  REQUIRE(rows.size() == 5);
  CHECK(rows[0] == header(Command::check_moments));
  CHECK(rows[1].rfind("0,1,projection_gaussian,", 0) == 0);
  CHECK(rows[2].rfind("0,1,general,", 0) == 0);
  CHECK(rows[3].rfind("1,0,projection_gaussian,", 0) == 0);
}

TEST_CASE("missing output directory is an error") {
  CommandOptions opts;
  CHECK_THROWS_AS(execute(Command::simulate, parse_config(kReference), opts),
                  ValidationError);
}
