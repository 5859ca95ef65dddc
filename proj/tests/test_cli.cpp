// Drives the eosdiag binary through the shell; EOSDIAG_BIN points at it.
#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "eos/linalg.hpp"
#include "eos/theory.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result run(const std::string& args) {
  const char* bin = std::getenv("EOSDIAG_BIN");
  REQUIRE(bin != nullptr);
  const std::string cmd = std::string(bin) + " " + args + " 2>&1";
  Result r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  while (std::fgets(buf, sizeof buf, p)) r.out += buf;
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("eosdiag-cli-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<std::string> lines_of(const fs::path& file) {
  std::ifstream in(file);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

// Data rows of a summary CSV (after the comment block and header).
std::vector<std::vector<std::string>> summary_rows(const fs::path& file) {
  std::vector<std::vector<std::string>> rows;
  bool header = false;
  for (const std::string& l : lines_of(file)) {
    if (l.empty() || l[0] == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(l);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST_CASE("run on the step-size preset reports the three outcomes") {
  const fs::path dir = scratch("run");
  const Result r = run("run example-2.2-sweep --output-dir " + dir.string());
  REQUIRE(r.code == 0);
  const auto rows = summary_rows(dir / "quadratic-step-sweep_summary.csv");
  REQUIRE(rows.size() == 3);
  CHECK(rows[0][4] == "diverged");
  CHECK(rows[1][4] == "bounded-oscillation");
  CHECK(rows[2][4] == "converged");

  const auto trace = lines_of(dir / "quadratic-step-sweep_eta-0.05.csv");
  REQUIRE(trace.size() > 10);
  CHECK(trace[0].rfind("# ", 0) == 0);
  bool seed = false, header = false;
  for (const std::string& l : trace) {
    seed = seed || l == "# seed = 0";
    header = header || l == "iter,loss,grad_norm,rp,dir,sharpness,identity_residual,tau_dir_mean,tau_dir_std";
  }
  CHECK(seed);
  CHECK(header);
}

TEST_CASE("the output directory defaults to the environment variable") {
  const fs::path dir = scratch("env");
  const Result r = run("sweep quadratic-step-sweep --eta 2/45");
  REQUIRE(r.code == 0);
  const std::string cmd = "EOSDIAG_OUTPUT_DIR=" + dir.string() + " " +
                          std::getenv("EOSDIAG_BIN") + " sweep quadratic-step-sweep --eta 2/45";
  REQUIRE(std::system((cmd + " > /dev/null").c_str()) == 0);
  CHECK(fs::exists(dir / "quadratic-step-sweep_summary.csv"));
  fs::remove_all("eosdiag-out");
}

TEST_CASE("sweep agrees with the analytic divergence threshold and keeps order") {
  const fs::path dir = scratch("sweep");
  const std::vector<std::string> etas = {"2/30", "2/45", "2/39.5", "0.03", "2/40.5"};
  std::string list;
  for (const auto& e : etas) list += (list.empty() ? "" : ",") + e;
  const Result r = run("sweep quadratic-step-sweep --eta " + list + " --output-dir " + dir.string());
  REQUIRE(r.code == 0);
  CHECK(r.out.find("MISMATCH") == std::string::npos);
  const auto rows = summary_rows(dir / "quadratic-step-sweep_summary.csv");
  REQUIRE(rows.size() == etas.size());
  const eos::Matrix P = eos::Matrix::diagonal(eos::Vector{40, 2});
  const std::vector<double> values = {2 / 30.0, 2 / 45.0, 2 / 39.5, 0.03, 2 / 40.5};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CAPTURE(i);
    CHECK(std::stod(rows[i][1]) == doctest::Approx(values[i]).epsilon(1e-14));
    const bool diverged = rows[i][3] == "diverged";
    CHECK(diverged == (values[i] > 2.0 / 40.0));
    CHECK(rows[i][10] == (diverged ? "true" : "false"));
  }
}

TEST_CASE("usage and config errors exit with 2") {
  const fs::path dir = scratch("errors");
  const fs::path cfg = dir / "no-eta.ini";
  std::ofstream(cfg) << "[cost]\nkind = quadratic\ndiag = 40, 2\n[optimizer]\ntheta0 = 1, 1\n";
  const Result missing = run("run " + cfg.string());
  CHECK(missing.code == 2);
  CHECK(missing.out.find("optimizer.eta") != std::string::npos);

  CHECK(run("sweep quadratic-step-sweep --eta").code == 2);
  CHECK(run("sweep quadratic-step-sweep --eta ''").code == 2);
  CHECK(run("sweep quadratic-step-sweep").code == 2);
  CHECK(run("run /no/such/config.ini").code == 2);
  CHECK(run("frobnicate").code == 2);
  CHECK(run("").code == 2);
  CHECK(run("check --only 12").code == 2);
}

TEST_CASE("list-presets names the built-in presets") {
  const Result r = run("list-presets");
  REQUIRE(r.code == 0);
  CHECK(r.out.find("quadratic-step-sweep\n") != std::string::npos);
  CHECK(r.out.find("single-neuron\n") != std::string::npos);
  CHECK(run("show-preset example-3.4").out.find("theta0 = 13, 0.01") != std::string::npos);
}

TEST_CASE("check passes fast criteria and fails on a corrupted quadrature grid") {
  const Result ok = run("check --only 1,3");
  CHECK(ok.code == 0);
  CHECK(ok.out.find("criterion=1 ") != std::string::npos);
  CHECK(ok.out.find("criterion=3 ") != std::string::npos);
  CHECK(ok.out.find("pass=false") == std::string::npos);

  const Result bad = run("check --only 2 --corrupt-grid");
  CHECK(bad.code == 1);
  CHECK(bad.out.find("criterion=2 name=identity_residual") != std::string::npos);
  CHECK(bad.out.find("pass=false") != std::string::npos);
}
