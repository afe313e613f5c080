#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int status = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch() {
  const auto d = fs::temp_directory_path() / "softcoul_cli_test";
  fs::create_directories(d);
  return d;
}

Result run(const std::string& args) {
  const auto d = scratch();
  const auto name = std::string(::testing::UnitTest::GetInstance()->current_test_info()->name());
  const auto o = d / (name + ".stdout"), e = d / (name + ".stderr");
  const std::string cmd = std::string("\"") + SOFTCOUL_CLI + "\" " + args + " >\"" + o.string() + "\" 2>\"" +
                          e.string() + "\"";
  const int raw = std::system(cmd.c_str());
  Result r;
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = slurp(o);
  r.err = slurp(e);
  return r;
}

std::vector<std::vector<std::string>> csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

const std::string kDemo = SOFTCOUL_DEMO_DIR;

}  // namespace

TEST(Cli, EigScanDecreasesTowardCoulomb) {
  const auto r = run("eig-scan --C 0.1,0.01,0.001 --ell 0");
  ASSERT_EQ(r.status, 0) << r.err;
  const auto rows = csv(r.out);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"C", "ell", "theta_im", "index", "re", "im", "class"}));
  double prev = 0.0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double e = std::stod(rows[i][4]);
    EXPECT_LT(e, prev);
    EXPECT_GT(e, -0.25);
    prev = e;
  }
}

TEST(Cli, FtTableMethodsAgree) {
  const auto r = run("ft-table --C 1 --xi 0.1:10:log25 --method both --k -1");
  ASSERT_EQ(r.status, 0) << r.err;
  const auto rows = csv(r.out);
  ASSERT_EQ(rows.size(), 51u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"C", "xi", "re", "im", "method"}));
  double worst = 0.0;
  std::set<std::string> xis;
  for (std::size_t i = 1; i < rows.size(); i += 2) {
    EXPECT_EQ(rows[i][4], "closed_form");
    EXPECT_EQ(rows[i + 1][4], "quadrature");
    EXPECT_EQ(rows[i][1], rows[i + 1][1]);
    xis.insert(rows[i][1]);
    const double a = std::stod(rows[i][2]), b = std::stod(rows[i + 1][2]);
    worst = std::max(worst, std::abs(a - b) / std::abs(b));
  }
  EXPECT_EQ(xis.size(), 25u);
  EXPECT_LT(worst, 1e-6);
}

TEST(Cli, UndampedFtTableMethodsAgree) {
  const auto r = run("ft-table --C 1 --xi 0.1:10:log25 --method both");
  ASSERT_EQ(r.status, 0) << r.err;
  const auto rows = csv(r.out);
  ASSERT_EQ(rows.size(), 51u);
  double worst = 0.0;
  for (std::size_t i = 1; i < rows.size(); i += 2)
    worst = std::max(worst, std::abs(std::stod(rows[i][2]) - std::stod(rows[i + 1][2])) / std::abs(std::stod(rows[i + 1][2])));
  EXPECT_LT(worst, 1e-6);
}

TEST(Cli, MissingTrajectoryNamesThePath) {
  const auto r = run("propagate --config \"" + kDemo + "/missing_trajectory.json\"");
  EXPECT_EQ(r.status, 2);
  EXPECT_TRUE(r.out.empty());
  const auto j = json::parse(r.err);
  EXPECT_EQ(j["error"], "config");
  EXPECT_NE(j["path"].get<std::string>().find("does_not_exist.json"), std::string::npos);
  EXPECT_NE(j["message"].get<std::string>().find("does_not_exist.json"), std::string::npos);
}

TEST(Cli, ConfigErrorsExitTwo) {
  for (const char* args : {"ft-table --C -1", "ft-table --method fancy", "eig-scan --C 0.01,0.1", "no-such-command",
                           "coulomb-limit --C 1,2", "complex-scaling --theta 2", "dilatation-check --beta 1.6",
                           "potential-table --family hydrogen"}) {
    const auto r = run(args);
    EXPECT_EQ(r.status, 2) << args;
    EXPECT_TRUE(json::accept(r.err)) << args << ": " << r.err;
  }
}

TEST(Cli, NumericalFailureExitsThree) {
  const auto r = run("ft-table --C 1 --xi 1 --method quadrature --tol 1e-30");
  EXPECT_EQ(r.status, 3);
  const auto j = json::parse(r.err);
  EXPECT_EQ(j["error"], "numerical");
}

TEST(Cli, ByteIdenticalAcrossRunsAndJobs) {
  const std::string args = "ft-table --C 0.5,1 --xi 0.5:5:lin7 --method both --k -1";
  const auto a = run("--jobs 1 " + args);
  const auto b = run("--jobs 1 " + args);
  const auto c = run("--jobs 4 " + args);
  ASSERT_EQ(a.status, 0);
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(a.out, c.out);
  const auto p = run("potential-table --C 0.7");
  const auto q = run("--seed 9 potential-table --C 0.7");
  EXPECT_EQ(p.out, q.out);
}

TEST(Cli, SeventeenDigitCells) {
  const auto r = run("potential-table --C 1 --r 1");
  ASSERT_EQ(r.status, 0);
  const auto rows = csv(r.out);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"r", "V", "dVdr", "laplacian"}));
  EXPECT_EQ(rows[1][1], "0.36787944117144233");
}

TEST(Cli, ManifestSidecar) {
  const auto out = scratch() / "limit.csv";
  const auto r = run("--seed 3 -o \"" + out.string() + "\" coulomb-limit --C 1e-1,1e-2,1e-3");
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_TRUE(r.out.empty());
  const auto rows = csv(slurp(out));
  ASSERT_EQ(rows.size(), 4u);
  const auto m = json::parse(slurp(out.string() + ".manifest.json"));
  for (const char* k : {"experiment", "parameters", "versions", "wall_time", "seed", "summary"})
    EXPECT_TRUE(m.contains(k)) << k;
  EXPECT_EQ(m["experiment"], "coulomb-limit");
  EXPECT_EQ(m["seed"], 3);
  EXPECT_EQ(m["summary"]["strictly_decreasing"], true);
}

TEST(Cli, HelpDocumentsSchemas) {
  const auto r = run("--help");
  EXPECT_EQ(r.status, 0);
  for (const char* schema : {"r,V,dVdr,laplacian", "C,xi,re,im,method", "C,xi,deviation", "C,ell,theta_im,index,re,im,class",
                             "t,norm,x2,ynorm", "C,beta,analytic_sector"})
    EXPECT_NE(r.out.find(schema), std::string::npos) << schema;
}

TEST(Cli, PropagateDemo) {
  const auto r = run("propagate --config \"" + kDemo + "/run.json\"");
  ASSERT_EQ(r.status, 0) << r.err;
  const auto rows = csv(r.out);
  ASSERT_GE(rows.size(), 3u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"t", "norm", "x2", "ynorm"}));
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_NEAR(std::stod(rows[i][1]), 1.0, 1e-10);
}

TEST(Cli, SelftestPassesAndCatchesInjection) {
  const auto ok = run("selftest");
  EXPECT_EQ(ok.status, 0) << ok.out;
  EXPECT_EQ(csv(ok.out).size(), 5u);
  EXPECT_EQ(ok.out.find("FAIL"), std::string::npos);
  const auto bad = run("selftest --inject laplacian-sign");
  EXPECT_EQ(bad.status, 1);
  EXPECT_NE(bad.out.find("FAIL potentials"), std::string::npos);
  const auto seam = run("selftest --inject k1-seam");
  EXPECT_EQ(seam.status, 1);
  EXPECT_NE(seam.out.find("FAIL specfun"), std::string::npos);
}
