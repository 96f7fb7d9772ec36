#include "support.hpp"

#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include "amdyn/cli.hpp"

using namespace amdyn;
using namespace amdyn::test;
namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("amdyn_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  int run(cli::RunConfig rc) {
    out_.str("");
    err_.str("");
    return cli::run(rc, out_, err_);
  }

  static std::string slurp(const std::string& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
  }

  void write(const std::string& name, const std::string& text) const { std::ofstream(path(name)) << text; }

  fs::path dir_;
  std::ostringstream out_, err_;
};

cli::RunConfig sim(const std::string& scenario, double duration, const std::string& out) {
  cli::RunConfig rc;
  rc.subcommand = "simulate";
  rc.scenario = scenario;
  rc.duration = duration;
  rc.output = out;
  return rc;
}

}  // namespace

TEST_F(Cli, SimulateWritesCsvAndSummary) {
  EXPECT_EQ(run(sim("validation", 0.5, path("v.csv"))), cli::kOk);
  const std::string csv = slurp(path("v.csv"));
  EXPECT_EQ(csv.rfind("t,p_x,", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 121);
  EXPECT_EQ(csv.find("INCOMPLETE"), std::string::npos);
  EXPECT_NE(out_.str().find("120 steps"), std::string::npos);
  EXPECT_TRUE(std::regex_search(out_.str(), std::regex(R"(max \|phi\| = \d\.\d{3}e[-+]\d\d)")));
}

TEST_F(Cli, RepeatedRunsAreByteIdentical) {
  ASSERT_EQ(run(sim("backflip", 1.0, path("a.csv"))), cli::kOk);
  ASSERT_EQ(run(sim("backflip", 1.0, path("b.csv"))), cli::kOk);
  EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
}

TEST_F(Cli, ZeroDurationWritesInitialRow) {
  EXPECT_EQ(run(sim("control", 0.0, path("z.csv"))), cli::kOk);
  const std::string csv = slurp(path("z.csv"));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
}

TEST_F(Cli, DivergenceLeavesMarkedPartialCsv) {
  write("div.cfg",
        "urdf = " + data_path("models/am_2link.urdf") + "\nmodel = " + data_path("models/am_2link.cfg") +
            "\n[simulation]\ndt = 0.5\nduration = 200\nintegrator = euler\n"
            "[initial]\np = 0 0 1\nomega_body = 20 -30 10\ndtheta = 40 -40\n");
  EXPECT_EQ(run(sim(path("div.cfg"), 200.0, path("div.csv"))), cli::kIntegrationFailure);
  const std::string csv = slurp(path("div.csv"));
  ASSERT_FALSE(csv.empty());
  const std::size_t last = csv.rfind('\n', csv.size() - 2);
  EXPECT_EQ(csv.compare(last + 1, 14, "# INCOMPLETE: "), 0);
  EXPECT_EQ(csv.back(), '\n');
  EXPECT_NE(err_.str().find("integration failed"), std::string::npos);
  EXPECT_NE(out_.str().find("(incomplete)"), std::string::npos);
}

TEST_F(Cli, BadInputsExitWithFailure) {
  EXPECT_EQ(run(sim(path("missing.cfg"), 1.0, path("m.csv"))), cli::kFailure);
  EXPECT_NE(err_.str().find("does not exist"), std::string::npos);
  cli::RunConfig rc = sim("validation", 1.0, path("x.csv"));
  rc.dt = -1.0;
  EXPECT_EQ(run(rc), cli::kFailure);
  rc = sim("validation", 1.0, path("x.csv"));
  rc.integrator = "verlet";
  EXPECT_EQ(run(rc), cli::kFailure);
  rc.subcommand = "fly";
  EXPECT_EQ(run(rc), cli::kFailure);
  write("broken.cfg", "[simulation\n");
  EXPECT_EQ(run(sim(path("broken.cfg"), 1.0, path("x.csv"))), cli::kFailure);
  EXPECT_NE(err_.str().find("line 1"), std::string::npos);
  cli::RunConfig v;
  v.subcommand = "validate";
  v.model = "am_9link";
  EXPECT_EQ(run(v), cli::kFailure);
}

TEST_F(Cli, ValidateReportsAndFails) {
  cli::RunConfig rc;
  rc.subcommand = "validate";
  rc.model = "am_1link";
  EXPECT_EQ(run(rc), cli::kOk);
  EXPECT_NE(out_.str().find("all checks passed"), std::string::npos);
  rc.parameterizations = {"euler"};
  EXPECT_EQ(run(rc), cli::kOk);
  EXPECT_NE(out_.str().find("singular at pitch = 90 deg"), std::string::npos);

  // a 50 km lever arm ruins the conditioning of every check
  std::string urdf = slurp(data_path("models/am_1link.urdf"));
  const std::string cm = "<origin xyz=\"0.5 0 0\" rpy=\"0 0 0\"/>";
  ASSERT_NE(urdf.find(cm), std::string::npos);
  urdf.replace(urdf.find(cm), cm.size(), "<origin xyz=\"50000 0 0\" rpy=\"0 0 0\"/>");
  write("huge.urdf", urdf);
  cli::RunConfig bad;
  bad.subcommand = "validate";
  bad.urdf = path("huge.urdf");
  bad.config = data_path("models/am_1link.cfg");
  EXPECT_EQ(run(bad), cli::kValidationFailed);
  EXPECT_NE(out_.str().find("some checks FAILED"), std::string::npos);
}

TEST_F(Cli, CodegenCountOnly) {
  cli::RunConfig rc;
  rc.subcommand = "codegen";
  rc.model = "uav_0link";
  rc.methods = {"all"};
  rc.parameterizations = {"all"};
  rc.count_only = true;
  rc.timing = false;
  rc.output = path("gen");
  ASSERT_EQ(run(rc), cli::kOk);
  const std::string csv = slurp(path("gen/op_counts.csv"));
  EXPECT_EQ(csv.rfind("model,links,parameterization,method,matrix,ops,gen_seconds\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 6 * 4);
  EXPECT_NE(csv.find("uav_0link,0,quaternion,mixed,g,0,\n"), std::string::npos);
  std::size_t c_files = 0;
  for (const auto& e : fs::directory_iterator(path("gen"))) c_files += e.path().extension() == ".c";
  EXPECT_EQ(c_files, 0u);
  // without timing the counts file is reproducible
  rc.output = path("gen2");
  ASSERT_EQ(run(rc), cli::kOk);
  EXPECT_EQ(csv, slurp(path("gen2/op_counts.csv")));
}

TEST_F(Cli, CodegenWritesSources) {
  cli::RunConfig rc;
  rc.subcommand = "codegen";
  rc.model = "am_1link";
  rc.output = path("src");
  ASSERT_EQ(run(rc), cli::kOk);
  for (const char* f : {"am_1link_M_mixed.c", "am_1link_h_mixed.c", "am_1link_g_mixed.c", "am_1link_dyn_mixed.h"})
    EXPECT_TRUE(fs::is_regular_file(path(std::string("src/") + f))) << f;
  EXPECT_NE(slurp(path("src/am_1link_dyn_mixed.h")).find("void am_1link_M_mixed(const double *in, double *out);"),
            std::string::npos);
}

TEST_F(Cli, BenchmarkCsv) {
  cli::RunConfig rc;
  rc.subcommand = "benchmark";
  rc.iterations = 20;
  rc.models = {"uav_0link", "am_1link"};
  rc.output = path("bench.csv");
  ASSERT_EQ(run(rc), cli::kOk);
  const std::string csv = slurp(path("bench.csv"));
  EXPECT_EQ(csv[0], '#');
  EXPECT_NE(csv.find("model,links,operation,iterations,mean_us,min_us\n"), std::string::npos);
  EXPECT_NE(csv.find("am_1link,1,inverse,20,"), std::string::npos);
  EXPECT_NE(out_.str().find("timings written to"), std::string::npos);
}

TEST_F(Cli, ControlReportsSettling) {
  cli::RunConfig rc;
  rc.subcommand = "control";
  rc.duration = 5.0;
  rc.output = path("control.csv");
  ASSERT_EQ(run(rc), cli::kOk);
  EXPECT_TRUE(std::regex_search(out_.str(), std::regex(R"(ref_z +t= 0\.000 .*settled in [0-3]\.\d{3} s)")));
}
