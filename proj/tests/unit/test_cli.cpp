#include <gtest/gtest.h>

#include <array>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "topopt/io.hpp"
#include "topopt/simp.hpp"

namespace topopt::cli {
namespace {

namespace fs = std::filesystem;

ParseOutcome parse(std::vector<std::string> args) {
  args.insert(args.begin(), "topopt");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return parse_command_line(static_cast<int>(argv.size()), argv.data());
}

class CliDir : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("topopt_cli_" + std::string(info->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

TEST(ParseCommandLine, DefaultsAndFlags) {
  const auto out = parse({"solve", "--preset", "mbb", "--precision", "fp32", "--variant",
                          "three-stage", "--tol", "1e-6", "--serial"});
  ASSERT_TRUE(out.config.has_value()) << out.message;
  const auto& c = *out.config;
  EXPECT_EQ(c.command, "solve");
  EXPECT_EQ(c.preset, "mbb");
  EXPECT_EQ(c.precision, Precision::fp32);
  EXPECT_EQ(c.variant, Variant::three_stage);
  EXPECT_EQ(c.tol, 1e-6);
  EXPECT_EQ(c.scale, 0.2);
  EXPECT_EQ(c.cg_cap, 1000);
  EXPECT_EQ(c.scatter(), ScatterMode::serial);
}

TEST_F(CliDir, FlagsOverrideConfigFileWhichOverridesDefaults) {
  const auto ini = dir_ / "run.ini";
  std::ofstream(ini) << "preset=mbb\nscale=0.12\ntol=1e-7\ncg-cap=300\n";
  const auto out =
      parse({"solve", "--config", ini.string(), "--preset", "torsion", "--cg-cap", "400"});
  ASSERT_TRUE(out.config.has_value()) << out.message;
  EXPECT_EQ(out.config->preset, "torsion");
  EXPECT_EQ(out.config->cg_cap, 400);
  EXPECT_EQ(out.config->scale, 0.12);
  EXPECT_EQ(out.config->tol, 1e-7);
  EXPECT_EQ(out.config->seed, 42u);
}

TEST_F(CliDir, UnknownConfigKeyIsAnError) {
  const auto ini = dir_ / "bad.ini";
  std::ofstream(ini) << "preset=mbb\nnot_a_key=1\n";
  const auto out = parse({"solve", "--config", ini.string()});
  EXPECT_FALSE(out.config.has_value());
  EXPECT_NE(out.exit_code, 0);
}

TEST(ParseCommandLine, RejectsMissingOrUnknownSubcommand) {
  EXPECT_FALSE(parse({}).config.has_value());
  EXPECT_NE(parse({}).exit_code, 0);
  EXPECT_NE(parse({"optimize"}).exit_code, 0);
  EXPECT_NE(parse({"solve", "--precision", "fp16"}).exit_code, 0);
  const auto help = parse({"--help"});
  EXPECT_FALSE(help.config.has_value());
  EXPECT_EQ(help.exit_code, 0);
}

TEST(Validate, MissingPresetAndBadValues) {
  RunConfig c;
  c.command = "solve";
  EXPECT_THROW(validate(c), std::invalid_argument);
  c.preset = "cantilever";
  EXPECT_NO_THROW(validate(c));
  c.scale = 0.0;
  EXPECT_THROW(validate(c), std::invalid_argument);
  c.scale = 0.2;
  c.preset = "arch";
  EXPECT_THROW(validate(c), std::invalid_argument);
  RunConfig bench;
  bench.command = "bench";
  EXPECT_NO_THROW(validate(bench));
  bench.kind = "determinism";
  EXPECT_THROW(validate(bench), std::invalid_argument);
}

TEST(Run, ValidationFailureExitsWithTwo) {
  const char* argv[] = {"topopt", "solve", "--out", "/tmp/topopt_cli_unused"};
  EXPECT_EQ(run(4, argv), 2);
}

TEST(ArtifactStem, DeterministicNames) {
  RunConfig c;
  c.out = "o";
  c.command = "solve";
  c.preset = "cantilever";
  EXPECT_EQ(artifact_stem(c), fs::path("o") / "solve_cantilever_fp64_fused");
  c.command = "simp";
  c.precision = Precision::fp32;
  c.variant = Variant::three_stage;
  EXPECT_EQ(artifact_stem(c), fs::path("o") / "simp_cantilever_fp32_three-stage");
  c.command = "kappa";
  EXPECT_EQ(artifact_stem(c), fs::path("o") / "kappa_cantilever");
  c.command = "bench";
  EXPECT_EQ(artifact_stem(c), fs::path("o") / "bench_matvec");
  c.kind = "highcap";
  EXPECT_EQ(artifact_stem(c), fs::path("o") / "bench_highcap_cantilever");
}

TEST_F(CliDir, SolveWritesReportAndResiduals) {
  RunConfig c;
  c.command = "solve";
  c.preset = "cantilever";
  c.scale = 0.1;
  c.out = dir_;
  c.serial = true;
  std::ostringstream log;
  ASSERT_EQ(dispatch(c, log), 0);
  const auto stem = artifact_stem(c).string();
  const auto js = nlohmann::json::parse(read_text_file(stem + "_report.json"));
  EXPECT_EQ(js["converged"], true);
  EXPECT_TRUE(fs::exists(stem + "_residuals.csv"));
}

TEST_F(CliDir, ExportGraynessMatchesTheSelectedIterate) {
  RunConfig c;
  c.command = "simp";
  c.preset = "cantilever";
  c.scale = 0.1;
  c.iters = 40;
  c.out = dir_;
  c.serial = true;
  std::ostringstream log;
  ASSERT_EQ(dispatch(c, log), 0) << log.str();
  const auto bin = artifact_stem(c).string() + "_selected.bin";
  const auto field = read_density_binary(bin);
  EXPECT_EQ(field.dims, (std::array<int, 3>{12, 6, 3}));

  SimpConfig ref;
  ref.max_iterations = 40;
  const auto h = run_simp(make_preset("cantilever", 0.1), ref);
  ASSERT_TRUE(h.selected.has_value());
  EXPECT_NEAR(grayness(field.values), h.selected->grayness, 1e-12);

  RunConfig e;
  e.command = "export";
  e.snapshot = bin;
  e.out = dir_;
  std::ostringstream elog;
  ASSERT_EQ(dispatch(e, elog), 0) << elog.str();
  const auto stem = dir_ / ("export_" + fs::path(bin).stem().string());
  for (const char* suffix :
       {".bin", ".json", ".vtk", "_slice_x.txt", "_slice_y.txt", "_slice_z.txt"}) {
    EXPECT_TRUE(fs::exists(stem.string() + suffix)) << suffix;
  }
  EXPECT_NE(elog.str().find("grayness " + format_g9(h.selected->grayness)), std::string::npos)
      << elog.str();
}

TEST_F(CliDir, ExportOfMissingSnapshotFails) {
  RunConfig e;
  e.command = "export";
  e.snapshot = dir_ / "absent.bin";
  e.out = dir_;
  std::ostringstream log;
  EXPECT_EQ(dispatch(e, log), 3);
}

}  // namespace
}  // namespace topopt::cli
