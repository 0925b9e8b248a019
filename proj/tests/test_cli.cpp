#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "pseudosimple/scenario.hpp"
#include "support.hpp"

using namespace ps;
using ps::cli::json;
namespace fs = std::filesystem;

namespace {

// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("pseudosimple_cli_" + std::to_string(rd()) + "_" + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

// Runs the CLI with stdout and stderr captured into `log`; returns the exit code.
int run_cli(const std::string& args, const fs::path& log, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + "\"" PSEUDOSIMPLE_CLI "\" " + args + " >\"" + log.string() + "\" 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

fs::path scenario(const std::string& name) { return fs::path(PSEUDOSIMPLE_SCENARIOS) / (name + ".json"); }

TrajectoryRecord record(const std::vector<Vec4>& xs) {
  TrajectoryRecord rec;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    rec.t.push_back(static_cast<double>(i));
    rec.x.push_back(xs[i]);
  }
  return rec;
}

std::vector<std::vector<double>> parse_csv(const std::string& text, std::string* header) {
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  if (header) *header = line;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

// ---------------------------------------------------------------------------
// Exit codes

TEST(CliExitCodes, HelpSucceeds) {
  TempDir d;
  EXPECT_EQ(run_cli("--help", d.path / "log"), 0);
  EXPECT_NE(read_file(d.path / "log").find("--config"), std::string::npos);
}

TEST(CliExitCodes, MissingSubcommandIsUsageError) {
  TempDir d;
  EXPECT_EQ(run_cli("", d.path / "log"), 2);
}

TEST(CliExitCodes, UnknownFlagIsUsageError) {
  TempDir d;
  EXPECT_EQ(run_cli("group --bogus", d.path / "log"), 2);
}

TEST(CliExitCodes, RunWithoutConfigIsUsageError) {
  TempDir d;
  EXPECT_EQ(run_cli("run --out \"" + (d.path / "o").string() + "\"", d.path / "log"), 2);
  EXPECT_NE(read_file(d.path / "log").find("--config is required"), std::string::npos);
}

TEST(CliExitCodes, UnknownConfigKeyIsConfigError) {
  TempDir d;
  write_file(d.path / "c.json", R"({"task": "group", "colour": 1})");
  EXPECT_EQ(run_cli("run --config \"" + (d.path / "c.json").string() + "\" --out \"" + (d.path / "o").string() + "\"", d.path / "log"), 2);
  EXPECT_NE(read_file(d.path / "log").find("colour"), std::string::npos);
}

TEST(CliExitCodes, MalformedJsonIsConfigError) {
  TempDir d;
  write_file(d.path / "c.json", "{\"task\": ");
  EXPECT_EQ(run_cli("run --config \"" + (d.path / "c.json").string() + "\"", d.path / "log"), 2);
}

TEST(CliExitCodes, MissingFileIsConfigError) {
  TempDir d;
  EXPECT_EQ(run_cli("run --config \"" + (d.path / "absent.json").string() + "\"", d.path / "log"), 2);
}

TEST(CliExitCodes, DomainErrorExitsOne) {
  TempDir d;
  write_file(d.path / "c.json",
             R"({"task": "planar", "family": "planar", "coefficients": {"alpha_planar": -0.1, "beta_planar": 1}})");
  EXPECT_EQ(run_cli("run --config \"" + (d.path / "c.json").string() + "\" --out \"" + (d.path / "o").string() + "\"", d.path / "log"), 1);
}

TEST(CliExitCodes, MissingConnectionNamesFailedCondition) {
  TempDir d;
  // a3 = a4 breaks the P1 connection condition.
  write_file(d.path / "c.json",
             R"({"task": "simulate", "family": "d3", "coefficients": {"preset": "reference", "a3": -0.05, "a5": 0.1},
                 "integrator": {"max_time": 10}})");
  EXPECT_EQ(run_cli("run --config \"" + (d.path / "c.json").string() + "\" --out \"" + (d.path / "o").string() + "\"", d.path / "log"), 1);
  EXPECT_NE(read_file(d.path / "log").find("violated"), std::string::npos) << read_file(d.path / "log");
}

TEST(CliExitCodes, SubcommandMustMatchConfigBlock) {
  TempDir d;
  EXPECT_EQ(run_cli("group --config \"" + scenario("planar").string() + "\" --out \"" + (d.path / "o").string() + "\"", d.path / "log"), 2);
}

// ---------------------------------------------------------------------------
// Flags and environment

TEST(CliOptions, EnvironmentStandsInForFlags) {
  TempDir d;
  const std::string env = "PSEUDOSIMPLE_CONFIG=\"" + scenario("group_gl23").string() + "\" PSEUDOSIMPLE_OUT=\"" + (d.path / "o").string() + "\"";
  ASSERT_EQ(run_cli("run", d.path / "log", env), 0) << read_file(d.path / "log");
  const json j = json::parse(read_file(d.path / "o" / "group.json"));
  EXPECT_EQ(j.at("order").get<int>(), 48);
  EXPECT_EQ(j.at("subspaces").size(), 24u);
}

TEST(CliOptions, SeedFlagOverridesConfig) {
  TempDir d;
  write_file(d.path / "c.json", R"({"task": "census", "family": "d3", "coefficients": {"preset": "reference"}, "seed": 3,
                                     "census": {"samples": 2, "max_time": 50}})");
  ASSERT_EQ(run_cli("run --config \"" + (d.path / "c.json").string() + "\" --seed 11 --out \"" + (d.path / "o").string() + "\"", d.path / "log"), 0)
      << read_file(d.path / "log");
  EXPECT_EQ(json::parse(read_file(d.path / "o" / "summary.json")).at("seed").get<int>(), 11);
}

TEST(CliOptions, FlagBeatsEnvironment) {
  TempDir d;
  const std::string env = "PSEUDOSIMPLE_OUT=\"" + (d.path / "env").string() + "\"";
  ASSERT_EQ(run_cli("run --config \"" + scenario("group_gl23").string() + "\" --out \"" + (d.path / "flag").string() + "\"", d.path / "log", env), 0);
  EXPECT_TRUE(fs::exists(d.path / "flag" / "group.json"));
  EXPECT_FALSE(fs::exists(d.path / "env"));
}

TEST(CliOptions, ThreadsMustBePositive) {
  TempDir d;
  EXPECT_EQ(run_cli("run --config \"" + scenario("group_gl23").string() + "\" --threads 0", d.path / "log"), 2);
}

TEST(CliOptions, VerboseLogsToStderr) {
  TempDir d;
  ASSERT_EQ(run_cli("run --verbose --config \"" + scenario("group_gl23").string() + "\" --out \"" + (d.path / "o").string() + "\"", d.path / "log"), 0);
  EXPECT_NE(read_file(d.path / "log").find("[pseudosimple] wrote group.json"), std::string::npos);
}

// ---------------------------------------------------------------------------
// Configuration parsing

TEST(ParseConfig, RejectsUnknownKeys) {
  EXPECT_THROW(cli::parse_config(json::parse(R"({"task": "verify", "extra": 1})")), ConfigError);
  EXPECT_THROW(cli::parse_config(json::parse(R"({"task": "verify", "integrator": {"rtoll": 1}})")), ConfigError);
}

TEST(ParseConfig, RequiresKnownTask) {
  EXPECT_THROW(cli::parse_config(json::object()), ConfigError);
  EXPECT_THROW(cli::parse_config(json::parse(R"({"task": "dance"})")), ConfigError);
  EXPECT_EQ(cli::parse_config(json::object(), cli::Task::Group).task, cli::Task::Group);
}

TEST(ParseConfig, ValidatesScalars) {
  EXPECT_THROW(cli::parse_config(json::parse(R"({"task": "verify", "seed": -1})")), ConfigError);
  EXPECT_THROW(cli::parse_config(json::parse(R"({"task": "verify", "threads": 0})")), ConfigError);
  EXPECT_THROW(cli::parse_config(json::parse(R"({"task": "verify", "seed": "one"})")), ConfigError);
  EXPECT_THROW(cli::parse_config(json::parse(R"({"task": "verify", "integrator": {"rtol": 0}})")), ConfigError);
  EXPECT_THROW(cli::parse_config(json::parse(R"({"task": "verify", "integrator": {"max_time": -5}})")), ConfigError);
}

TEST(ParseConfig, ReadsIntegratorAndBlock) {
  const cli::ScenarioConfig c = cli::parse_config(json::parse(
      R"({"task": "census", "seed": 4, "threads": 2, "integrator": {"rtol": 1e-9, "max_time": 50}, "census": {"samples": 3}})"));
  EXPECT_EQ(c.task, cli::Task::Census);
  EXPECT_EQ(c.seed, 4u);
  EXPECT_EQ(c.threads, 2);
  EXPECT_EQ(c.integrator.rtol, 1e-9);
  EXPECT_EQ(c.integrator.max_time, 50.0);
  EXPECT_EQ(c.block.at("samples").get<int>(), 3);
}

TEST(ParseConfig, BlockMustMatchTask) {
  EXPECT_THROW(cli::parse_config(json::parse(R"({"task": "verify", "census": {}})")), ConfigError);
}

TEST(ParseConfig, EveryShippedScenarioParses) {
  int n = 0;
  for (const auto& entry : fs::directory_iterator(PSEUDOSIMPLE_SCENARIOS)) {
    if (entry.path().extension() != ".json") continue;
    const cli::ScenarioConfig c = cli::parse_config(cli::load_json(entry.path()));
    if (c.family) {
      EXPECT_NO_THROW(cli::spec_from(c)) << entry.path();
    }
    ++n;
  }
  EXPECT_GE(n, 18);
}

TEST(SpecFrom, PresetWithOverrides) {
  const VectorFieldSpec s = cli::spec_from("d3", json::parse(R"({"preset": "reference", "a9": 0.2})"));
  EXPECT_EQ(s.family(), Family::D3Cubic);
  EXPECT_EQ(s.d3_coeffs().a[8], 0.2);
  EXPECT_EQ(s.d3_coeffs().a[0], CoeffsD3::reference_periodic().a[0]);
}

TEST(SpecFrom, RejectsBadCoefficientBlocks) {
  EXPECT_THROW(cli::spec_from("d3", json::parse(R"({"preset": "nope"})")), ConfigError);
  EXPECT_THROW(cli::spec_from("d3", json::parse(R"({"a1": 0.1})")), ConfigError);
  EXPECT_THROW(cli::spec_from("d3", json::parse(R"({"preset": "reference", "c7": 1})")), ConfigError);
  EXPECT_THROW(cli::spec_from("gl23", json::parse(R"({"h1": 0.8, "h2": 0.001, "mu": 1})")), ConfigError);
  EXPECT_THROW(cli::spec_from("gl23", json::parse(R"({"h1": 0.8})")), ConfigError);
  EXPECT_THROW(cli::spec_from("cubic", json::object()), ConfigError);
}

TEST(SpecFrom, GLParametrizationMatchesLibrary) {
  const VectorFieldSpec s = cli::spec_from("gl23", json::parse(R"({"h1": 0.7, "h2": 0.002})"));
  const CoeffsGL want = GLParametrization{0.7, 0.002}.coeffs();
  EXPECT_EQ(s.gl_coeffs().b, want.b);
  EXPECT_EQ(s.gl_coeffs().c, want.c);
  EXPECT_EQ(s.gl_coeffs().e, want.e);
}

// ---------------------------------------------------------------------------
// Projection

TEST(EmitProjection, EquilibriumGivesConstantRows) {
  const Vec4 x(0.3, -0.1, 0.2, 0.05);
  std::ostringstream os;
  cli::emit_projection(os, record({x, x, x, x}), Vec4(4, 2, 4, 1.5), Vec4(2, 4, -1.5, 4));
  std::string header;
  const auto rows = parse_csv(os.str(), &header);
  EXPECT_EQ(header, "t,p1,p2");
  ASSERT_EQ(rows.size(), 4u);
  for (const auto& r : rows) {
    EXPECT_EQ(r[1], rows[0][1]);
    EXPECT_EQ(r[2], rows[0][2]);
  }
  EXPECT_NEAR(rows[0][1], x.dot(Vec4(4, 2, 4, 1.5)) / Vec4(4, 2, 4, 1.5).norm(), 1e-15);
}

TEST(EmitProjection, OrthonormalPairDoesNotIncreaseNorm) {
  gen::Rng rng(81);
  for (int n = 0; n < 50; ++n) {
    const Vec4 a = rng.unit4();
    Vec4 b = rng.vec4();
    b -= b.dot(a) * a;
    std::vector<Vec4> xs;
    for (int k = 0; k < 5; ++k) xs.push_back(rng.vec4());
    std::ostringstream os;
    cli::emit_projection(os, record(xs), a, 3.0 * b);
    const auto rows = parse_csv(os.str(), nullptr);
    for (std::size_t k = 0; k < xs.size(); ++k) EXPECT_LE(std::hypot(rows[k][1], rows[k][2]), xs[k].norm() * (1 + 1e-15));
  }
}

TEST(EmitProjection, RejectsDependentOrZeroVectors) {
  std::ostringstream os;
  const TrajectoryRecord rec = record({Vec4(1, 0, 0, 0)});
  EXPECT_THROW(cli::emit_projection(os, rec, Vec4(1, 2, 3, 4), Vec4(-2, -4, -6, -8)), DomainError);
  EXPECT_THROW(cli::emit_projection(os, rec, Vec4::Zero(), Vec4(1, 0, 0, 0)), DomainError);
}

TEST(WriteTrajectory, HeaderAndFullPrecision) {
  std::ostringstream os;
  cli::write_trajectory(os, record({Vec4(1.0 / 3, 0, 0, 0)}));
  std::string header;
  const auto rows = parse_csv(os.str(), &header);
  EXPECT_EQ(header, "t,x1,y1,x2,y2");
  EXPECT_EQ(rows[0][1], 1.0 / 3);
}

// ---------------------------------------------------------------------------
// Reproducibility

TEST(Reproducibility, RerunGivesIdenticalBytes) {
  TempDir d;
  for (const char* name : {"planar", "returnmap_periodic", "analyze_d3"}) {
    const cli::ScenarioConfig c = cli::parse_config(cli::load_json(scenario(name)));
    cli::Output a(d.path / name / "a", false), b(d.path / name / "b", false);
    ASSERT_EQ(cli::run(c, a), 0);
    ASSERT_EQ(cli::run(c, b), 0);
    ASSERT_FALSE(a.written().empty());
    for (const auto& f : a.written()) EXPECT_EQ(read_file(a.dir() / f), read_file(b.dir() / f)) << name << "/" << f;
  }
}
