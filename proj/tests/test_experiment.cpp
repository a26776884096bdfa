#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dmlcbo/experiment.hpp"

using namespace dmlcbo;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "dmlcbo_test_experiment" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

ExperimentSpec small_quadratic(const fs::path& out) {
  ExperimentSpec spec;
  QuadraticSpec q;
  q.d1 = 2;
  q.d2 = 3;
  q.instance_seed = 3;
  spec.problem = q;
  spec.solver.K = 40;
  spec.solver.delta = 1e-3;
  spec.evaluation.stationarity_seeds = 1;
  spec.evaluation.jacobian_samples = 20;
  spec.output.directory = out.string();
  return spec;
}

bool has(const std::vector<Diagnostic>& diags, Diagnostic::Severity sev, const std::string& needle) {
  for (const auto& d : diags) {
    if (d.severity == sev && d.message.find(needle) != std::string::npos) return true;
  }
  return false;
}

int count_errors(const std::vector<Diagnostic>& diags) {
  int n = 0;
  for (const auto& d : diags) n += d.severity == Diagnostic::Severity::kError;
  return n;
}

}  // namespace

TEST(SpecJson, RoundTrip) {
  ExperimentSpec spec = small_quadratic("out");
  spec.solver.sampler = DirectionSampler::kBall;
  spec.sweep = SweepSpec{std::vector<std::uint64_t>{1, 2}, std::vector<double>{0.5}, std::nullopt};
  const json j = spec_to_json(spec);
  const ExperimentSpec back = spec_from_json(j);
  EXPECT_EQ(spec_to_json(back), j);
  EXPECT_EQ(back.solver.sampler, DirectionSampler::kBall);
  ASSERT_TRUE(back.sweep);
  EXPECT_FALSE(back.sweep->tau_grid.has_value());

  HypercleanSpec h;
  h.synthetic.dim = 7;
  h.positive_label = 6.0;
  spec.problem = h;
  EXPECT_EQ(spec_to_json(spec_from_json(spec_to_json(spec))), spec_to_json(spec));
}

TEST(SpecJson, UnknownKeyIsRejectedWithPath) {
  json j = spec_to_json(small_quadratic("out"));
  j["solver"]["gama"] = 0.1;
  try {
    spec_from_json(j);
    FAIL() << "expected invalid_argument";
  } catch (const std::invalid_argument& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("solver"), std::string::npos) << what;
    EXPECT_NE(what.find("gama"), std::string::npos) << what;
  }
}

TEST(SpecJson, MissingKeysTakeDefaults) {
  const ExperimentSpec spec = spec_from_json(json{{"problem", {{"kind", "quadratic"}}}});
  EXPECT_EQ(spec.solver.K, SolverConfig{}.K);
  EXPECT_TRUE(std::holds_alternative<QuadraticSpec>(spec.problem));
  EXPECT_FALSE(spec.sweep.has_value());
}

TEST(ValidateConfig, DefaultsHaveNoErrors) {
  const auto diags = validate_config(small_quadratic(fresh_dir("validate")));
  EXPECT_EQ(count_errors(diags), 0);
  EXPECT_TRUE(has(diags, Diagnostic::Severity::kAdvisory, "not checked"));
}

TEST(ValidateConfig, MomentumWindowIsAnError) {
  ExperimentSpec spec = small_quadratic(fresh_dir("validate"));
  spec.solver.m_shift = 0.0;
  spec.solver.t = 1.0;
  spec.solver.c1 = 10.0;
  EXPECT_TRUE(has(validate_config(spec), Diagnostic::Severity::kError, "alpha_1 = c1 * eta_1 = 10"));
}

TEST(ValidateConfig, StepAboveInverseCurvatureIsAdvisory) {
  ExperimentSpec spec = small_quadratic(fresh_dir("validate"));
  auto& q = std::get<QuadraticSpec>(spec.problem);
  spec.solver.eta = 1.1 / q.mu_g;
  const auto diags = validate_config(spec);
  EXPECT_EQ(count_errors(diags), 0);
  EXPECT_TRUE(has(diags, Diagnostic::Severity::kAdvisory, "1/mu_g"));
}

TEST(ValidateConfig, CollectsSeveralErrors) {
  // A regular file as an ancestor can never become a directory.
  const fs::path blocker = fresh_dir("blocker") / "file";
  std::ofstream(blocker) << "x";
  ExperimentSpec spec = small_quadratic(blocker / "out");
  spec.solver.Q = 0;
  auto& q = std::get<QuadraticSpec>(spec.problem);
  q.mu_g = -1.0;
  const auto diags = validate_config(spec);
  EXPECT_GE(count_errors(diags), 3);
  EXPECT_TRUE(has(diags, Diagnostic::Severity::kError, "output"));
}

TEST(ValidateConfig, HypercleanMissingFile) {
  ExperimentSpec spec = small_quadratic(fresh_dir("validate"));
  HypercleanSpec h;
  h.train_path = "/nonexistent/train.libsvm";
  h.val_path = "/nonexistent/val.libsvm";
  spec.problem = h;
  EXPECT_TRUE(has(validate_config(spec), Diagnostic::Severity::kError, "not found"));
}

TEST(Cells, ExpansionAndNames) {
  ExperimentSpec spec = small_quadratic("out");
  EXPECT_EQ(expand_cells(spec).size(), 1u);
  spec.sweep = SweepSpec{std::vector<std::uint64_t>{1, 2, 3}, std::vector<double>{0.1, 1.0},
                         std::vector<double>{0.5}};
  const auto cells = expand_cells(spec);
  ASSERT_EQ(cells.size(), 6u);
  EXPECT_EQ(cells[0].name(), "s1_g0.1_t0.5");
  EXPECT_EQ(cells[5].name(), "s3_g1_t0.5");
}

TEST(FormatNumber, ShortestRoundTrip) {
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(1.0), "1");
  EXPECT_EQ(std::stod(format_number(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(DescentRatio, QuartileMeans) {
  std::vector<TraceRecord> recs(8);
  for (int i = 0; i < 8; ++i) recs[i].y_tilde_step = i < 2 ? 2.0 : (i >= 6 ? 1.0 : 5.0);
  EXPECT_DOUBLE_EQ(descent_ratio(recs, 1.0, 0.1), 0.25);
  EXPECT_EQ(descent_ratio(std::vector<TraceRecord>(3), 1.0, 0.1), 0.0);
}

TEST(RunExperiment, WritesTraceAndSummary) {
  const fs::path dir = fresh_dir("single");
  ASSERT_EQ(run_experiment(small_quadratic(dir)), 0);
  int csv = 0;
  for (const auto& e : fs::directory_iterator(dir)) csv += e.path().extension() == ".csv";
  EXPECT_EQ(csv, 1);
  const json summary = json::parse(slurp(dir / "summary.json"));
  EXPECT_EQ(summary["schema_version"], 1);
  ASSERT_EQ(summary["cells"].size(), 1u);
  EXPECT_EQ(summary["n_failed"], 0);
  EXPECT_TRUE(summary["selected"].is_object());
  EXPECT_EQ(json::parse(slurp(dir / "failures.json")), json::array());

  const std::string trace = slurp(dir / summary["cells"][0]["trace_file"].get<std::string>());
  EXPECT_EQ(trace.substr(0, trace.find('\n')), "k,eta_k,w_norm,v_norm,x_step,y_tilde_step,f,g");
}

TEST(RunExperiment, TracesAreByteReproducible) {
  const fs::path a = fresh_dir("repro_a");
  const fs::path b = fresh_dir("repro_b");
  ExperimentSpec spec = small_quadratic(a);
  spec.sweep = SweepSpec{std::vector<std::uint64_t>{1, 2}, std::nullopt, std::nullopt};
  ASSERT_EQ(run_experiment(spec, 1), 0);
  spec.output.directory = b.string();
  ASSERT_EQ(run_experiment(spec, 2), 0);
  for (const auto& c : expand_cells(spec)) {
    const std::string name = "trace_" + c.name() + ".csv";
    EXPECT_EQ(slurp(a / name), slurp(b / name)) << name;
  }
}

TEST(RunExperiment, HypercleanReportsCleaningMetrics) {
  const fs::path dir = fresh_dir("hyperclean");
  ExperimentSpec spec = small_quadratic(dir);
  HypercleanSpec h;
  h.n_train = 40;
  h.n_val = 40;
  h.synthetic.dim = 5;
  h.c_reg = 1.0;
  spec.problem = h;
  ASSERT_EQ(run_experiment(spec), 0);
  const json cell = json::parse(slurp(dir / "summary.json"))["cells"][0];
  for (const char* key : {"val_accuracy", "baseline_val_accuracy", "mean_weight_flipped", "mean_weight_clean"}) {
    ASSERT_TRUE(cell.contains(key)) << key;
    EXPECT_TRUE(cell[key].is_number()) << key;
  }
}

TEST(RunExperiment, FailingCellIsRecorded) {
  const fs::path dir = fresh_dir("failing");
  ExperimentSpec spec = small_quadratic(dir);
  HypercleanSpec h;
  h.train_path = "/nonexistent/train.libsvm";
  h.val_path = "/nonexistent/val.libsvm";
  spec.problem = h;
  EXPECT_EQ(run_experiment(spec), 1);
  const json failures = json::parse(slurp(dir / "failures.json"));
  ASSERT_EQ(failures.size(), 1u);
  EXPECT_NE(failures[0]["error"].get<std::string>().find("cannot open"), std::string::npos);
  EXPECT_EQ(json::parse(slurp(dir / "summary.json"))["n_failed"], 1);
}

TEST(LoadSpec, ShippedExamplesParse) {
  for (const char* name : {"quadratic.json", "hyperclean.json"}) {
    const fs::path path = fs::path(DMLCBO_SOURCE_DIR) / "configs" / name;
    EXPECT_NO_THROW(load_spec(path)) << path;
  }
}
