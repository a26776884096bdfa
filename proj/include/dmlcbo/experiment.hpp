#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "dmlcbo/bench.hpp"
#include "dmlcbo/solver.hpp"

namespace dmlcbo {

struct QuadraticSpec {
  int d1 = 5;
  int d2 = 5;
  double mu_g = 0.5;
  double L_g = 2.0;
  double coupling_scale = 1.0;
  double box_halfwidth = 1.0;
  double target_scale = 1.0;
  double rho = 0.5;
  double coupling_condition = 0.0;             // see QuadraticOptions
  std::optional<std::uint64_t> instance_seed;  // default: derived from the run seed
  double init_scale = 1.0;                     // x1 ~ N(0, init_scale^2 I), y1 = 0
};

struct HypercleanSpec {
  // Paths to LIBSVM files. When empty, synthetic data is generated.
  std::string train_path;
  std::string val_path;
  std::optional<double> positive_label;
  int n_train = 200;
  int n_val = 200;
  SyntheticBinaryOptions synthetic;
  double flip_fraction = 0.3;
  double c_reg = 1e-2;
  double radius = 1.0;
};

// Absent lists fall back to the single value in the solver section.
struct SweepSpec {
  std::optional<std::vector<std::uint64_t>> seeds;
  std::optional<std::vector<double>> gamma_grid;
  std::optional<std::vector<double>> tau_grid;
};

struct EvaluationSpec {
  int stationarity_seeds = 4;
  int jacobian_samples = 2000;
  double inner_tol = 1e-10;
};

struct OutputSpec {
  std::string directory = "out";
  bool csv = true;
  bool json = true;
  bool trace_wall_time = false;  // off keeps trace files byte-reproducible
};

struct ExperimentSpec {
  std::variant<QuadraticSpec, HypercleanSpec> problem;
  SolverConfig solver;
  std::optional<SweepSpec> sweep;
  EvaluationSpec evaluation;
  OutputSpec output;
};

/// JSON mapping. Missing keys take defaults; unknown keys are rejected with
/// their path in the message (std::invalid_argument).
ExperimentSpec spec_from_json(const nlohmann::json& j);
nlohmann::json spec_to_json(const ExperimentSpec& spec);
ExperimentSpec load_spec(const std::filesystem::path& path);

struct Diagnostic {
  enum class Severity { kError, kAdvisory };
  Severity severity;
  std::string message;
};

/// Never throws.
std::vector<Diagnostic> validate_config(const ExperimentSpec& spec);

struct Cell {
  std::uint64_t seed;
  double gamma;
  double tau;
  std::string name() const;
};

std::vector<Cell> expand_cells(const ExperimentSpec& spec);

struct CellResult {
  Cell cell;
  int output_index = 0;
  double stationarity_sampled = 0.0;
  double stationarity_last = 0.0;
  double final_f = 0.0;
  double wall_time = 0.0;
  double descent_ratio = 0.0;  // last-quartile / first-quartile mean of the step metric
  std::vector<std::string> warnings;
  // Hyper-cleaning only.
  std::optional<double> val_accuracy;
  std::optional<double> baseline_val_accuracy;
  std::optional<double> mean_weight_flipped;
  std::optional<double> mean_weight_clean;
};

/// Instantiates the problem for a cell. `flip_mask` receives the corrupted
/// training samples for hyper-cleaning problems.
BilevelProblem build_problem(const ExperimentSpec& spec, std::uint64_t seed,
                             std::vector<bool>* flip_mask = nullptr,
                             HypercleanProblem* hyperclean = nullptr);

/// Runs one cell and writes its trace file when CSV output is enabled.
CellResult run_cell(const ExperimentSpec& spec, const Cell& cell);

/// Ratio used by the descent-trend property: mean over the last quartile of
/// |y~_{k+1} - y_k|^2 + |x_{k+1} - x_k|^2 / (gamma c_l)^2 divided by the same
/// mean over the first quartile.
double descent_ratio(const std::vector<TraceRecord>& records, double gamma, double c_l);

/// Writes trace_<cell>.csv, summary.json and failures.json under the output
/// directory. Returns 0 when every cell succeeded.
int run_experiment(const ExperimentSpec& spec, int jobs = 1);

/// Locale-independent shortest round-trip formatting.
std::string format_number(double v);

void write_trace_csv(const std::vector<TraceRecord>& records, const std::filesystem::path& path,
                     bool wall_time);

}  // namespace dmlcbo
