// dmlcbo: run, validate and generate data for constrained bilevel experiments.
//
//   dmlcbo run spec.json [--jobs N] [--seed S] [--out DIR]
//   dmlcbo validate spec.json
//   dmlcbo gen-data --kind synthetic-binary --out data.libsvm [--n N --dim D --seed S]

#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "dmlcbo/experiment.hpp"

namespace {

int print_diagnostics(const std::vector<dmlcbo::Diagnostic>& diags) {
  int errors = 0;
  for (const auto& d : diags) {
    const bool err = d.severity == dmlcbo::Diagnostic::Severity::kError;
    errors += err;
    std::cerr << (err ? "error: " : "advisory: ") << d.message << '\n';
  }
  return errors;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constrained bilevel optimization experiments"};
  app.require_subcommand(1);

  std::string spec_path;
  int jobs = 1;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  auto* run = app.add_subcommand("run", "Run every cell of an experiment spec");
  run->add_option("spec", spec_path, "Experiment spec (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--jobs", jobs, "Number of cells run concurrently")->check(CLI::PositiveNumber);
  run->add_option("--seed", seed, "Override solver.seed (ignored when the sweep lists seeds)");
  run->add_option("--out", out_dir, "Override output.directory");

  auto* validate = app.add_subcommand("validate", "Check a spec and print diagnostics");
  validate->add_option("spec", spec_path, "Experiment spec (JSON)")->required()->check(CLI::ExistingFile);

  std::string kind;
  std::string data_out;
  dmlcbo::SyntheticBinaryOptions gen;
  auto* gen_data = app.add_subcommand("gen-data", "Write a synthetic dataset in LIBSVM format");
  gen_data->add_option("--kind", kind, "Dataset kind")->required()->check(CLI::IsMember({"synthetic-binary"}));
  gen_data->add_option("--out", data_out, "Output file")->required();
  gen_data->add_option("--n", gen.n, "Number of samples")->check(CLI::PositiveNumber);
  gen_data->add_option("--dim", gen.dim, "Feature dimension")->check(CLI::PositiveNumber);
  gen_data->add_option("--informative", gen.informative, "Informative coordinates");
  gen_data->add_option("--separation", gen.separation, "Class-mean offset");
  gen_data->add_option("--feature-scale", gen.feature_scale, "Global feature scale");
  gen_data->add_option("--seed", gen.seed, "Generator seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen_data) {
      dmlcbo::write_libsvm(dmlcbo::make_synthetic_binary(gen), data_out);
      return 0;
    }
    dmlcbo::ExperimentSpec spec = dmlcbo::load_spec(spec_path);
    if (seed) spec.solver.seed = *seed;
    if (!out_dir.empty()) spec.output.directory = out_dir;
    const int errors = print_diagnostics(dmlcbo::validate_config(spec));
    if (*validate) return errors ? 2 : 0;
    if (errors) return 2;
    const int rc = dmlcbo::run_experiment(spec, jobs);
    if (rc != 0) std::cerr << "some cells failed; see " << spec.output.directory << "/failures.json\n";
    return rc;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
