#include "dmlcbo/experiment.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "dmlcbo/reference.hpp"

namespace dmlcbo {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kSchemaVersion = 1;

// Reads keys from one JSON object and remembers which ones were seen, so that
// leftovers (typos, unsupported options) can be reported.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw std::invalid_argument(path_ + ": expected an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw std::invalid_argument(path_ + "." + key + ": " + e.what());
    }
  }

  template <class T>
  void get(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return;
    T v{};
    get(key, v);
    out = v;
  }

  bool has(const char* key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  const json& at(const char* key) const { return j_.at(key); }
  std::string child(const char* key) const { return path_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw std::invalid_argument(path_ + ": unknown key \"" + it.key() + "\"");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::string sampler_name(DirectionSampler s) { return s == DirectionSampler::kBall ? "ball" : "sphere"; }

DirectionSampler parse_sampler(const std::string& s) {
  if (s == "sphere") return DirectionSampler::kSphere;
  if (s == "ball") return DirectionSampler::kBall;
  throw std::invalid_argument("solver.sampler: expected \"sphere\" or \"ball\", got \"" + s + "\"");
}

SolverConfig solver_from_json(const json& j) {
  SolverConfig c;
  ObjectReader r(j, "solver");
  r.get("eta", c.eta);
  r.get("delta", c.delta);
  r.get("Q", c.Q);
  r.get("tau", c.tau);
  r.get("gamma", c.gamma);
  r.get("c1", c.c1);
  r.get("c2", c.c2);
  r.get("t", c.t);
  r.get("m_shift", c.m_shift);
  r.get("c_l", c.c_l);
  r.get("c_u", c.c_u);
  r.get("G0", c.G0);
  r.get("ema_decay", c.ema_decay);
  r.get("ema_gain", c.ema_gain);
  r.get("K", c.K);
  r.get("seed", c.seed);
  r.get("per_coordinate", c.per_coordinate);
  r.get("n_directions", c.n_directions);
  std::string sampler = sampler_name(c.sampler);
  r.get("sampler", sampler);
  c.sampler = parse_sampler(sampler);
  r.finish();
  return c;
}

json solver_to_json(const SolverConfig& c) {
  return json{{"eta", c.eta},        {"delta", c.delta},
              {"Q", c.Q},            {"tau", c.tau},
              {"gamma", c.gamma},    {"c1", c.c1},
              {"c2", c.c2},          {"t", c.t},
              {"m_shift", c.m_shift}, {"c_l", c.c_l},
              {"c_u", c.c_u},        {"G0", c.G0},
              {"ema_decay", c.ema_decay}, {"ema_gain", c.ema_gain},
              {"K", c.K},            {"seed", c.seed},
              {"per_coordinate", c.per_coordinate}, {"n_directions", c.n_directions},
              {"sampler", sampler_name(c.sampler)}};
}

QuadraticSpec quadratic_from_json(const json& j) {
  QuadraticSpec q;
  ObjectReader r(j, "problem");
  std::string kind;
  r.get("kind", kind);
  r.get("d1", q.d1);
  r.get("d2", q.d2);
  r.get("mu_g", q.mu_g);
  r.get("L_g", q.L_g);
  r.get("coupling_scale", q.coupling_scale);
  r.get("box_halfwidth", q.box_halfwidth);
  r.get("target_scale", q.target_scale);
  r.get("rho", q.rho);
  r.get("coupling_condition", q.coupling_condition);
  r.get("instance_seed", q.instance_seed);
  r.get("init_scale", q.init_scale);
  r.finish();
  return q;
}

json quadratic_to_json(const QuadraticSpec& q) {
  json j{{"kind", "quadratic"},
         {"d1", q.d1},
         {"d2", q.d2},
         {"mu_g", q.mu_g},
         {"L_g", q.L_g},
         {"coupling_scale", q.coupling_scale},
         {"box_halfwidth", q.box_halfwidth},
         {"target_scale", q.target_scale},
         {"rho", q.rho},
         {"coupling_condition", q.coupling_condition},
         {"init_scale", q.init_scale}};
  if (q.instance_seed) j["instance_seed"] = *q.instance_seed;
  return j;
}

HypercleanSpec hyperclean_from_json(const json& j) {
  HypercleanSpec h;
  ObjectReader r(j, "problem");
  std::string kind;
  r.get("kind", kind);
  r.get("train_path", h.train_path);
  r.get("val_path", h.val_path);
  r.get("positive_label", h.positive_label);
  r.get("n_train", h.n_train);
  r.get("n_val", h.n_val);
  r.get("flip_fraction", h.flip_fraction);
  r.get("c_reg", h.c_reg);
  r.get("radius", h.radius);
  if (r.has("synthetic")) {
    ObjectReader s(r.at("synthetic"), r.child("synthetic"));
    s.get("dim", h.synthetic.dim);
    s.get("informative", h.synthetic.informative);
    s.get("separation", h.synthetic.separation);
    s.get("feature_scale", h.synthetic.feature_scale);
    s.get("seed", h.synthetic.seed);
    s.finish();
  }
  r.finish();
  return h;
}

json hyperclean_to_json(const HypercleanSpec& h) {
  json j{{"kind", "hyperclean"},
         {"train_path", h.train_path},
         {"val_path", h.val_path},
         {"n_train", h.n_train},
         {"n_val", h.n_val},
         {"flip_fraction", h.flip_fraction},
         {"c_reg", h.c_reg},
         {"radius", h.radius},
         {"synthetic",
          {{"dim", h.synthetic.dim},
           {"informative", h.synthetic.informative},
           {"separation", h.synthetic.separation},
           {"feature_scale", h.synthetic.feature_scale},
           {"seed", h.synthetic.seed}}}};
  if (h.positive_label) j["positive_label"] = *h.positive_label;
  return j;
}

double mean_over(const Vec& weights, const std::vector<bool>& mask, bool value) {
  double sum = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] == value) {
      sum += weights[static_cast<Eigen::Index>(i)];
      ++n;
    }
  }
  return n ? sum / n : 0.0;
}

bool directory_writable(const fs::path& dir) {
  std::error_code ec;
  fs::path probe = dir.empty() ? fs::path(".") : dir;
  while (!fs::exists(probe, ec)) {
    const fs::path parent = probe.parent_path();
    if (parent == probe) return false;
    probe = parent.empty() ? fs::path(".") : parent;
  }
  return fs::is_directory(probe, ec) && ::access(probe.c_str(), W_OK) == 0;
}

json number_or_null(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

ExperimentSpec spec_from_json(const json& j) {
  ExperimentSpec spec;
  ObjectReader r(j, "spec");
  if (!r.has("problem")) throw std::invalid_argument("spec: missing \"problem\" section");
  const json& pj = r.at("problem");
  if (!pj.is_object() || !pj.contains("kind")) {
    throw std::invalid_argument("problem: missing \"kind\" (quadratic or hyperclean)");
  }
  const std::string kind = pj.at("kind").is_string() ? pj.at("kind").get<std::string>() : "";
  if (kind == "quadratic") {
    spec.problem = quadratic_from_json(pj);
  } else if (kind == "hyperclean") {
    spec.problem = hyperclean_from_json(pj);
  } else {
    throw std::invalid_argument("problem.kind: expected \"quadratic\" or \"hyperclean\"");
  }
  if (r.has("solver")) spec.solver = solver_from_json(r.at("solver"));
  if (r.has("sweep")) {
    SweepSpec s;
    ObjectReader sr(r.at("sweep"), "sweep");
    sr.get("seeds", s.seeds);
    sr.get("gamma_grid", s.gamma_grid);
    sr.get("tau_grid", s.tau_grid);
    sr.finish();
    spec.sweep = s;
  }
  if (r.has("evaluation")) {
    ObjectReader er(r.at("evaluation"), "evaluation");
    er.get("stationarity_seeds", spec.evaluation.stationarity_seeds);
    er.get("jacobian_samples", spec.evaluation.jacobian_samples);
    er.get("inner_tol", spec.evaluation.inner_tol);
    er.finish();
  }
  if (r.has("output")) {
    ObjectReader orr(r.at("output"), "output");
    orr.get("directory", spec.output.directory);
    orr.get("trace_wall_time", spec.output.trace_wall_time);
    if (orr.has("formats")) {
      std::vector<std::string> formats;
      orr.get("formats", formats);
      spec.output.csv = spec.output.json = false;
      for (const auto& f : formats) {
        if (f == "csv") {
          spec.output.csv = true;
        } else if (f == "json") {
          spec.output.json = true;
        } else {
          throw std::invalid_argument("output.formats: unknown format \"" + f + "\"");
        }
      }
    }
    orr.finish();
  }
  r.finish();
  return spec;
}

json spec_to_json(const ExperimentSpec& spec) {
  json j;
  j["problem"] = std::visit(
      [](const auto& p) -> json {
        if constexpr (std::is_same_v<std::decay_t<decltype(p)>, QuadraticSpec>) {
          return quadratic_to_json(p);
        } else {
          return hyperclean_to_json(p);
        }
      },
      spec.problem);
  j["solver"] = solver_to_json(spec.solver);
  if (spec.sweep) {
    json sw = json::object();
    if (spec.sweep->seeds) sw["seeds"] = *spec.sweep->seeds;
    if (spec.sweep->gamma_grid) sw["gamma_grid"] = *spec.sweep->gamma_grid;
    if (spec.sweep->tau_grid) sw["tau_grid"] = *spec.sweep->tau_grid;
    j["sweep"] = sw;
  }
  j["evaluation"] = {{"stationarity_seeds", spec.evaluation.stationarity_seeds},
                     {"jacobian_samples", spec.evaluation.jacobian_samples},
                     {"inner_tol", spec.evaluation.inner_tol}};
  json formats = json::array();
  if (spec.output.csv) formats.push_back("csv");
  if (spec.output.json) formats.push_back("json");
  j["output"] = {{"directory", spec.output.directory},
                 {"formats", formats},
                 {"trace_wall_time", spec.output.trace_wall_time}};
  return j;
}

ExperimentSpec load_spec(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open spec file " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
  return spec_from_json(j);
}

std::vector<Diagnostic> validate_config(const ExperimentSpec& spec) {
  std::vector<Diagnostic> out;
  auto error = [&](std::string m) { out.push_back({Diagnostic::Severity::kError, std::move(m)}); };
  auto advise = [&](std::string m) { out.push_back({Diagnostic::Severity::kAdvisory, std::move(m)}); };

  for (auto& e : solver_config_errors(spec.solver)) error("solver: " + e);

  ProblemConstants constants;
  int d2 = 1;
  if (const auto* q = std::get_if<QuadraticSpec>(&spec.problem)) {
    if (q->d1 < 1 || q->d2 < 1) error("problem: d1 and d2 must be >= 1");
    if (!(q->mu_g > 0.0) || !(q->L_g >= q->mu_g)) error("problem: need 0 < mu_g <= L_g");
    if (!(q->coupling_scale >= 0.0)) error("problem: coupling_scale must be non-negative");
    if (q->coupling_condition != 0.0 && !(q->coupling_condition >= 1.0)) {
      error("problem: coupling_condition must be 0 (Gaussian) or >= 1");
    }
    if (!(q->box_halfwidth > 0.0)) error("problem: box_halfwidth must be positive");
    constants.mu_g = q->mu_g;
    constants.L_g = q->L_g;
    d2 = std::max(1, q->d2);
  } else {
    const auto& h = std::get<HypercleanSpec>(spec.problem);
    if (!(h.flip_fraction >= 0.0 && h.flip_fraction <= 1.0)) error("problem: flip_fraction must lie in [0, 1]");
    if (!(h.c_reg > 0.0)) error("problem: c_reg must be positive");
    if (!(h.radius > 0.0)) error("problem: radius must be positive");
    if (h.train_path.empty() != h.val_path.empty()) {
      error("problem: train_path and val_path must be given together");
    }
    for (const auto& p : {h.train_path, h.val_path}) {
      if (!p.empty() && !fs::exists(p)) error("problem: data file not found: " + p);
    }
    if (h.train_path.empty() && (h.n_train < 1 || h.n_val < 1 || h.synthetic.dim < 1)) {
      error("problem: synthetic sizes must be >= 1");
    }
    bool ok = true;
    for (const auto& d : out) ok = ok && d.severity != Diagnostic::Severity::kError;
    if (ok) {
      try {
        const BilevelProblem p = build_problem(spec, spec.solver.seed);
        constants = p.constants;
        d2 = p.d2;
      } catch (const std::exception& e) {
        error(std::string("problem: ") + e.what());
      }
    }
  }

  if (spec.sweep) {
    const SweepSpec& sw = *spec.sweep;
    if (sw.seeds && sw.seeds->empty()) error("sweep: seeds must be nonempty when present");
    if (sw.gamma_grid && sw.gamma_grid->empty()) error("sweep: gamma_grid must be nonempty when present");
    if (sw.tau_grid && sw.tau_grid->empty()) error("sweep: tau_grid must be nonempty when present");
    for (double g : sw.gamma_grid.value_or(std::vector<double>{})) {
      if (!(g >= 0.0)) error("sweep: gamma_grid entries must be non-negative");
    }
    for (double t : sw.tau_grid.value_or(std::vector<double>{})) {
      if (!(t >= 0.0)) error("sweep: tau_grid entries must be non-negative");
    }
  }
  if (spec.evaluation.stationarity_seeds < 1) error("evaluation: stationarity_seeds must be >= 1");
  if (spec.evaluation.jacobian_samples < 1) error("evaluation: jacobian_samples must be >= 1");
  if (!(spec.evaluation.inner_tol > 0.0)) error("evaluation: inner_tol must be positive");
  if (!directory_writable(spec.output.directory)) {
    error("output: directory is not writable: " + spec.output.directory);
  }

  try {
    for (auto& a : hypergrad_config_advisories(spec.solver.hypergrad(), constants, d2)) advise(a);
  } catch (const std::exception&) {
    // Already reported as a solver error.
  }
  advise("gamma, tau, c1 and c2 windows of the convergence theory depend on constants that are not "
         "computed; they are not checked");
  return out;
}

std::string Cell::name() const {
  return "s" + std::to_string(seed) + "_g" + format_number(gamma) + "_t" + format_number(tau);
}

std::vector<Cell> expand_cells(const ExperimentSpec& spec) {
  std::vector<std::uint64_t> seeds{spec.solver.seed};
  std::vector<double> gammas{spec.solver.gamma};
  std::vector<double> taus{spec.solver.tau};
  if (spec.sweep) {
    if (spec.sweep->seeds) seeds = *spec.sweep->seeds;
    if (spec.sweep->gamma_grid) gammas = *spec.sweep->gamma_grid;
    if (spec.sweep->tau_grid) taus = *spec.sweep->tau_grid;
  }
  std::vector<Cell> cells;
  for (auto s : seeds) {
    for (double g : gammas) {
      for (double t : taus) cells.push_back({s, g, t});
    }
  }
  return cells;
}

BilevelProblem build_problem(const ExperimentSpec& spec, std::uint64_t seed,
                             std::vector<bool>* flip_mask, HypercleanProblem* hyperclean) {
  if (const auto* q = std::get_if<QuadraticSpec>(&spec.problem)) {
    const std::uint64_t instance = q->instance_seed ? *q->instance_seed : derive_seed(seed, "init");
    QuadraticOptions o;
    o.target_scale = q->target_scale;
    o.rho = q->rho;
    o.coupling_condition = q->coupling_condition;
    return make_quadratic(q->d1, q->d2, q->mu_g, q->L_g, q->coupling_scale, q->box_halfwidth,
                          instance, o)
        .problem();
  }
  const auto& h = std::get<HypercleanSpec>(spec.problem);
  Dataset train;
  Dataset val;
  if (!h.train_path.empty()) {
    LibsvmOptions lo;
    lo.positive_label = h.positive_label;
    train = load_libsvm(h.train_path, lo);
    val = load_libsvm(h.val_path, lo);
    lo.min_dim = std::max(train.dim(), val.dim());
    train = load_libsvm(h.train_path, lo);
    val = load_libsvm(h.val_path, lo);
  } else {
    SyntheticBinaryOptions so = h.synthetic;
    so.n = h.n_train;
    train = make_synthetic_binary(so);
    so.n = h.n_val;
    so.seed = derive_seed(h.synthetic.seed, "validation");
    val = make_synthetic_binary(so);
  }
  auto [noisy, mask] = flip_labels(train, h.flip_fraction, derive_seed(seed, "data-corruption"));
  if (flip_mask) *flip_mask = mask;
  HypercleanProblem hp = make_hyperclean(std::move(noisy), std::move(val), h.c_reg, h.radius);
  BilevelProblem p = hp.problem();
  if (hyperclean) *hyperclean = std::move(hp);
  return p;
}

double descent_ratio(const std::vector<TraceRecord>& records, double gamma, double c_l) {
  const std::size_t n = records.size();
  const std::size_t q = n / 4;
  if (q == 0) return 0.0;
  const double scale = gamma * c_l;
  auto metric = [&](const TraceRecord& r) {
    const double dx = scale > 0.0 ? r.x_step / scale : 0.0;
    return r.y_tilde_step * r.y_tilde_step + dx * dx;
  };
  double first = 0.0;
  double last = 0.0;
  for (std::size_t i = 0; i < q; ++i) {
    first += metric(records[i]);
    last += metric(records[n - q + i]);
  }
  return first > 0.0 ? last / first : 0.0;
}

void write_trace_csv(const std::vector<TraceRecord>& records, const fs::path& path, bool wall_time) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "k,eta_k,w_norm,v_norm,x_step,y_tilde_step,f,g";
  if (wall_time) out << ",wall_time";
  out << '\n';
  for (const auto& r : records) {
    out << r.k << ',' << format_number(r.eta_k) << ',' << format_number(r.w_norm) << ','
        << format_number(r.v_norm) << ',' << format_number(r.x_step) << ','
        << format_number(r.y_tilde_step) << ',' << format_number(r.f) << ','
        << format_number(r.g);
    if (wall_time) out << ',' << format_number(r.wall_time);
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

CellResult run_cell(const ExperimentSpec& spec, const Cell& cell) {
  const auto start = std::chrono::steady_clock::now();
  std::vector<bool> mask;
  HypercleanProblem hp;
  const BilevelProblem p = build_problem(spec, cell.seed, &mask, &hp);

  SolverConfig cfg = spec.solver;
  cfg.seed = cell.seed;
  cfg.gamma = cell.gamma;
  cfg.tau = cell.tau;

  Vec x1 = Vec::Zero(p.d1);
  if (const auto* q = std::get_if<QuadraticSpec>(&spec.problem)) {
    Rng init = make_stream(cell.seed, "init");
    std::normal_distribution<double> n(0.0, 1.0);
    for (int i = 0; i < p.d1; ++i) x1[i] = q->init_scale * n(init);
  }
  const Vec y1 = project(p.constraint, Vec::Zero(p.d2));

  const RunTrace trace = run(p, x1, y1, cfg);

  CellResult res;
  res.cell = cell;
  res.output_index = trace.output_index;
  res.warnings = trace.warnings;
  res.final_f = trace.records.back().f;
  res.descent_ratio = descent_ratio(trace.records, cfg.gamma, cfg.c_l);

  const HypergradConfig hc = cfg.hypergrad();
  JacobianOracleOptions jo;
  jo.n_samples = spec.evaluation.jacobian_samples;
  const std::uint64_t eval_seed = derive_seed(cell.seed, "evaluation");
  res.stationarity_sampled = stationarity_measure(p, trace.output_iterate, hc,
                                                  spec.evaluation.stationarity_seeds,
                                                  spec.evaluation.inner_tol, eval_seed, jo);
  res.stationarity_last = stationarity_measure(p, trace.last_iterate, hc,
                                               spec.evaluation.stationarity_seeds,
                                               spec.evaluation.inner_tol, eval_seed, jo);

  if (std::holds_alternative<HypercleanSpec>(spec.problem)) {
    const Vec y = inner_solve(p, trace.output_iterate, cfg.eta, spec.evaluation.inner_tol, 1000000).y_star;
    const Vec y0 = inner_solve(p, Vec::Zero(p.d1), cfg.eta, spec.evaluation.inner_tol, 1000000).y_star;
    res.val_accuracy = accuracy(hp.val, y);
    res.baseline_val_accuracy = accuracy(hp.val, y0);
    const Vec weights = trace.output_iterate.unaryExpr([](double t) { return sigmoid(t); });
    res.mean_weight_flipped = mean_over(weights, mask, true);
    res.mean_weight_clean = mean_over(weights, mask, false);
  }

  if (spec.output.csv) {
    write_trace_csv(trace.records, fs::path(spec.output.directory) / ("trace_" + cell.name() + ".csv"),
                    spec.output.trace_wall_time);
  }
  res.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

int run_experiment(const ExperimentSpec& spec, int jobs) {
  const fs::path dir(spec.output.directory);
  fs::create_directories(dir);
  const std::vector<Cell> cells = expand_cells(spec);

  std::vector<std::optional<CellResult>> results(cells.size());
  std::vector<std::string> errors(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        results[i] = run_cell(spec, cells[i]);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const int n_workers = std::max(1, std::min<int>(jobs, static_cast<int>(cells.size())));
  std::vector<std::thread> pool;
  for (int i = 1; i < n_workers; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  json cell_rows = json::array();
  json failures = json::array();
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const Cell& c = cells[i];
    if (!results[i]) {
      failures.push_back({{"cell", c.name()}, {"seed", c.seed}, {"gamma", c.gamma}, {"tau", c.tau},
                          {"error", errors[i]}});
      continue;
    }
    const CellResult& r = *results[i];
    json row{{"cell", c.name()},
             {"seed", c.seed},
             {"gamma", c.gamma},
             {"tau", c.tau},
             {"output_index", r.output_index},
             {"stationarity_sampled", r.stationarity_sampled},
             {"stationarity_last", r.stationarity_last},
             {"final_f", r.final_f},
             {"descent_ratio", r.descent_ratio},
             {"wall_time", r.wall_time},
             {"warnings", r.warnings}};
    if (spec.output.csv) row["trace_file"] = "trace_" + c.name() + ".csv";
    if (r.val_accuracy) {
      row["val_accuracy"] = number_or_null(r.val_accuracy);
      row["baseline_val_accuracy"] = number_or_null(r.baseline_val_accuracy);
      row["mean_weight_flipped"] = number_or_null(r.mean_weight_flipped);
      row["mean_weight_clean"] = number_or_null(r.mean_weight_clean);
    }
    cell_rows.push_back(std::move(row));
  }

  // Per (gamma, tau): median sampled-iterate stationarity over seeds; the
  // smallest median is reported as the selected grid point.
  json grid = json::array();
  std::optional<std::size_t> best;
  std::vector<std::pair<double, double>> keys;
  for (const auto& c : cells) {
    if (std::find(keys.begin(), keys.end(), std::make_pair(c.gamma, c.tau)) == keys.end()) {
      keys.emplace_back(c.gamma, c.tau);
    }
  }
  double best_median = 0.0;
  for (const auto& [g, t] : keys) {
    std::vector<double> vals;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (results[i] && cells[i].gamma == g && cells[i].tau == t) vals.push_back(results[i]->stationarity_sampled);
    }
    if (vals.empty()) continue;
    std::sort(vals.begin(), vals.end());
    const std::size_t m = vals.size();
    const double median = m % 2 ? vals[m / 2] : 0.5 * (vals[m / 2 - 1] + vals[m / 2]);
    grid.push_back({{"gamma", g}, {"tau", t}, {"median_stationarity_sampled", median}, {"n", m}});
    if (!best || median < best_median) {
      best = grid.size() - 1;
      best_median = median;
    }
  }

  if (spec.output.json) {
    json summary{{"schema_version", kSchemaVersion},
                 {"spec", spec_to_json(spec)},
                 {"cells", cell_rows},
                 {"grid", grid},
                 {"selected", best ? grid[*best] : json(nullptr)},
                 {"n_failed", failures.size()}};
    std::ofstream(dir / "summary.json") << summary.dump(2) << '\n';
  }
  std::ofstream(dir / "failures.json") << failures.dump(2) << '\n';
  return failures.empty() ? 0 : 1;
}

}  // namespace dmlcbo
