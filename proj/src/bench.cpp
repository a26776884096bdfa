#include "dmlcbo/bench.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <memory>
#include <numeric>
#include <sstream>

namespace dmlcbo {

namespace {

Mat gaussian_matrix(int rows, int cols, Rng& rng) {
  std::normal_distribution<double> normal;
  Mat m(rows, cols);
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) m(i, j) = normal(rng);
  }
  return m;
}

double spectral_norm(const Mat& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Mat> svd(m);
  return svd.singularValues()(0);
}

// Logistic loss on the margin m = b * y^T a and its first two derivatives.
double logistic_loss(double m) { return m > 0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m)); }
double logistic_d1(double m) { return -sigmoid(-m); }
double logistic_d2(double m) { return sigmoid(m) * sigmoid(-m); }

}  // namespace

double sigmoid(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

// ---------------------------------------------------------------------------
// QuadraticBilevel
// ---------------------------------------------------------------------------

Vec QuadraticBilevel::unconstrained_solution(const Vec& x) const {
  return A.llt().solve(B * x);
}

BilevelProblem QuadraticBilevel::problem() const {
  auto q = std::make_shared<const QuadraticBilevel>(*this);
  BilevelProblem p;
  p.d1 = d1();
  p.d2 = d2();
  p.upper_value = [q](const Vec& x, const Vec& y) {
    return 0.5 * (y - q->y_target).squaredNorm() + 0.5 * q->rho * x.squaredNorm();
  };
  p.grad_x_f = [q](const Vec& x, const Vec&) -> Vec { return q->rho * x; };
  p.grad_y_f = [q](const Vec&, const Vec& y) -> Vec { return y - q->y_target; };
  p.lower_value = [q](const Vec& x, const Vec& y) {
    return 0.5 * y.dot(q->A * y) - (q->B * x).dot(y);
  };
  p.grad_y_g = [q](const Vec& x, const Vec& y) -> Vec { return q->A * y - q->B * x; };
  p.hvp_yy = [q](const Vec&, const Vec&, const Vec& v) -> Vec { return q->A * v; };
  p.cross_jvp = [q](const Vec&, const Vec&, const Vec& v) -> Vec {
    return -(q->B.transpose() * v);
  };
  p.constraint = box;

  p.constants.mu_g = mu_g;
  p.constants.L_g = L_g;
  p.constants.C_gxy = spectral_norm(B);
  p.constants.L_f = std::max(1.0, rho);
  if (const auto* b = std::get_if<Box>(&box.kind()); b && b->lo.allFinite() && b->hi.allFinite()) {
    const Vec far = (b->lo - y_target).cwiseAbs().cwiseMax((b->hi - y_target).cwiseAbs());
    p.constants.C_fy = far.norm();
  }
  return p;
}

QuadraticBilevel make_quadratic(int d1, int d2, double mu_g, double L_g, double coupling_scale,
                                double box_halfwidth, std::uint64_t seed,
                                const QuadraticOptions& opts) {
  if (d1 < 1 || d2 < 1) throw std::invalid_argument("make_quadratic: dimensions must be positive");
  if (!(mu_g > 0.0) || !(mu_g <= L_g)) {
    throw std::invalid_argument("make_quadratic: require 0 < mu_g <= L_g");
  }
  if (!(coupling_scale >= 0.0)) throw std::invalid_argument("make_quadratic: coupling_scale >= 0");
  if (!(box_halfwidth > 0.0)) throw std::invalid_argument("make_quadratic: box_halfwidth > 0");

  Rng rng(seed);
  std::uniform_real_distribution<double> unif(mu_g, L_g);
  Vec spectrum(d2);
  for (int i = 0; i < d2; ++i) spectrum[i] = unif(rng);
  spectrum[0] = mu_g;
  if (d2 >= 2) spectrum[d2 - 1] = L_g;

  const Eigen::HouseholderQR<Mat> qr(gaussian_matrix(d2, d2, rng));
  const Mat R = qr.householderQ();
  Mat A = R * spectrum.asDiagonal() * R.transpose();
  A = 0.5 * (A + A.transpose()).eval();

  Mat B = gaussian_matrix(d2, d1, rng);
  if (opts.coupling_condition > 0.0) {
    // Replace the singular values by a geometric ladder from coupling_scale
    // down to coupling_scale / coupling_condition.
    Eigen::JacobiSVD<Mat> svd(B, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const int r = std::min(d1, d2);
    Mat S = Mat::Zero(d2, d1);
    for (int i = 0; i < r; ++i) {
      const double frac = r > 1 ? static_cast<double>(i) / (r - 1) : 0.0;
      S(i, i) = coupling_scale * std::pow(opts.coupling_condition, -frac);
    }
    B = svd.matrixU() * S * svd.matrixV().transpose();
  } else {
    const double bn = spectral_norm(B);
    B *= bn > 0.0 ? coupling_scale / bn : 0.0;
  }

  std::normal_distribution<double> normal;
  Vec target(d2);
  for (int i = 0; i < d2; ++i) target[i] = opts.target_scale * normal(rng);

  QuadraticBilevel q;
  q.A = std::move(A);
  q.B = std::move(B);
  q.y_target = std::move(target);
  q.rho = opts.rho;
  q.box = ConstraintSet::box(d2, -box_halfwidth, box_halfwidth);
  q.mu_g = mu_g;
  q.L_g = L_g;
  return q;
}

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

ParseError::ParseError(int line, int column, std::string token, const std::string& what)
    : std::runtime_error(what), line_(line), column_(column), token_(std::move(token)) {}

Dataset load_libsvm(const std::filesystem::path& path, const LibsvmOptions& opts) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_libsvm: cannot open " + path.string());

  struct Row {
    double label;
    std::vector<std::pair<int, double>> entries;
  };
  std::vector<Row> rows;
  int max_index = 0;
  std::string line;
  int line_no = 0;

  auto fail = [&](int column, const std::string& token, const std::string& why) {
    throw ParseError(line_no, column, token,
                     path.string() + ":" + std::to_string(line_no) + ":" + std::to_string(column) +
                         ": " + why + " '" + token + "'");
  };
  auto parse_double = [](std::string_view s, double& out) {
    const char* end = s.data() + s.size();
    auto res = std::from_chars(s.data(), end, out);
    return res.ec == std::errc() && res.ptr == end && std::isfinite(out);
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::vector<std::pair<int, std::string>> tokens;  // (1-based column, text)
    for (std::size_t i = 0; i < line.size();) {
      while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
      const std::size_t start = i;
      while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
      if (i > start) tokens.emplace_back(static_cast<int>(start) + 1, line.substr(start, i - start));
    }
    if (tokens.empty()) continue;

    Row row;
    {
      std::string_view lbl = tokens[0].second;
      if (!lbl.empty() && lbl.front() == '+') lbl.remove_prefix(1);
      if (!parse_double(lbl, row.label)) fail(tokens[0].first, tokens[0].second, "bad label");
    }
    int prev = 0;
    for (std::size_t t = 1; t < tokens.size(); ++t) {
      const auto& [col, tok] = tokens[t];
      const auto colon = tok.find(':');
      if (colon == std::string::npos || colon == 0) fail(col, tok, "expected idx:val");
      int idx = 0;
      const char* ib = tok.data();
      const char* ie = tok.data() + colon;
      auto res = std::from_chars(ib, ie, idx);
      if (res.ec != std::errc() || res.ptr != ie || idx < 1) fail(col, tok, "bad feature index");
      if (idx <= prev) fail(col, tok, "feature indices must be increasing");
      double val = 0.0;
      if (!parse_double(std::string_view(tok).substr(colon + 1), val)) {
        fail(col, tok, "bad feature value");
      }
      prev = idx;
      max_index = std::max(max_index, idx);
      row.entries.emplace_back(idx, val);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("load_libsvm: no samples in " + path.string());

  Dataset ds;
  ds.name = path.stem().string();
  const int dim = std::max(max_index, opts.min_dim);
  ds.features = Mat::Zero(static_cast<Eigen::Index>(rows.size()), dim);
  ds.labels.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double raw = rows[i].label;
    const bool positive = opts.positive_label ? raw == *opts.positive_label : raw > 0.0;
    ds.labels[static_cast<Eigen::Index>(i)] = positive ? 1.0 : -1.0;
    for (const auto& [idx, val] : rows[i].entries) {
      ds.features(static_cast<Eigen::Index>(i), idx - 1) = val;
    }
  }
  return ds;
}

void write_libsvm(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_libsvm: cannot open " + path.string());
  char buf[64];
  for (int i = 0; i < ds.size(); ++i) {
    out << (ds.labels[i] > 0 ? "+1" : "-1");
    for (int j = 0; j < ds.dim(); ++j) {
      const double v = ds.features(i, j);
      if (v == 0.0) continue;
      auto res = std::to_chars(buf, buf + sizeof(buf), v);
      out << ' ' << (j + 1) << ':' << std::string_view(buf, res.ptr - buf);
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write_libsvm: write failed for " + path.string());
}

std::pair<Dataset, std::vector<bool>> flip_labels(const Dataset& ds, double fraction,
                                                  std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("flip_labels: fraction must lie in [0, 1]");
  }
  const int n = ds.size();
  const int count = static_cast<int>(std::floor(fraction * n));
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  // Partial Fisher-Yates; only the first `count` positions are needed.
  for (int i = 0; i < count; ++i) {
    std::uniform_int_distribution<int> pick(i, n - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  Dataset out = ds;
  std::vector<bool> mask(n, false);
  for (int i = 0; i < count; ++i) {
    out.labels[order[i]] = -out.labels[order[i]];
    mask[order[i]] = true;
  }
  return {std::move(out), std::move(mask)};
}

Dataset make_synthetic_binary(const SyntheticBinaryOptions& opts) {
  if (opts.n < 1 || opts.dim < 1) throw std::invalid_argument("make_synthetic_binary: n, dim >= 1");
  const int informative = std::clamp(opts.informative, 1, opts.dim);
  Rng rng(opts.seed);
  std::normal_distribution<double> normal;
  Dataset ds;
  ds.name = "synthetic-binary";
  ds.features.resize(opts.n, opts.dim);
  ds.labels.resize(opts.n);
  for (int i = 0; i < opts.n; ++i) {
    const double label = (i % 2 == 0) ? 1.0 : -1.0;
    ds.labels[i] = label;
    for (int j = 0; j < opts.dim; ++j) {
      const double mean = j < informative ? label * opts.separation : 0.0;
      ds.features(i, j) = opts.feature_scale * (mean + normal(rng));
    }
  }
  return ds;
}

// ---------------------------------------------------------------------------
// HypercleanProblem
// ---------------------------------------------------------------------------

HypercleanProblem make_hyperclean(Dataset train, Dataset val, double c_reg, double radius) {
  if (train.size() == 0 || val.size() == 0) {
    throw std::invalid_argument("make_hyperclean: empty dataset");
  }
  if (train.dim() != val.dim()) {
    throw std::invalid_argument("make_hyperclean: train and validation dimensions differ");
  }
  if (!(c_reg > 0.0)) throw std::invalid_argument("make_hyperclean: c_reg must be positive");
  if (!(radius > 0.0)) throw std::invalid_argument("make_hyperclean: radius must be positive");
  for (const Dataset* ds : {&train, &val}) {
    if (ds->features.rows() != ds->labels.size() || !ds->features.allFinite()) {
      throw std::invalid_argument("make_hyperclean: malformed dataset " + ds->name);
    }
    for (int i = 0; i < ds->size(); ++i) {
      if (ds->labels[i] != 1.0 && ds->labels[i] != -1.0) {
        throw std::invalid_argument("make_hyperclean: labels must be +-1");
      }
    }
  }
  HypercleanProblem h;
  h.train = std::move(train);
  h.val = std::move(val);
  h.c_reg = c_reg;
  h.radius = radius;
  return h;
}

BilevelProblem HypercleanProblem::problem() const {
  auto h = std::make_shared<const HypercleanProblem>(*this);
  auto margins = [](const Dataset& ds, const Vec& y) -> Vec {
    return ds.labels.cwiseProduct(ds.features * y);
  };
  auto weights = [](const Vec& x) -> Vec { return x.unaryExpr([](double t) { return sigmoid(t); }); };

  BilevelProblem p;
  p.d1 = d1();
  p.d2 = d2();
  p.upper_value = [h, margins](const Vec&, const Vec& y) {
    return margins(h->val, y).unaryExpr([](double m) { return logistic_loss(m); }).sum();
  };
  p.grad_x_f = [h](const Vec&, const Vec&) -> Vec { return Vec::Zero(h->train.size()); };
  p.grad_y_f = [h, margins](const Vec&, const Vec& y) -> Vec {
    const Vec d = margins(h->val, y).unaryExpr([](double m) { return logistic_d1(m); });
    return h->val.features.transpose() * h->val.labels.cwiseProduct(d);
  };
  p.lower_value = [h, margins, weights](const Vec& x, const Vec& y) {
    const Vec l = margins(h->train, y).unaryExpr([](double m) { return logistic_loss(m); });
    return weights(x).dot(l) + h->c_reg * y.squaredNorm();
  };
  p.grad_y_g = [h, margins, weights](const Vec& x, const Vec& y) -> Vec {
    const Vec d = margins(h->train, y).unaryExpr([](double m) { return logistic_d1(m); });
    const Vec coef = weights(x).cwiseProduct(h->train.labels).cwiseProduct(d);
    return h->train.features.transpose() * coef + 2.0 * h->c_reg * y;
  };
  p.hvp_yy = [h, margins, weights](const Vec& x, const Vec& y, const Vec& v) -> Vec {
    const Vec d2 = margins(h->train, y).unaryExpr([](double m) { return logistic_d2(m); });
    const Vec av = h->train.features * v;
    return h->train.features.transpose() * weights(x).cwiseProduct(d2).cwiseProduct(av) +
           2.0 * h->c_reg * v;
  };
  p.cross_jvp = [h, margins](const Vec& x, const Vec& y, const Vec& v) -> Vec {
    const Vec d = margins(h->train, y).unaryExpr([](double m) { return logistic_d1(m); });
    const Vec dsig = x.unaryExpr([](double t) { return sigmoid(t) * sigmoid(-t); });
    return dsig.cwiseProduct(h->train.labels).cwiseProduct(d).cwiseProduct(h->train.features * v);
  };
  p.constraint = ConstraintSet::l1_ball(d2(), radius);

  const double a_norm = spectral_norm(train.features);
  p.constants.mu_g = 2.0 * c_reg;
  p.constants.L_g = 2.0 * c_reg + 0.25 * a_norm * a_norm;
  p.constants.C_gxy = 0.25 * a_norm;
  p.constants.C_fy = val.features.rowwise().norm().sum();
  return p;
}

double accuracy(const Dataset& ds, const Vec& y) {
  if (ds.size() == 0) return 0.0;
  const Vec scores = ds.features * y;
  int correct = 0;
  for (int i = 0; i < ds.size(); ++i) {
    const double pred = scores[i] > 0.0 ? 1.0 : -1.0;
    correct += pred == ds.labels[i];
  }
  return static_cast<double>(correct) / ds.size();
}

}  // namespace dmlcbo
