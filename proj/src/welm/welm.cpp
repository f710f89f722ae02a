#include "focusclf/welm/welm.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "focusclf/cnn/checkpoint.hpp"
#include "focusclf/errors.hpp"

namespace focusclf::welm {

using nlohmann::json;

namespace {

void check_rows(const Matrix& x, std::span<const int> labels) {
  if (x.size() < 2) throw InputError("wELM needs at least two training samples");
  if (labels.size() != x.size()) throw InputError("wELM: label count does not match sample count");
  const std::size_t d = x[0].size();
  if (d == 0) throw InputError("wELM: zero-dimensional features");
  bool pos = false, neg = false;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i].size() != d) throw InputError("wELM: feature rows have differing dimensions");
    if (labels[i] == 1) pos = true;
    else if (labels[i] == 0) neg = true;
    else throw InputError("wELM: training labels must be 0 or 1");
  }
  if (!pos || !neg) throw InputError("wELM: both classes must be present in training data");
}

double kernel_value(Kernel k, std::span<const double> u, std::span<const double> v, double gamma) {
  return k == Kernel::Rbf ? rbf_kernel(u, v, gamma) : linear_kernel(u, v);
}

void check_hyper(double C, double gamma, Kernel kernel) {
  if (!(C > 0.0) || !std::isfinite(C)) throw ConfigError("wELM: C must be positive and finite");
  if (kernel == Kernel::Rbf && (!(gamma > 0.0) || !std::isfinite(gamma))) {
    throw ConfigError("wELM: gamma must be positive and finite");
  }
}

TensorF to_tensor(const Matrix& m) {
  const std::size_t n = m.size(), d = m[0].size();
  TensorF t({n, d});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) t[i * d + j] = static_cast<float>(m[i][j]);
  return t;
}

TensorF to_tensor(std::span<const double> v) {
  TensorF t({v.size()});
  for (std::size_t i = 0; i < v.size(); ++i) t[i] = static_cast<float>(v[i]);
  return t;
}

std::vector<double> to_vector(const TensorF& t) { return std::vector<double>(t.data().begin(), t.data().end()); }

}  // namespace

std::string to_string(Kernel kernel) { return kernel == Kernel::Rbf ? "rbf" : "linear"; }

Kernel parse_kernel(const std::string& text) {
  if (text == "rbf") return Kernel::Rbf;
  if (text == "linear") return Kernel::Linear;
  throw InputError("unknown kernel '" + text + "' (expected rbf or linear)");
}

double rbf_kernel(std::span<const double> u, std::span<const double> v, double gamma) {
  if (u.size() != v.size()) {
    throw InputError(fmt::format("kernel: dimension mismatch ({} vs {})", u.size(), v.size()));
  }
  double d2 = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) d2 += (u[i] - v[i]) * (u[i] - v[i]);
  return std::exp(-gamma * d2);
}

double linear_kernel(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw InputError(fmt::format("kernel: dimension mismatch ({} vs {})", u.size(), v.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return s;
}

Eigen::MatrixXd squared_distances(const Matrix& x) {
  const std::size_t n = x.size();
  Eigen::MatrixXd d(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    d(i, i) = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < x[i].size(); ++k) s += (x[i][k] - x[j][k]) * (x[i][k] - x[j][k]);
      d(i, j) = d(j, i) = s;
    }
  }
  return d;
}

Eigen::MatrixXd kernel_matrix(const Matrix& x, Kernel kernel, double gamma) {
  const std::size_t n = x.size();
  Eigen::MatrixXd k(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) k(i, j) = k(j, i) = kernel_value(kernel, x[i], x[j], gamma);
  return k;
}

std::vector<double> Standardizer::apply(std::span<const double> row) const {
  if (row.size() != mean.size()) {
    throw InputError(fmt::format("feature dimension {} does not match model dimension {}", row.size(), mean.size()));
  }
  std::vector<double> out(row.size());
  for (std::size_t j = 0; j < row.size(); ++j) out[j] = (row[j] - mean[j]) / scale[j];
  return out;
}

Matrix Standardizer::apply(const Matrix& rows) const {
  Matrix out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(apply(r));
  return out;
}

Standardizer fit_standardizer(const Matrix& x) {
  if (x.empty()) throw InputError("cannot standardize an empty feature matrix");
  const std::size_t d = x[0].size();
  Standardizer s{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
  for (const auto& r : x)
    for (std::size_t j = 0; j < d; ++j) s.mean[j] += r[j];
  for (double& m : s.mean) m /= static_cast<double>(x.size());
  for (const auto& r : x)
    for (std::size_t j = 0; j < d; ++j) s.scale[j] += (r[j] - s.mean[j]) * (r[j] - s.mean[j]);
  for (double& v : s.scale) {
    v = std::sqrt(v / static_cast<double>(x.size()));
    if (!(v > 1e-12)) v = 1.0;
  }
  return s;
}

std::vector<double> inverse_class_weights(std::span<const int> labels) {
  std::size_t counts[2] = {0, 0};
  for (int y : labels) {
    if (y != 0 && y != 1) throw InputError("class weights need 0/1 labels");
    ++counts[y];
  }
  std::vector<double> w;
  w.reserve(labels.size());
  for (int y : labels) w.push_back(1.0 / static_cast<double>(counts[y]));
  return w;
}

Eigen::MatrixXd target_matrix(std::span<const int> labels) {
  Eigen::MatrixXd t = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(labels.size()), 2, -1.0);
  for (std::size_t i = 0; i < labels.size(); ++i) t(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  return t;
}

KernelModel welm_fit_kernel(const Matrix& x, const Eigen::MatrixXd& omega, std::span<const int> labels,
                            const WelmOptions& options) {
  check_rows(x, labels);
  check_hyper(options.C, options.gamma, options.kernel);
  const auto n = static_cast<Eigen::Index>(x.size());
  if (omega.rows() != n || omega.cols() != n) throw ShapeError("wELM: kernel matrix does not match sample count");
  KernelModel m;
  m.kernel = options.kernel;
  m.C = options.C;
  m.gamma = options.gamma;
  m.train = x;
  m.weights = options.weights.empty() ? inverse_class_weights(labels) : options.weights;
  if (m.weights.size() != x.size()) throw InputError("wELM: weight count does not match sample count");
  for (double w : m.weights)
    if (!(w > 0.0) || !std::isfinite(w)) throw ConfigError("wELM: sample weights must be positive");
  const Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(m.weights.data(), n);
  Eigen::MatrixXd system = w.asDiagonal() * omega;
  system.diagonal().array() += 1.0 / options.C;
  const Eigen::MatrixXd rhs = w.asDiagonal() * target_matrix(labels);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(system);
  m.rcond = lu.rcond();
  if (!std::isfinite(m.rcond) || m.rcond < 1e-15) {
    throw NumericError(fmt::format("wELM system is numerically singular (reciprocal condition {:.3e}, C={}, gamma={})",
                                   m.rcond, options.C, options.gamma));
  }
  m.coefficients = lu.solve(rhs);
  if (!m.coefficients.allFinite()) throw NumericError("wELM solve produced non-finite coefficients");
  return m;
}

KernelModel welm_fit(const Matrix& x, std::span<const int> labels, const WelmOptions& options) {
  check_rows(x, labels);
  std::optional<Standardizer> standardizer;
  if (options.standardize) standardizer = fit_standardizer(x);
  const Matrix rows = standardizer ? standardizer->apply(x) : x;
  check_hyper(options.C, options.gamma, options.kernel);
  KernelModel m = welm_fit_kernel(rows, kernel_matrix(rows, options.kernel, options.gamma), labels, options);
  m.standardizer = std::move(standardizer);
  return m;
}

KernelModel kelm_fit(const Matrix& x, std::span<const int> labels, double C, double gamma, Kernel kernel,
                     bool standardize) {
  check_rows(x, labels);
  check_hyper(C, gamma, kernel);
  KernelModel m;
  m.kernel = kernel;
  m.C = C;
  m.gamma = gamma;
  if (standardize) m.standardizer = fit_standardizer(x);
  m.train = m.standardizer ? m.standardizer->apply(x) : x;
  m.weights.assign(x.size(), 1.0);
  Eigen::MatrixXd system = kernel_matrix(m.train, kernel, gamma);
  system.diagonal().array() += 1.0 / C;
  Eigen::LLT<Eigen::MatrixXd> llt(system);
  if (llt.info() != Eigen::Success) throw NumericError("kernel ELM system is not positive definite");
  m.rcond = llt.rcond();
  m.coefficients = llt.solve(target_matrix(labels));
  return m;
}

WelmPrediction welm_predict(const KernelModel& model, std::span<const double> x) {
  if (x.size() != model.dimension()) {
    throw InputError(fmt::format("wELM: feature dimension {} does not match model dimension {}", x.size(),
                                 model.dimension()));
  }
  std::vector<double> scaled;
  if (model.standardizer) {
    scaled = model.standardizer->apply(x);
    x = scaled;
  }
  WelmPrediction p;
  for (std::size_t i = 0; i < model.train.size(); ++i) {
    const double k = kernel_value(model.kernel, x, model.train[i], model.gamma);
    p.scores[0] += k * model.coefficients(static_cast<Eigen::Index>(i), 0);
    p.scores[1] += k * model.coefficients(static_cast<Eigen::Index>(i), 1);
  }
  p.decision = p.scores[1] > p.scores[0] ? 1 : 0;
  return p;
}

std::vector<WelmPrediction> welm_predict(const KernelModel& model, const Matrix& x) {
  std::vector<WelmPrediction> out;
  out.reserve(x.size());
  for (const auto& row : x) out.push_back(welm_predict(model, row));
  return out;
}

eval::MetricsReport evaluate_predictions(std::span<const WelmPrediction> predictions, std::span<const int> labels) {
  std::vector<int> decisions;
  std::vector<double> scores;
  for (const auto& p : predictions) {
    decisions.push_back(p.decision);
    scores.push_back(p.scores[1]);
  }
  auto report = eval::confusion_metrics(decisions, labels);
  report.auc = eval::roc_auc(scores, labels);
  report.auc_defined = !std::isnan(report.auc);
  return report;
}

void save_kernel_model(const std::filesystem::path& path, const KernelModel& m) {
  if (m.train.empty()) throw StateError("cannot save an unfitted kernel model");
  cnn::Container c;
  c.kind = "WELM";
  c.config = json{{"kernel", to_string(m.kernel)}, {"C", m.C}, {"gamma", m.gamma}, {"rcond", m.rcond},
                  {"standardized", m.standardizer.has_value()}};
  c.tensors.emplace_back("train", to_tensor(m.train));
  Matrix coef(m.train.size(), std::vector<double>(2));
  for (std::size_t i = 0; i < coef.size(); ++i)
    for (std::size_t k = 0; k < 2; ++k) coef[i][k] = m.coefficients(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
  c.tensors.emplace_back("coefficients", to_tensor(coef));
  c.tensors.emplace_back("weights", to_tensor(m.weights));
  if (m.standardizer) {
    c.tensors.emplace_back("mean", to_tensor(m.standardizer->mean));
    c.tensors.emplace_back("scale", to_tensor(m.standardizer->scale));
  }
  cnn::write_container(path, c);
}

KernelModel load_kernel_model(const std::filesystem::path& path) {
  const cnn::Container c = cnn::read_container(path, "WELM");
  KernelModel m;
  try {
    m.kernel = parse_kernel(c.config.at("kernel").get<std::string>());
    m.C = c.config.at("C").get<double>();
    m.gamma = c.config.at("gamma").get<double>();
    m.rcond = c.config.value("rcond", 0.0);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  const TensorF& train = c.tensor("train");
  const TensorF& coef = c.tensor("coefficients");
  if (train.rank() != 2 || coef.rank() != 2 || coef.extent(0) != train.extent(0) || coef.extent(1) != 2) {
    throw FormatError(path.string() + ": inconsistent kernel model tensors");
  }
  const std::size_t n = train.extent(0), d = train.extent(1);
  m.train.assign(n, std::vector<double>(d));
  m.coefficients.resize(static_cast<Eigen::Index>(n), 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) m.train[i][j] = train[i * d + j];
    for (std::size_t k = 0; k < 2; ++k) m.coefficients(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = coef[i * 2 + k];
  }
  m.weights = to_vector(c.tensor("weights"));
  if (c.config.value("standardized", false)) m.standardizer = Standardizer{to_vector(c.tensor("mean")), to_vector(c.tensor("scale"))};
  return m;
}

}  // namespace focusclf::welm
