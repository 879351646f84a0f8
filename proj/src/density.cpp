#include "bwesid/density.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include "bwesid/error.hpp"
#include "bwesid/serialize.hpp"

namespace bwesid {
namespace {

constexpr double kLog2Pi = 1.8378770664093453;  // log(2 pi)
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double Uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double LogSumExp(const double* values, Eigen::Index n) {
  double peak = kNegInf;
  for (Eigen::Index i = 0; i < n; ++i) peak = std::max(peak, values[i]);
  if (peak == kNegInf) return kNegInf;
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) sum += std::exp(values[i] - peak);
  return peak + std::log(sum);
}

Matrix Symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

// Closest matrix (in the Gaussian likelihood sense) with every eigenvalue >= floor.
Matrix FloorEigenvalues(const Matrix& cov, double floor) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(Symmetrize(cov));
  Vector values = eig.eigenvalues();
  if (values.minCoeff() >= floor) return Symmetrize(cov);
  for (Eigen::Index i = 0; i < values.size(); ++i) values(i) = std::max(values(i), floor);
  return Symmetrize(eig.eigenvectors() * values.asDiagonal() * eig.eigenvectors().transpose());
}

struct CachedComponent {
  Eigen::LLT<Matrix> chol;
  double log_const = 0.0;  // log w - 0.5 (D log 2 pi + log det)
};

std::vector<CachedComponent> Prepare(const Gmm& model) {
  std::vector<CachedComponent> out(static_cast<std::size_t>(model.components()));
  const double d = model.dimension();
  for (int m = 0; m < model.components(); ++m) {
    auto& c = out[static_cast<std::size_t>(m)];
    c.chol.compute(model.covariances[static_cast<std::size_t>(m)]);
    if (c.chol.info() != Eigen::Success) {
      Fail(ErrorKind::kNumerical, "covariance " + std::to_string(m) + " is not positive definite");
    }
    const double log_det = 2.0 * c.chol.matrixLLT().diagonal().array().log().sum();
    const double w = model.weights(m);
    c.log_const = (w > 0 ? std::log(w) : kNegInf) - 0.5 * (d * kLog2Pi + log_det);
  }
  return out;
}

// T x M matrix of log(w_m N(x_t; mu_m, Sigma_m)).
Matrix JointLogDensities(const Gmm& model, const std::vector<CachedComponent>& cache,
                         const RowMatrix& data) {
  const Eigen::Index t_count = data.rows();
  Matrix out(t_count, model.components());
  for (int m = 0; m < model.components(); ++m) {
    Matrix diff = (data.rowwise() - model.means.row(m)).transpose();
    cache[static_cast<std::size_t>(m)].chol.matrixL().solveInPlace(diff);
    out.col(m) = cache[static_cast<std::size_t>(m)].log_const -
                 0.5 * diff.colwise().squaredNorm().transpose().array();
  }
  return out;
}

// k-means++ seeding followed by a few Lloyd iterations; returns labels.
std::vector<int> KMeans(const RowMatrix& data, int k, int iterations, std::mt19937_64& rng) {
  const Eigen::Index t_count = data.rows();
  RowMatrix centres(k, data.cols());
  std::vector<double> nearest(static_cast<std::size_t>(t_count), std::numeric_limits<double>::infinity());

  auto first = static_cast<Eigen::Index>(Uniform01(rng) * static_cast<double>(t_count));
  centres.row(0) = data.row(std::min(first, t_count - 1));
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (Eigen::Index t = 0; t < t_count; ++t) {
      const double d2 = (data.row(t) - centres.row(c - 1)).squaredNorm();
      nearest[static_cast<std::size_t>(t)] = std::min(nearest[static_cast<std::size_t>(t)], d2);
      total += nearest[static_cast<std::size_t>(t)];
    }
    Eigen::Index pick = t_count - 1;
    if (total > 0.0) {
      double target = Uniform01(rng) * total;
      for (Eigen::Index t = 0; t < t_count; ++t) {
        target -= nearest[static_cast<std::size_t>(t)];
        if (target < 0.0) {
          pick = t;
          break;
        }
      }
    } else {
      pick = std::min(static_cast<Eigen::Index>(Uniform01(rng) * static_cast<double>(t_count)), t_count - 1);
    }
    centres.row(c) = data.row(pick);
  }

  std::vector<int> labels(static_cast<std::size_t>(t_count), 0);
  for (int iter = 0; iter <= iterations; ++iter) {
    for (Eigen::Index t = 0; t < t_count; ++t) {
      Eigen::Index best = 0;
      (centres.rowwise() - data.row(t)).rowwise().squaredNorm().minCoeff(&best);
      labels[static_cast<std::size_t>(t)] = static_cast<int>(best);
    }
    if (iter == iterations) break;
    RowMatrix sums = RowMatrix::Zero(k, data.cols());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index t = 0; t < t_count; ++t) {
      sums.row(labels[static_cast<std::size_t>(t)]) += data.row(t);
      ++counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(t)])];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) centres.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
    }
  }
  return labels;
}

}  // namespace

void Gmm::Validate() const {
  const int m_count = components();
  const int d = dimension();
  Require(m_count >= 1 && d >= 1, "mixture needs at least one component and dimension");
  Require(means.rows() == m_count, "mixture means do not match the weight count");
  Require(static_cast<int>(covariances.size()) == m_count, "mixture covariance count mismatch");
  Require((weights.array() >= 0.0).all(), "mixture weights must be non-negative");
  Require(std::abs(weights.sum() - 1.0) <= 1e-12, "mixture weights must sum to one");
  for (const Matrix& c : covariances) {
    Require(c.rows() == d && c.cols() == d, "covariance shape mismatch");
    Require((c - c.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, c.cwiseAbs().maxCoeff()),
            "covariance is not symmetric");
    if (Eigen::LLT<Matrix>(c).info() != Eigen::Success) {
      Fail(ErrorKind::kNumerical, "covariance is not positive definite");
    }
  }
}

EmResult EmFit(const RowMatrix& data, const EmConfig& config) {
  const Eigen::Index t_count = data.rows();
  const Eigen::Index d = data.cols();
  Require(config.components >= 1, "need at least one mixture component");
  Require(d >= 1, "data has no columns");
  if (t_count < 10 * d) {
    Fail(ErrorKind::kInsufficientData, "EM needs at least 10*D = " + std::to_string(10 * d) +
                                           " rows, got " + std::to_string(t_count));
  }
  Require(t_count >= config.components, "fewer rows than mixture components");
  if (!data.allFinite()) Fail(ErrorKind::kInvalidArgument, "training data holds NaN or Inf");

  const Vector global_mean = data.colwise().mean().transpose();
  const RowMatrix centred = data.rowwise() - global_mean.transpose();
  const Matrix global_cov = (centred.transpose() * centred) / static_cast<double>(t_count);
  const double mean_variance = global_cov.diagonal().mean();
  const double floor = config.covariance_floor * (mean_variance > 0 ? mean_variance : 1.0);

  std::mt19937_64 rng(config.seed);
  const int m_count = config.components;
  Gmm model;
  model.weights.resize(m_count);
  model.means.resize(m_count, d);
  model.covariances.assign(static_cast<std::size_t>(m_count), Matrix());

  const std::vector<int> labels = KMeans(data, m_count, config.kmeans_iterations, rng);
  for (int m = 0; m < m_count; ++m) {
    std::vector<Eigen::Index> rows;
    for (Eigen::Index t = 0; t < t_count; ++t) {
      if (labels[static_cast<std::size_t>(t)] == m) rows.push_back(t);
    }
    if (rows.size() < 2) {
      model.weights(m) = 1.0;
      if (rows.empty()) {
        model.means.row(m) = global_mean.transpose();
      } else {
        model.means.row(m) = data.row(rows.front());
      }
      model.covariances[static_cast<std::size_t>(m)] = FloorEigenvalues(global_cov, floor);
      continue;
    }
    RowMatrix members(static_cast<Eigen::Index>(rows.size()), d);
    for (std::size_t i = 0; i < rows.size(); ++i) members.row(static_cast<Eigen::Index>(i)) = data.row(rows[i]);
    const Vector mu = members.colwise().mean().transpose();
    const RowMatrix c = members.rowwise() - mu.transpose();
    model.weights(m) = static_cast<double>(rows.size());
    model.means.row(m) = mu.transpose();
    model.covariances[static_cast<std::size_t>(m)] =
        FloorEigenvalues((c.transpose() * c) / static_cast<double>(rows.size()), floor);
  }
  model.weights /= model.weights.sum();

  EmResult result;
  for (int iter = 0; iter <= config.max_iterations; ++iter) {
    const Matrix log_joint = JointLogDensities(model, Prepare(model), data);
    Vector row_ll(t_count);
    Matrix resp(t_count, m_count);
    for (Eigen::Index t = 0; t < t_count; ++t) {
      const Eigen::RowVectorXd row = log_joint.row(t);
      row_ll(t) = LogSumExp(row.data(), m_count);
      resp.row(t) = (row.array() - row_ll(t)).exp();
    }
    const double ll = row_ll.mean();
    result.log_likelihood.push_back(ll);
    const std::size_t n = result.log_likelihood.size();
    if (n >= 2) {
      const double gain = ll - result.log_likelihood[n - 2];
      if (gain < config.tolerance * std::max(1.0, std::abs(ll))) {
        result.converged = true;
        break;
      }
    }
    if (iter == config.max_iterations) break;

    // M-step.
    const Vector counts = resp.colwise().sum().transpose();
    for (int m = 0; m < m_count; ++m) {
      const double nk = counts(m);
      model.weights(m) = nk / static_cast<double>(t_count);
      if (nk < 1e-10) continue;  // dead component: keep its shape, weight ~ 0
      const Vector mu = (data.transpose() * resp.col(m)) / nk;
      const RowMatrix c = data.rowwise() - mu.transpose();
      const Matrix weighted = c.array().colwise() * resp.col(m).array();
      model.means.row(m) = mu.transpose();
      model.covariances[static_cast<std::size_t>(m)] =
          FloorEigenvalues((weighted.transpose() * c) / nk, floor);
    }
    model.weights /= model.weights.sum();
  }
  result.model = std::move(model);
  return result;
}

Vector GmmLogPdfRows(const Gmm& model, const RowMatrix& data) {
  Require(data.cols() == model.dimension(), "dimension mismatch between data and mixture");
  const Matrix log_joint = JointLogDensities(model, Prepare(model), data);
  Vector out(data.rows());
  for (Eigen::Index t = 0; t < data.rows(); ++t) {
    const Eigen::RowVectorXd row = log_joint.row(t);
    out(t) = LogSumExp(row.data(), row.size());
  }
  return out;
}

double GmmLogPdf(const Gmm& model, std::span<const double> x) {
  Require(static_cast<int>(x.size()) == model.dimension(), "dimension mismatch between point and mixture");
  RowMatrix row = Eigen::Map<const Eigen::RowVectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  return GmmLogPdfRows(model, row)(0);
}

void BlockSplit::ValidatePartial(int dimension) const {
  Require(!x_dims.empty() && !y_dims.empty(), "both blocks of a split must be non-empty");
  std::vector<int> seen(static_cast<std::size_t>(std::max(dimension, 0)), 0);
  for (const auto* block : {&x_dims, &y_dims}) {
    for (int i : *block) {
      Require(i >= 0 && i < dimension, "split index out of range");
      Require(seen[static_cast<std::size_t>(i)]++ == 0, "split blocks overlap");
    }
  }
}

void BlockSplit::Validate(int dimension) const {
  ValidatePartial(dimension);
  Require(x_dims.size() + y_dims.size() == static_cast<std::size_t>(dimension),
          "split blocks must cover every dimension");
}

ConditionalMixture::ConditionalMixture(const Gmm& model, BlockSplit split)
    : split_(std::move(split)) {
  split_.ValidatePartial(model.dimension());
  const auto nx = static_cast<Eigen::Index>(split_.x_dims.size());
  const auto ny = static_cast<Eigen::Index>(split_.y_dims.size());
  for (int m = 0; m < model.components(); ++m) {
    const Matrix& cov = model.covariances[static_cast<std::size_t>(m)];
    Component c;
    c.log_weight = model.weights(m) > 0 ? std::log(model.weights(m)) : kNegInf;
    c.mean_x.resize(nx);
    c.mean_y.resize(ny);
    Matrix sxx(nx, nx), syx(ny, nx), syy(ny, ny);
    for (Eigen::Index i = 0; i < nx; ++i) {
      c.mean_x(i) = model.means(m, split_.x_dims[static_cast<std::size_t>(i)]);
      for (Eigen::Index j = 0; j < nx; ++j) {
        sxx(i, j) = cov(split_.x_dims[static_cast<std::size_t>(i)], split_.x_dims[static_cast<std::size_t>(j)]);
      }
    }
    for (Eigen::Index i = 0; i < ny; ++i) {
      c.mean_y(i) = model.means(m, split_.y_dims[static_cast<std::size_t>(i)]);
      for (Eigen::Index j = 0; j < nx; ++j) {
        syx(i, j) = cov(split_.y_dims[static_cast<std::size_t>(i)], split_.x_dims[static_cast<std::size_t>(j)]);
      }
      for (Eigen::Index j = 0; j < ny; ++j) {
        syy(i, j) = cov(split_.y_dims[static_cast<std::size_t>(i)], split_.y_dims[static_cast<std::size_t>(j)]);
      }
    }
    c.chol_xx.compute(sxx);
    if (c.chol_xx.info() != Eigen::Success) {
      Fail(ErrorKind::kNumerical, "observed-block covariance is singular");
    }
    const double log_det = 2.0 * c.chol_xx.matrixLLT().diagonal().array().log().sum();
    c.log_norm_x = -0.5 * (static_cast<double>(nx) * kLog2Pi + log_det);
    c.regression = c.chol_xx.solve(syx.transpose()).transpose();
    c.residual_cov = Symmetrize(syy - c.regression * syx.transpose());
    components_.push_back(std::move(c));
  }
}

Vector ConditionalMixture::Responsibilities(const Vector& x) const {
  std::vector<double> log_h(components_.size());
  for (std::size_t m = 0; m < components_.size(); ++m) {
    const Component& c = components_[m];
    const Vector z = c.chol_xx.matrixL().solve(x - c.mean_x);
    log_h[m] = c.log_weight + c.log_norm_x - 0.5 * z.squaredNorm();
  }
  const double norm = LogSumExp(log_h.data(), static_cast<Eigen::Index>(log_h.size()));
  Vector h(static_cast<Eigen::Index>(components_.size()));
  for (std::size_t m = 0; m < components_.size(); ++m) h(static_cast<Eigen::Index>(m)) = std::exp(log_h[m] - norm);
  return h;
}

ConditionalMixture::Posterior ConditionalMixture::PosteriorAt(std::span<const double> x) const {
  Require(x.size() == split_.x_dims.size(), "observed vector has the wrong dimension");
  const Vector xv = Eigen::Map<const Vector>(x.data(), static_cast<Eigen::Index>(x.size()));
  Posterior post;
  post.responsibilities = Responsibilities(xv);
  post.means.resize(static_cast<Eigen::Index>(components_.size()), static_cast<Eigen::Index>(split_.y_dims.size()));
  for (std::size_t m = 0; m < components_.size(); ++m) {
    const Component& c = components_[m];
    post.means.row(static_cast<Eigen::Index>(m)) = (c.mean_y + c.regression * (xv - c.mean_x)).transpose();
    post.covariances.push_back(c.residual_cov);
  }
  return post;
}

Vector ConditionalMixture::Mmse(std::span<const double> x) const {
  const Posterior post = PosteriorAt(x);
  return post.means.transpose() * post.responsibilities;
}

double ConditionalMixture::Quantile(std::span<const double> x, double q) const {
  Require(split_.y_dims.size() == 1, "quantile estimation needs a scalar target");
  Require(q > 0.0 && q < 1.0, "quantile level must lie in (0, 1)");
  const Posterior post = PosteriorAt(x);
  const auto m_count = static_cast<std::size_t>(post.responsibilities.size());
  std::vector<double> w(m_count), mu(m_count), sd(m_count);
  for (std::size_t m = 0; m < m_count; ++m) {
    w[m] = post.responsibilities(static_cast<Eigen::Index>(m));
    mu[m] = post.means(static_cast<Eigen::Index>(m), 0);
    sd[m] = std::sqrt(std::max(post.covariances[m](0, 0), 0.0));
  }
  return MixtureQuantile(w, mu, sd, q);
}

double ConditionalMixture::AsymmetricEstimate(std::span<const double> x, double over_penalty,
                                              double under_penalty) const {
  Require(over_penalty > 0 && under_penalty > 0, "cost penalties must be positive");
  return Quantile(x, under_penalty / (over_penalty + under_penalty));
}

Vector ConditionalMmse(const Gmm& model, const BlockSplit& split, std::span<const double> x) {
  return ConditionalMixture(model, split).Mmse(x);
}

double ConditionalQuantileEstimate(const Gmm& model, const BlockSplit& split,
                                   std::span<const double> x, double over_penalty,
                                   double under_penalty) {
  return ConditionalMixture(model, split).AsymmetricEstimate(x, over_penalty, under_penalty);
}

double MixtureQuantile(std::span<const double> weights, std::span<const double> means,
                       std::span<const double> stddevs, double q) {
  Require(weights.size() == means.size() && means.size() == stddevs.size() && !weights.empty(),
          "mixture parameter lengths differ");
  Require(q > 0.0 && q < 1.0, "quantile level must lie in (0, 1)");
  double total = 0.0;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t m = 0; m < weights.size(); ++m) {
    if (!(weights[m] > 0.0)) continue;
    total += weights[m];
    lo = std::min(lo, means[m] - 40.0 * stddevs[m]);
    hi = std::max(hi, means[m] + 40.0 * stddevs[m]);
  }
  Require(total > 0.0, "mixture has no mass");
  if (hi - lo <= 0.0) return lo;  // all mass on one point

  auto cdf = [&](double e) {
    double acc = 0.0;
    for (std::size_t m = 0; m < weights.size(); ++m) {
      if (!(weights[m] > 0.0)) continue;
      if (stddevs[m] > 0.0) {
        acc += weights[m] * 0.5 * std::erfc(-(e - means[m]) / (stddevs[m] * std::numbers::sqrt2));
      } else if (e >= means[m]) {
        acc += weights[m];
      }
    }
    return acc / total;
  };
  for (int i = 0; i < 200 && hi - lo > 1e-13 * std::max(1.0, std::abs(lo) + std::abs(hi)); ++i) {
    const double mid = 0.5 * (lo + hi);
    (cdf(mid) < q ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<std::uint8_t> EncodeGmm(const Gmm& model) {
  model.Validate();
  ByteWriter w;
  w.Magic("GMM1");
  w.U32(static_cast<std::uint32_t>(model.dimension()));
  w.U32(static_cast<std::uint32_t>(model.components()));
  for (int m = 0; m < model.components(); ++m) w.F64(model.weights(m));
  for (int m = 0; m < model.components(); ++m) {
    for (int j = 0; j < model.dimension(); ++j) w.F64(model.means(m, j));
  }
  for (const Matrix& c : model.covariances) {
    for (Eigen::Index i = 0; i < c.rows(); ++i) {
      for (Eigen::Index j = 0; j < c.cols(); ++j) w.F64(c(i, j));
    }
  }
  w.Checksum();
  return w.bytes();
}

Gmm DecodeGmm(std::vector<std::uint8_t> bytes) {
  ByteReader r(std::move(bytes));
  r.ExpectMagic("GMM1");
  const std::uint32_t d = r.U32();
  const std::uint32_t m_count = r.U32();
  if (d == 0 || m_count == 0 || d > 4096 || m_count > 65536) {
    Fail(ErrorKind::kMalformedData, "implausible mixture shape in GMM1 data");
  }
  Gmm model;
  model.weights.resize(m_count);
  model.means.resize(m_count, d);
  for (std::uint32_t m = 0; m < m_count; ++m) model.weights(m) = r.F64();
  for (std::uint32_t m = 0; m < m_count; ++m) {
    for (std::uint32_t j = 0; j < d; ++j) model.means(m, j) = r.F64();
  }
  for (std::uint32_t m = 0; m < m_count; ++m) {
    Matrix c(d, d);
    for (std::uint32_t i = 0; i < d; ++i) {
      for (std::uint32_t j = 0; j < d; ++j) c(i, j) = r.F64();
    }
    model.covariances.push_back(std::move(c));
  }
  r.VerifyChecksum();
  if (!r.at_end()) Fail(ErrorKind::kMalformedData, "trailing bytes after GMM1 checksum");
  model.Validate();
  return model;
}

void WriteGmm(const Gmm& model, std::ostream& out) {
  const auto bytes = EncodeGmm(model);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) Fail(ErrorKind::kIo, "failed to write GMM1 data");
}

Gmm ReadGmm(std::istream& in) {
  std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return DecodeGmm(std::move(bytes));
}

void SaveGmm(const Gmm& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) Fail(ErrorKind::kIo, "cannot create " + path.string());
  WriteGmm(model, out);
}

Gmm LoadGmm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kIo, "cannot open " + path.string());
  return ReadGmm(in);
}

}  // namespace bwesid
