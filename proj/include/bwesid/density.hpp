#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "bwesid/types.hpp"

namespace bwesid {

// Full-covariance Gaussian mixture.
struct Gmm {
  Vector weights;                   // M, on the simplex
  RowMatrix means;                  // M x D
  std::vector<Matrix> covariances;  // M of D x D, symmetric positive definite

  int components() const { return static_cast<int>(weights.size()); }
  int dimension() const { return static_cast<int>(means.cols()); }

  // Throws if shapes disagree, weights leave the simplex, or a covariance is
  // asymmetric or not positive definite.
  void Validate() const;
};

struct EmConfig {
  int components = 32;
  int max_iterations = 100;
  double tolerance = 1e-6;  // relative change of the mean log-likelihood
  std::uint64_t seed = 20020523;
  // Covariance eigenvalues are floored at this fraction of the mean per-dimension
  // data variance.
  double covariance_floor = 1e-6;
  int kmeans_iterations = 10;
};

struct EmResult {
  Gmm model;
  // Mean per-row log-likelihood of the data under the parameters entering each
  // E-step, the last entry being the returned model.
  std::vector<double> log_likelihood;
  bool converged = false;
};

// Trains a mixture by EM from a k-means++ / Lloyd initialisation. Requires at
// least 10 * D rows and finite data.
EmResult EmFit(const RowMatrix& data, const EmConfig& config);

double GmmLogPdf(const Gmm& model, std::span<const double> x);
// Per-row log densities of a data matrix.
Vector GmmLogPdfRows(const Gmm& model, const RowMatrix& data);

// Partition of the mixture dimensions into observed (x) and estimated (y) blocks.
struct BlockSplit {
  std::vector<int> x_dims;
  std::vector<int> y_dims;

  // Disjoint blocks that together cover every dimension.
  void Validate(int dimension) const;
  // Disjoint blocks; dimensions in neither block are marginalised out.
  void ValidatePartial(int dimension) const;
};

// p(y | x) of a joint mixture (after marginalising dimensions the split does
// not mention): again a mixture, with responsibilities
// h_m(x) and per-component affine regressions.
class ConditionalMixture {
 public:
  ConditionalMixture(const Gmm& model, BlockSplit split);

  struct Posterior {
    Vector responsibilities;         // M
    RowMatrix means;                 // M x |y|
    std::vector<Matrix> covariances; // M of |y| x |y|, independent of x
  };

  Posterior PosteriorAt(std::span<const double> x) const;
  // E[y | x].
  Vector Mmse(std::span<const double> x) const;
  // Minimiser of E[over * (e - y)_+ + under * (y - e)_+ | x] for scalar y, i.e.
  // the under / (over + under) quantile of p(y | x).
  double AsymmetricEstimate(std::span<const double> x, double over_penalty,
                            double under_penalty) const;
  double Quantile(std::span<const double> x, double q) const;

  const BlockSplit& split() const { return split_; }

 private:
  struct Component {
    double log_weight = 0.0;
    Vector mean_x, mean_y;
    Eigen::LLT<Matrix> chol_xx;
    double log_norm_x = 0.0;  // -0.5 (|x| log 2 pi + log det Sigma_xx)
    Matrix regression;        // Sigma_yx Sigma_xx^-1
    Matrix residual_cov;      // Sigma_yy - Sigma_yx Sigma_xx^-1 Sigma_xy
  };
  Vector Responsibilities(const Vector& x) const;

  BlockSplit split_;
  std::vector<Component> components_;
};

Vector ConditionalMmse(const Gmm& model, const BlockSplit& split, std::span<const double> x);
double ConditionalQuantileEstimate(const Gmm& model, const BlockSplit& split,
                                   std::span<const double> x, double over_penalty,
                                   double under_penalty);

// Quantile of a one-dimensional Gaussian mixture by bisection on its CDF.
double MixtureQuantile(std::span<const double> weights, std::span<const double> means,
                       std::span<const double> stddevs, double q);

// "GMM1" binary format: magic, D, M (u32), weights, means, covariances as
// little-endian IEEE-754 doubles in row-major order, then an FNV-1a 64-bit
// checksum of everything before it.
std::vector<std::uint8_t> EncodeGmm(const Gmm& model);
Gmm DecodeGmm(std::vector<std::uint8_t> bytes);
void WriteGmm(const Gmm& model, std::ostream& out);
Gmm ReadGmm(std::istream& in);
void SaveGmm(const Gmm& model, const std::filesystem::path& path);
Gmm LoadGmm(const std::filesystem::path& path);

}  // namespace bwesid
