#include "bwesid/speaker_id.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "bwesid/error.hpp"
#include "bwesid/serialize.hpp"

namespace bwesid {
namespace {

constexpr std::uint32_t kSpeakerModelVersion = 1;
constexpr double kMaxCondition = 1e10;
constexpr double kRidge = 1e-6;

}  // namespace

Matrix EstimateCovariance(const RowMatrix& vectors) {
  const Eigen::Index t = vectors.rows();
  const Eigen::Index p = vectors.cols();
  Require(p >= 1, "feature dimension must be positive");
  if (t <= p) {
    Fail(ErrorKind::kInsufficientData, "covariance needs more frames (" + std::to_string(t) +
                                           ") than dimensions (" + std::to_string(p) + ")");
  }
  if (!vectors.allFinite()) Fail(ErrorKind::kInvalidArgument, "feature matrix holds NaN or Inf");
  const Eigen::RowVectorXd mean = vectors.colwise().mean();
  const RowMatrix centred = vectors.rowwise() - mean;
  Matrix cov = (centred.transpose() * centred) / static_cast<double>(t - 1);
  cov = 0.5 * (cov + cov.transpose());

  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > kMaxCondition) {
    const double trace = cov.trace();
    const double ridge = trace > 0.0 ? kRidge * trace / static_cast<double>(p) : kRidge;
    cov.diagonal().array() += ridge;
  }
  return cov;
}

SpeakerModel Enroll(const FeatureMatrix& features, const std::string& speaker_id) {
  SpeakerModel model;
  model.speaker_id = speaker_id;
  model.covariance = EstimateCovariance(features.vectors);
  model.frame_count = features.frame_count();
  return model;
}

double Sphericity(const Matrix& test_cov, const Matrix& model_cov) {
  Require(test_cov.rows() == test_cov.cols() && model_cov.rows() == model_cov.cols(),
          "sphericity needs square matrices");
  Require(test_cov.rows() == model_cov.rows(), "sphericity needs matrices of equal dimension");
  const Eigen::LLT<Matrix> test_chol(test_cov);
  const Eigen::LLT<Matrix> model_chol(model_cov);
  if (test_chol.info() != Eigen::Success || model_chol.info() != Eigen::Success) {
    Fail(ErrorKind::kNumerical, "sphericity needs positive definite matrices");
  }
  const double p = static_cast<double>(test_cov.rows());
  const double forward = model_chol.solve(test_cov).trace();   // tr(C_j^-1 C_test)
  const double backward = test_chol.solve(model_cov).trace();  // tr(C_test^-1 C_j)
  return std::log(forward * backward) - 2.0 * std::log(p);
}

std::vector<Score> IdentifyCovariance(const Matrix& test_cov, const std::vector<SpeakerModel>& models) {
  Require(!models.empty(), "no speaker models to compare against");
  std::vector<Score> scores;
  scores.reserve(models.size());
  for (const SpeakerModel& m : models) {
    if (m.dimension() != test_cov.rows()) {
      Fail(ErrorKind::kInvalidArgument, "model '" + m.speaker_id + "' has dimension " +
                                            std::to_string(m.dimension()) + ", test has " +
                                            std::to_string(test_cov.rows()));
    }
    scores.push_back({m.speaker_id, Sphericity(test_cov, m.covariance)});
  }
  std::sort(scores.begin(), scores.end(), [](const Score& a, const Score& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.speaker_id < b.speaker_id;
  });
  return scores;
}

std::vector<Score> Identify(const FeatureMatrix& test, const std::vector<SpeakerModel>& models) {
  Require(!models.empty(), "no speaker models to compare against");
  return IdentifyCovariance(EstimateCovariance(test.vectors), models);
}

void SaveSpeakerModel(const SpeakerModel& model, const std::filesystem::path& path) {
  ByteWriter w;
  w.Magic("SPKM");
  w.U32(kSpeakerModelVersion);
  w.String(model.speaker_id);
  w.U32(static_cast<std::uint32_t>(model.dimension()));
  for (Eigen::Index i = 0; i < model.covariance.rows(); ++i) {
    for (Eigen::Index j = i; j < model.covariance.cols(); ++j) w.F64(model.covariance(i, j));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) Fail(ErrorKind::kIo, "cannot create " + path.string());
  w.Flush(out);
}

SpeakerModel LoadSpeakerModel(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kIo, "cannot open " + path.string());
  ByteReader r = ByteReader::FromStream(in);
  r.ExpectMagic("SPKM");
  const std::uint32_t version = r.U32();
  if (version != kSpeakerModelVersion) {
    Fail(ErrorKind::kUnsupportedFormat, "unsupported SPKM version " + std::to_string(version));
  }
  SpeakerModel model;
  model.speaker_id = r.String();
  const std::uint32_t p = r.U32();
  if (p == 0 || p > 4096) Fail(ErrorKind::kMalformedData, "implausible SPKM dimension");
  model.covariance.resize(p, p);
  for (std::uint32_t i = 0; i < p; ++i) {
    for (std::uint32_t j = i; j < p; ++j) {
      model.covariance(i, j) = model.covariance(j, i) = r.F64();
    }
  }
  if (!r.at_end()) Fail(ErrorKind::kMalformedData, "trailing bytes in SPKM file");
  return model;
}

}  // namespace bwesid
