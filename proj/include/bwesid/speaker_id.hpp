#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "bwesid/features.hpp"
#include "bwesid/types.hpp"

namespace bwesid {

// Covariance-matrix speaker model. Stores P (P + 1) / 2 free parameters.
struct SpeakerModel {
  std::string speaker_id;
  Matrix covariance;  // P x P, symmetric positive definite
  int frame_count = 0;

  int dimension() const { return static_cast<int>(covariance.rows()); }
  static int FreeParameterCount(int p) { return p * (p + 1) / 2; }
};

// Sample covariance about the sample mean, with eps * trace(C) / P added to
// the diagonal (eps = 1e-6) when the condition number exceeds 1e10.
// Requires more frames than dimensions.
Matrix EstimateCovariance(const RowMatrix& vectors);

SpeakerModel Enroll(const FeatureMatrix& features, const std::string& speaker_id);

// Arithmetic-harmonic sphericity:
//   log(tr(A B^-1) tr(B A^-1)) - 2 log P,
// zero exactly when A is proportional to B and positive otherwise.
double Sphericity(const Matrix& test_cov, const Matrix& model_cov);

struct Score {
  std::string speaker_id;
  double distance = 0.0;
};

// Scores every model against the covariance of the test features and sorts
// ascending by distance, ties by speaker id.
std::vector<Score> Identify(const FeatureMatrix& test, const std::vector<SpeakerModel>& models);
std::vector<Score> IdentifyCovariance(const Matrix& test_cov, const std::vector<SpeakerModel>& models);

// "SPKM" file: magic, version (u32), speaker id, P (u32), upper triangle of C
// row by row as little-endian doubles.
void SaveSpeakerModel(const SpeakerModel& model, const std::filesystem::path& path);
SpeakerModel LoadSpeakerModel(const std::filesystem::path& path);

}  // namespace bwesid
