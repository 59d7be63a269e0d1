#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace tracklink {

/// n keypoint descriptors of length d plus their 3D locations, both
/// row-major float32. Paper-scale data uses n = 2048, d = 128; any shape
/// is accepted.
struct KeypointFeatureSet {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<float> features;   // n x d
  std::vector<float> locations;  // n x 3
  int frame_id = 0;

  float feature(std::size_t i, std::size_t k) const { return features[i * d + k]; }
  float location(std::size_t i, std::size_t k) const { return locations[i * 3 + k]; }
};

/// Validates shape consistency and entry finiteness; throws FormatError.
void validate_feature_set(const KeypointFeatureSet& set);

/// Dense matrix of keypoint-pair inner products. Entries gated out by the
/// distance radius are -inf.
struct CorrelationMap {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;  // rows x cols

  double at(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
};

/// Inner product of every descriptor pair: values(i, j) = <a_i, b_j>,
/// accumulated over the descriptor dimension in index order (double
/// precision, fused multiply-add), so output is identical regardless of
/// blocking or thread count. If `radius` is set, pairs whose locations are
/// farther apart than radius (Euclidean) are set to -inf. threads = 0 uses
/// the hardware concurrency.
CorrelationMap correlate(const KeypointFeatureSet& a,
                         const KeypointFeatureSet& b,
                         std::optional<double> radius = std::nullopt,
                         unsigned threads = 1);

/// Per-row best match. index = -1 marks a fully gated row.
struct RowMatch {
  std::int64_t index = -1;
  double value = 0.0;
};

/// For each row the smallest column index attaining the row maximum.
std::vector<RowMatch> argmax_match(const CorrelationMap& map);

/// Row-major combined feature layout, one row per keypoint of `a`:
/// [corr(i,:) | a.features(i) | b.features(i) | a.locations(i) |
/// b.locations(i)], width n_b + 2d + 6. Requires a.n == b.n == corr rows.
struct CombinedFeatures {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;
};

CombinedFeatures assemble_combined(const CorrelationMap& corr,
                                   const KeypointFeatureSet& a,
                                   const KeypointFeatureSet& b);

/// Keypoint feature blob: little-endian, magic "KPFB", u32 version = 1,
/// u32 n, u32 d, n*d float32 features, n*3 float32 locations.
void write_feature_blob(std::ostream& out, const KeypointFeatureSet& set);
void write_feature_blob_file(const std::string& path,
                             const KeypointFeatureSet& set);
KeypointFeatureSet read_feature_blob(std::istream& in);
KeypointFeatureSet read_feature_blob_file(const std::string& path);

}  // namespace tracklink
