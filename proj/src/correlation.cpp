#include "tracklink/correlation.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "tracklink/errors.hpp"

namespace tracklink {

namespace {

constexpr char kBlobMagic[4] = {'K', 'P', 'F', 'B'};
constexpr std::uint32_t kBlobVersion = 1;

// One output row block: for a fixed row of `a`, accumulate kJ columns of
// `b` at once. Independent accumulator chains hide the FMA latency while
// each dot product still sums strictly in index order, which is what makes
// blocked and threaded runs bit-identical to the plain loop.
constexpr std::size_t kJ = 8;

void correlate_rows(const KeypointFeatureSet& a, const KeypointFeatureSet& b,
                    std::size_t row_begin, std::size_t row_end, double* out) {
  const std::size_t d = a.d;
  const std::size_t nb = b.n;
  for (std::size_t i = row_begin; i < row_end; ++i) {
    const float* ai = a.features.data() + i * d;
    double* dst = out + i * nb;
    std::size_t j = 0;
    for (; j + kJ <= nb; j += kJ) {
      const float* bj[kJ];
      for (std::size_t t = 0; t < kJ; ++t) bj[t] = b.features.data() + (j + t) * d;
      double acc[kJ] = {};
      for (std::size_t k = 0; k < d; ++k) {
        const double av = static_cast<double>(ai[k]);
        for (std::size_t t = 0; t < kJ; ++t)
          acc[t] = std::fma(av, static_cast<double>(bj[t][k]), acc[t]);
      }
      for (std::size_t t = 0; t < kJ; ++t) dst[j + t] = acc[t];
    }
    for (; j < nb; ++j) {
      const float* bjp = b.features.data() + j * d;
      double acc = 0.0;
      for (std::size_t k = 0; k < d; ++k)
        acc = std::fma(static_cast<double>(ai[k]), static_cast<double>(bjp[k]), acc);
      dst[j] = acc;
    }
  }
}

template <typename T>
void write_raw(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw FormatError("feature blob: truncated stream");
  return value;
}

}  // namespace

void validate_feature_set(const KeypointFeatureSet& set) {
  if (set.n < 1 || set.d < 1)
    throw FormatError("feature set: n and d must be >= 1");
  if (set.features.size() != set.n * set.d)
    throw FormatError("feature set: feature buffer size mismatch");
  if (set.locations.size() != set.n * 3)
    throw FormatError("feature set: location buffer size mismatch");
  for (float v : set.features)
    if (!std::isfinite(v)) throw FormatError("feature set: non-finite feature");
  for (float v : set.locations)
    if (!std::isfinite(v)) throw FormatError("feature set: non-finite location");
}

CorrelationMap correlate(const KeypointFeatureSet& a, const KeypointFeatureSet& b,
                         std::optional<double> radius, unsigned threads) {
  if (a.d != b.d)
    throw std::invalid_argument("correlate: descriptor dimensions differ");
  CorrelationMap map;
  map.rows = a.n;
  map.cols = b.n;
  map.values.resize(map.rows * map.cols);

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, std::max<std::size_t>(map.rows, 1));
  if (threads <= 1 || map.rows < 2) {
    correlate_rows(a, b, 0, map.rows, map.values.data());
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    const std::size_t chunk = (map.rows + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t lo = std::min<std::size_t>(t * chunk, map.rows);
      const std::size_t hi = std::min<std::size_t>(lo + chunk, map.rows);
      if (lo == hi) continue;
      pool.emplace_back(correlate_rows, std::cref(a), std::cref(b), lo, hi,
                        map.values.data());
    }
    for (auto& th : pool) th.join();
  }

  if (radius && std::isfinite(*radius)) {
    const double r2 = *radius * *radius;
    for (std::size_t i = 0; i < map.rows; ++i) {
      const float* la = a.locations.data() + i * 3;
      double* row = map.values.data() + i * map.cols;
      for (std::size_t j = 0; j < map.cols; ++j) {
        const float* lb = b.locations.data() + j * 3;
        const double dx = static_cast<double>(la[0]) - lb[0];
        const double dy = static_cast<double>(la[1]) - lb[1];
        const double dz = static_cast<double>(la[2]) - lb[2];
        if (dx * dx + dy * dy + dz * dz > r2)
          row[j] = -std::numeric_limits<double>::infinity();
      }
    }
  }
  return map;
}

std::vector<RowMatch> argmax_match(const CorrelationMap& map) {
  if (map.rows == 0 || map.cols == 0)
    throw std::invalid_argument("argmax_match: empty map");
  std::vector<RowMatch> out(map.rows);
  for (std::size_t i = 0; i < map.rows; ++i) {
    const double* row = map.values.data() + i * map.cols;
    std::int64_t best = -1;
    double best_v = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < map.cols; ++j) {
      if (row[j] > best_v) {
        best_v = row[j];
        best = static_cast<std::int64_t>(j);
      }
    }
    // A row whose entries are all -inf is fully gated: no match.
    out[i] = std::isinf(best_v) && best_v < 0
                 ? RowMatch{-1, -std::numeric_limits<double>::infinity()}
                 : RowMatch{best, best_v};
  }
  return out;
}

CombinedFeatures assemble_combined(const CorrelationMap& corr,
                                   const KeypointFeatureSet& a,
                                   const KeypointFeatureSet& b) {
  if (corr.rows != a.n || corr.cols != b.n)
    throw std::invalid_argument("assemble_combined: correlation shape mismatch");
  if (a.d != b.d)
    throw std::invalid_argument("assemble_combined: descriptor dimensions differ");
  if (a.n != b.n)
    throw std::invalid_argument("assemble_combined: keypoint counts differ");
  CombinedFeatures out;
  out.rows = a.n;
  out.cols = b.n + 2 * a.d + 6;
  out.values.resize(out.rows * out.cols);
  for (std::size_t i = 0; i < out.rows; ++i) {
    double* row = out.values.data() + i * out.cols;
    std::size_t c = 0;
    for (std::size_t j = 0; j < b.n; ++j) row[c++] = corr.at(i, j);
    for (std::size_t k = 0; k < a.d; ++k) row[c++] = a.feature(i, k);
    for (std::size_t k = 0; k < b.d; ++k) row[c++] = b.feature(i, k);
    for (std::size_t k = 0; k < 3; ++k) row[c++] = a.location(i, k);
    for (std::size_t k = 0; k < 3; ++k) row[c++] = b.location(i, k);
  }
  return out;
}

void write_feature_blob(std::ostream& out, const KeypointFeatureSet& set) {
  validate_feature_set(set);
  out.write(kBlobMagic, 4);
  write_raw(out, kBlobVersion);
  write_raw(out, static_cast<std::uint32_t>(set.n));
  write_raw(out, static_cast<std::uint32_t>(set.d));
  out.write(reinterpret_cast<const char*>(set.features.data()),
            static_cast<std::streamsize>(set.features.size() * sizeof(float)));
  out.write(reinterpret_cast<const char*>(set.locations.data()),
            static_cast<std::streamsize>(set.locations.size() * sizeof(float)));
  if (!out) throw FormatError("feature blob: write failed");
}

KeypointFeatureSet read_feature_blob(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kBlobMagic, 4) != 0)
    throw FormatError("feature blob: bad magic");
  const auto version = read_raw<std::uint32_t>(in);
  if (version != kBlobVersion)
    throw FormatError("feature blob: unsupported version " + std::to_string(version));
  KeypointFeatureSet set;
  set.n = read_raw<std::uint32_t>(in);
  set.d = read_raw<std::uint32_t>(in);
  if (set.n < 1 || set.d < 1) throw FormatError("feature blob: empty shape");
  set.features.resize(set.n * set.d);
  in.read(reinterpret_cast<char*>(set.features.data()),
          static_cast<std::streamsize>(set.features.size() * sizeof(float)));
  set.locations.resize(set.n * 3);
  in.read(reinterpret_cast<char*>(set.locations.data()),
          static_cast<std::streamsize>(set.locations.size() * sizeof(float)));
  if (!in) throw FormatError("feature blob: truncated payload");
  in.peek();
  if (!in.eof()) throw FormatError("feature blob: trailing bytes");
  validate_feature_set(set);
  return set;
}

void write_feature_blob_file(const std::string& path, const KeypointFeatureSet& set) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open for write: " + path);
  write_feature_blob(out, set);
}

KeypointFeatureSet read_feature_blob_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open: " + path);
  try {
    return read_feature_blob(in);
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

}  // namespace tracklink
