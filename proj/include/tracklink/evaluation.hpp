#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tracklink/geometry.hpp"

namespace tracklink {

enum class Difficulty { kEasy = 0, kModerate = 1, kHard = 2 };

/// KITTI-style protocol settings: per-class minimum 3D overlap, number of
/// recall positions, and the difficulty bucket limits (minimum 2D box
/// height in pixels, maximum occlusion level, maximum truncation).
struct EvalConfig {
  std::map<std::string, double> iou_thresholds = {
      {"Car", 0.7}, {"Pedestrian", 0.5}, {"Cyclist", 0.5}};
  int recall_positions = 40;
  std::array<double, 3> min_box_height = {40.0, 25.0, 25.0};
  std::array<int, 3> max_occlusion = {0, 1, 2};
  std::array<double, 3> max_truncation = {0.15, 0.30, 0.50};
  // Ground truth of these classes is ignored (absorbs detections without
  // penalty) when evaluating the mapped class.
  std::map<std::string, std::string> ignore_aliases = {
      {"Van", "Car"}, {"Person_sitting", "Pedestrian"}};
};

/// A ground-truth instance. `difficulty` is the easiest bucket the
/// instance satisfies (0/1/2), or 3 when it qualifies for none and is
/// ignored at every level. Synthetic data without 2D boxes uses 1.
struct EvalGt {
  int sequence = 0;
  int frame = 0;
  std::string cls;
  OrientedBox3D box;
  int difficulty = 1;
};

struct EvalPred {
  int sequence = 0;
  int frame = 0;
  std::string cls;
  OrientedBox3D box;
  double score = 0.0;
};

enum class DetFlag { kTP, kFP, kIgnored };

struct FrameGt {
  OrientedBox3D box;
  bool ignored = false;
};

struct FrameDet {
  OrientedBox3D box;
  double score = 0.0;
};

struct FrameMatch {
  std::vector<DetFlag> flags;  // one per detection, input order
  int fn = 0;
};

/// Greedy per-frame matching in descending score order. A detection is a
/// TP when its highest-IoU unmatched countable ground truth reaches
/// iou_thresh; otherwise, if it overlaps an ignored ground truth at the
/// threshold, it is absorbed as neither TP nor FP. Each countable ground
/// truth matches at most once.
FrameMatch match_detections(std::span<const FrameGt> gts,
                            std::span<const FrameDet> dets, double iou_thresh);

/// Interpolated average precision over `recall_positions` equally spaced
/// recall points, in percent. Detections flagged kIgnored do not
/// participate. Returns nullopt when num_gt is 0.
std::optional<double> average_precision(std::span<const double> scores,
                                        std::span<const DetFlag> flags,
                                        std::size_t num_gt,
                                        int recall_positions = 40);

struct CellResult {
  std::optional<double> ap;  // percent
  long tp = 0;
  long fp = 0;
  long fn = 0;
};

struct EvalReport {
  std::vector<std::string> classes;
  // cells[difficulty][class]
  std::array<std::map<std::string, CellResult>, 3> cells;
  std::array<std::optional<double>, 3> map;  // mean AP per difficulty
};

/// Difficulty bucket of a ground-truth annotation; `box_height` in pixels
/// (<= 0 means no 2D box is available, which buckets as moderate).
int difficulty_bucket(double box_height, int occlusion, double truncation,
                      const EvalConfig& cfg);

/// Full protocol: bucket ground truth, match per frame, AP per class and
/// difficulty, mAP across present classes. Prediction classes must appear
/// in cfg.iou_thresholds; unknown ground-truth classes are skipped unless
/// they alias an evaluated class, in which case they are ignored regions.
EvalReport evaluate(std::span<const EvalGt> gts, std::span<const EvalPred> preds,
                    const EvalConfig& cfg = {});

/// Plain-text table of the report, one row of AP cells per class group.
std::string report_table(const EvalReport& report);

/// The same numbers as a JSON document.
std::string report_json(const EvalReport& report);

}  // namespace tracklink
