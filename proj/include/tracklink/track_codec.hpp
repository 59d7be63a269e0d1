#pragma once

#include <span>
#include <vector>

#include "tracklink/geometry.hpp"

namespace tracklink {

/// Normalized cross-cloud box displacement. Produced by encode_delta, in
/// which case drz lies in (-0.5, 0.5] (minimal yaw difference over 2*pi).
struct TrackDelta {
  double dx = 0.0;
  double dy = 0.0;
  double dz = 0.0;
  double drz = 0.0;
};

struct LossConfig {
  double lambda_reg = 1.0;
  double lambda_tra = 1.0;
  double smooth_l1_beta = 1.0;
};

/// Regression target for moving box_t onto box_t_tau: center displacement
/// normalized by box_t's dimensions, yaw difference wrapped into (-pi, pi]
/// and normalized by 2*pi. Throws std::invalid_argument if any of box_t's
/// dimensions is non-positive.
TrackDelta encode_delta(const OrientedBox3D& box_t,
                        const OrientedBox3D& box_t_tau);

/// Applies a delta to a box: the exact inverse of encode_delta up to yaw
/// wrapping. Dimensions are carried over unchanged.
OrientedBox3D decode_delta(const OrientedBox3D& box_t, const TrackDelta& delta);

/// Elementwise smooth L1 between pred and target, summed:
/// 0.5*e^2/beta if |e| < beta, |e| - 0.5*beta otherwise.
double smooth_l1(std::span<const double> pred, std::span<const double> target,
                 double beta = 1.0);

/// One training iteration's worth of RoIs. class_probs holds one softmax
/// row per RoI (each row sums to 1 within 1e-6); gt_labels the matching
/// ground-truth class indices. box_preds/box_targets carry the regression
/// vectors of the foreground RoIs, delta_preds/delta_targets the tracking
/// deltas of the RoIs visible in both clouds (N_tra <= N_fg <= N).
struct MultitaskBatch {
  std::vector<std::vector<double>> class_probs;
  std::vector<int> gt_labels;
  std::vector<std::vector<double>> box_preds;
  std::vector<std::vector<double>> box_targets;
  std::vector<TrackDelta> delta_preds;
  std::vector<TrackDelta> delta_targets;
};

/// total = cls + lambda_reg * reg + lambda_tra * tra. `finite` is false
/// when some probability at a ground-truth index is 0 (total = +inf).
struct MultitaskLoss {
  double total = 0.0;
  double cls = 0.0;
  double reg = 0.0;
  double tra = 0.0;
  bool finite = true;
};

/// Reference multi-task objective: mean cross entropy over all RoIs, mean
/// smooth L1 over foreground boxes, mean smooth L1 over tracked deltas.
/// Empty terms (no foreground / no tracked RoIs) contribute 0.
MultitaskLoss multitask_loss(const MultitaskBatch& batch,
                             const LossConfig& cfg = {});

}  // namespace tracklink
