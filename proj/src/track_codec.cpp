#include "tracklink/track_codec.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace tracklink {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

TrackDelta encode_delta(const OrientedBox3D& box_t,
                        const OrientedBox3D& box_t_tau) {
  if (box_t.l <= 0.0 || box_t.w <= 0.0 || box_t.h <= 0.0)
    throw std::invalid_argument("encode_delta: box_t must have positive dimensions");
  TrackDelta d;
  d.dx = (box_t_tau.x - box_t.x) / box_t.l;
  d.dy = (box_t_tau.y - box_t.y) / box_t.w;
  d.dz = (box_t_tau.z - box_t.z) / box_t.h;
  d.drz = wrap_angle(box_t_tau.rz - box_t.rz) / kTwoPi;
  return d;
}

OrientedBox3D decode_delta(const OrientedBox3D& box_t, const TrackDelta& delta) {
  return OrientedBox3D(box_t.x + delta.dx * box_t.l,
                       box_t.y + delta.dy * box_t.w,
                       box_t.z + delta.dz * box_t.h,
                       box_t.l, box_t.w, box_t.h,
                       box_t.rz + delta.drz * kTwoPi);
}

double smooth_l1(std::span<const double> pred, std::span<const double> target,
                 double beta) {
  if (pred.size() != target.size())
    throw std::invalid_argument("smooth_l1: length mismatch");
  if (beta <= 0.0) throw std::invalid_argument("smooth_l1: beta must be > 0");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = std::abs(pred[i] - target[i]);
    acc += e < beta ? 0.5 * e * e / beta : e - 0.5 * beta;
  }
  return acc;
}

MultitaskLoss multitask_loss(const MultitaskBatch& batch, const LossConfig& cfg) {
  const std::size_t n = batch.class_probs.size();
  if (n == 0) throw std::invalid_argument("multitask_loss: empty RoI set");
  if (batch.gt_labels.size() != n)
    throw std::invalid_argument("multitask_loss: one label per probability row required");
  if (batch.box_preds.size() != batch.box_targets.size())
    throw std::invalid_argument("multitask_loss: box pred/target count mismatch");
  if (batch.delta_preds.size() != batch.delta_targets.size())
    throw std::invalid_argument("multitask_loss: delta pred/target count mismatch");
  const std::size_t n_fg = batch.box_preds.size();
  const std::size_t n_tra = batch.delta_preds.size();
  if (n_tra > n_fg || n_fg > n)
    throw std::invalid_argument("multitask_loss: requires N_tra <= N_fg <= N");

  MultitaskLoss out;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = batch.class_probs[i];
    const int label = batch.gt_labels[i];
    if (label < 0 || static_cast<std::size_t>(label) >= row.size())
      throw std::invalid_argument("multitask_loss: label outside probability row");
    double sum = 0.0;
    for (double p : row) sum += p;
    if (std::abs(sum - 1.0) > 1e-6)
      throw std::invalid_argument("multitask_loss: probability row does not sum to 1");
    const double p = row[static_cast<std::size_t>(label)];
    if (p <= 0.0) {
      out.finite = false;
      out.cls = std::numeric_limits<double>::infinity();
    } else if (out.finite) {
      out.cls += -std::log(p);
    }
  }
  if (out.finite) out.cls /= static_cast<double>(n);

  for (std::size_t i = 0; i < n_fg; ++i)
    out.reg += smooth_l1(batch.box_preds[i], batch.box_targets[i], cfg.smooth_l1_beta);
  if (n_fg > 0) out.reg /= static_cast<double>(n_fg);

  for (std::size_t i = 0; i < n_tra; ++i) {
    const TrackDelta& p = batch.delta_preds[i];
    const TrackDelta& t = batch.delta_targets[i];
    const double pv[4] = {p.dx, p.dy, p.dz, p.drz};
    const double tv[4] = {t.dx, t.dy, t.dz, t.drz};
    out.tra += smooth_l1(pv, tv, cfg.smooth_l1_beta);
  }
  if (n_tra > 0) out.tra /= static_cast<double>(n_tra);

  out.total = out.cls + cfg.lambda_reg * out.reg + cfg.lambda_tra * out.tra;
  return out;
}

}  // namespace tracklink
