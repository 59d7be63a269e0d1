#pragma once

#include <deque>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tracklink/geometry.hpp"
#include "tracklink/track_codec.hpp"

namespace tracklink {

/// A scored per-frame box. `scores` holds per-class softmax probabilities;
/// classes absent from the map have probability 0. `id` is the stable
/// detection index within its frame.
struct Detection {
  OrientedBox3D box;
  std::map<std::string, double> scores;
  int frame = 0;
  int id = 0;

  double score_for(const std::string& cls) const {
    auto it = scores.find(cls);
    return it == scores.end() ? 0.0 : it->second;
  }
};

/// Predicted displacement of detection (source_frame, source_id) to the
/// next processed cloud.
struct Tracklet {
  int source_frame = 0;
  int source_id = 0;
  TrackDelta delta;
};

/// A linked sequence of detections for one class. Frames are consecutive
/// at the linker stride. `raw_scores` are the per-frame class
/// probabilities, `scores` the rescored values (all equal to the sequence
/// max under the default rescoring). `tube_score` is the selected path
/// score, i.e. the sum of its link-score edge weights.
struct Tube {
  std::string class_id;
  std::vector<int> frames;
  std::vector<int> ids;
  std::vector<OrientedBox3D> boxes;
  std::vector<double> raw_scores;
  std::vector<double> scores;
  std::vector<double> edge_weights;
  double tube_score = 0.0;

  int length() const { return static_cast<int>(frames.size()); }
};

enum class RescoreMode { kMax, kMean };

struct LinkerConfig {
  double delta_iou = 0.5;     // phi gate: IoU strictly greater passes
  double suppress_iou = 0.3;  // same-frame removal after extraction
  int tau = 1;                // frame stride
  RescoreMode rescore = RescoreMode::kMax;
  int min_tube_len = 1;
  std::optional<int> online_window;  // omega, >= 2 when set
};

void validate_config(const LinkerConfig& cfg);

/// Eq-style pairwise linking score: p_i + p_j + phi, where phi is 1 when
/// the tracklet-predicted box overlaps det_t_tau with IoU > delta_iou.
/// A null tracklet contributes phi = 0.
double link_score(const Detection& det_t, const Detection& det_t_tau,
                  const Tracklet* tracklet, const std::string& class_id,
                  const LinkerConfig& cfg);

struct GraphNode {
  int frame = 0;
  int id = 0;
  OrientedBox3D box;
  double prob = 0.0;  // class probability in the owning graph
};

/// Class-specific layered DAG. Layer l holds the detections of frames[l]
/// sorted by id; edges[l] is the dense layers[l] x layers[l+1] weight
/// matrix, present only when frames[l+1] - frames[l] == tau.
struct LayeredGraph {
  std::string class_id;
  std::vector<int> frames;
  std::vector<std::vector<GraphNode>> layers;
  std::vector<std::vector<double>> edges;

  bool linked(std::size_t layer) const { return !edges[layer].empty(); }
  double edge_weight(std::size_t layer, std::size_t i, std::size_t j) const {
    return edges[layer][i * layers[layer + 1].size() + j];
  }
  std::size_t edge_count() const;
};

/// Builds the class-c graph over all detections. Throws on duplicate
/// (frame, id) pairs and on tracklets referencing missing detections.
LayeredGraph build_graph(std::span<const Detection> detections,
                         std::span<const Tracklet> tracklets,
                         const std::string& class_id,
                         const LinkerConfig& cfg);

/// Iterated maximum-path extraction: dynamic programming over layers,
/// global best path (ties: earliest start frame, then smallest id chain),
/// rescoring, removal of path nodes plus same-frame nodes overlapping the
/// path above suppress_iou, repeated while edges remain. Leftover isolated
/// nodes become length-1 tubes. Tubes shorter than min_tube_len are
/// dropped from the result but still consume their detections.
std::vector<Tube> extract_tubes(const LayeredGraph& graph,
                                const LinkerConfig& cfg);

/// Per-class build + extract over a whole sequence. `classes` empty means
/// every class appearing in any detection's score map. Output is sorted by
/// (class, start frame, id chain).
std::vector<Tube> link_sequence(std::span<const Detection> detections,
                                std::span<const Tracklet> tracklets,
                                const LinkerConfig& cfg,
                                std::vector<std::string> classes = {});

/// Causal sliding-window linker. Each pushed frame re-links the last
/// omega frames; window tubes whose first element continues an open tube
/// across the window boundary extend it, otherwise they open a new one.
/// Frames that slide out of the window freeze the tube prefix built on
/// them. With omega >= stream length the final output equals
/// link_sequence.
class OnlineLinker {
 public:
  explicit OnlineLinker(const LinkerConfig& cfg);

  /// Frames must be pushed in strictly increasing order.
  void push_frame(int frame, std::vector<Detection> detections,
                  std::vector<Tracklet> tracklets);

  /// Tubes that can no longer be extended.
  const std::vector<Tube>& closed() const { return closed_; }
  /// Tubes still extendable by future frames.
  const std::vector<Tube>& open() const { return open_; }

  /// Closed + open tubes, min-length filtered, canonically sorted.
  std::vector<Tube> finalize() const;

 private:
  struct BufferedFrame {
    int frame;
    std::vector<Detection> detections;
    std::vector<Tracklet> tracklets;
  };

  LinkerConfig cfg_;
  std::size_t window_;
  std::deque<BufferedFrame> buffer_;
  std::vector<Tube> open_;
  std::vector<Tube> closed_;
  std::optional<int> last_frame_;
};

}  // namespace tracklink
