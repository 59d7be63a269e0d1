#include "tracklink/linker.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

namespace tracklink {

namespace {

double rescore_value(std::span<const double> raw, RescoreMode mode) {
  if (mode == RescoreMode::kMax) return *std::max_element(raw.begin(), raw.end());
  return std::accumulate(raw.begin(), raw.end(), 0.0) / static_cast<double>(raw.size());
}

bool tube_before(const Tube& a, const Tube& b) {
  if (a.class_id != b.class_id) return a.class_id < b.class_id;
  if (a.frames.front() != b.frames.front()) return a.frames.front() < b.frames.front();
  if (a.ids != b.ids) return a.ids < b.ids;
  return a.frames < b.frames;
}

void sort_canonical(std::vector<Tube>& tubes) {
  std::sort(tubes.begin(), tubes.end(), tube_before);
}

std::vector<std::string> collect_classes(std::span<const Detection> detections) {
  std::set<std::string> names;
  for (const auto& det : detections)
    for (const auto& [cls, p] : det.scores) names.insert(cls);
  return {names.begin(), names.end()};
}

}  // namespace

std::size_t LayeredGraph::edge_count() const {
  std::size_t total = 0;
  for (const auto& e : edges) total += e.size();
  return total;
}

void validate_config(const LinkerConfig& cfg) {
  if (cfg.delta_iou < 0.0 || cfg.delta_iou > 1.0)
    throw std::invalid_argument("linker config: delta_iou must be in [0, 1]");
  if (cfg.suppress_iou < 0.0 || cfg.suppress_iou > 1.0)
    throw std::invalid_argument("linker config: suppress_iou must be in [0, 1]");
  if (cfg.tau < 1) throw std::invalid_argument("linker config: tau must be >= 1");
  if (cfg.min_tube_len < 1)
    throw std::invalid_argument("linker config: min_tube_len must be >= 1");
  if (cfg.online_window && *cfg.online_window < 2)
    throw std::invalid_argument("linker config: online window must be >= 2");
}

double link_score(const Detection& det_t, const Detection& det_t_tau,
                  const Tracklet* tracklet, const std::string& class_id,
                  const LinkerConfig& cfg) {
  double phi = 0.0;
  if (tracklet != nullptr) {
    if (tracklet->source_frame != det_t.frame || tracklet->source_id != det_t.id)
      throw std::invalid_argument("link_score: tracklet does not source from det_t");
    const OrientedBox3D predicted = decode_delta(det_t.box, tracklet->delta);
    if (iou_3d(det_t_tau.box, predicted) > cfg.delta_iou) phi = 1.0;
  }
  return det_t.score_for(class_id) + det_t_tau.score_for(class_id) + phi;
}

LayeredGraph build_graph(std::span<const Detection> detections,
                         std::span<const Tracklet> tracklets,
                         const std::string& class_id, const LinkerConfig& cfg) {
  validate_config(cfg);

  std::map<int, std::vector<GraphNode>> by_frame;
  std::set<std::pair<int, int>> seen;
  for (const auto& det : detections) {
    if (!seen.insert({det.frame, det.id}).second)
      throw std::invalid_argument("build_graph: duplicate detection (frame, id)");
    by_frame[det.frame].push_back(
        {det.frame, det.id, det.box, det.score_for(class_id)});
  }

  std::map<std::pair<int, int>, const Tracklet*> tracklet_of;
  for (const auto& tr : tracklets) {
    if (!seen.count({tr.source_frame, tr.source_id}))
      throw std::invalid_argument("build_graph: tracklet references missing detection");
    tracklet_of[{tr.source_frame, tr.source_id}] = &tr;
  }

  LayeredGraph graph;
  graph.class_id = class_id;
  for (auto& [frame, nodes] : by_frame) {
    std::sort(nodes.begin(), nodes.end(),
              [](const GraphNode& a, const GraphNode& b) { return a.id < b.id; });
    graph.frames.push_back(frame);
    graph.layers.push_back(std::move(nodes));
  }

  graph.edges.assign(graph.layers.empty() ? 0 : graph.layers.size() - 1, {});
  for (std::size_t l = 0; l + 1 < graph.layers.size(); ++l) {
    if (graph.frames[l + 1] - graph.frames[l] != cfg.tau) continue;
    const auto& cur = graph.layers[l];
    const auto& nxt = graph.layers[l + 1];
    auto& weights = graph.edges[l];
    weights.resize(cur.size() * nxt.size());
    for (std::size_t i = 0; i < cur.size(); ++i) {
      auto it = tracklet_of.find({cur[i].frame, cur[i].id});
      const Tracklet* tr = it == tracklet_of.end() ? nullptr : it->second;
      // phi depends only on geometry; evaluate the predicted box once.
      OrientedBox3D predicted;
      bool has_prediction = false;
      if (tr != nullptr) {
        predicted = decode_delta(cur[i].box, tr->delta);
        has_prediction = true;
      }
      for (std::size_t j = 0; j < nxt.size(); ++j) {
        double phi = 0.0;
        if (has_prediction && iou_3d(nxt[j].box, predicted) > cfg.delta_iou)
          phi = 1.0;
        weights[i * nxt.size() + j] = cur[i].prob + nxt[j].prob + phi;
      }
    }
  }
  return graph;
}

namespace {

struct ExtractionState {
  const LayeredGraph& graph;
  std::vector<std::vector<char>> alive;
  std::vector<std::vector<double>> best;  // score of the best path starting here

  explicit ExtractionState(const LayeredGraph& g) : graph(g) {
    alive.reserve(g.layers.size());
    best.reserve(g.layers.size());
    for (const auto& layer : g.layers) {
      alive.emplace_back(layer.size(), 1);
      best.emplace_back(layer.size(), 0.0);
    }
  }

  bool edges_remain() const {
    for (std::size_t l = 0; l + 1 < graph.layers.size(); ++l) {
      if (!graph.linked(l)) continue;
      const bool any_cur = std::count(alive[l].begin(), alive[l].end(), 1) > 0;
      const bool any_nxt = std::count(alive[l + 1].begin(), alive[l + 1].end(), 1) > 0;
      if (any_cur && any_nxt) return true;
    }
    return false;
  }

  // best(v) = max(0, max over alive successors of edge weight + best(succ)).
  void run_dp() {
    for (std::size_t li = graph.layers.size(); li-- > 0;) {
      for (std::size_t i = 0; i < graph.layers[li].size(); ++i) {
        if (!alive[li][i]) continue;
        double s = 0.0;
        if (li + 1 < graph.layers.size() && graph.linked(li)) {
          for (std::size_t j = 0; j < graph.layers[li + 1].size(); ++j) {
            if (!alive[li + 1][j]) continue;
            const double cand = graph.edge_weight(li, i, j) + best[li + 1][j];
            s = std::max(s, cand);
          }
        }
        best[li][i] = s;
      }
    }
  }

  // Selection: maximum path score; ties broken by earliest start frame,
  // then lexicographically smallest detection-id chain (a strict prefix
  // sorts before its extensions, so zero-gain extensions are not taken).
  std::vector<std::pair<std::size_t, std::size_t>> select_path() const {
    double max_score = -1.0;
    for (std::size_t l = 0; l < graph.layers.size(); ++l)
      for (std::size_t i = 0; i < graph.layers[l].size(); ++i)
        if (alive[l][i]) max_score = std::max(max_score, best[l][i]);

    // Earliest layer holding the maximum; nodes are id-sorted, so the
    // first hit within it has the smallest id.
    std::size_t start_layer = 0, start_node = 0;
    bool found = false;
    for (std::size_t l = 0; l < graph.layers.size() && !found; ++l) {
      for (std::size_t i = 0; i < graph.layers[l].size(); ++i) {
        if (alive[l][i] && best[l][i] == max_score) {
          start_layer = l;
          start_node = i;
          found = true;
          break;
        }
      }
    }
    if (!found) throw std::logic_error("extract_tubes: no start node");

    std::vector<std::pair<std::size_t, std::size_t>> path{{start_layer, start_node}};
    std::size_t l = start_layer, i = start_node;
    while (best[l][i] > 0.0) {
      // An optimal continuation exists; take the smallest id among them.
      const double target = best[l][i];
      bool stepped = false;
      for (std::size_t j = 0; j < graph.layers[l + 1].size(); ++j) {
        if (!alive[l + 1][j]) continue;
        if (graph.edge_weight(l, i, j) + best[l + 1][j] == target) {
          path.emplace_back(l + 1, j);
          l = l + 1;
          i = j;
          stepped = true;
          break;
        }
      }
      if (!stepped) throw std::logic_error("extract_tubes: broken DP invariant");
    }
    return path;
  }
};

}  // namespace

std::vector<Tube> extract_tubes(const LayeredGraph& graph, const LinkerConfig& cfg) {
  validate_config(cfg);
  ExtractionState state(graph);
  std::vector<Tube> out;

  while (state.edges_remain()) {
    state.run_dp();
    const auto path = state.select_path();

    Tube tube;
    tube.class_id = graph.class_id;
    for (const auto& [l, i] : path) {
      const GraphNode& node = graph.layers[l][i];
      tube.frames.push_back(node.frame);
      tube.ids.push_back(node.id);
      tube.boxes.push_back(node.box);
      tube.raw_scores.push_back(node.prob);
    }
    for (std::size_t k = 0; k + 1 < path.size(); ++k)
      tube.edge_weights.push_back(
          graph.edge_weight(path[k].first, path[k].second, path[k + 1].second));
    tube.tube_score = state.best[path.front().first][path.front().second];
    tube.scores.assign(tube.raw_scores.size(),
                       rescore_value(tube.raw_scores, cfg.rescore));

    // Remove the path, then any same-layer survivor overlapping it.
    for (const auto& [l, i] : path) state.alive[l][i] = 0;
    for (std::size_t k = 0; k < path.size(); ++k) {
      const std::size_t l = path[k].first;
      for (std::size_t i = 0; i < graph.layers[l].size(); ++i) {
        if (!state.alive[l][i]) continue;
        if (iou_3d(graph.layers[l][i].box, tube.boxes[k]) > cfg.suppress_iou)
          state.alive[l][i] = 0;
      }
    }

    if (tube.length() >= cfg.min_tube_len) out.push_back(std::move(tube));
  }

  // Leftover nodes are isolated; emit them as singles.
  if (cfg.min_tube_len <= 1) {
    for (std::size_t l = 0; l < graph.layers.size(); ++l) {
      for (std::size_t i = 0; i < graph.layers[l].size(); ++i) {
        if (!state.alive[l][i]) continue;
        const GraphNode& node = graph.layers[l][i];
        Tube tube;
        tube.class_id = graph.class_id;
        tube.frames = {node.frame};
        tube.ids = {node.id};
        tube.boxes = {node.box};
        tube.raw_scores = {node.prob};
        tube.scores = {node.prob};
        tube.tube_score = 0.0;
        out.push_back(std::move(tube));
      }
    }
  }
  return out;
}

std::vector<Tube> link_sequence(std::span<const Detection> detections,
                                std::span<const Tracklet> tracklets,
                                const LinkerConfig& cfg,
                                std::vector<std::string> classes) {
  validate_config(cfg);
  if (classes.empty()) classes = collect_classes(detections);
  std::vector<Tube> out;
  for (const auto& cls : classes) {
    const LayeredGraph graph = build_graph(detections, tracklets, cls, cfg);
    auto tubes = extract_tubes(graph, cfg);
    out.insert(out.end(), std::make_move_iterator(tubes.begin()),
               std::make_move_iterator(tubes.end()));
  }
  sort_canonical(out);
  return out;
}

OnlineLinker::OnlineLinker(const LinkerConfig& cfg) : cfg_(cfg) {
  validate_config(cfg);
  if (!cfg.online_window)
    throw std::invalid_argument("OnlineLinker: config must set online_window");
  window_ = static_cast<std::size_t>(*cfg.online_window);
}

void OnlineLinker::push_frame(int frame, std::vector<Detection> detections,
                              std::vector<Tracklet> tracklets) {
  if (last_frame_ && frame <= *last_frame_)
    throw std::invalid_argument("OnlineLinker: frames must strictly increase");
  last_frame_ = frame;
  for (const auto& det : detections)
    if (det.frame != frame)
      throw std::invalid_argument("OnlineLinker: detection frame mismatch");

  buffer_.push_back({frame, std::move(detections), std::move(tracklets)});
  while (buffer_.size() > window_) buffer_.pop_front();
  const int window_start = buffer_.front().frame;

  std::vector<Detection> window_dets;
  std::vector<Tracklet> window_tracklets;
  for (const auto& buf : buffer_) {
    window_dets.insert(window_dets.end(), buf.detections.begin(),
                       buf.detections.end());
    window_tracklets.insert(window_tracklets.end(), buf.tracklets.begin(),
                            buf.tracklets.end());
  }

  LinkerConfig batch_cfg = cfg_;
  batch_cfg.min_tube_len = 1;  // singles may still grow; filter at finalize
  batch_cfg.online_window.reset();
  std::vector<Tube> window_tubes =
      link_sequence(window_dets, window_tracklets, batch_cfg);

  // An open tube is continued by the window tube that starts exactly at
  // its first in-window element. The window re-link is authoritative for
  // everything inside the window; only the expired prefix is kept.
  std::map<std::tuple<std::string, int, int>, std::size_t> boundary;
  for (std::size_t oi = 0; oi < open_.size(); ++oi) {
    const Tube& o = open_[oi];
    for (std::size_t k = 0; k < o.frames.size(); ++k) {
      if (o.frames[k] >= window_start) {
        boundary[{o.class_id, o.frames[k], o.ids[k]}] = oi;
        break;
      }
    }
  }

  std::vector<char> consumed(open_.size(), 0);
  std::vector<Tube> next_open;
  next_open.reserve(window_tubes.size());
  for (Tube& w : window_tubes) {
    auto it = boundary.find({w.class_id, w.frames.front(), w.ids.front()});
    if (it == boundary.end()) {
      next_open.push_back(std::move(w));
      continue;
    }
    const Tube& o = open_[it->second];
    consumed[it->second] = 1;
    std::size_t prefix = 0;
    while (prefix < o.frames.size() && o.frames[prefix] < window_start) ++prefix;
    if (prefix == 0) {
      next_open.push_back(std::move(w));
      continue;
    }
    Tube merged;
    merged.class_id = o.class_id;
    auto take = [&](auto& dst, const auto& pre, const auto& cur, std::size_t count) {
      dst.assign(pre.begin(), pre.begin() + static_cast<std::ptrdiff_t>(count));
      dst.insert(dst.end(), cur.begin(), cur.end());
    };
    take(merged.frames, o.frames, w.frames, prefix);
    take(merged.ids, o.ids, w.ids, prefix);
    take(merged.boxes, o.boxes, w.boxes, prefix);
    take(merged.raw_scores, o.raw_scores, w.raw_scores, prefix);
    // o's element right after the prefix is w's first element, so o's
    // stored junction edge weight stays valid.
    take(merged.edge_weights, o.edge_weights, w.edge_weights, prefix);
    merged.tube_score = std::accumulate(merged.edge_weights.begin(),
                                        merged.edge_weights.end(), 0.0);
    merged.scores.assign(merged.raw_scores.size(),
                         rescore_value(merged.raw_scores, cfg_.rescore));
    next_open.push_back(std::move(merged));
  }

  // Unclaimed open tubes freeze: whatever lies before the window survives,
  // the in-window remainder has been regrouped by the re-link.
  for (std::size_t oi = 0; oi < open_.size(); ++oi) {
    if (consumed[oi]) continue;
    Tube& o = open_[oi];
    std::size_t prefix = 0;
    while (prefix < o.frames.size() && o.frames[prefix] < window_start) ++prefix;
    if (prefix == 0) continue;
    o.frames.resize(prefix);
    o.ids.resize(prefix);
    o.boxes.resize(prefix);
    o.raw_scores.resize(prefix);
    o.scores.resize(prefix);
    if (o.edge_weights.size() > prefix - 1) o.edge_weights.resize(prefix - 1);
    o.tube_score = std::accumulate(o.edge_weights.begin(), o.edge_weights.end(), 0.0);
    o.scores.assign(o.raw_scores.size(), rescore_value(o.raw_scores, cfg_.rescore));
    closed_.push_back(std::move(o));
  }

  open_ = std::move(next_open);
}

std::vector<Tube> OnlineLinker::finalize() const {
  std::vector<Tube> out;
  for (const auto& t : closed_)
    if (t.length() >= cfg_.min_tube_len) out.push_back(t);
  for (const auto& t : open_)
    if (t.length() >= cfg_.min_tube_len) out.push_back(t);
  sort_canonical(out);
  return out;
}

}  // namespace tracklink
