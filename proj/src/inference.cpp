#include "inference.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "errors.hpp"
#include "losses.hpp"
#include "rng.hpp"

namespace gicn {

namespace {

std::vector<CenterCandidate> greedy_selection(const std::vector<double>& q_in,
                                              const std::vector<int>& classes,
                                              const std::vector<Point3>& positions,
                                              const ClassRadiusTable& radii,
                                              const SelectionConfig& cfg) {
  std::vector<double> q = q_in;
  int n = int(q.size());
  std::vector<CenterCandidate> out;
  while (int(out.size()) < cfg.max_candidates) {
    int best = -1;
    double best_q = -1.0;
    for (int i = 0; i < n; ++i)
      if (q[size_t(i)] > best_q) {
        best_q = q[size_t(i)];
        best = i;
      }
    if (best < 0 || best_q < cfg.q_threshold) break;
    int cls = classes[size_t(best)];
    double r = cfg.uniform_radius ? radii.global_radius : radii.lookup(cls);
    out.push_back({best, positions[size_t(best)], best_q, cls});
    for (int i = 0; i < n; ++i)
      if (distance(positions[size_t(i)], positions[size_t(best)]) <= r) q[size_t(i)] = 0.0;
  }
  return out;
}

std::vector<CenterCandidate> random_selection(const std::vector<double>& q,
                                              const std::vector<int>& classes,
                                              const std::vector<Point3>& positions,
                                              const SelectionConfig& cfg) {
  int n = int(q.size());
  int take = std::min(cfg.max_candidates, n);
  Rng rng(Rng::mix(0xCE17E25ull, cfg.random_seed));
  std::vector<CenterCandidate> out;
  for (int i : rng.sample_without_replacement(n, take))
    out.push_back({i, positions[size_t(i)], q[size_t(i)], classes[size_t(i)]});
  return out;
}

std::vector<CenterCandidate> topk_selection(const std::vector<double>& q,
                                            const std::vector<int>& classes,
                                            const std::vector<Point3>& positions,
                                            const SelectionConfig& cfg) {
  int n = int(q.size());
  std::vector<int> order(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) order[size_t(i)] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return q[size_t(a)] > q[size_t(b)]; });
  int take = std::min(cfg.max_candidates, n);
  std::vector<CenterCandidate> out;
  for (int r = 0; r < take; ++r) {
    int i = order[size_t(r)];
    out.push_back({i, positions[size_t(i)], q[size_t(i)], classes[size_t(i)]});
  }
  return out;
}

}  // namespace

std::vector<CenterCandidate> select_centers(const std::vector<double>& q,
                                            const std::vector<int>& classes,
                                            const std::vector<Point3>& positions,
                                            const ClassRadiusTable& radii,
                                            const SelectionConfig& cfg) {
  if (q.size() != classes.size() || q.size() != positions.size())
    throw std::invalid_argument("select_centers: mismatched input lengths");
  switch (cfg.mode) {
    case SelectionConfig::Mode::Greedy:
      return greedy_selection(q, classes, positions, radii, cfg);
    case SelectionConfig::Mode::Random:
      return random_selection(q, classes, positions, cfg);
    case SelectionConfig::Mode::TopK:
      return topk_selection(q, classes, positions, cfg);
  }
  return {};
}

std::vector<int> associate_candidates_to_gt(const std::vector<CenterCandidate>& candidates,
                                            const std::vector<Point3>& gt_centers,
                                            const std::vector<double>& gt_radii) {
  if (gt_centers.size() != gt_radii.size())
    throw std::invalid_argument("associate_candidates_to_gt: mismatched gt arrays");
  std::vector<int> assign(candidates.size(), -1);
  std::vector<double> assign_dist(candidates.size(), 0.0);
  for (size_t c = 0; c < candidates.size(); ++c) {
    int best = -1;
    double best_d = 0.0;
    for (size_t g = 0; g < gt_centers.size(); ++g) {
      double d = distance(candidates[c].position, gt_centers[g]);
      if (d > gt_radii[g]) continue;
      if (best < 0 || d < best_d) {
        best = int(g);
        best_d = d;
      }
    }
    assign[c] = best;
    assign_dist[c] = best_d;
  }
  // every gt keeps only its nearest claimant; ties keep the earlier candidate
  for (size_t g = 0; g < gt_centers.size(); ++g) {
    int winner = -1;
    for (size_t c = 0; c < candidates.size(); ++c) {
      if (assign[c] != int(g)) continue;
      if (winner < 0 || assign_dist[c] < assign_dist[size_t(winner)]) winner = int(c);
    }
    for (size_t c = 0; c < candidates.size(); ++c)
      if (assign[c] == int(g) && int(c) != winner) assign[c] = -1;
  }
  return assign;
}

BlockOutputs forward_block(const Block& block, const ModelParams& params) {
  ad::Tape tape;
  TapeParams tp = bind_params(tape, params, false);
  std::vector<Point3> pts;
  pts.reserve(block.sampled.size());
  for (int r = 0; r < block.features.rows; ++r)
    pts.push_back({block.features.at(r, 3), block.features.at(r, 4), block.features.at(r, 5)});
  auto knn = knn_indices(pts, params.config.knn_k);
  ad::Var feats = tape.constant(block.features);
  BackboneOut bb = backbone_forward(tape, feats, knn, tp, params.config);
  ad::Var q = center_head_forward(tape, bb, tp, params.config);
  ad::Var logits = semantic_head_forward(tape, bb, tp, params.config);

  BlockOutputs out;
  out.center_q.resize(size_t(q.rows()));
  for (int i = 0; i < q.rows(); ++i) out.center_q[size_t(i)] = q.val().at(i, 0);
  out.semantic_label.resize(size_t(logits.rows()));
  for (int i = 0; i < logits.rows(); ++i) {
    int best = 0;
    for (int c = 1; c < logits.cols(); ++c)
      if (logits.val().at(i, c) > logits.val().at(i, best)) best = c;
    out.semantic_label[size_t(i)] = best;
  }
  return out;
}

namespace {

// Shared forward pass used by extraction: run the full per-block pipeline on
// one tape and emit instances.
std::vector<BlockInstance> extract_impl(const Block& block, const Scene& scene,
                                        const ModelParams& params, const StatsTables& stats,
                                        const InferConfig& cfg) {
  const ModelConfig& mc = params.config;
  ad::Tape tape;
  TapeParams tp = bind_params(tape, params, false);

  int n = block.features.rows;
  std::vector<Point3> block_pts(static_cast<size_t>(n));   // block-normalized frame
  std::vector<Point3> world_pts(static_cast<size_t>(n));
  for (int r = 0; r < n; ++r) {
    block_pts[size_t(r)] = {block.features.at(r, 3), block.features.at(r, 4),
                            block.features.at(r, 5)};
    world_pts[size_t(r)] = scene.cloud.positions[size_t(block.sampled[size_t(r)])];
  }
  auto knn = knn_indices(block_pts, mc.knn_k);
  ad::Var feats = tape.constant(block.features);
  BackboneOut bb = backbone_forward(tape, feats, knn, tp, mc);
  ad::Var qv = center_head_forward(tape, bb, tp, mc);
  ad::Var logits = semantic_head_forward(tape, bb, tp, mc);

  std::vector<double> q(static_cast<size_t>(n));
  std::vector<int> sem(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    q[size_t(i)] = qv.val().at(i, 0);
    int best = 0;
    for (int c = 1; c < logits.cols(); ++c)
      if (logits.val().at(i, c) > logits.val().at(i, best)) best = c;
    sem[size_t(i)] = best;
  }

  auto candidates = select_centers(q, sem, world_pts, stats.radii, cfg.selection);
  std::vector<BlockInstance> out;
  if (candidates.empty()) return out;

  std::vector<int> cand_rows;
  for (const auto& c : candidates) cand_rows.push_back(c.point_index);
  ad::Var size_logits = size_head_forward(tape, bb, cand_rows, tp, mc);

  for (size_t t = 0; t < candidates.size(); ++t) {
    const CenterCandidate& cand = candidates[t];
    // chosen size group: argmax row, ties to the lowest index
    int kstar = 0;
    for (int k = 1; k < size_logits.cols(); ++k)
      if (size_logits.val().at(int(t), k) > size_logits.val().at(int(t), kstar)) kstar = k;
    Point3 ext = stats.groups.groups.empty()
                     ? Point3{0.5, 0.5, 0.5}
                     : stats.groups.groups[size_t(std::min(kstar, int(stats.groups.groups.size()) - 1))]
                           .mean_extents;
    // context and box prediction live in the block-normalized frame
    Point3 cand_block = block_pts[size_t(cand.point_index)];
    Point3 ext_block = ext * (1.0 / block.size);
    auto nbr = neighborhood_rows(block_pts, cand_block, ext_block);
    ad::Var box = box_head_forward(tape, bb, cand.point_index, cand_block, nbr, tp, mc);
    ad::Var box_canon = canonicalize_boxes(tape, box);
    ad::Var mask = mask_head_forward(tape, bb, box_canon, tp, mc);

    BlockInstance inst;
    inst.confidence = cand.value;
    std::vector<int> votes(size_t(mc.num_classes), 0);
    for (int i = 0; i < n; ++i) {
      if (mask.val().at(i, 0) <= 0.5) continue;
      inst.points.push_back(block.sampled[size_t(i)]);
      votes[size_t(sem[size_t(i)])] += 1;
    }
    std::sort(inst.points.begin(), inst.points.end());
    inst.points.erase(std::unique(inst.points.begin(), inst.points.end()), inst.points.end());
    if (int(inst.points.size()) < cfg.min_instance_points) continue;
    // majority class among non-background predictions; background-only masks
    // carry no usable label
    int best_cls = 0;
    int best_votes = 0;
    for (int c = 1; c < mc.num_classes; ++c)
      if (votes[size_t(c)] > best_votes) {
        best_votes = votes[size_t(c)];
        best_cls = c;
      }
    if (best_cls == 0) continue;
    inst.semantic_class = best_cls;

    const ad::Tensor& bt = box_canon.val();
    Point3 lo{block.origin.x + bt.at(0, 0) * block.size, block.origin.y + bt.at(0, 1) * block.size,
              block.origin.z + bt.at(0, 2) * block.size};
    Point3 hi{block.origin.x + bt.at(0, 3) * block.size, block.origin.y + bt.at(0, 4) * block.size,
              block.origin.z + bt.at(0, 5) * block.size};
    inst.box = canonicalized(lo, hi);
    out.push_back(std::move(inst));
  }
  return out;
}

size_t intersection_size(const std::vector<int>& a, const std::vector<int>& b) {
  size_t count = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib)
      ++ia;
    else if (*ib < *ia)
      ++ib;
    else {
      ++count;
      ++ia;
      ++ib;
    }
  }
  return count;
}

}  // namespace

std::vector<BlockInstance> extract_block_instances(const Block& block, const Scene& scene,
                                                   const ModelParams& params,
                                                   const StatsTables& stats,
                                                   const InferConfig& cfg) {
  return extract_impl(block, scene, params, stats, cfg);
}

SceneInstances block_merge(const std::vector<std::vector<BlockInstance>>& per_block,
                           double merge_threshold, int min_points) {
  SceneInstances out;
  for (const auto& block : per_block) {
    for (const auto& inst : block) {
      int best = -1;
      double best_ratio = merge_threshold;
      for (size_t s = 0; s < out.instances.size(); ++s) {
        SceneInstance& existing = out.instances[s];
        if (existing.semantic_class != inst.semantic_class) continue;
        double ratio = double(intersection_size(inst.points, existing.points)) /
                       double(inst.points.size());
        if (ratio > best_ratio) {
          best_ratio = ratio;
          best = int(s);
        }
      }
      if (best >= 0) {
        SceneInstance& target = out.instances[size_t(best)];
        std::vector<int> merged;
        merged.reserve(target.points.size() + inst.points.size());
        std::set_union(target.points.begin(), target.points.end(), inst.points.begin(),
                       inst.points.end(), std::back_inserter(merged));
        target.points = std::move(merged);
        target.box = enclosing(target.box, inst.box);
        target.confidence_sum += inst.confidence;
        target.candidate_count += 1;
      } else {
        SceneInstance fresh;
        fresh.points = inst.points;
        fresh.semantic_class = inst.semantic_class;
        fresh.box = inst.box;
        fresh.confidence_sum = inst.confidence;
        fresh.candidate_count = 1;
        out.instances.push_back(std::move(fresh));
      }
    }
  }

  // ownership pass: each point goes to its highest-confidence claimant
  std::map<int, int> owner;
  for (size_t s = 0; s < out.instances.size(); ++s) {
    for (int p : out.instances[s].points) {
      auto it = owner.find(p);
      if (it == owner.end() ||
          out.instances[s].confidence() > out.instances[size_t(it->second)].confidence())
        owner[p] = int(s);
    }
  }
  for (size_t s = 0; s < out.instances.size(); ++s) {
    std::vector<int> kept;
    for (int p : out.instances[s].points)
      if (owner[p] == int(s)) kept.push_back(p);
    out.instances[s].points = std::move(kept);
  }
  std::vector<SceneInstance> filtered;
  for (auto& inst : out.instances)
    if (int(inst.points.size()) >= min_points) filtered.push_back(std::move(inst));
  out.instances = std::move(filtered);
  return out;
}

SceneInstances run_inference(const Scene& scene, const ModelParams& params,
                             const StatsTables& stats, const InferConfig& cfg) {
  auto blocks = slice_into_cubes(scene, cfg.cube, cfg.stride);
  std::vector<std::vector<BlockInstance>> per_block;
  per_block.reserve(blocks.size());
  for (size_t b = 0; b < blocks.size(); ++b) {
    sample_points(blocks[b], cfg.sample_points, Rng::mix(cfg.sample_seed, b));
    build_features(blocks[b], scene);
    per_block.push_back(extract_block_instances(blocks[b], scene, params, stats, cfg));
  }
  return block_merge(per_block, 0.5, cfg.min_instance_points);
}

void write_instances(const SceneInstances& instances, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("write_instances: cannot open '" + path + "' for writing");
  out << instances.instances.size() << '\n';
  char buf[256];
  for (const auto& inst : instances.instances) {
    std::snprintf(buf, sizeof(buf), "%d %.17g %.17g %.17g %.17g %.17g %.17g %.17g %zu",
                  inst.semantic_class, inst.confidence(), inst.box.min_corner.x,
                  inst.box.min_corner.y, inst.box.min_corner.z, inst.box.max_corner.x,
                  inst.box.max_corner.y, inst.box.max_corner.z, inst.points.size());
    out << buf;
    for (int p : inst.points) out << ' ' << p;
    out << '\n';
  }
  if (!out) throw IoError("write_instances: write failed for '" + path + "'");
}

SceneInstances read_instances(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("read_instances: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ParseError("read_instances: empty file '" + path + "'");
  size_t count = 0;
  {
    std::istringstream hs(line);
    if (!(hs >> count)) throw ParseError("read_instances: line 1: bad instance count");
  }
  SceneInstances out;
  for (size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line))
      throw ParseError("read_instances: line " + std::to_string(i + 2) + ": unexpected end of file");
    std::istringstream ls(line);
    SceneInstance inst;
    double conf;
    size_t npts;
    if (!(ls >> inst.semantic_class >> conf >> inst.box.min_corner.x >> inst.box.min_corner.y >>
          inst.box.min_corner.z >> inst.box.max_corner.x >> inst.box.max_corner.y >>
          inst.box.max_corner.z >> npts))
      throw ParseError("read_instances: line " + std::to_string(i + 2) + ": bad instance row");
    inst.confidence_sum = conf;
    inst.candidate_count = 1;
    inst.points.resize(npts);
    for (size_t p = 0; p < npts; ++p)
      if (!(ls >> inst.points[p]))
        throw ParseError("read_instances: line " + std::to_string(i + 2) +
                         ": expected " + std::to_string(npts) + " point indices");
    out.instances.push_back(std::move(inst));
  }
  return out;
}

void write_instances_ply(const Scene& scene, const SceneInstances& instances,
                         const std::string& path) {
  // deterministic palette, one distinct-ish color per instance
  std::vector<Rgb> colors(scene.num_points(), Rgb{0.35, 0.35, 0.35});
  for (size_t s = 0; s < instances.instances.size(); ++s) {
    Rng rng(Rng::mix(0xC0108ull, s));
    Rgb c{0.25 + 0.75 * rng.uniform(), 0.25 + 0.75 * rng.uniform(), 0.25 + 0.75 * rng.uniform()};
    for (int p : instances.instances[s].points)
      if (p >= 0 && size_t(p) < colors.size()) colors[size_t(p)] = c;
  }
  Scene colored = scene;
  colored.cloud.colors = colors;
  write_scene_ply(colored, path);
}

}  // namespace gicn
