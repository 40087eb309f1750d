#include "model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <tuple>

#include "rng.hpp"

namespace gicn {

using ad::Tape;
using ad::Tensor;
using ad::Var;

nlohmann::json ModelConfig::to_json() const {
  return {{"input_dim", input_dim},
          {"num_classes", num_classes},
          {"size_groups", size_groups},
          {"point_feat", point_feat},
          {"global_feat", global_feat},
          {"knn_k", knn_k},
          {"mlp1", mlp1},
          {"center_head", center_head},
          {"semantic_hidden", semantic_hidden},
          {"size_hidden", size_hidden},
          {"box_pre", box_pre},
          {"box_post", box_post},
          {"mask_reduce_point", mask_reduce_point},
          {"mask_reduce_global", mask_reduce_global},
          {"mask_head", mask_head}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.input_dim = j.value("input_dim", c.input_dim);
  c.num_classes = j.value("num_classes", c.num_classes);
  c.size_groups = j.value("size_groups", c.size_groups);
  c.point_feat = j.value("point_feat", c.point_feat);
  c.global_feat = j.value("global_feat", c.global_feat);
  c.knn_k = j.value("knn_k", c.knn_k);
  c.mlp1 = j.value("mlp1", c.mlp1);
  c.center_head = j.value("center_head", c.center_head);
  c.semantic_hidden = j.value("semantic_hidden", c.semantic_hidden);
  c.size_hidden = j.value("size_hidden", c.size_hidden);
  c.box_pre = j.value("box_pre", c.box_pre);
  c.box_post = j.value("box_post", c.box_post);
  c.mask_reduce_point = j.value("mask_reduce_point", c.mask_reduce_point);
  c.mask_reduce_global = j.value("mask_reduce_global", c.mask_reduce_global);
  c.mask_head = j.value("mask_head", c.mask_head);
  return c;
}

ModelConfig ModelConfig::small(int num_classes, int size_groups) {
  ModelConfig c;
  c.num_classes = num_classes;
  c.size_groups = size_groups;
  c.point_feat = 64;
  c.global_feat = 128;
  c.knn_k = 8;
  c.mlp1 = {32, 64};
  c.center_head = {64, 32, 16};
  c.semantic_hidden = 32;
  c.size_hidden = {64};
  c.box_pre = {64, 128};
  c.box_post = {96};
  c.mask_reduce_point = 32;
  c.mask_reduce_global = 32;
  c.mask_head = {32, 16};
  return c;
}

namespace {

Tensor init_weight(Rng& rng, int in, int out) {
  Tensor w(in, out);
  double bound = std::sqrt(6.0 / double(in + out));
  for (double& v : w.data) v = rng.uniform(-bound, bound);
  return w;
}

void add_linear(std::map<std::string, Tensor>& t, Rng& rng, const std::string& name, int in,
                int out, bool zero_init) {
  t[name + ".w"] = zero_init ? Tensor(in, out, 0.0) : init_weight(rng, in, out);
  t[name + ".b"] = Tensor(1, out, 0.0);
}

// A stack of linear layers; widths[i] are outputs, final layer optionally
// zero-initialized.
void add_mlp(std::map<std::string, Tensor>& t, Rng& rng, const std::string& prefix, int in,
             const std::vector<int>& widths, int final_out, bool zero_final) {
  int cur = in;
  for (size_t i = 0; i < widths.size(); ++i) {
    add_linear(t, rng, prefix + "." + std::to_string(i), cur, widths[size_t(i)], false);
    cur = widths[size_t(i)];
  }
  add_linear(t, rng, prefix + ".out", cur, final_out, zero_final);
}

Var linear(Var x, const TapeParams& p, const std::string& name) {
  return ad::add(ad::matmul(x, p.at(name + ".w")), p.at(name + ".b"));
}

Var mlp(Var x, const TapeParams& p, const std::string& prefix, size_t hidden) {
  for (size_t i = 0; i < hidden; ++i)
    x = ad::relu(linear(x, p, prefix + "." + std::to_string(i)));
  return linear(x, p, prefix + ".out");
}

}  // namespace

ModelParams ModelParams::init(const ModelConfig& cfg, uint64_t seed) {
  ModelParams mp;
  mp.config = cfg;
  Rng rng(Rng::mix(0x6D0DE1ull, seed));
  auto& t = mp.tensors;

  int cur = cfg.input_dim;
  for (size_t i = 0; i < cfg.mlp1.size(); ++i) {
    add_linear(t, rng, "backbone.mlp1." + std::to_string(i), cur, cfg.mlp1[size_t(i)], false);
    cur = cfg.mlp1[size_t(i)];
  }
  int h1 = cur;
  add_linear(t, rng, "backbone.fuse_local", 2 * h1, cfg.point_feat, false);
  add_linear(t, rng, "backbone.global", cfg.point_feat, cfg.global_feat, false);
  add_linear(t, rng, "backbone.fuse_global", cfg.point_feat + cfg.global_feat, cfg.point_feat,
             false);

  add_mlp(t, rng, "center", cfg.point_feat, cfg.center_head, 1, true);
  add_mlp(t, rng, "semantic", cfg.point_feat, {cfg.semantic_hidden}, cfg.num_classes, true);
  add_mlp(t, rng, "size", cfg.point_feat + cfg.global_feat, cfg.size_hidden, cfg.size_groups,
          true);

  cur = cfg.point_feat;
  for (size_t i = 0; i < cfg.box_pre.size(); ++i) {
    add_linear(t, rng, "box.pre." + std::to_string(i), cur, cfg.box_pre[size_t(i)], false);
    cur = cfg.box_pre[size_t(i)];
  }
  add_mlp(t, rng, "box.post", cur + cfg.global_feat, cfg.box_post, 6, true);

  add_linear(t, rng, "mask.reduce_point", cfg.point_feat, cfg.mask_reduce_point, false);
  add_linear(t, rng, "mask.reduce_global", cfg.global_feat, cfg.mask_reduce_global, false);
  add_mlp(t, rng, "mask", cfg.mask_reduce_point + cfg.mask_reduce_global + 6, cfg.mask_head, 1,
          true);
  return mp;
}

Var TapeParams::at(const std::string& name) const {
  auto it = vars.find(name);
  if (it == vars.end()) throw std::invalid_argument("TapeParams: unknown parameter '" + name + "'");
  return it->second;
}

TapeParams bind_params(Tape& tape, const ModelParams& params, bool requires_grad) {
  TapeParams tp;
  for (const auto& [name, tensor] : params.tensors)
    tp.vars.emplace(name, tape.leaf(tensor, requires_grad));
  return tp;
}

std::vector<std::vector<int>> knn_indices(const std::vector<Point3>& pts, int k) {
  int n = int(pts.size());
  // group coincident points so neighborhoods count distinct positions; the
  // local max-pool then ignores point duplication
  std::vector<int> group_of(static_cast<size_t>(n), -1);
  std::vector<Point3> unique_pos;
  std::vector<std::vector<int>> group_members;
  {
    std::map<std::tuple<double, double, double>, int> seen;
    for (int i = 0; i < n; ++i) {
      auto key = std::make_tuple(pts[size_t(i)].x, pts[size_t(i)].y, pts[size_t(i)].z);
      auto [it, fresh] = seen.emplace(key, int(unique_pos.size()));
      if (fresh) {
        unique_pos.push_back(pts[size_t(i)]);
        group_members.emplace_back();
      }
      group_of[size_t(i)] = it->second;
      group_members[size_t(it->second)].push_back(i);
    }
  }
  int u = int(unique_pos.size());
  int kk = std::min(k, u);
  std::vector<std::vector<int>> nearest_groups(static_cast<size_t>(u));
  std::vector<std::pair<double, int>> dist(static_cast<size_t>(u));
  for (int g = 0; g < u; ++g) {
    for (int h = 0; h < u; ++h) {
      const Point3 d = unique_pos[size_t(h)] - unique_pos[size_t(g)];
      dist[size_t(h)] = {d.x * d.x + d.y * d.y + d.z * d.z, h};
    }
    std::partial_sort(dist.begin(), dist.begin() + kk, dist.end());
    nearest_groups[size_t(g)].reserve(size_t(kk));
    for (int j = 0; j < kk; ++j) nearest_groups[size_t(g)].push_back(dist[size_t(j)].second);
  }
  std::vector<std::vector<int>> out(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i)
    for (int g : nearest_groups[size_t(group_of[size_t(i)])])
      for (int j : group_members[size_t(g)]) out[size_t(i)].push_back(j);
  return out;
}

BackboneOut backbone_forward(Tape& tape, Var feats, const std::vector<std::vector<int>>& knn,
                             const TapeParams& p, const ModelConfig& cfg) {
  Var h = feats;
  for (size_t i = 0; i < cfg.mlp1.size(); ++i)
    h = ad::relu(linear(h, p, "backbone.mlp1." + std::to_string(i)));
  Var local = ad::knn_max(h, knn);
  Var h2 = ad::relu(linear(ad::concat_cols(h, local), p, "backbone.fuse_local"));
  Var g_pre = ad::relu(linear(h2, p, "backbone.global"));
  Var g = ad::max_over_rows(g_pre);
  Var fused = ad::relu(
      linear(ad::concat_cols(h2, ad::repeat_rows(g, h2.rows())), p, "backbone.fuse_global"));
  return {fused, g};
}

Var center_head_forward(Tape& tape, const BackboneOut& bb, const TapeParams& p,
                        const ModelConfig& cfg) {
  return ad::sigmoid(mlp(bb.per_point, p, "center", cfg.center_head.size()));
}

Var semantic_head_forward(Tape& tape, const BackboneOut& bb, const TapeParams& p,
                          const ModelConfig& cfg) {
  return mlp(bb.per_point, p, "semantic", 1);
}

Var size_head_forward(Tape& tape, const BackboneOut& bb, const std::vector<int>& candidate_rows,
                      const TapeParams& p, const ModelConfig& cfg) {
  if (candidate_rows.empty())
    throw std::invalid_argument("size_head_forward: no candidates");
  Var rows = ad::gather_rows(bb.per_point, candidate_rows);
  Var ctx = ad::concat_cols(rows, ad::repeat_rows(bb.global, int(candidate_rows.size())));
  return mlp(ctx, p, "size", cfg.size_hidden.size());
}

Var box_head_forward(Tape& tape, const BackboneOut& bb, int candidate_row,
                     const Point3& candidate_pos, const std::vector<int>& neighborhood,
                     const TapeParams& p, const ModelConfig& cfg) {
  std::vector<int> rows = neighborhood;
  if (rows.empty()) rows.push_back(candidate_row);
  Var h = ad::gather_rows(bb.per_point, rows);
  for (size_t i = 0; i < cfg.box_pre.size(); ++i)
    h = ad::relu(linear(h, p, "box.pre." + std::to_string(i)));
  Var pooled = ad::max_over_rows(h);
  Var ctx = ad::concat_cols(pooled, bb.global);
  Var offsets = mlp(ctx, p, "box.post", cfg.box_post.size());
  Var base = tape.constant(ad::Tensor::row({candidate_pos.x, candidate_pos.y, candidate_pos.z,
                                            candidate_pos.x, candidate_pos.y, candidate_pos.z}));
  return ad::add(offsets, base);
}

Var mask_head_forward(Tape& tape, const BackboneOut& bb, Var box, const TapeParams& p,
                      const ModelConfig& cfg) {
  int n = bb.per_point.rows();
  Var pf = ad::relu(linear(bb.per_point, p, "mask.reduce_point"));
  Var gf = ad::relu(linear(bb.global, p, "mask.reduce_global"));
  Var x = ad::concat_cols(ad::concat_cols(pf, ad::repeat_rows(gf, n)), ad::repeat_rows(box, n));
  return ad::sigmoid(mlp(x, p, "mask", cfg.mask_head.size()));
}

std::vector<int> neighborhood_rows(const std::vector<Point3>& pts, const Point3& center,
                                   const Point3& extents) {
  std::vector<int> out;
  Point3 half = extents * 0.5;
  for (size_t i = 0; i < pts.size(); ++i) {
    Point3 d = pts[i] - center;
    if (std::fabs(d.x) <= half.x && std::fabs(d.y) <= half.y && std::fabs(d.z) <= half.z)
      out.push_back(int(i));
  }
  return out;
}

}  // namespace gicn
