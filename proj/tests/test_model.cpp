#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "checkpoint.hpp"
#include "losses.hpp"
#include "model.hpp"
#include "rng.hpp"

using namespace gicn;
using ad::Tape;
using ad::Tensor;
using ad::Var;

namespace {

ModelConfig tiny_config() {
  ModelConfig cfg = ModelConfig::small(4, 3);
  cfg.knn_k = 4;
  return cfg;
}

Tensor random_features(Rng& rng, int n) {
  Tensor f(n, 9);
  for (double& v : f.data) v = rng.uniform(0.0, 1.0);
  return f;
}

std::vector<Point3> feature_positions(const Tensor& f) {
  std::vector<Point3> pts;
  for (int r = 0; r < f.rows; ++r) pts.push_back({f.at(r, 3), f.at(r, 4), f.at(r, 5)});
  return pts;
}

struct Forward {
  Tape tape;
  TapeParams tp;
  BackboneOut bb;
  Var q;
  Var sem;
};

void run_forward(Forward& fwd, const ModelParams& params, const Tensor& feats) {
  fwd.tp = bind_params(fwd.tape, params, false);
  auto knn = knn_indices(feature_positions(feats), params.config.knn_k);
  Var fv = fwd.tape.constant(feats);
  fwd.bb = backbone_forward(fwd.tape, fv, knn, fwd.tp, params.config);
  fwd.q = center_head_forward(fwd.tape, fwd.bb, fwd.tp, params.config);
  fwd.sem = semantic_head_forward(fwd.tape, fwd.bb, fwd.tp, params.config);
}

}  // namespace

TEST_CASE("zero-initialized heads open neutral") {
  ModelConfig cfg = tiny_config();
  ModelParams params = ModelParams::init(cfg, 3);
  Rng rng(4);
  Tensor feats = random_features(rng, 24);

  Forward fwd;
  run_forward(fwd, params, feats);

  for (int i = 0; i < fwd.q.rows(); ++i) CHECK(fwd.q.val().at(i, 0) == doctest::Approx(0.5));

  std::vector<int> cand{0, 5};
  Var size_logits = size_head_forward(fwd.tape, fwd.bb, cand, fwd.tp, cfg);
  Var probs = ad::softmax_rows(size_logits);
  for (int t = 0; t < 2; ++t)
    for (int k = 0; k < cfg.size_groups; ++k)
      CHECK(probs.val().at(t, k) == doctest::Approx(1.0 / cfg.size_groups));

  // box head degenerates to the candidate position
  Point3 cand_pos = feature_positions(feats)[0];
  std::vector<int> nbr{0, 1, 2};
  Var box = box_head_forward(fwd.tape, fwd.bb, 0, cand_pos, nbr, fwd.tp, cfg);
  CHECK(box.val().at(0, 0) == doctest::Approx(cand_pos.x));
  CHECK(box.val().at(0, 3) == doctest::Approx(cand_pos.x));
  CHECK(box.val().at(0, 5) == doctest::Approx(cand_pos.z));

  Var mask = mask_head_forward(fwd.tape, fwd.bb, box, fwd.tp, cfg);
  for (int i = 0; i < mask.rows(); ++i) CHECK(mask.val().at(i, 0) == doctest::Approx(0.5));
}

TEST_CASE("head outputs stay strictly inside (0,1) for random parameters") {
  ModelConfig cfg = tiny_config();
  ModelParams params = ModelParams::init(cfg, 3);
  // randomize the zero-initialized final layers too
  Rng prng(99);
  for (auto& [name, t] : params.tensors)
    for (double& v : t.data) v += prng.uniform(-0.3, 0.3);

  Rng rng(5);
  Tensor feats = random_features(rng, 16);
  Forward fwd;
  run_forward(fwd, params, feats);
  for (int i = 0; i < fwd.q.rows(); ++i) {
    CHECK(fwd.q.val().at(i, 0) > 0.0);
    CHECK(fwd.q.val().at(i, 0) < 1.0);
  }
  Var size_logits = size_head_forward(fwd.tape, fwd.bb, {1, 3, 7}, fwd.tp, cfg);
  Var probs = ad::softmax_rows(size_logits);
  for (int t = 0; t < 3; ++t) {
    double sum = 0;
    for (int k = 0; k < cfg.size_groups; ++k) sum += probs.val().at(t, k);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("permuting input rows permutes per-point outputs and fixes the global feature") {
  ModelConfig cfg = tiny_config();
  ModelParams params = ModelParams::init(cfg, 7);
  Rng prng(17);
  for (auto& [name, t] : params.tensors)
    for (double& v : t.data) v += prng.uniform(-0.2, 0.2);

  Rng rng(6);
  Tensor feats = random_features(rng, 12);
  std::vector<int> perm{7, 3, 11, 0, 5, 9, 1, 10, 2, 8, 4, 6};
  Tensor permuted(12, 9);
  for (int r = 0; r < 12; ++r)
    for (int c = 0; c < 9; ++c) permuted.at(r, c) = feats.at(perm[size_t(r)], c);

  Forward a, b;
  run_forward(a, params, feats);
  run_forward(b, params, permuted);

  // global feature is permutation invariant
  for (int c = 0; c < cfg.global_feat; ++c)
    CHECK(a.bb.global.val().at(0, c) == doctest::Approx(b.bb.global.val().at(0, c)).epsilon(1e-12));
  // per-point outputs are permutation equivariant
  for (int r = 0; r < 12; ++r) {
    CHECK(b.q.val().at(r, 0) == doctest::Approx(a.q.val().at(perm[size_t(r)], 0)).epsilon(1e-12));
    for (int c = 0; c < cfg.num_classes; ++c)
      CHECK(b.sem.val().at(r, c) ==
            doctest::Approx(a.sem.val().at(perm[size_t(r)], c)).epsilon(1e-12));
  }
}

TEST_CASE("duplicating every point leaves the global feature unchanged") {
  ModelConfig cfg = tiny_config();
  ModelParams params = ModelParams::init(cfg, 8);
  Rng prng(18);
  for (auto& [name, t] : params.tensors)
    for (double& v : t.data) v += prng.uniform(-0.2, 0.2);

  Rng rng(7);
  Tensor feats = random_features(rng, 10);
  Tensor doubled(20, 9);
  for (int r = 0; r < 10; ++r)
    for (int c = 0; c < 9; ++c) {
      doubled.at(r, c) = feats.at(r, c);
      doubled.at(r + 10, c) = feats.at(r, c);
    }
  Forward a, b;
  run_forward(a, params, feats);
  run_forward(b, params, doubled);
  for (int c = 0; c < cfg.global_feat; ++c)
    CHECK(a.bb.global.val().at(0, c) == doctest::Approx(b.bb.global.val().at(0, c)).epsilon(1e-12));
}

TEST_CASE("single point input stays valid") {
  ModelConfig cfg = tiny_config();
  ModelParams params = ModelParams::init(cfg, 1);
  Rng rng(8);
  Tensor feats = random_features(rng, 1);
  Forward fwd;
  run_forward(fwd, params, feats);
  CHECK(fwd.q.rows() == 1);
  CHECK(fwd.q.val().all_finite());
  CHECK(fwd.bb.global.val().all_finite());
}

TEST_CASE("semantic argmax is shift invariant") {
  ModelConfig cfg = tiny_config();
  ModelParams params = ModelParams::init(cfg, 9);
  Rng prng(21);
  for (auto& [name, t] : params.tensors)
    for (double& v : t.data) v += prng.uniform(-0.2, 0.2);
  Rng rng(9);
  Tensor feats = random_features(rng, 8);
  Forward fwd;
  run_forward(fwd, params, feats);
  for (int r = 0; r < 8; ++r) {
    int best = 0;
    for (int c = 1; c < cfg.num_classes; ++c)
      if (fwd.sem.val().at(r, c) > fwd.sem.val().at(r, best)) best = c;
    int best_shifted = 0;
    for (int c = 1; c < cfg.num_classes; ++c)
      if (fwd.sem.val().at(r, c) + 10.0 > fwd.sem.val().at(r, best_shifted) + 10.0)
        best_shifted = c;
    CHECK(best == best_shifted);
  }
}

TEST_CASE("enlarging the size context to the whole block reduces to global context") {
  ModelConfig cfg = tiny_config();
  ModelParams params = ModelParams::init(cfg, 10);
  Rng prng(23);
  for (auto& [name, t] : params.tensors)
    for (double& v : t.data) v += prng.uniform(-0.2, 0.2);
  Rng rng(10);
  Tensor feats = random_features(rng, 14);
  auto pts = feature_positions(feats);

  std::vector<int> all = neighborhood_rows(pts, {0.5, 0.5, 0.5}, {10, 10, 10});
  CHECK(all.size() == pts.size());

  Forward fwd;
  run_forward(fwd, params, feats);
  std::vector<int> everything(14);
  for (int i = 0; i < 14; ++i) everything[size_t(i)] = i;
  Var via_neighborhood = box_head_forward(fwd.tape, fwd.bb, 0, pts[0], all, fwd.tp, cfg);
  Var via_all = box_head_forward(fwd.tape, fwd.bb, 0, pts[0], everything, fwd.tp, cfg);
  for (int c = 0; c < 6; ++c)
    CHECK(via_neighborhood.val().at(0, c) == doctest::Approx(via_all.val().at(0, c)).epsilon(1e-12));
}

TEST_CASE("empty neighborhood falls back to the candidate row") {
  ModelConfig cfg = tiny_config();
  ModelParams params = ModelParams::init(cfg, 11);
  Rng rng(11);
  Tensor feats = random_features(rng, 6);
  Forward fwd;
  run_forward(fwd, params, feats);
  Var box = box_head_forward(fwd.tape, fwd.bb, 2, {0.1, 0.2, 0.3}, {}, fwd.tp, cfg);
  Var expected = box_head_forward(fwd.tape, fwd.bb, 2, {0.1, 0.2, 0.3}, {2}, fwd.tp, cfg);
  for (int c = 0; c < 6; ++c)
    CHECK(box.val().at(0, c) == expected.val().at(0, c));
}

TEST_CASE("knn_indices are deterministic, self-inclusive, and distance sorted") {
  std::vector<Point3> pts{{0, 0, 0}, {1, 0, 0}, {0.1, 0, 0}, {5, 5, 5}};
  auto knn = knn_indices(pts, 2);
  REQUIRE(knn.size() == 4);
  CHECK(knn[0][0] == 0);  // self is the nearest neighbor
  CHECK(knn[0][1] == 2);
  CHECK(knn[3][0] == 3);
  auto again = knn_indices(pts, 2);
  CHECK(knn == again);
}

TEST_CASE("model parameters round trip through a checkpoint bit exactly") {
  ModelConfig cfg = tiny_config();
  ModelParams params = ModelParams::init(cfg, 42);
  std::string path = "/tmp/gicn_test_model.ckpt";
  save_checkpoint(path, params.tensors, cfg.to_json());
  Checkpoint ck = load_checkpoint(path);
  ModelConfig cfg_back = ModelConfig::from_json(ck.meta);
  CHECK(cfg_back.point_feat == cfg.point_feat);
  CHECK(cfg_back.knn_k == cfg.knn_k);
  REQUIRE(ck.params.size() == params.tensors.size());
  for (const auto& [name, t] : params.tensors) {
    REQUIRE(ck.params.count(name) == 1);
    CHECK(ck.params.at(name).data == t.data);
  }
}

TEST_CASE("gradient check through the composed center loss on a toy block") {
  ModelConfig cfg = tiny_config();
  cfg.mlp1 = {8, 12};
  cfg.point_feat = 12;
  cfg.global_feat = 16;
  cfg.center_head = {8, 6, 4};
  cfg.semantic_hidden = 6;
  ModelParams params = ModelParams::init(cfg, 5);
  Rng prng(31);
  for (auto& [name, t] : params.tensors)
    for (double& v : t.data) v += prng.uniform(-0.25, 0.25);

  Rng rng(13);
  Tensor feats = random_features(rng, 32);
  auto knn = knn_indices(feature_positions(feats), cfg.knn_k);
  std::vector<char> focal(32);
  for (size_t i = 0; i < 32; ++i) focal[i] = rng.uniform() < 0.3 ? 1 : 0;
  LossConfig lc;

  // probe the first backbone weight through the full center-head loss
  Tensor probe = params.tensors.at("backbone.mlp1.0.w");
  double err = ad::gradient_check(
      [&](Tape& t, Var x) {
        TapeParams tp;
        for (const auto& [name, tensor] : params.tensors)
          tp.vars.emplace(name, name == "backbone.mlp1.0.w" ? x : t.constant(tensor));
        BackboneOut bb = backbone_forward(t, t.constant(feats), knn, tp, cfg);
        Var q = center_head_forward(t, bb, tp, cfg);
        return center_focal_loss(t, q, focal, lc);
      },
      probe);
  CHECK(err <= 1e-4);
}
