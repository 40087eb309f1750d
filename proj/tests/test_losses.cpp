#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "errors.hpp"
#include "losses.hpp"
#include "rng.hpp"

using namespace gicn;
using ad::Tape;
using ad::Tensor;
using ad::Var;

namespace {

double focal_value(double q, bool positive, const LossConfig& cfg) {
  Tape tape;
  Var qv = tape.leaf(Tensor::column({q}), false);
  return center_focal_loss(tape, qv, {char(positive)}, cfg).scalar();
}

}  // namespace

TEST_CASE("center focal loss hand values") {
  LossConfig cfg;  // alpha 0.25, gamma 2

  // single positive with Q=0.9: -0.25 * 0.1^2 * ln(0.9)
  CHECK(focal_value(0.9, true, cfg) == doctest::Approx(2.634012891445657e-4).epsilon(1e-9));

  // perfect predictions drive the loss to zero
  CHECK(focal_value(1.0 - 1e-9, true, cfg) <= 1e-12);
  CHECK(focal_value(1e-9, false, cfg) <= 1e-12);
}

TEST_CASE("focal loss with alpha 1, gamma 0 equals binary cross entropy") {
  LossConfig cfg;
  cfg.focal_alpha = 1.0;
  cfg.focal_gamma = 0.0;
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    double q = rng.uniform(0.05, 0.95);
    bool pos = rng.uniform() < 0.5;
    double bce = pos ? -std::log(q) : -std::log(1.0 - q);
    CHECK(focal_value(q, pos, cfg) == doctest::Approx(bce).epsilon(1e-12));
  }
}

TEST_CASE("center focal loss normalizes by point count") {
  LossConfig cfg;
  Tape tape;
  Var q = tape.leaf(Tensor::column({0.9, 0.9, 0.9, 0.9}), false);
  double v = center_focal_loss(tape, q, {1, 1, 1, 1}, cfg).scalar();
  CHECK(v == doctest::Approx(2.634012891445657e-4).epsilon(1e-9));
}

TEST_CASE("probabilities touching the clamp bound stay finite") {
  LossConfig cfg;
  Tape tape;
  Var q = tape.leaf(Tensor::column({0.0, 1.0}), true);
  Var loss = center_focal_loss(tape, q, {1, 0}, cfg);
  CHECK(std::isfinite(loss.scalar()));
  tape.backward(loss);
  CHECK(tape.grad(q.id).all_finite());
}

TEST_CASE("size cross entropy hand values") {
  LossConfig cfg;
  SUBCASE("uniform over six groups") {
    Tape tape;
    Var logits = tape.leaf(Tensor(3, 6, 0.0), false);
    double v = size_ce_loss(tape, logits, {0, 3, 5}, cfg).scalar();
    CHECK(v == doctest::Approx(std::log(6.0)).epsilon(1e-12));
    CHECK(v == doctest::Approx(1.791759469228055).epsilon(1e-9));
  }
  SUBCASE("probability one half") {
    Tape tape;
    Tensor t(1, 2, 0.0);
    Var logits = tape.leaf(t, false);  // softmax -> (0.5, 0.5)
    double v = size_ce_loss(tape, logits, {1}, cfg).scalar();
    CHECK(v == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(v == doctest::Approx(0.6931471805599453).epsilon(1e-9));
  }
  SUBCASE("perfect confidence gives zero") {
    Tape tape;
    Tensor t(1, 3, 0.0);
    t.at(0, 2) = 60.0;  // softmax saturates at 1 for the target
    Var logits = tape.leaf(t, false);
    CHECK(size_ce_loss(tape, logits, {2}, cfg).scalar() <= 1e-12);
  }
}

TEST_CASE("bound loss hand values") {
  LossConfig cfg;  // beta 1
  SUBCASE("exact boxes give zero") {
    Tape tape;
    Tensor gt(1, 6);
    for (int c = 0; c < 6; ++c) gt.at(0, c) = 0.1 * c;
    Var pred = tape.leaf(gt, false);
    CHECK(bound_loss(tape, pred, gt, cfg).scalar() == 0.0);
  }
  SUBCASE("half-unit error in one coordinate") {
    Tape tape;
    Tensor gt(1, 6, 0.0);
    Tensor p(1, 6, 0.0);
    p.at(0, 2) = 0.5;
    Var pred = tape.leaf(p, false);
    CHECK(bound_loss(tape, pred, gt, cfg).scalar() ==
          doctest::Approx(0.125 / 6.0).epsilon(1e-9));
  }
  SUBCASE("two-unit error leaves the linear branch") {
    Tape tape;
    Tensor gt(1, 6, 0.0);
    Tensor p(1, 6, 0.0);
    p.at(0, 4) = 2.0;
    Var pred = tape.leaf(p, false);
    CHECK(bound_loss(tape, pred, gt, cfg).scalar() == doctest::Approx(0.25).epsilon(1e-9));
  }
}

TEST_CASE("bound loss is continuously differentiable at the beta transition") {
  LossConfig cfg;
  auto grad_at = [&](double d) {
    Tape tape;
    Tensor p(1, 6, 0.0);
    p.at(0, 0) = d;
    Var pred = tape.leaf(p, true);
    Var loss = bound_loss(tape, pred, Tensor(1, 6, 0.0), cfg);
    tape.backward(loss);
    return tape.grad(pred.id).at(0, 0);
  };
  double below = grad_at(1.0 - 1e-9);
  double above = grad_at(1.0 + 1e-9);
  CHECK(below == doctest::Approx(above).epsilon(1e-6));
}

TEST_CASE("giou loss hand values") {
  SUBCASE("perfect boxes give zero") {
    Tape tape;
    Tensor gt(1, 6);
    double corners[6] = {0, 0, 0, 1, 1, 1};
    for (int c = 0; c < 6; ++c) gt.at(0, c) = corners[c];
    Var pred = tape.leaf(gt, false);
    CHECK(giou_loss(tape, pred, gt).scalar() == doctest::Approx(0.0));
  }
  SUBCASE("chained value from the geometry oracle") {
    // boxes [0,2]^3 vs [1,3]^3: giou = 1/15 - 12/27, loss = 1 - giou
    Tape tape;
    Tensor p(1, 6), g(1, 6);
    double pc[6] = {0, 0, 0, 2, 2, 2};
    double gc[6] = {1, 1, 1, 3, 3, 3};
    for (int c = 0; c < 6; ++c) {
      p.at(0, c) = pc[c];
      g.at(0, c) = gc[c];
    }
    Var pred = tape.leaf(p, false);
    double expected = 1.0 - (1.0 / 15.0 - 12.0 / 27.0);
    CHECK(giou_loss(tape, pred, g).scalar() == doctest::Approx(expected).epsilon(1e-6));
  }
  SUBCASE("far-disjoint boxes approach two") {
    Tape tape;
    Tensor p(1, 6), g(1, 6);
    double pc[6] = {0, 0, 0, 1, 1, 1};
    double gc[6] = {100, 0, 0, 101, 1, 1};
    for (int c = 0; c < 6; ++c) {
      p.at(0, c) = pc[c];
      g.at(0, c) = gc[c];
    }
    Var pred = tape.leaf(p, false);
    double v = giou_loss(tape, pred, g).scalar();
    CHECK(v < 2.0);
    CHECK(v > 1.95);
  }
  SUBCASE("degenerate pair throws") {
    Tape tape;
    Tensor z(1, 6, 0.0);
    Var pred = tape.leaf(z, false);
    CHECK_THROWS_AS(giou_loss(tape, pred, z), NumericError);
  }
}

TEST_CASE("canonicalize_boxes orders the corners") {
  Tape tape;
  Tensor raw(1, 6);
  double rc[6] = {2, 0, 3, 1, 1, 1};  // min > max on x and z
  for (int c = 0; c < 6; ++c) raw.at(0, c) = rc[c];
  Var canon = canonicalize_boxes(tape, tape.leaf(raw, false));
  CHECK(canon.val().at(0, 0) == 1.0);
  CHECK(canon.val().at(0, 3) == 2.0);
  CHECK(canon.val().at(0, 2) == 1.0);
  CHECK(canon.val().at(0, 5) == 3.0);
}

TEST_CASE("mask focal loss at one half") {
  LossConfig cfg;
  Tape tape;
  Var probs = tape.leaf(Tensor::column({0.5, 0.5, 0.5}), false);
  double v = mask_focal_loss(tape, probs, {1, 0, 1}, cfg).scalar();
  // per point: -0.25 * 0.25 * ln(0.5), identical for both classes at 0.5
  CHECK(v == doctest::Approx(0.04332169878499658).epsilon(1e-9));
}

TEST_CASE("semantic cross entropy decreases with confidence on the label") {
  LossConfig cfg;
  Tape tape;
  Tensor logits(2, 3, 0.0);
  logits.at(0, 1) = 4.0;
  logits.at(1, 2) = 4.0;
  Var lv = tape.leaf(logits, false);
  double confident = semantic_ce_loss(tape, lv, {1, 2}, cfg).scalar();
  Var uniform = tape.leaf(Tensor(2, 3, 0.0), false);
  double flat = semantic_ce_loss(tape, uniform, {1, 2}, cfg).scalar();
  CHECK(confident < flat);
  CHECK(flat == doctest::Approx(std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("total loss is the weighted sum and reports per-term values") {
  LossConfig cfg;
  cfg.w_center = 2.0;
  cfg.w_semantic = 3.0;
  Tape tape;
  LossTerms terms;
  terms.center = tape.leaf(Tensor::scalar(0.5), false);
  terms.semantic = tape.leaf(Tensor::scalar(0.25), false);
  auto [total, report] = total_loss(tape, terms, {}, cfg);
  CHECK(total.scalar() == doctest::Approx(2.0 * 0.5 + 3.0 * 0.25).epsilon(1e-12));
  CHECK(report.total == total.scalar());
  CHECK(report.center == 0.5);
  CHECK(report.semantic == 0.25);
  double weighted = cfg.w_center * report.center + cfg.w_semantic * report.semantic;
  CHECK(std::fabs(report.total - weighted) <= 1e-9);
}

TEST_CASE("total loss with unit weights adds all six terms") {
  LossConfig cfg;
  Tape tape;
  LossTerms terms;
  terms.center = tape.leaf(Tensor::scalar(0.1), false);
  terms.semantic = tape.leaf(Tensor::scalar(0.2), false);
  terms.has_candidates = true;
  terms.size = tape.leaf(Tensor::scalar(0.3), false);
  terms.bound = tape.leaf(Tensor::scalar(0.4), false);
  terms.iou = tape.leaf(Tensor::scalar(0.5), false);
  terms.mask = tape.leaf(Tensor::scalar(0.6), false);
  auto [total, report] = total_loss(tape, terms, {0, -1}, cfg);
  CHECK(total.scalar() == doctest::Approx(2.1).epsilon(1e-12));
  CHECK(report.assignment == std::vector<int>{0, -1});
}

TEST_CASE("non-finite term is reported by name") {
  LossConfig cfg;
  Tape tape;
  LossTerms terms;
  terms.center = tape.leaf(Tensor::scalar(std::nan("")), false);
  terms.semantic = tape.leaf(Tensor::scalar(0.0), false);
  CHECK_THROWS_WITH_AS(total_loss(tape, terms, {}, cfg), doctest::Contains("center"),
                       NumericError);
}

TEST_CASE("every loss term is non-negative on random inputs") {
  LossConfig cfg;
  Rng rng(12);
  for (int trial = 0; trial < 30; ++trial) {
    Tape tape;
    int n = 5 + rng.uniform_int(10);
    Tensor q(n, 1);
    std::vector<char> pos(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      q.at(i, 0) = rng.uniform(0.01, 0.99);
      pos[size_t(i)] = rng.uniform() < 0.4 ? 1 : 0;
    }
    CHECK(center_focal_loss(tape, tape.leaf(q, false), pos, cfg).scalar() >= 0.0);

    Tensor logits(3, 4);
    for (double& v : logits.data) v = rng.uniform(-2, 2);
    CHECK(size_ce_loss(tape, tape.leaf(logits, false), {0, 1, 2}, cfg).scalar() >= 0.0);

    Tensor pred(2, 6), gt(2, 6);
    for (int t = 0; t < 2; ++t) {
      for (int c = 0; c < 3; ++c) {
        double lo = rng.uniform(0, 1), hi = lo + rng.uniform(0.1, 1.0);
        pred.at(t, c) = lo + rng.uniform(-0.3, 0.3);
        pred.at(t, c + 3) = hi + rng.uniform(-0.3, 0.3);
        gt.at(t, c) = lo;
        gt.at(t, c + 3) = hi;
      }
    }
    CHECK(bound_loss(tape, tape.leaf(pred, false), gt, cfg).scalar() >= 0.0);
    Var canon = canonicalize_boxes(tape, tape.leaf(pred, false));
    double gl = giou_loss(tape, canon, gt).scalar();
    CHECK(gl >= 0.0);
    CHECK(gl < 2.0);
  }
}
