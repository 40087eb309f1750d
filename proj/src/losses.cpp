#include "losses.hpp"

#include <cmath>
#include <stdexcept>

#include "errors.hpp"

namespace gicn {

using ad::Tape;
using ad::Tensor;
using ad::Var;

namespace {

// q_f = q where positive, 1-q elsewhere, as one affine map with constants.
Var focal_terms(Tape& tape, Var q, const std::vector<char>& positive, const LossConfig& cfg) {
  const Tensor& qv = q.val();
  if (qv.cols != 1 || size_t(qv.rows) != positive.size())
    throw std::invalid_argument("focal loss: probabilities " + qv.shape_str() + " vs " +
                                std::to_string(positive.size()) + " indicators");
  Tensor sign(qv.rows, 1), offset(qv.rows, 1);
  for (int i = 0; i < qv.rows; ++i) {
    sign.at(i, 0) = positive[size_t(i)] ? 1.0 : -1.0;
    offset.at(i, 0) = positive[size_t(i)] ? 0.0 : 1.0;
  }
  Var qf = ad::add(ad::mul(q, tape.constant(std::move(sign))), tape.constant(std::move(offset)));
  Var qc = ad::clamp(qf, cfg.prob_clamp, 1.0 - cfg.prob_clamp);
  Var one_minus = ad::add_const(ad::scale(qc, -1.0), 1.0);
  Var weighted = ad::mul(ad::pow_const(one_minus, cfg.focal_gamma), ad::log(qc));
  return ad::scale(ad::mean_all(weighted), -cfg.focal_alpha);
}

}  // namespace

Var center_focal_loss(Tape& tape, Var q, const std::vector<char>& focal_positive,
                      const LossConfig& cfg) {
  return focal_terms(tape, q, focal_positive, cfg);
}

Var mask_focal_loss(Tape& tape, Var probs, const std::vector<char>& membership,
                    const LossConfig& cfg) {
  return focal_terms(tape, probs, membership, cfg);
}

Var size_ce_loss(Tape& tape, Var logits, const std::vector<int>& gt_groups,
                 const LossConfig& cfg) {
  int rows = logits.rows();
  int cols = logits.cols();
  if (size_t(rows) != gt_groups.size() || rows < 1)
    throw std::invalid_argument("size_ce_loss: logits " + logits.val().shape_str() + " vs " +
                                std::to_string(gt_groups.size()) + " targets");
  Tensor onehot(rows, cols, 0.0);
  for (int t = 0; t < rows; ++t) {
    int g = gt_groups[size_t(t)];
    if (g < 0 || g >= cols)
      throw std::invalid_argument("size_ce_loss: group index " + std::to_string(g) +
                                  " outside [0, " + std::to_string(cols) + ")");
    onehot.at(t, g) = 1.0;
  }
  Var probs = ad::clamp(ad::softmax_rows(logits), cfg.prob_clamp, 1.0);
  Var picked = ad::mul(ad::log(probs), tape.constant(std::move(onehot)));
  return ad::scale(ad::sum_all(picked), -1.0 / double(rows));
}

Var bound_loss(Tape& tape, Var pred, const Tensor& gt, const LossConfig& cfg) {
  const Tensor& pv = pred.val();
  if (!pv.same_shape(gt) || pv.cols != 6)
    throw std::invalid_argument("bound_loss: prediction " + pv.shape_str() + " vs target " +
                                gt.shape_str());
  Var diff = ad::sub(pred, tape.constant(gt));
  return ad::mean_all(ad::smooth_l1(diff, cfg.smooth_l1_beta));
}

Var canonicalize_boxes(Tape& tape, Var raw) {
  const Tensor& rv = raw.val();
  if (rv.cols != 6) throw std::invalid_argument("canonicalize_boxes: expected Tx6, got " + rv.shape_str());
  Var lo = ad::slice_cols(raw, 0, 3);
  Var hi = ad::slice_cols(raw, 3, 6);
  return ad::concat_cols(ad::vmin(lo, hi), ad::vmax(lo, hi));
}

Var giou_loss(Tape& tape, Var pred, const Tensor& gt) {
  const Tensor& pv = pred.val();
  if (!pv.same_shape(gt) || pv.cols != 6)
    throw std::invalid_argument("giou_loss: prediction " + pv.shape_str() + " vs target " +
                                gt.shape_str());
  Var g = tape.constant(gt);

  auto axis_len = [](Var box_min, Var box_max) { return ad::sub(box_max, box_min); };
  auto volume = [&](Var box) {
    Var lx = ad::relu(axis_len(ad::slice_cols(box, 0, 1), ad::slice_cols(box, 3, 4)));
    Var ly = ad::relu(axis_len(ad::slice_cols(box, 1, 2), ad::slice_cols(box, 4, 5)));
    Var lz = ad::relu(axis_len(ad::slice_cols(box, 2, 3), ad::slice_cols(box, 5, 6)));
    return ad::mul(ad::mul(lx, ly), lz);
  };

  Var inter;
  {
    Var ix = ad::relu(ad::sub(ad::vmin(ad::slice_cols(pred, 3, 4), ad::slice_cols(g, 3, 4)),
                              ad::vmax(ad::slice_cols(pred, 0, 1), ad::slice_cols(g, 0, 1))));
    Var iy = ad::relu(ad::sub(ad::vmin(ad::slice_cols(pred, 4, 5), ad::slice_cols(g, 4, 5)),
                              ad::vmax(ad::slice_cols(pred, 1, 2), ad::slice_cols(g, 1, 2))));
    Var iz = ad::relu(ad::sub(ad::vmin(ad::slice_cols(pred, 5, 6), ad::slice_cols(g, 5, 6)),
                              ad::vmax(ad::slice_cols(pred, 2, 3), ad::slice_cols(g, 2, 3))));
    inter = ad::mul(ad::mul(ix, iy), iz);
  }
  Var uni = ad::sub(ad::add(volume(pred), volume(g)), inter);
  for (double v : uni.val().data)
    if (v <= 0.0) throw NumericError("giou_loss: union volume is zero for a matched pair");

  Var enc;
  {
    Var ex = ad::sub(ad::vmax(ad::slice_cols(pred, 3, 4), ad::slice_cols(g, 3, 4)),
                     ad::vmin(ad::slice_cols(pred, 0, 1), ad::slice_cols(g, 0, 1)));
    Var ey = ad::sub(ad::vmax(ad::slice_cols(pred, 4, 5), ad::slice_cols(g, 4, 5)),
                     ad::vmin(ad::slice_cols(pred, 1, 2), ad::slice_cols(g, 1, 2)));
    Var ez = ad::sub(ad::vmax(ad::slice_cols(pred, 5, 6), ad::slice_cols(g, 5, 6)),
                     ad::vmin(ad::slice_cols(pred, 2, 3), ad::slice_cols(g, 2, 3)));
    enc = ad::mul(ad::mul(ex, ey), ez);
  }
  Var giou = ad::sub(ad::div(inter, uni), ad::div(ad::sub(enc, uni), enc));
  return ad::mean_all(ad::add_const(ad::scale(giou, -1.0), 1.0));
}

Var semantic_ce_loss(Tape& tape, Var logits, const std::vector<int>& labels,
                     const LossConfig& cfg) {
  int rows = logits.rows();
  int cols = logits.cols();
  if (size_t(rows) != labels.size())
    throw std::invalid_argument("semantic_ce_loss: logits " + logits.val().shape_str() + " vs " +
                                std::to_string(labels.size()) + " labels");
  Tensor onehot(rows, cols, 0.0);
  for (int i = 0; i < rows; ++i) {
    int l = labels[size_t(i)];
    if (l < 0 || l >= cols)
      throw std::invalid_argument("semantic_ce_loss: label " + std::to_string(l) +
                                  " outside [0, " + std::to_string(cols) + ")");
    onehot.at(i, l) = 1.0;
  }
  Var probs = ad::clamp(ad::softmax_rows(logits), cfg.prob_clamp, 1.0);
  Var picked = ad::mul(ad::log(probs), tape.constant(std::move(onehot)));
  return ad::scale(ad::sum_all(picked), -1.0 / double(rows));
}

std::pair<Var, LossReport> total_loss(Tape& tape, const LossTerms& terms,
                                      const std::vector<int>& assignment,
                                      const LossConfig& cfg) {
  Var total = ad::add(ad::scale(terms.center, cfg.w_center),
                      ad::scale(terms.semantic, cfg.w_semantic));
  LossReport report;
  report.assignment = assignment;
  report.center = terms.center.scalar();
  report.semantic = terms.semantic.scalar();
  if (terms.has_candidates) {
    total = ad::add(total, ad::scale(terms.size, cfg.w_size));
    total = ad::add(total, ad::scale(terms.bound, cfg.w_bound));
    total = ad::add(total, ad::scale(terms.iou, cfg.w_iou));
    total = ad::add(total, ad::scale(terms.mask, cfg.w_mask));
    report.size = terms.size.scalar();
    report.bound = terms.bound.scalar();
    report.iou = terms.iou.scalar();
    report.mask = terms.mask.scalar();
  }
  report.total = total.scalar();
  if (!std::isfinite(report.total)) {
    const char* term = !std::isfinite(report.center)     ? "center"
                       : !std::isfinite(report.semantic) ? "semantic"
                       : !std::isfinite(report.size)     ? "size"
                       : !std::isfinite(report.bound)    ? "bound"
                       : !std::isfinite(report.iou)      ? "iou"
                                                         : "mask";
    throw NumericError(std::string("total_loss: non-finite loss in term '") + term + "'");
  }
  return {total, report};
}

}  // namespace gicn
