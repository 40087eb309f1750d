#pragma once

#include <vector>

#include "autodiff.hpp"

namespace gicn {

struct LossConfig {
  double focal_alpha = 0.25;
  double focal_gamma = 2.0;
  double sigma_gate = 0.4;
  double smooth_l1_beta = 1.0;
  double prob_clamp = 1e-7;
  double w_center = 1.0;
  double w_size = 1.0;
  double w_bound = 1.0;
  double w_iou = 1.0;
  double w_mask = 1.0;
  double w_semantic = 1.0;
};

struct LossReport {
  double total = 0;
  double center = 0;
  double size = 0;
  double bound = 0;
  double iou = 0;
  double mask = 0;
  double semantic = 0;
  std::vector<int> assignment;  // candidate -> gt instance, -1 when unassigned
};

// Focal loss over per-point center probabilities against the sigma-gate
// indicator, summed per the focal form and normalized by N.
ad::Var center_focal_loss(ad::Tape& tape, ad::Var q, const std::vector<char>& focal_positive,
                          const LossConfig& cfg);

// Mean over candidates of -log(probability of the ground-truth size group).
ad::Var size_ce_loss(ad::Tape& tape, ad::Var logits, const std::vector<int>& gt_groups,
                     const LossConfig& cfg);

// Mean smooth-l1 over T candidates and 6 raw corner coordinates.
ad::Var bound_loss(ad::Tape& tape, ad::Var pred, const ad::Tensor& gt, const LossConfig& cfg);

// Componentwise min/max repair of raw (min, max) corner predictions.
ad::Var canonicalize_boxes(ad::Tape& tape, ad::Var raw);

// Mean of 1 - GIoU over matched pairs; consumes canonicalized corners.
// Throws NumericError when a pair's union volume is zero.
ad::Var giou_loss(ad::Tape& tape, ad::Var pred_canonical, const ad::Tensor& gt);

// Focal loss over one candidate's mask probabilities against instance
// membership.
ad::Var mask_focal_loss(ad::Tape& tape, ad::Var probs, const std::vector<char>& membership,
                        const LossConfig& cfg);

// Mean per-point cross entropy over semantic logits.
ad::Var semantic_ce_loss(ad::Tape& tape, ad::Var logits, const std::vector<int>& labels,
                         const LossConfig& cfg);

// Weighted sum of the provided terms (absent terms enter as zero). Checks
// finiteness and fills a LossReport from forward values.
struct LossTerms {
  ad::Var center;    // required
  ad::Var semantic;  // required
  bool has_candidates = false;
  ad::Var size;
  ad::Var bound;
  ad::Var iou;
  ad::Var mask;
};

std::pair<ad::Var, LossReport> total_loss(ad::Tape& tape, const LossTerms& terms,
                                          const std::vector<int>& assignment,
                                          const LossConfig& cfg);

}  // namespace gicn
