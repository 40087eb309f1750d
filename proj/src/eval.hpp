#pragma once

#include <map>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "inference.hpp"

namespace gicn {

struct GtInstance {
  std::vector<int> points;  // sorted
  int semantic_class = 0;
};

std::vector<GtInstance> gt_instances_from_scene(const Scene& scene);

// |A n B| / |A u B| over sorted index sets. Throws when both are empty.
double mask_iou(const std::vector<int>& a, const std::vector<int>& b);

struct MatchResult {
  struct PerPred {
    int gt = -1;
    double iou = 0.0;
    int semantic_class = 0;
    double confidence = 0.0;
  };
  std::vector<PerPred> preds;    // in confidence-descending order
  std::vector<char> gt_covered;  // per gt instance
};

// Greedy confidence-ordered matching: each prediction takes the highest-IoU
// unmatched same-class ground truth at IoU >= threshold.
MatchResult match_instances(const std::vector<SceneInstance>& preds,
                            const std::vector<GtInstance>& gts, double iou_threshold = 0.5);

struct ClassMetrics {
  int tp = 0;
  int fp = 0;
  int fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double ap50 = 0.0;
};

struct EvalSummary {
  std::map<int, ClassMetrics> per_class;  // classes present in ground truth
  double mprec = 0.0;
  double mrec = 0.0;
  double map50 = 0.0;
};

// Accumulates matches over scenes; classes absent from ground truth are
// excluded from the means, classes with ground truth but no predictions
// score zero precision and zero AP.
class Evaluator {
 public:
  explicit Evaluator(double iou_threshold = 0.5) : threshold_(iou_threshold) {}
  void add_scene(const std::vector<SceneInstance>& preds, const std::vector<GtInstance>& gts);
  EvalSummary summary() const;

 private:
  struct Ranked {
    double confidence;
    bool tp;
    size_t order;  // insertion order, for deterministic tie-breaks
  };
  double threshold_;
  std::map<int, std::vector<Ranked>> ranked_;  // per class, all predictions
  std::map<int, int> gt_count_;
  size_t next_order_ = 0;
};

// All-point interpolation (precision envelope) of one class's ranked list.
double average_precision(const std::vector<std::pair<double, bool>>& ranked_conf_tp,
                         int gt_count);

EvalSummary evaluate_scenes(const std::vector<std::vector<SceneInstance>>& preds,
                            const std::vector<std::vector<GtInstance>>& gts,
                            double iou_threshold = 0.5);

void write_eval_csv(const EvalSummary& summary, const std::string& path);
std::string format_eval_table(const EvalSummary& summary);

}  // namespace gicn
