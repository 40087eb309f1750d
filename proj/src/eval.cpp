#include "eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "errors.hpp"

namespace gicn {

std::vector<GtInstance> gt_instances_from_scene(const Scene& scene) {
  std::vector<GtInstance> out(size_t(scene.num_instances()));
  for (size_t i = 0; i < scene.num_points(); ++i) {
    int inst = scene.instance_id[i];
    if (inst < 0) continue;
    out[size_t(inst)].points.push_back(int(i));
    out[size_t(inst)].semantic_class = scene.semantic_id[i];
  }
  return out;
}

double mask_iou(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.empty() && b.empty()) throw NumericError("mask_iou: both point sets empty");
  size_t inter = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib)
      ++ia;
    else if (*ib < *ia)
      ++ib;
    else {
      ++inter;
      ++ia;
      ++ib;
    }
  }
  return double(inter) / double(a.size() + b.size() - inter);
}

MatchResult match_instances(const std::vector<SceneInstance>& preds,
                            const std::vector<GtInstance>& gts, double iou_threshold) {
  std::vector<int> order(preds.size());
  for (size_t i = 0; i < preds.size(); ++i) order[i] = int(i);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return preds[size_t(a)].confidence() > preds[size_t(b)].confidence();
  });

  MatchResult result;
  result.gt_covered.assign(gts.size(), 0);
  for (int pi : order) {
    const SceneInstance& pred = preds[size_t(pi)];
    MatchResult::PerPred pp;
    pp.semantic_class = pred.semantic_class;
    pp.confidence = pred.confidence();
    int best = -1;
    double best_iou = 0.0;
    for (size_t g = 0; g < gts.size(); ++g) {
      if (result.gt_covered[g]) continue;
      if (gts[g].semantic_class != pred.semantic_class) continue;
      double iou = mask_iou(pred.points, gts[g].points);
      if (iou >= iou_threshold && iou > best_iou) {
        best_iou = iou;
        best = int(g);
      }
    }
    if (best >= 0) {
      result.gt_covered[size_t(best)] = 1;
      pp.gt = best;
      pp.iou = best_iou;
    }
    result.preds.push_back(pp);
  }
  return result;
}

void Evaluator::add_scene(const std::vector<SceneInstance>& preds,
                          const std::vector<GtInstance>& gts) {
  MatchResult match = match_instances(preds, gts, threshold_);
  for (const auto& g : gts) gt_count_[g.semantic_class] += 1;
  for (const auto& pp : match.preds)
    ranked_[pp.semantic_class].push_back({pp.confidence, pp.gt >= 0, next_order_++});
}

double average_precision(const std::vector<std::pair<double, bool>>& ranked, int gt_count) {
  if (gt_count <= 0) return 0.0;
  int tp = 0, fp = 0;
  std::vector<double> precision, recall;
  for (const auto& [conf, is_tp] : ranked) {
    if (is_tp)
      ++tp;
    else
      ++fp;
    precision.push_back(double(tp) / double(tp + fp));
    recall.push_back(double(tp) / double(gt_count));
  }
  // precision envelope, then sum increments of recall
  double ap = 0.0;
  double prev_recall = 0.0;
  for (size_t i = 0; i < precision.size(); ++i) {
    double env = 0.0;
    for (size_t j = i; j < precision.size(); ++j) env = std::max(env, precision[j]);
    ap += (recall[i] - prev_recall) * env;
    prev_recall = recall[i];
  }
  return ap;
}

EvalSummary Evaluator::summary() const {
  EvalSummary out;
  double prec_sum = 0, rec_sum = 0, ap_sum = 0;
  int classes = 0;
  for (const auto& [cls, gt_n] : gt_count_) {
    ClassMetrics m;
    std::vector<Ranked> ranked;
    if (auto it = ranked_.find(cls); it != ranked_.end()) ranked = it->second;
    std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
      if (a.confidence != b.confidence) return a.confidence > b.confidence;
      return a.order < b.order;
    });
    std::vector<std::pair<double, bool>> flat;
    for (const auto& r : ranked) {
      flat.push_back({r.confidence, r.tp});
      if (r.tp)
        m.tp += 1;
      else
        m.fp += 1;
    }
    m.fn = gt_n - m.tp;
    m.precision = (m.tp + m.fp) > 0 ? double(m.tp) / double(m.tp + m.fp) : 0.0;
    m.recall = gt_n > 0 ? double(m.tp) / double(gt_n) : 0.0;
    m.ap50 = average_precision(flat, gt_n);
    out.per_class[cls] = m;
    prec_sum += m.precision;
    rec_sum += m.recall;
    ap_sum += m.ap50;
    classes += 1;
  }
  if (classes > 0) {
    out.mprec = prec_sum / double(classes);
    out.mrec = rec_sum / double(classes);
    out.map50 = ap_sum / double(classes);
  }
  return out;
}

EvalSummary evaluate_scenes(const std::vector<std::vector<SceneInstance>>& preds,
                            const std::vector<std::vector<GtInstance>>& gts,
                            double iou_threshold) {
  if (preds.size() != gts.size())
    throw std::invalid_argument("evaluate_scenes: prediction/ground-truth scene counts differ");
  Evaluator ev(iou_threshold);
  for (size_t s = 0; s < preds.size(); ++s) ev.add_scene(preds[s], gts[s]);
  return ev.summary();
}

void write_eval_csv(const EvalSummary& summary, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("write_eval_csv: cannot open '" + path + "' for writing");
  out << "class,tp,fp,fn,precision,recall,ap50\n";
  char buf[160];
  for (const auto& [cls, m] : summary.per_class) {
    std::snprintf(buf, sizeof(buf), "%d,%d,%d,%d,%.6f,%.6f,%.6f\n", cls, m.tp, m.fp, m.fn,
                  m.precision, m.recall, m.ap50);
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), "mean,,,,%.6f,%.6f,%.6f\n", summary.mprec, summary.mrec,
                summary.map50);
  out << buf;
  if (!out) throw IoError("write_eval_csv: write failed for '" + path + "'");
}

std::string format_eval_table(const EvalSummary& summary) {
  std::ostringstream os;
  char buf[160];
  os << "class     tp    fp    fn   prec    rec   ap50\n";
  for (const auto& [cls, m] : summary.per_class) {
    std::snprintf(buf, sizeof(buf), "%-7d %4d  %4d  %4d  %5.3f  %5.3f  %5.3f\n", cls, m.tp,
                  m.fp, m.fn, m.precision, m.recall, m.ap50);
    os << buf;
  }
  std::snprintf(buf, sizeof(buf), "mean                      %5.3f  %5.3f  %5.3f\n",
                summary.mprec, summary.mrec, summary.map50);
  os << buf;
  return os.str();
}

}  // namespace gicn
