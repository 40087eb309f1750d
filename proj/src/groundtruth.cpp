#include "groundtruth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "errors.hpp"

namespace gicn {

double ClassRadiusTable::lookup(int class_id) const {
  auto it = radius.find(class_id);
  return it != radius.end() ? it->second : global_radius;
}

std::vector<std::vector<int>> instance_point_lists(const Scene& scene) {
  std::vector<std::vector<int>> lists(size_t(scene.num_instances()));
  for (size_t i = 0; i < scene.num_points(); ++i) {
    int inst = scene.instance_id[i];
    if (inst >= 0) lists[size_t(inst)].push_back(int(i));
  }
  return lists;
}

int gt_center_point(const std::vector<Point3>& positions, const std::vector<int>& members) {
  if (members.empty()) throw std::invalid_argument("gt_center_point: empty instance");
  Point3 c = centroid(positions, members);
  int best = members[0];
  double best_d = distance(positions[size_t(best)], c);
  for (size_t i = 1; i < members.size(); ++i) {
    double d = distance(positions[size_t(members[i])], c);
    if (d < best_d) {
      best_d = d;
      best = members[i];
    }
  }
  return best;
}

GaussianSpec gt_gaussian(const std::vector<Point3>& positions, const std::vector<int>& members) {
  GaussianSpec g;
  g.center_index = gt_center_point(positions, members);
  g.center = positions[size_t(g.center_index)];
  Aabb box = tight_bounds(positions, members);
  Point3 half = box.extents() * 0.5;
  g.sigma = {std::max(half.x, 0.01) / 2.0, std::max(half.y, 0.01) / 2.0,
             std::max(half.z, 0.01) / 2.0};
  return g;
}

double gaussian_value(const GaussianSpec& g, const Point3& p) {
  Point3 d = p - g.center;
  double q = (d.x / g.sigma.x) * (d.x / g.sigma.x) + (d.y / g.sigma.y) * (d.y / g.sigma.y) +
             (d.z / g.sigma.z) * (d.z / g.sigma.z);
  return std::exp(-0.5 * q);
}

HeatmapGt gt_heatmap(const Scene& scene, double sigma_gate) {
  HeatmapGt out;
  out.values.assign(scene.num_points(), 0.0);
  out.focal_positive.assign(scene.num_points(), 0);
  auto lists = instance_point_lists(scene);
  for (const auto& members : lists) {
    if (members.empty()) continue;
    GaussianSpec g = gt_gaussian(scene.cloud.positions, members);
    for (int i : members) {
      double v = gaussian_value(g, scene.cloud.positions[size_t(i)]);
      out.values[size_t(i)] = v;
      out.focal_positive[size_t(i)] = v > sigma_gate ? 1 : 0;
    }
  }
  return out;
}

std::vector<Aabb> gt_boxes(const Scene& scene) {
  auto lists = instance_point_lists(scene);
  std::vector<Aabb> boxes;
  boxes.reserve(lists.size());
  for (const auto& members : lists) boxes.push_back(tight_bounds(scene.cloud.positions, members));
  return boxes;
}

namespace {

struct ClassStats {
  double radius_sum = 0.0;
  Point3 extent_sum;
  double volume_sum = 0.0;
  int count = 0;
};

std::map<int, ClassStats> accumulate_class_stats(const std::vector<Scene>& scenes) {
  std::map<int, ClassStats> stats;
  for (const Scene& scene : scenes) {
    auto lists = instance_point_lists(scene);
    for (const auto& members : lists) {
      if (members.empty()) continue;
      int cls = scene.semantic_id[size_t(members[0])];
      Aabb box = tight_bounds(scene.cloud.positions, members);
      Point3 e = box.extents();
      ClassStats& s = stats[cls];
      s.radius_sum += 0.5 * norm(e);
      s.extent_sum = s.extent_sum + e;
      s.volume_sum += aabb_volume(box);
      s.count += 1;
    }
  }
  return stats;
}

}  // namespace

ClassRadiusTable compute_class_radii(const std::vector<Scene>& scenes) {
  ClassRadiusTable table;
  auto stats = accumulate_class_stats(scenes);
  double total = 0.0;
  int count = 0;
  for (const auto& [cls, s] : stats) {
    table.radius[cls] = std::max(s.radius_sum / double(s.count), 1e-6);
    total += s.radius_sum;
    count += s.count;
  }
  if (count > 0) table.global_radius = std::max(total / double(count), 1e-6);
  return table;
}

SizeGroupTable compute_size_groups(const std::vector<Scene>& scenes, int k) {
  if (k < 1) throw std::invalid_argument("compute_size_groups: k must be >= 1");
  auto stats = accumulate_class_stats(scenes);

  struct ClassEntry {
    int cls;
    double mean_volume;
  };
  std::vector<ClassEntry> order;
  for (const auto& [cls, s] : stats)
    order.push_back({cls, s.volume_sum / double(s.count)});
  std::sort(order.begin(), order.end(), [](const ClassEntry& a, const ClassEntry& b) {
    if (a.mean_volume != b.mean_volume) return a.mean_volume < b.mean_volume;
    return a.cls < b.cls;
  });

  SizeGroupTable table;
  int n_classes = int(order.size());
  if (n_classes == 0) return table;
  table.k = std::min(k, n_classes);

  // contiguous chunks, sizes as equal as possible (larger chunks first)
  int base = n_classes / table.k;
  int extra = n_classes % table.k;
  int pos = 0;
  for (int g = 0; g < table.k; ++g) {
    int len = base + (g < extra ? 1 : 0);
    SizeGroup group;
    Point3 extent_sum;
    int inst = 0;
    for (int i = 0; i < len; ++i, ++pos) {
      int cls = order[size_t(pos)].cls;
      group.classes.push_back(cls);
      table.class_to_group[cls] = g;
      extent_sum = extent_sum + stats[cls].extent_sum;
      inst += stats[cls].count;
    }
    group.mean_extents = extent_sum * (1.0 / double(inst));
    table.groups.push_back(std::move(group));
  }
  return table;
}

StatsTables compute_stats(const std::vector<Scene>& scenes, int k) {
  return {compute_class_radii(scenes), compute_size_groups(scenes, k)};
}

void write_stats(const StatsTables& stats, const std::string& path) {
  nlohmann::json j;
  j["global_radius"] = stats.radii.global_radius;
  nlohmann::json radii = nlohmann::json::object();
  for (const auto& [cls, r] : stats.radii.radius) radii[std::to_string(cls)] = r;
  j["class_radii"] = radii;
  j["k"] = stats.groups.k;
  j["groups"] = nlohmann::json::array();
  for (const auto& g : stats.groups.groups)
    j["groups"].push_back({{"mean_extents", {g.mean_extents.x, g.mean_extents.y, g.mean_extents.z}},
                           {"classes", g.classes}});
  nlohmann::json c2g = nlohmann::json::object();
  for (const auto& [cls, g] : stats.groups.class_to_group) c2g[std::to_string(cls)] = g;
  j["class_to_group"] = c2g;

  std::ofstream out(path);
  if (!out) throw IoError("write_stats: cannot open '" + path + "' for writing");
  out << j.dump(2) << "\n";
  if (!out) throw IoError("write_stats: write failed for '" + path + "'");
}

StatsTables read_stats(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("read_stats: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("read_stats: bad JSON in '" + path + "': " + e.what());
  }
  StatsTables stats;
  try {
    stats.radii.global_radius = j.at("global_radius").get<double>();
    for (auto& [cls, r] : j.at("class_radii").items())
      stats.radii.radius[std::stoi(cls)] = r.get<double>();
    stats.groups.k = j.at("k").get<int>();
    for (const auto& gj : j.at("groups")) {
      SizeGroup g;
      auto e = gj.at("mean_extents");
      g.mean_extents = {e.at(0).get<double>(), e.at(1).get<double>(), e.at(2).get<double>()};
      g.classes = gj.at("classes").get<std::vector<int>>();
      stats.groups.groups.push_back(std::move(g));
    }
    for (auto& [cls, g] : j.at("class_to_group").items())
      stats.groups.class_to_group[std::stoi(cls)] = g.get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("read_stats: missing field in '" + path + "': " + e.what());
  }
  return stats;
}

}  // namespace gicn
