#include "dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "errors.hpp"
#include "rng.hpp"

namespace gicn {

int Scene::num_instances() const {
  int mx = -1;
  for (int id : instance_id) mx = std::max(mx, id);
  return mx + 1;
}

void Scene::recompute_extent() { extent = tight_bounds(cloud.positions); }

void Scene::validate() const {
  size_t n = num_points();
  if (n == 0) throw ParseError("scene: no points");
  if (semantic_id.size() != n || instance_id.size() != n)
    throw ParseError("scene: label sequences do not match point count");
  if (!cloud.colors.empty() && cloud.colors.size() != n)
    throw ParseError("scene: color count does not match point count");
  std::map<int, int> inst_class;
  std::map<int, int> inst_points;
  for (size_t i = 0; i < n; ++i) {
    if (semantic_id[i] < 0 || semantic_id[i] >= num_classes)
      throw ParseError("scene: semantic id " + std::to_string(semantic_id[i]) +
                       " outside [0, " + std::to_string(num_classes) + ")");
    int inst = instance_id[i];
    if (inst < 0) continue;
    auto [it, fresh] = inst_class.emplace(inst, semantic_id[i]);
    if (!fresh && it->second != semantic_id[i])
      throw ParseError("scene: instance " + std::to_string(inst) +
                       " maps to multiple semantic classes");
    inst_points[inst] += 1;
  }
  for (const auto& [inst, count] : inst_points)
    if (count < 1) throw ParseError("scene: empty instance " + std::to_string(inst));
}

nlohmann::json SceneConfig::to_json() const {
  nlohmann::json j;
  j["classes"] = nlohmann::json::array();
  for (const auto& c : classes) {
    const char* fam = c.family == ShapeFamily::Cuboid      ? "cuboid"
                      : c.family == ShapeFamily::Ellipsoid ? "ellipsoid"
                                                           : "hollow_shell";
    j["classes"].push_back({{"name", c.name},
                            {"shape", fam},
                            {"mean_extents", {c.mean_extents.x, c.mean_extents.y, c.mean_extents.z}},
                            {"jitter", c.jitter},
                            {"points", {c.min_points, c.max_points}},
                            {"color", {c.base_color[0], c.base_color[1], c.base_color[2]}}});
  }
  j["instances_per_scene"] = {min_instances, max_instances};
  j["scene_extent"] = {scene_extent.x, scene_extent.y, scene_extent.z};
  j["background_density"] = background_density;
  j["base_seed"] = base_seed;
  return j;
}

SceneConfig SceneConfig::from_json(const nlohmann::json& j) {
  SceneConfig cfg = SceneConfig::toy_default();
  if (j.contains("classes")) {
    cfg.classes.clear();
    for (const auto& cj : j.at("classes")) {
      ShapeClassConfig c;
      c.name = cj.value("name", "class" + std::to_string(cfg.classes.size() + 1));
      std::string fam = cj.value("shape", "cuboid");
      if (fam == "cuboid")
        c.family = ShapeFamily::Cuboid;
      else if (fam == "ellipsoid")
        c.family = ShapeFamily::Ellipsoid;
      else if (fam == "hollow_shell")
        c.family = ShapeFamily::HollowShell;
      else
        throw ParseError("scene config: unknown shape family '" + fam + "'");
      if (cj.contains("mean_extents")) {
        auto e = cj.at("mean_extents");
        c.mean_extents = {e.at(0).get<double>(), e.at(1).get<double>(), e.at(2).get<double>()};
      }
      c.jitter = cj.value("jitter", 0.25);
      if (cj.contains("points")) {
        c.min_points = cj.at("points").at(0).get<int>();
        c.max_points = cj.at("points").at(1).get<int>();
      }
      if (cj.contains("color")) {
        auto col = cj.at("color");
        c.base_color = {col.at(0).get<double>(), col.at(1).get<double>(), col.at(2).get<double>()};
      }
      if (c.mean_extents.x <= 0 || c.mean_extents.y <= 0 || c.mean_extents.z <= 0)
        throw ParseError("scene config: non-positive extents for class '" + c.name + "'");
      if (c.min_points < 1 || c.max_points < c.min_points)
        throw ParseError("scene config: empty point range for class '" + c.name + "'");
      cfg.classes.push_back(c);
    }
  }
  if (j.contains("instances_per_scene")) {
    cfg.min_instances = j.at("instances_per_scene").at(0).get<int>();
    cfg.max_instances = j.at("instances_per_scene").at(1).get<int>();
  }
  if (j.contains("scene_extent")) {
    auto e = j.at("scene_extent");
    cfg.scene_extent = {e.at(0).get<double>(), e.at(1).get<double>(), e.at(2).get<double>()};
  }
  cfg.background_density = j.value("background_density", cfg.background_density);
  cfg.base_seed = j.value("base_seed", cfg.base_seed);
  if (cfg.min_instances < 0 || cfg.max_instances < cfg.min_instances)
    throw ParseError("scene config: empty instance range");
  if (cfg.scene_extent.x <= 0 || cfg.scene_extent.y <= 0 || cfg.scene_extent.z <= 0)
    throw ParseError("scene config: non-positive scene extent");
  return cfg;
}

SceneConfig SceneConfig::toy_default() {
  SceneConfig cfg;
  cfg.classes = {
      {"crate", ShapeFamily::Cuboid, {0.55, 0.45, 0.40}, 0.20, 300, 450, {0.85, 0.25, 0.20}},
      {"ball", ShapeFamily::Ellipsoid, {0.35, 0.35, 0.30}, 0.20, 250, 400, {0.20, 0.75, 0.25}},
      {"tub", ShapeFamily::HollowShell, {0.80, 0.60, 0.45}, 0.15, 350, 500, {0.25, 0.35, 0.85}},
  };
  return cfg;
}

namespace {

Point3 sample_in_box(Rng& rng, const Aabb& box) {
  return {rng.uniform(box.min_corner.x, box.max_corner.x),
          rng.uniform(box.min_corner.y, box.max_corner.y),
          rng.uniform(box.min_corner.z, box.max_corner.z)};
}

// Uniform direction on the unit sphere from (cos-theta, phi).
Point3 sphere_direction(Rng& rng) {
  double u = rng.uniform(-1.0, 1.0);
  double phi = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
  double s = std::sqrt(std::max(0.0, 1.0 - u * u));
  return {s * std::cos(phi), s * std::sin(phi), u};
}

Point3 instance_point(Rng& rng, ShapeFamily family, const Point3& center,
                      const Point3& half) {
  switch (family) {
    case ShapeFamily::Cuboid:
      return center + Point3{rng.uniform(-half.x, half.x), rng.uniform(-half.y, half.y),
                             rng.uniform(-half.z, half.z)};
    case ShapeFamily::Ellipsoid: {
      // rejection from the bounding cube
      for (;;) {
        Point3 u{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        if (u.x * u.x + u.y * u.y + u.z * u.z <= 1.0)
          return center + Point3{u.x * half.x, u.y * half.y, u.z * half.z};
      }
    }
    case ShapeFamily::HollowShell: {
      Point3 d = sphere_direction(rng);
      double f = rng.uniform(0.92, 1.0);  // thin shell just inside the surface
      return center + Point3{d.x * half.x * f, d.y * half.y * f, d.z * half.z * f};
    }
  }
  return center;
}

Rgb jitter_color(Rng& rng, const Rgb& base, double tint, double noise) {
  Rgb out;
  for (int c = 0; c < 3; ++c) {
    double v = base[size_t(c)] + tint + rng.uniform(-noise, noise);
    out[size_t(c)] = std::min(1.0, std::max(0.0, v));
  }
  return out;
}

}  // namespace

Scene generate_scene(const SceneConfig& config, uint64_t seed) {
  Rng rng(Rng::mix(config.base_seed, seed));
  Scene scene;
  scene.num_classes = config.num_classes();
  Aabb room{{0, 0, 0}, config.scene_extent};

  int n_instances =
      config.min_instances + rng.uniform_int(config.max_instances - config.min_instances + 1);

  // class choice per instance; force one hollow instance when available
  std::vector<int> families;
  for (size_t c = 0; c < config.classes.size(); ++c)
    if (config.classes[c].family == ShapeFamily::HollowShell) families.push_back(int(c));
  std::vector<int> inst_class(static_cast<size_t>(n_instances));
  for (int i = 0; i < n_instances; ++i)
    inst_class[size_t(i)] = rng.uniform_int(int(config.classes.size()));
  if (!families.empty() && n_instances > 0) {
    bool has_hollow = false;
    for (int c : inst_class)
      if (config.classes[size_t(c)].family == ShapeFamily::HollowShell) has_hollow = true;
    if (!has_hollow) inst_class[0] = families[size_t(rng.uniform_int(int(families.size())))];
  }

  std::vector<Aabb> placed;
  for (int i = 0; i < n_instances; ++i) {
    const ShapeClassConfig& cls = config.classes[size_t(inst_class[size_t(i)])];
    Point3 half;
    Aabb box;
    bool ok = false;
    for (int attempt = 0; attempt < 200 && !ok; ++attempt) {
      Point3 ext{cls.mean_extents.x * (1.0 + cls.jitter * rng.uniform(-1.0, 1.0)),
                 cls.mean_extents.y * (1.0 + cls.jitter * rng.uniform(-1.0, 1.0)),
                 cls.mean_extents.z * (1.0 + cls.jitter * rng.uniform(-1.0, 1.0))};
      half = ext * 0.5;
      if (ext.x >= config.scene_extent.x || ext.y >= config.scene_extent.y ||
          ext.z >= config.scene_extent.z)
        continue;
      Point3 center{rng.uniform(half.x, config.scene_extent.x - half.x),
                    rng.uniform(half.y, config.scene_extent.y - half.y),
                    rng.uniform(half.z, config.scene_extent.z - half.z)};
      box = Aabb{center - half, center + half};
      ok = true;
      for (const Aabb& other : placed)
        if (box.inflated(0.02).overlaps(other)) {
          ok = false;
          break;
        }
    }
    if (!ok)
      throw GenerationError("generate_scene: placement failed for instance " +
                            std::to_string(i) + " (seed " + std::to_string(seed) + ")");
    placed.push_back(box);

    int npts = cls.min_points + rng.uniform_int(cls.max_points - cls.min_points + 1);
    double tint = rng.uniform(-0.08, 0.08);
    for (int p = 0; p < npts; ++p) {
      scene.cloud.positions.push_back(instance_point(rng, cls.family, box.center(), half));
      scene.cloud.colors.push_back(jitter_color(rng, cls.base_color, tint, 0.03));
      scene.semantic_id.push_back(inst_class[size_t(i)] + 1);
      scene.instance_id.push_back(i);
    }
  }

  double volume = config.scene_extent.x * config.scene_extent.y * config.scene_extent.z;
  int n_bg = int(std::lround(config.background_density * volume));
  Rgb bg_color{0.45, 0.45, 0.45};
  for (int p = 0; p < n_bg; ++p) {
    Point3 pos;
    bool found = false;
    for (int attempt = 0; attempt < 50 && !found; ++attempt) {
      pos = sample_in_box(rng, room);
      found = true;
      for (const Aabb& box : placed)
        if (box.contains(pos)) {
          found = false;
          break;
        }
    }
    if (!found) continue;  // crowded scene, skip this background point
    scene.cloud.positions.push_back(pos);
    scene.cloud.colors.push_back(jitter_color(rng, bg_color, 0.0, 0.05));
    scene.semantic_id.push_back(0);
    scene.instance_id.push_back(-1);
  }

  if (scene.cloud.positions.empty())
    throw GenerationError("generate_scene: empty scene (seed " + std::to_string(seed) + ")");
  scene.recompute_extent();
  scene.validate();
  return scene;
}

namespace {

// Grid origins along one axis; the last origin is shifted back so the final
// cube's far face lands on the axis max.
std::vector<double> axis_origins(double min, double max, double cube, double stride) {
  std::vector<double> out;
  if (max - min <= cube) {
    out.push_back(min);
    return out;
  }
  for (int k = 0;; ++k) {
    double o = min + double(k) * stride;
    if (o + cube >= max - 1e-12) {
      double last = max - cube;
      if (out.empty() || last > out.back() + 1e-12) out.push_back(last);
      break;
    }
    out.push_back(o);
  }
  return out;
}

}  // namespace

std::vector<Block> slice_into_cubes(const Scene& scene, double cube, double stride) {
  if (cube <= 0 || stride <= 0 || stride > cube)
    throw std::invalid_argument("slice_into_cubes: need 0 < stride <= cube");
  const Aabb& e = scene.extent;
  std::vector<double> xs = axis_origins(e.min_corner.x, e.max_corner.x, cube, stride);
  std::vector<double> ys = axis_origins(e.min_corner.y, e.max_corner.y, cube, stride);
  std::vector<double> zs = axis_origins(e.min_corner.z, e.max_corner.z, cube, stride);

  std::vector<Block> blocks;
  for (double x : xs)
    for (double y : ys)
      for (double z : zs) {
        Block b;
        b.origin = {x, y, z};
        b.size = cube;
        Aabb bounds{b.origin, b.origin + Point3{cube, cube, cube}};
        for (size_t i = 0; i < scene.num_points(); ++i)
          if (bounds.contains(scene.cloud.positions[i])) b.members.push_back(int(i));
        if (!b.members.empty()) blocks.push_back(std::move(b));
      }
  return blocks;
}

void sample_points(Block& block, int n, uint64_t seed) {
  if (block.members.empty()) throw std::invalid_argument("sample_points: empty block");
  Rng rng(Rng::mix(0x5A3D71E5ull, seed));
  int m = int(block.members.size());
  block.sampled.clear();
  block.sampled.reserve(size_t(n));
  if (m >= n) {
    for (int i : rng.sample_without_replacement(m, n))
      block.sampled.push_back(block.members[size_t(i)]);
  } else {
    for (int i = 0; i < n; ++i)
      block.sampled.push_back(block.members[size_t(rng.uniform_int(m))]);
  }
}

void build_features(Block& block, const Scene& scene) {
  if (block.sampled.empty())
    throw std::invalid_argument("build_features: block has no sampled points");
  int n = int(block.sampled.size());
  ad::Tensor feats(n, 9);
  Point3 room_min = scene.extent.min_corner;
  Point3 room_ext = scene.extent.extents();
  auto clamp01 = [](double v) { return std::min(1.0, std::max(0.0, v)); };
  auto norm_axis = [&](double v, double lo, double len) {
    return clamp01(len > 1e-12 ? (v - lo) / len : 0.0);
  };
  for (int r = 0; r < n; ++r) {
    int idx = block.sampled[size_t(r)];
    const Point3& p = scene.cloud.positions[size_t(idx)];
    Rgb color = scene.cloud.colors.empty() ? Rgb{0.5, 0.5, 0.5} : scene.cloud.colors[size_t(idx)];
    feats.at(r, 0) = color[0];
    feats.at(r, 1) = color[1];
    feats.at(r, 2) = color[2];
    feats.at(r, 3) = norm_axis(p.x, block.origin.x, block.size);
    feats.at(r, 4) = norm_axis(p.y, block.origin.y, block.size);
    feats.at(r, 5) = norm_axis(p.z, block.origin.z, block.size);
    feats.at(r, 6) = norm_axis(p.x, room_min.x, room_ext.x);
    feats.at(r, 7) = norm_axis(p.y, room_min.y, room_ext.y);
    feats.at(r, 8) = norm_axis(p.z, room_min.z, room_ext.z);
  }
  block.features = std::move(feats);
}

Scene read_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("read_scene: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ParseError("read_scene: no points in '" + path + "'");
  size_t n = 0;
  int L = 0;
  {
    std::istringstream hs(line);
    if (!(hs >> n >> L)) throw ParseError("read_scene: line 1: bad header (expected 'N L')");
    std::string extra;
    if (hs >> extra) throw ParseError("read_scene: line 1: trailing fields in header");
  }
  if (n == 0) throw ParseError("read_scene: no points in '" + path + "'");

  Scene scene;
  scene.num_classes = L;
  scene.cloud.positions.reserve(n);
  scene.cloud.colors.reserve(n);
  scene.semantic_id.reserve(n);
  scene.instance_id.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    if (!std::getline(in, line))
      throw ParseError("read_scene: line " + std::to_string(i + 2) + ": unexpected end of file");
    std::istringstream ls(line);
    double x, y, z, r, g, b;
    int sem, inst;
    if (!(ls >> x >> y >> z >> r >> g >> b >> sem >> inst))
      throw ParseError("read_scene: line " + std::to_string(i + 2) +
                       ": expected 8 fields 'x y z r g b semantic_id instance_id'");
    std::string extra;
    if (ls >> extra)
      throw ParseError("read_scene: line " + std::to_string(i + 2) + ": trailing fields");
    if (sem < 0 || sem >= L)
      throw ParseError("read_scene: line " + std::to_string(i + 2) + ": semantic id " +
                       std::to_string(sem) + " outside [0, " + std::to_string(L) + ")");
    if (inst < -1)
      throw ParseError("read_scene: line " + std::to_string(i + 2) + ": bad instance id");
    scene.cloud.positions.push_back({x, y, z});
    scene.cloud.colors.push_back({r, g, b});
    scene.semantic_id.push_back(sem);
    scene.instance_id.push_back(inst);
  }
  scene.recompute_extent();
  scene.validate();
  return scene;
}

void write_scene(const Scene& scene, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("write_scene: cannot open '" + path + "' for writing");
  char buf[256];
  out << scene.num_points() << ' ' << scene.num_classes << '\n';
  for (size_t i = 0; i < scene.num_points(); ++i) {
    const Point3& p = scene.cloud.positions[i];
    Rgb c = scene.cloud.colors.empty() ? Rgb{0.5, 0.5, 0.5} : scene.cloud.colors[i];
    std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g %.17g %.17g %.17g %d %d\n", p.x, p.y,
                  p.z, c[0], c[1], c[2], scene.semantic_id[i], scene.instance_id[i]);
    out << buf;
  }
  if (!out) throw IoError("write_scene: write failed for '" + path + "'");
}

void write_scene_ply(const Scene& scene, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("write_scene_ply: cannot open '" + path + "' for writing");
  out << "ply\nformat ascii 1.0\n";
  out << "element vertex " << scene.num_points() << "\n";
  out << "property float x\nproperty float y\nproperty float z\n";
  out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out << "end_header\n";
  char buf[128];
  for (size_t i = 0; i < scene.num_points(); ++i) {
    const Point3& p = scene.cloud.positions[i];
    Rgb c = scene.cloud.colors.empty() ? Rgb{0.5, 0.5, 0.5} : scene.cloud.colors[i];
    std::snprintf(buf, sizeof(buf), "%g %g %g %d %d %d\n", p.x, p.y, p.z,
                  int(std::lround(c[0] * 255)), int(std::lround(c[1] * 255)),
                  int(std::lround(c[2] * 255)));
    out << buf;
  }
  if (!out) throw IoError("write_scene_ply: write failed for '" + path + "'");
}

}  // namespace gicn
