#include "forgekit/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>

#include <json.hpp>

#include "forgekit/image_io.hpp"

namespace fk {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

real dot(const Vec3& a, const Vec3& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}
Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2],
          a[0] * b[1] - a[1] * b[0]};
}
Vec3 vsub(const Vec3& a, const Vec3& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}
Vec3 vadd(const Vec3& a, const Vec3& b) {
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}
Vec3 vscale(const Vec3& a, real s) { return {a[0] * s, a[1] * s, a[2] * s}; }
real vnorm(const Vec3& a) { return std::sqrt(dot(a, a)); }
Vec3 vnormalize(const Vec3& a) { return vscale(a, 1.0 / vnorm(a)); }

struct Hit {
  bool ok = false;
  real t = 0;
  Vec3 normal{0, 0, 1};
  Vec3 albedo{0, 0, 0};
};

bool hit_sphere(const Vec3& o, const Vec3& d, const Vec3& c, real r,
                real& t, Vec3& n) {
  const Vec3 oc = vsub(o, c);
  const real b = dot(oc, d);
  const real disc = b * b - (dot(oc, oc) - r * r);
  if (disc < 0) return false;
  const real s = std::sqrt(disc);
  real tt = -b - s;
  if (tt < 1e-6) tt = -b + s;
  if (tt < 1e-6) return false;
  t = tt;
  n = vnormalize(vsub(vadd(o, vscale(d, tt)), c));
  return true;
}

bool hit_box(const Vec3& o, const Vec3& d, const Vec3& c, const Vec3& half,
             real& t, Vec3& n) {
  real t_lo = -1e30, t_hi = 1e30;
  int axis = 0;
  real sign = 1;
  for (int a = 0; a < 3; ++a) {
    const real inv = 1.0 / (std::fabs(d[a]) > 1e-12 ? d[a]
                            : (d[a] >= 0 ? 1e-12 : -1e-12));
    real ta = (c[a] - half[a] - o[a]) * inv;
    real tb = (c[a] + half[a] - o[a]) * inv;
    real s = -1;
    if (ta > tb) {
      std::swap(ta, tb);
      s = 1;
    }
    if (ta > t_lo) {
      t_lo = ta;
      axis = a;
      sign = s;
    }
    t_hi = std::min(t_hi, tb);
    if (t_lo > t_hi) return false;
  }
  if (t_lo < 1e-6) return false;  // origin inside or behind: skip
  t = t_lo;
  n = {0, 0, 0};
  n[axis] = sign;
  return true;
}

bool hit_capsule(const Vec3& o, const Vec3& d, const Vec3& c, const Vec3& axis,
                 real hl, real r, real& t, Vec3& n) {
  const Vec3 pa = vsub(c, vscale(axis, hl));
  const Vec3 pb = vadd(c, vscale(axis, hl));
  const Vec3 ba = vsub(pb, pa);
  const Vec3 oa = vsub(o, pa);
  const real baba = dot(ba, ba);
  const real bard = dot(ba, d);
  const real baoa = dot(ba, oa);
  const real rdoa = dot(d, oa);
  const real oaoa = dot(oa, oa);
  real a = baba - bard * bard;
  real b = baba * rdoa - baoa * bard;
  real cc = baba * oaoa - baoa * baoa - r * r * baba;
  real h = b * b - a * cc;
  real best = 1e30;
  if (h >= 0 && std::fabs(a) > 1e-12) {
    const real tt = (-b - std::sqrt(h)) / a;
    const real y = baoa + tt * bard;
    if (y > 0 && y < baba && tt > 1e-6) best = tt;
  }
  // spherical caps
  real ts;
  Vec3 ns;
  if (hit_sphere(o, d, pa, r, ts, ns) && ts < best) best = ts;
  if (hit_sphere(o, d, pb, r, ts, ns) && ts < best) best = ts;
  if (best >= 1e29) return false;
  t = best;
  const Vec3 p = vadd(o, vscale(d, t));
  const real y = std::clamp(dot(vsub(p, pa), ba) / baba, 0.0, 1.0);
  n = vnormalize(vsub(p, vadd(pa, vscale(ba, y))));
  return true;
}

Hit trace(const SceneSpec& scene, const Vec3& o, const Vec3& d) {
  Hit hit;
  real best = 1e30;
  for (const Primitive& p : scene.prims) {
    real t;
    Vec3 n;
    bool ok = false;
    switch (p.kind) {
      case Primitive::Sphere:
        ok = hit_sphere(o, d, p.center, p.size[0], t, n);
        break;
      case Primitive::Box:
        ok = hit_box(o, d, p.center, p.size, t, n);
        break;
      case Primitive::Capsule:
        ok = hit_capsule(o, d, p.center, p.axis, p.size[1], p.size[0], t, n);
        break;
    }
    if (ok && t < best) {
      best = t;
      hit.ok = true;
      hit.t = t;
      hit.normal = n;
      hit.albedo = p.albedo;
    }
  }
  return hit;
}

bool prim_in_unit_cube(const Primitive& p) {
  Vec3 lo, hi;
  switch (p.kind) {
    case Primitive::Sphere:
      for (int a = 0; a < 3; ++a) {
        lo[a] = p.center[a] - p.size[0];
        hi[a] = p.center[a] + p.size[0];
      }
      break;
    case Primitive::Box:
      for (int a = 0; a < 3; ++a) {
        lo[a] = p.center[a] - p.size[a];
        hi[a] = p.center[a] + p.size[a];
      }
      break;
    case Primitive::Capsule:
      for (int a = 0; a < 3; ++a) {
        const real reach = std::fabs(p.axis[a]) * p.size[1] + p.size[0];
        lo[a] = p.center[a] - reach;
        hi[a] = p.center[a] + reach;
      }
      break;
  }
  for (int a = 0; a < 3; ++a)
    if (lo[a] < -0.5 || hi[a] > 0.5) return false;
  // also bound the circumscribed sphere: the reconstruction volume is an
  // axis-aligned cube in the *camera* frame, so containment must hold for
  // every rotation of the scene, i.e. on the circumscribed radius
  real reach = 0;
  switch (p.kind) {
    case Primitive::Sphere: reach = p.size[0]; break;
    case Primitive::Box:
      reach = std::sqrt(p.size[0] * p.size[0] + p.size[1] * p.size[1] +
                        p.size[2] * p.size[2]);
      break;
    case Primitive::Capsule: reach = p.size[1] + p.size[0]; break;
  }
  const real c = std::sqrt(p.center[0] * p.center[0] +
                           p.center[1] * p.center[1] +
                           p.center[2] * p.center[2]);
  return c + reach <= 0.65;
}

const Vec3 kLightDir = vnormalize({0.5, 0.7, 0.45});

json pose_json(const CameraPose& p) {
  auto a = pose_to_array(p);
  return json(std::vector<real>(a.begin(), a.end()));
}

CameraPose pose_from_json(const json& j) {
  std::array<real, 7> a;
  for (int i = 0; i < 7; ++i) a[i] = j.at(i).get<real>();
  return pose_from_array(a);
}

json prim_json(const Primitive& p) {
  static const char* names[] = {"sphere", "box", "capsule"};
  return json{{"kind", names[p.kind]},
              {"center", {p.center[0], p.center[1], p.center[2]}},
              {"size", {p.size[0], p.size[1], p.size[2]}},
              {"axis", {p.axis[0], p.axis[1], p.axis[2]}},
              {"albedo", {p.albedo[0], p.albedo[1], p.albedo[2]}}};
}

Primitive prim_from_json(const json& j) {
  Primitive p;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "sphere")
    p.kind = Primitive::Sphere;
  else if (kind == "box")
    p.kind = Primitive::Box;
  else if (kind == "capsule")
    p.kind = Primitive::Capsule;
  else
    throw std::runtime_error("unknown primitive kind: " + kind);
  for (int a = 0; a < 3; ++a) {
    p.center[a] = j.at("center").at(a).get<real>();
    p.size[a] = j.at("size").at(a).get<real>();
    p.axis[a] = j.at("axis").at(a).get<real>();
    p.albedo[a] = j.at("albedo").at(a).get<real>();
  }
  return p;
}

}  // namespace

SceneSpec random_scene(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> count(1, 4), kind(0, 2);
  std::uniform_real_distribution<real> u01(0, 1);
  SceneSpec s;
  const int n = count(rng);
  while (static_cast<int>(s.prims.size()) < n) {
    Primitive p;
    p.kind = static_cast<Primitive::Kind>(kind(rng));
    for (int a = 0; a < 3; ++a) {
      p.center[a] = (u01(rng) - 0.5) * 0.2;
      p.albedo[a] = 0.2 + 0.8 * u01(rng);
    }
    // sizes chosen so objects fill a healthy share of the frame, matching
    // object-centric captures; tiny objects starve the photometric losses
    switch (p.kind) {
      case Primitive::Sphere:
        p.size[0] = 0.25 + 0.2 * u01(rng);
        break;
      case Primitive::Box:
        for (int a = 0; a < 3; ++a) p.size[a] = 0.18 + 0.14 * u01(rng);
        break;
      case Primitive::Capsule: {
        p.size[0] = 0.1 + 0.08 * u01(rng);
        p.size[1] = 0.15 + 0.15 * u01(rng);
        Vec3 ax{u01(rng) - 0.5, u01(rng) - 0.5, u01(rng) - 0.5};
        if (vnorm(ax) < 1e-6) ax = {0, 0, 1};
        p.axis = vnormalize(ax);
        break;
      }
    }
    if (prim_in_unit_cube(p)) s.prims.push_back(p);
  }
  return s;
}

std::vector<Camera> sample_cameras(int k, std::mt19937_64& rng, real focal,
                                   int res) {
  if (k < 1) throw std::invalid_argument("sample_cameras: k < 1");
  std::uniform_real_distribution<real> dist(1.4, 1.6), roll(0, 2 * M_PI);
  std::normal_distribution<real> gauss(0, 1);
  std::vector<Camera> cams;
  for (int i = 0; i < k; ++i) {
    Vec3 dir{gauss(rng), gauss(rng), gauss(rng)};
    while (vnorm(dir) < 1e-6) dir = {gauss(rng), gauss(rng), gauss(rng)};
    dir = vnormalize(dir);
    const Vec3 pos = vscale(dir, dist(rng));
    const Vec3 fwd = vnormalize(vscale(pos, -1.0));  // toward the origin
    Vec3 up{0, 1, 0};
    if (std::fabs(dot(up, fwd)) > 0.99) up = {1, 0, 0};
    Vec3 y0 = vnormalize(vsub(up, vscale(fwd, dot(up, fwd))));
    const real th = roll(rng);
    const Vec3 y = vadd(vscale(y0, std::cos(th)),
                        vscale(cross(fwd, y0), std::sin(th)));
    const Vec3 x = cross(y, fwd);  // +x left, +y up, +z forward
    std::array<real, 9> rot{x[0], x[1], x[2], y[0], y[1],
                            y[2], fwd[0], fwd[1], fwd[2]};
    CameraPose pose;
    pose.rotation = Quaternion::from_matrix(rot);
    const auto m = pose.rotation.to_matrix();  // re-orthonormalized
    for (int r = 0; r < 3; ++r) {
      pose.translation[r] = 0;
      for (int c = 0; c < 3; ++c)
        pose.translation[r] -= m[r * 3 + c] * pos[c];
    }
    cams.push_back(make_camera(pose, focal, res, res));
  }
  return cams;
}

OracleImages oracle_render(const SceneSpec& scene, const Camera& camera,
                           int supersample) {
  const int h = camera.height, w = camera.width, ss = std::max(1, supersample);
  OracleImages out;
  out.rgb = Tensor::zeros({3, h, w});
  out.mask = Tensor::zeros({1, h, w});
  out.depth = Tensor::zeros({1, h, w});
  const CameraPose inv = invert(camera.pose);
  const auto rinv = inv.rotation.to_matrix();
  const Vec3 origin = camera_center(camera.pose);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      real acc_r = 0, acc_g = 0, acc_b = 0, acc_m = 0, acc_d = 0;
      int hits = 0;
      for (int sy = 0; sy < ss; ++sy)
        for (int sx = 0; sx < ss; ++sx) {
          const real px = u + (sx + 0.5) / ss;
          const real py = v + (sy + 0.5) / ss;
          const Vec3 dcam{-(px - camera.principal[0]) / camera.focal,
                          -(py - camera.principal[1]) / camera.focal, 1.0};
          Vec3 dw;
          for (int r = 0; r < 3; ++r)
            dw[r] = rinv[r * 3 + 0] * dcam[0] + rinv[r * 3 + 1] * dcam[1] +
                    rinv[r * 3 + 2] * dcam[2];
          dw = vnormalize(dw);
          Hit hit = trace(scene, origin, dw);
          if (hit.ok) {
            const real lambert =
                0.25 + 0.75 * std::max(0.0, dot(hit.normal, kLightDir));
            acc_r += std::clamp(hit.albedo[0] * lambert, 0.0, 1.0);
            acc_g += std::clamp(hit.albedo[1] * lambert, 0.0, 1.0);
            acc_b += std::clamp(hit.albedo[2] * lambert, 0.0, 1.0);
            acc_m += 1.0;
            acc_d += hit.t;
            ++hits;
          }
        }
      const real inv_n = 1.0 / (ss * ss);
      const int64_t i = static_cast<int64_t>(v) * w + u;
      out.rgb.data()[0 * h * w + i] = acc_r * inv_n;
      out.rgb.data()[1 * h * w + i] = acc_g * inv_n;
      out.rgb.data()[2 * h * w + i] = acc_b * inv_n;
      out.mask.data()[i] = acc_m * inv_n;
      out.depth.data()[i] = hits ? acc_d / hits : 0.0;
    }
  return out;
}

bool point_inside(const SceneSpec& scene, const Vec3& p) {
  for (const Primitive& prim : scene.prims) {
    switch (prim.kind) {
      case Primitive::Sphere:
        if (vnorm(vsub(p, prim.center)) <= prim.size[0]) return true;
        break;
      case Primitive::Box: {
        bool in = true;
        for (int a = 0; a < 3; ++a)
          if (std::fabs(p[a] - prim.center[a]) > prim.size[a]) in = false;
        if (in) return true;
        break;
      }
      case Primitive::Capsule: {
        const Vec3 pa = vsub(prim.center, vscale(prim.axis, prim.size[1]));
        const Vec3 ba = vscale(prim.axis, 2 * prim.size[1]);
        const real y =
            std::clamp(dot(vsub(p, pa), ba) / dot(ba, ba), 0.0, 1.0);
        if (vnorm(vsub(p, vadd(pa, vscale(ba, y)))) <= prim.size[0])
          return true;
        break;
      }
    }
  }
  return false;
}

OccupancyGrid voxelize(const SceneSpec& scene, int d) {
  if (d < 2) throw std::invalid_argument("voxelize: D < 2");
  OccupancyGrid g;
  g.dim = d;
  g.extent = 1.0;
  g.occ.resize(static_cast<size_t>(d) * d * d);
  size_t i = 0;
  for (int z = 0; z < d; ++z)
    for (int y = 0; y < d; ++y)
      for (int x = 0; x < d; ++x, ++i)
        g.occ[i] = point_inside(scene, {(x + 0.5) / d - 0.5,
                                        (y + 0.5) / d - 0.5,
                                        (z + 0.5) / d - 0.5})
                       ? 1
                       : 0;
  return g;
}

OccupancyGrid voxelize_camera(const SceneSpec& scene, int d,
                              const CameraPose& cam, const Vec3& center,
                              real extent) {
  if (d < 2) throw std::invalid_argument("voxelize: D < 2");
  const CameraPose inv = invert(cam);
  OccupancyGrid g;
  g.dim = d;
  g.extent = extent;
  g.occ.resize(static_cast<size_t>(d) * d * d);
  size_t i = 0;
  for (int z = 0; z < d; ++z)
    for (int y = 0; y < d; ++y)
      for (int x = 0; x < d; ++x, ++i) {
        const Vec3 pc{center[0] + ((x + 0.5) / d - 0.5) * extent,
                      center[1] + ((y + 0.5) / d - 0.5) * extent,
                      center[2] + ((z + 0.5) / d - 0.5) * extent};
        g.occ[i] = point_inside(scene, apply_pose(inv, pc)) ? 1 : 0;
      }
  return g;
}

std::string scene_to_json(const SceneSpec& s) {
  json j = json::array();
  for (const Primitive& p : s.prims) j.push_back(prim_json(p));
  return j.dump();
}

SceneSpec scene_from_json(const std::string& text) {
  SceneSpec s;
  for (const json& pj : json::parse(text)) s.prims.push_back(prim_from_json(pj));
  return s;
}

std::string make_dataset(int n_scenes, int k, uint64_t seed,
                         const std::string& out_dir, int res, real focal) {
  fs::create_directories(out_dir);
  json manifest{{"format_version", 1},
                {"seed", seed},
                {"n_scenes", n_scenes},
                {"k", k},
                {"res", res},
                {"focal", focal}};
  json scene_ids = json::array();
  for (int si = 0; si < n_scenes; ++si) {
    char name[32];
    std::snprintf(name, sizeof(name), "scene_%04d", si);
    const std::string dir = out_dir + "/" + name;
    fs::create_directories(dir);
    std::mt19937_64 rng(seed + 0x9e3779b97f4a7c15ULL * (si + 1));
    SceneSpec scene = random_scene(rng);
    std::vector<Camera> cams = sample_cameras(2 * k, rng, focal, res);

    json meta{{"scene", json::parse(scene_to_json(scene))},
              {"focal", focal},
              {"res", res}};
    json cam_j = json::array(), rel_j = json::array();
    json input_j = json::array(), eval_j = json::array();
    for (int i = 0; i < 2 * k; ++i) {
      cam_j.push_back(pose_json(cams[i].pose));
      (i < k ? input_j : eval_j).push_back(i);
      // 2x2 supersampling: hard-aliased silhouettes are unmatchable for any
      // finite-resolution renderer and dominate the photometric error
      OracleImages img = oracle_render(scene, cams[i], 2);
      char suffix[32];
      std::snprintf(suffix, sizeof(suffix), "_%02d", i);
      write_png_rgb(dir + "/view" + suffix + ".png", img.rgb);
      write_png_gray(dir + "/mask" + suffix + ".png", img.mask);
      write_depth_bin(dir + "/depth" + suffix + ".bin", img.depth);
    }
    for (int i = 1; i < k; ++i)
      rel_j.push_back(pose_json(relative_pose(cams[0].pose, cams[i].pose)));
    meta["cameras"] = cam_j;
    meta["input_views"] = input_j;
    meta["eval_views"] = eval_j;
    meta["gt_relative_poses"] = rel_j;
    atomic_write_bytes(dir + "/meta.json", meta.dump(2) + "\n");
    scene_ids.push_back(name);
  }
  manifest["scenes"] = scene_ids;
  const std::string path = out_dir + "/manifest.json";
  atomic_write_bytes(path, manifest.dump(2) + "\n");
  return path;
}

Episode load_episode(const std::string& scene_dir) {
  json meta = json::parse(read_bytes(scene_dir + "/meta.json"));
  Episode ep;
  ep.scene = scene_from_json(meta.at("scene").dump());
  const real focal = meta.at("focal").get<real>();
  const int res = meta.at("res").get<int>();
  const int n = static_cast<int>(meta.at("cameras").size());
  for (int i = 0; i < n; ++i) {
    ep.cameras.push_back(
        make_camera(pose_from_json(meta.at("cameras").at(i)), focal, res, res));
    char suffix[32];
    std::snprintf(suffix, sizeof(suffix), "_%02d", i);
    ep.images.push_back(read_png_rgb(scene_dir + "/view" + suffix + ".png"));
    ep.masks.push_back(read_png_gray(scene_dir + "/mask" + suffix + ".png"));
    ep.depths.push_back(
        read_depth_bin(scene_dir + "/depth" + suffix + ".bin", res, res));
  }
  for (const json& v : meta.at("input_views")) ep.input_views.push_back(v);
  for (const json& v : meta.at("eval_views")) ep.eval_views.push_back(v);
  ep.gt_relative_poses.canonical_index = 0;
  for (const json& pj : meta.at("gt_relative_poses"))
    ep.gt_relative_poses.poses.push_back(pose_from_json(pj));
  return ep;
}

std::vector<std::string> list_scenes(const std::string& manifest_path) {
  json manifest = json::parse(read_bytes(manifest_path));
  const std::string base = fs::path(manifest_path).parent_path().string();
  std::vector<std::string> out;
  for (const json& s : manifest.at("scenes"))
    out.push_back(base + "/" + s.get<std::string>());
  return out;
}

}  // namespace fk
