#include "forgekit/geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace fk {

real Quaternion::norm() const {
  return std::sqrt(w * w + x * x + y * y + z * z);
}

Quaternion Quaternion::normalized() const {
  const real n = norm();
  if (n < 1e-300) throw std::domain_error("cannot normalize zero quaternion");
  return {w / n, x / n, y / n, z / n};
}

Quaternion Quaternion::hemisphere() const {
  const real* c[4] = {&w, &x, &y, &z};
  for (int i = 0; i < 4; ++i) {
    if (*c[i] > 0) return *this;
    if (*c[i] < 0) return {-w, -x, -y, -z};
  }
  return *this;
}

Quaternion Quaternion::operator*(const Quaternion& o) const {
  return {w * o.w - x * o.x - y * o.y - z * o.z,
          w * o.x + x * o.w + y * o.z - z * o.y,
          w * o.y - x * o.z + y * o.w + z * o.x,
          w * o.z + x * o.y - y * o.x + z * o.w};
}

Vec3 Quaternion::rotate(const Vec3& v) const {
  const auto m = to_matrix();
  return {m[0] * v[0] + m[1] * v[1] + m[2] * v[2],
          m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
          m[6] * v[0] + m[7] * v[1] + m[8] * v[2]};
}

std::array<real, 9> Quaternion::to_matrix() const {
  return {1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w),
          2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
          2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)};
}

Quaternion Quaternion::from_matrix(const std::array<real, 9>& m) {
  // Shepperd's method: pick the largest diagonal combination for stability.
  const real tr = m[0] + m[4] + m[8];
  Quaternion q;
  if (tr > 0) {
    real s = std::sqrt(tr + 1.0) * 2;
    q.w = 0.25 * s;
    q.x = (m[7] - m[5]) / s;
    q.y = (m[2] - m[6]) / s;
    q.z = (m[3] - m[1]) / s;
  } else if (m[0] > m[4] && m[0] > m[8]) {
    real s = std::sqrt(1.0 + m[0] - m[4] - m[8]) * 2;
    q.w = (m[7] - m[5]) / s;
    q.x = 0.25 * s;
    q.y = (m[1] + m[3]) / s;
    q.z = (m[2] + m[6]) / s;
  } else if (m[4] > m[8]) {
    real s = std::sqrt(1.0 + m[4] - m[0] - m[8]) * 2;
    q.w = (m[2] - m[6]) / s;
    q.x = (m[1] + m[3]) / s;
    q.y = 0.25 * s;
    q.z = (m[5] + m[7]) / s;
  } else {
    real s = std::sqrt(1.0 + m[8] - m[0] - m[4]) * 2;
    q.w = (m[3] - m[1]) / s;
    q.x = (m[2] + m[6]) / s;
    q.y = (m[5] + m[7]) / s;
    q.z = 0.25 * s;
  }
  return q.normalized().hemisphere();
}

Quaternion Quaternion::from_axis_angle(const Vec3& axis, real angle_rad) {
  const real n = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
  const real s = std::sin(angle_rad / 2) / n;
  return Quaternion{std::cos(angle_rad / 2), axis[0] * s, axis[1] * s,
                    axis[2] * s}
      .normalized()
      .hemisphere();
}

Quaternion Quaternion::random_uniform(std::mt19937_64& rng) {
  // Shoemake's subgroup algorithm.
  std::uniform_real_distribution<real> u(0.0, 1.0);
  const real u1 = u(rng), u2 = u(rng), u3 = u(rng);
  const real a = std::sqrt(1 - u1), b = std::sqrt(u1);
  const real pi2 = 2 * M_PI;
  return Quaternion{b * std::cos(pi2 * u3), a * std::sin(pi2 * u2),
                    a * std::cos(pi2 * u2), b * std::sin(pi2 * u3)}
      .hemisphere();
}

CameraPose identity_pose() { return {}; }

CameraPose compose(const CameraPose& a, const CameraPose& b) {
  CameraPose out;
  out.rotation = (a.rotation * b.rotation).normalized().hemisphere();
  const Vec3 rt = a.rotation.rotate(b.translation);
  out.translation = {rt[0] + a.translation[0], rt[1] + a.translation[1],
                     rt[2] + a.translation[2]};
  return out;
}

CameraPose invert(const CameraPose& p) {
  CameraPose out;
  out.rotation = p.rotation.conjugate().hemisphere();
  const Vec3 rt = out.rotation.rotate(p.translation);
  out.translation = {-rt[0], -rt[1], -rt[2]};
  return out;
}

CameraPose relative_pose(const CameraPose& phi_i, const CameraPose& phi_j) {
  return compose(phi_j, invert(phi_i));
}

Vec3 apply_pose(const CameraPose& p, const Vec3& x) {
  const Vec3 r = p.rotation.rotate(x);
  return {r[0] + p.translation[0], r[1] + p.translation[1],
          r[2] + p.translation[2]};
}

real rotation_error_deg(const Quaternion& a, const Quaternion& b) {
  const Quaternion an = a.normalized(), bn = b.normalized();
  real dot = an.w * bn.w + an.x * bn.x + an.y * bn.y + an.z * bn.z;
  dot = std::min<real>(1.0, std::fabs(dot));
  return 2.0 * std::acos(dot) * 180.0 / M_PI;
}

real translation_error(const Vec3& a, const Vec3& b) {
  const real dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

std::array<real, 7> pose_to_array(const CameraPose& p) {
  return {p.rotation.w,     p.rotation.x,     p.rotation.y,     p.rotation.z,
          p.translation[0], p.translation[1], p.translation[2]};
}

CameraPose pose_from_array(const std::array<real, 7>& a) {
  CameraPose p;
  p.rotation = Quaternion{a[0], a[1], a[2], a[3]}.normalized().hemisphere();
  p.translation = {a[4], a[5], a[6]};
  return p;
}

Camera make_camera(const CameraPose& pose, real focal, int height, int width) {
  if (focal <= 0) throw std::invalid_argument("focal must be positive");
  Camera c;
  c.pose = pose;
  c.focal = focal;
  c.principal = {width / 2.0, height / 2.0};
  c.height = height;
  c.width = width;
  return c;
}

Vec3 camera_center(const CameraPose& pose) {
  const CameraPose inv = invert(pose);
  return inv.translation;
}

PositionalEmbedding3D make_positional_embedding(int d, int h, int w, int c) {
  if (c % 6 != 0)
    throw std::invalid_argument("positional embedding channels must be divisible by 6");
  PositionalEmbedding3D pe;
  pe.d = d;
  pe.h = h;
  pe.w = w;
  pe.c = c;
  pe.values.assign(static_cast<size_t>(d) * h * w * c, 0.0);
  const int bands = c / 6;
  auto coord = [](int i, int n) {
    return n > 1 ? static_cast<real>(i) / (n - 1) : 0.0;
  };
  int64_t row = 0;
  for (int z = 0; z < d; ++z)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x, ++row) {
        real* out = pe.values.data() + row * c;
        const real u[3] = {coord(z, d), coord(y, h), coord(x, w)};
        for (int axis = 0; axis < 3; ++axis)
          for (int b = 0; b < bands; ++b) {
            const real angle = M_PI * std::ldexp(u[axis], b);  // pi * 2^b * u
            out[axis * 2 * bands + 2 * b] = std::sin(angle);
            out[axis * 2 * bands + 2 * b + 1] = std::cos(angle);
          }
      }
  return pe;
}

real VoxelGrid::at(int c_, int z, int y, int x) const {
  return values[((static_cast<int64_t>(c_) * depth + z) * height + y) * width + x];
}

real& VoxelGrid::at(int c_, int z, int y, int x) {
  return values[((static_cast<int64_t>(c_) * depth + z) * height + y) * width + x];
}

VoxelGrid make_grid(int channels, int d, int h, int w, Vec3 cube_center,
                    real extent) {
  VoxelGrid g;
  g.channels = channels;
  g.depth = d;
  g.height = h;
  g.width = w;
  g.cube_center = cube_center;
  g.extent = extent;
  g.values.assign(static_cast<size_t>(channels) * d * h * w, 0.0);
  return g;
}

std::array<real, 3> metric_to_index(const VoxelGrid& g, const Vec3& p) {
  const int dims[3] = {g.depth, g.height, g.width};
  // axis order: z->depth, y->height, x->width
  std::array<real, 3> out;
  for (int a = 0; a < 3; ++a) {
    const real rel = (p[2 - a] - g.cube_center[2 - a]) / g.extent;  // [-0.5,0.5]
    out[a] = rel * dims[a] + dims[a] / 2.0 - 0.5;
  }
  return out;
}

Vec3 index_to_metric(const VoxelGrid& g, real iz, real iy, real ix) {
  const real idx[3] = {iz, iy, ix};
  const int dims[3] = {g.depth, g.height, g.width};
  Vec3 p;
  for (int a = 0; a < 3; ++a)
    p[2 - a] = ((idx[a] + 0.5) / dims[a] - 0.5) * g.extent + g.cube_center[2 - a];
  return p;
}

VoxelGrid grid_resample(const VoxelGrid& grid, const CameraPose& T) {
  VoxelGrid out = make_grid(grid.channels, grid.depth, grid.height, grid.width,
                            grid.cube_center, grid.extent);
  const CameraPose t_inv = invert(T);
  const real snap = 1e-9;
  for (int z = 0; z < out.depth; ++z)
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width; ++x) {
        const Vec3 target = index_to_metric(out, z, y, x);
        const Vec3 src = apply_pose(t_inv, target);
        auto idx = metric_to_index(grid, src);
        for (auto& v : idx) {
          const real r = std::round(v);
          if (std::fabs(v - r) < snap) v = r;
        }
        const int z0 = static_cast<int>(std::floor(idx[0]));
        const int y0 = static_cast<int>(std::floor(idx[1]));
        const int x0 = static_cast<int>(std::floor(idx[2]));
        const real fz = idx[0] - z0, fy = idx[1] - y0, fx = idx[2] - x0;
        for (int c = 0; c < grid.channels; ++c) {
          real acc = 0;
          for (int dz = 0; dz < 2; ++dz)
            for (int dy = 0; dy < 2; ++dy)
              for (int dx = 0; dx < 2; ++dx) {
                const real wgt = (dz ? fz : 1 - fz) * (dy ? fy : 1 - fy) *
                                 (dx ? fx : 1 - fx);
                if (wgt == 0.0) continue;
                const int zz = z0 + dz, yy = y0 + dy, xx = x0 + dx;
                if (zz < 0 || zz >= grid.depth || yy < 0 || yy >= grid.height ||
                    xx < 0 || xx >= grid.width)
                  continue;
                acc += wgt * grid.at(c, zz, yy, xx);
              }
          out.at(c, z, y, x) = acc;
        }
      }
  return out;
}

// ---------------------------------------------------------------------------
// autodiff pose path

namespace {
Tensor at_idx(const Tensor& t, int i) { return narrow(t, 0, i, 1); }
}  // namespace

Tensor rotation_matrix_ad(const Tensor& pose7) {
  Tensor q = narrow(pose7, 0, 0, 4);
  Tensor qn = q / sqrt(sum(pow2(q)));
  Tensor w = at_idx(qn, 0), x = at_idx(qn, 1), y = at_idx(qn, 2), z = at_idx(qn, 3);
  Tensor one = Tensor::scalar(1.0);
  std::vector<Tensor> e = {
      one - 2.0 * (pow2(y) + pow2(z)), 2.0 * (x * y - z * w), 2.0 * (x * z + y * w),
      2.0 * (x * y + z * w), one - 2.0 * (pow2(x) + pow2(z)), 2.0 * (y * z - x * w),
      2.0 * (x * z - y * w), 2.0 * (y * z + x * w), one - 2.0 * (pow2(x) + pow2(y))};
  return reshape(concat(e, 0), {3, 3});
}

Tensor pose_apply_ad(const Tensor& pose7, const Tensor& pts) {
  Tensor r = rotation_matrix_ad(pose7);
  Tensor t = reshape(narrow(pose7, 0, 4, 3), {1, 3});
  return matmul(pts, transpose2d(r)) + t;
}

Tensor pose_inverse_apply_ad(const Tensor& pose7, const Tensor& pts) {
  Tensor r = rotation_matrix_ad(pose7);
  Tensor t = reshape(narrow(pose7, 0, 4, 3), {1, 3});
  return matmul(pts - t, r);
}

Tensor pose_tensor(const CameraPose& p, bool requires_grad) {
  const auto a = pose_to_array(p);
  Tensor t = Tensor::from_data({7}, std::vector<real>(a.begin(), a.end()));
  t.set_requires_grad(requires_grad);
  return t;
}

CameraPose pose_from_tensor(const Tensor& pose7) {
  std::array<real, 7> a;
  for (int i = 0; i < 7; ++i) a[i] = pose7.data()[i];
  return pose_from_array(a);
}

}  // namespace fk
