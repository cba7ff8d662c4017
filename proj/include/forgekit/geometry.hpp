#pragma once

#include <array>
#include <vector>

#include "forgekit/tensor.hpp"

namespace fk {

using Vec3 = std::array<real, 3>;

// Unit quaternion, hemisphere-normalized: w >= 0, and if w == 0 the first
// nonzero of (x,y,z) is positive.
struct Quaternion {
  real w = 1, x = 0, y = 0, z = 0;

  real norm() const;
  Quaternion normalized() const;
  Quaternion hemisphere() const;
  Quaternion conjugate() const { return {w, -x, -y, -z}; }
  Quaternion operator*(const Quaternion& o) const;
  Vec3 rotate(const Vec3& v) const;
  std::array<real, 9> to_matrix() const;  // row-major, active rotation
  static Quaternion from_matrix(const std::array<real, 9>& m);
  static Quaternion from_axis_angle(const Vec3& axis, real angle_rad);
  static Quaternion random_uniform(std::mt19937_64& rng);
};

// SE(3) element mapping world coordinates to camera coordinates:
// x_cam = R x_world + t.
struct CameraPose {
  Quaternion rotation;
  Vec3 translation{0, 0, 0};
};

CameraPose identity_pose();
CameraPose compose(const CameraPose& a, const CameraPose& b);
CameraPose invert(const CameraPose& p);
// T with compose(T, phi_i) == phi_j; maps camera-i coords to camera-j coords.
CameraPose relative_pose(const CameraPose& phi_i, const CameraPose& phi_j);
Vec3 apply_pose(const CameraPose& p, const Vec3& x);
real rotation_error_deg(const Quaternion& a, const Quaternion& b);
real translation_error(const Vec3& a, const Vec3& b);

// 7-real serialization order used everywhere poses touch disk.
std::array<real, 7> pose_to_array(const CameraPose& p);
CameraPose pose_from_array(const std::array<real, 7>& a);

// Pinhole camera. Looks down +z, y up, x left (right-handed); pixel (u,v)
// center maps to camera-frame direction (-(u+.5-cx)/f, -(v+.5-cy)/f, 1).
struct Camera {
  CameraPose pose;
  real focal = 0;                       // pixels
  std::array<real, 2> principal{0, 0};  // (cx, cy) pixels
  int height = 0, width = 0;
};

Camera make_camera(const CameraPose& pose, real focal, int height, int width);
Vec3 camera_center(const CameraPose& pose);  // world coordinates

// Deterministic sinusoidal 3D positional embedding; c must be divisible by 6
// (three axes, sin/cos, c/6 geometrically spaced bands).
struct PositionalEmbedding3D {
  int d = 0, h = 0, w = 0, c = 0;
  std::vector<real> values;  // [d][h][w][c]; PE_1D row n = values + n*c
  int64_t rows() const { return static_cast<int64_t>(d) * h * w; }
  const real* row(int64_t n) const { return values.data() + n * c; }
};

PositionalEmbedding3D make_positional_embedding(int d, int h, int w, int c);

// Feature lattice attached to a metric cube in some camera's frame.
struct VoxelGrid {
  int channels = 0, depth = 0, height = 0, width = 0;
  Vec3 cube_center{0, 0, 1.5};
  real extent = 1.0;  // cube side length, meters
  std::vector<real> values;  // [c][d][h][w]

  int64_t voxels() const { return static_cast<int64_t>(depth) * height * width; }
  real at(int c_, int z, int y, int x) const;
  real& at(int c_, int z, int y, int x);
};

VoxelGrid make_grid(int channels, int d, int h, int w, Vec3 cube_center,
                    real extent);

// Continuous voxel-index coordinate (z,y,x) of a metric point, and back.
std::array<real, 3> metric_to_index(const VoxelGrid& g, const Vec3& p);
Vec3 index_to_metric(const VoxelGrid& g, real iz, real iy, real ix);

// Inverse-warps `grid` by rigid transform T (source frame -> target frame):
// each target voxel center is pulled back through T^-1 and trilinearly
// sampled; reads outside the source cube are zero. Index coordinates within
// 1e-9 of the lattice are snapped so axis-aligned 90-degree rotations are
// exact permutations.
VoxelGrid grid_resample(const VoxelGrid& grid, const CameraPose& T);

// ---- autodiff pose path (used by fusion / rendering / pose refinement) ----

// pose7: [7] tensor (w,x,y,z,tx,ty,tz); the quaternion is normalized inside
// the graph so raw parameter updates stay on-manifold in gradient terms.
Tensor rotation_matrix_ad(const Tensor& pose7);            // [3,3]
Tensor pose_apply_ad(const Tensor& pose7, const Tensor& pts);          // R p + t
Tensor pose_inverse_apply_ad(const Tensor& pose7, const Tensor& pts);  // R^T (p - t)
Tensor pose_tensor(const CameraPose& p, bool requires_grad = false);
CameraPose pose_from_tensor(const Tensor& pose7);  // normalizes + hemisphere

}  // namespace fk
