#include "forgekit/volume.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace fk {

namespace {

// per-pixel camera-frame directions, row-major over (v,u), unnormalized
Tensor camera_dirs(real focal, real cx, real cy, int height, int width) {
  std::vector<real> d(static_cast<size_t>(height) * width * 3);
  int64_t n = 0;
  for (int v = 0; v < height; ++v)
    for (int u = 0; u < width; ++u) {
      d[n * 3 + 0] = -(u + 0.5 - cx) / focal;
      d[n * 3 + 1] = -(v + 0.5 - cy) / focal;
      d[n * 3 + 2] = 1.0;
      ++n;
    }
  return Tensor::from_data({height * width, 3}, std::move(d));
}

void push_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back((v >> (8 * i)) & 0xff);
}

uint32_t read_u32(const std::vector<uint8_t>& b, size_t off) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[off + i]) << (8 * i);
  return v;
}

real softplus_scalar(real x) {
  return x > 30 ? x : std::log1p(std::exp(x));
}

}  // namespace

RayBatch generate_rays_ad(const Tensor& pose7, real focal, real cx, real cy,
                          int height, int width) {
  const int n = height * width;
  Tensor dcam = camera_dirs(focal, cx, cy, height, width);
  Tensor rot = rotation_matrix_ad(pose7);
  // row-vector form of R^T d (directions rotate without translation)
  Tensor dw = matmul(dcam, rot);
  Tensor norm = sqrt(sum_lastdim(pow2(dw)));
  RayBatch rays;
  rays.dirs = dw / norm;
  Tensor center = pose_inverse_apply_ad(pose7, Tensor::zeros({1, 3}));
  rays.origins = Tensor::zeros({n, 3}) + center;
  return rays;
}

RayBatch generate_rays(const Camera& cam, int height, int width) {
  return generate_rays_ad(pose_tensor(cam.pose), cam.focal, cam.principal[0],
                          cam.principal[1], height, width);
}

RenderOutput render(const NeuralVolume& vol, const RayBatch& rays, int height,
                    int width, int n_samples,
                    const std::vector<real>* jitter) {
  if (n_samples < 2) throw std::invalid_argument("render: n_samples < 2");
  if (jitter && static_cast<int>(jitter->size()) != n_samples)
    throw std::invalid_argument("render: jitter size mismatch");
  const int n = height * width;
  const int s = n_samples;
  const int f = vol.feat_channels();
  const int d = vol.dim();

  auto seg = ray_cube_intersect(rays.origins, rays.dirs, vol.extent / 2,
                                vol.center);
  Tensor span = seg.t_far - seg.t_near;  // [N,1]
  Tensor delta = span / static_cast<real>(s);

  std::vector<real> off(s);
  for (int i = 0; i < s; ++i)
    off[i] = (i + (jitter ? (*jitter)[i] : 0.5)) / s;
  Tensor offsets = Tensor::from_data({1, s}, std::move(off));
  Tensor t = seg.t_near + offsets * span;  // [N,S]

  Tensor p = reshape(rays.origins, {n, 1, 3}) +
             reshape(t, {n, s, 1}) * reshape(rays.dirs, {n, 1, 3});
  p = reshape(p, {n * s, 3});

  const real scale = d / vol.extent;
  const real shift = d * 0.5 - 0.5;
  Tensor ix = (narrow(p, 1, 0, 1) - vol.center[0]) * scale + shift;
  Tensor iy = (narrow(p, 1, 1, 1) - vol.center[1]) * scale + shift;
  Tensor iz = (narrow(p, 1, 2, 1) - vol.center[2]) * scale + shift;
  Tensor idx = concat({iz, iy, ix}, 1);  // [NS,3], (z,y,x)

  Tensor sigma_grid = softplus(vol.density);
  Tensor sigma = reshape(trilinear_sample(sigma_grid, idx), {n, s});
  Tensor tau = sigma * delta;
  Tensor trans = exp(neg(cumsum_exclusive_lastdim(tau)));
  Tensor w = trans * (1.0 - exp(neg(tau)));  // [N,S]

  RenderOutput out;
  Tensor mask_n = sum_lastdim(w);  // [N,1]
  out.mask = reshape(mask_n, {1, height, width});
  out.depth = reshape(sum_lastdim(w * t) / maximum(mask_n, 1e-6),
                      {1, height, width});

  Tensor fs = trilinear_sample(vol.features, idx);        // [NS,F]
  Tensor ft = reshape(transpose2d(fs), {f, n, s});        // [F,N,S]
  out.feature_map = reshape(sum_lastdim(ft * w), {f, height, width});
  return out;
}

VolumeDecoder VolumeDecoder::make(int c_in, int mid, int f_out,
                                  std::mt19937_64& rng) {
  VolumeDecoder v;
  v.pre = Conv3dLayer::make(c_in, mid, 3, 1, 1, rng);
  v.post = Conv3dLayer::make(mid, mid, 3, 1, 1, rng);
  v.density_head = Conv3dLayer::make(mid, 1, 3, 1, 1, rng);
  // start nearly transparent: with alpha ~= 1 at init, the background pixels
  // of the silhouette loss shove the whole density field into the softplus
  // dead zone before the object can form, and recovery from there takes
  // thousands of steps
  for (int64_t i = 0; i < v.density_head.b.numel(); ++i)
    v.density_head.b.data()[i] = -2.0;
  v.feature_head = Conv3dLayer::make(mid, f_out, 3, 1, 1, rng);
  return v;
}

NeuralVolume VolumeDecoder::operator()(const Tensor& fused, const Vec3& center,
                                       real extent) const {
  Tensor h = leaky_relu(pre(fused));
  h = upsample2x_3d(h);
  h = leaky_relu(post(h));
  NeuralVolume vol;
  vol.density = density_head(h);
  vol.features = feature_head(h);
  vol.center = center;
  vol.extent = extent;
  return vol;
}

void VolumeDecoder::register_params(ParamMap& m,
                                    const std::string& prefix) const {
  pre.register_params(m, prefix + ".pre");
  post.register_params(m, prefix + ".post");
  density_head.register_params(m, prefix + ".density");
  feature_head.register_params(m, prefix + ".feature");
}

RgbHead RgbHead::make(int f_in, int mid, std::mt19937_64& rng) {
  RgbHead h;
  h.c1 = Conv2dLayer::make(f_in, mid, 3, 1, 1, rng);
  h.c2 = Conv2dLayer::make(mid, mid, 3, 1, 1, rng);
  h.c3 = Conv2dLayer::make(mid, 4, 3, 1, 1, rng);
  return h;
}

Tensor RgbHead::operator()(const Tensor& feature_map) const {
  Tensor x = leaky_relu(c1(feature_map));
  x = upsample2x_2d(x);
  x = leaky_relu(c2(x));
  return sigmoid(c3(x));
}

void RgbHead::register_params(ParamMap& m, const std::string& prefix) const {
  c1.register_params(m, prefix + ".c1");
  c2.register_params(m, prefix + ".c2");
  c3.register_params(m, prefix + ".c3");
}

OccupancyGrid extract_voxels(const NeuralVolume& vol, real threshold) {
  if (threshold <= 0) throw std::invalid_argument("extract_voxels: threshold");
  OccupancyGrid g;
  g.dim = vol.dim();
  g.extent = vol.extent;
  const auto& logits = vol.density.values();
  g.occ.resize(logits.size());
  for (size_t i = 0; i < logits.size(); ++i)
    g.occ[i] = softplus_scalar(logits[i]) > threshold ? 1 : 0;
  return g;
}

std::vector<uint8_t> encode_occupancy_rle(const OccupancyGrid& g) {
  std::vector<uint8_t> out;
  out.reserve(32);
  out.push_back('F');
  out.push_back('K');
  out.push_back('O');
  out.push_back('1');
  push_u32(out, static_cast<uint32_t>(g.dim));
  uint64_t ext_bits;
  double ext = static_cast<double>(g.extent);
  std::memcpy(&ext_bits, &ext, 8);
  for (int i = 0; i < 8; ++i) out.push_back((ext_bits >> (8 * i)) & 0xff);

  uint8_t cur = 0;  // runs alternate starting from a zero-run
  uint32_t run = 0;
  for (uint8_t v : g.occ) {
    if (v == cur) {
      ++run;
    } else {
      push_u32(out, run);
      cur = v;
      run = 1;
    }
  }
  push_u32(out, run);
  return out;
}

OccupancyGrid decode_occupancy_rle(const std::vector<uint8_t>& bytes) {
  if (bytes.size() < 16 || bytes[0] != 'F' || bytes[1] != 'K' ||
      bytes[2] != 'O' || bytes[3] != '1')
    throw std::runtime_error("occupancy rle: bad header");
  OccupancyGrid g;
  g.dim = static_cast<int>(read_u32(bytes, 4));
  uint64_t ext_bits = 0;
  for (int i = 0; i < 8; ++i)
    ext_bits |= static_cast<uint64_t>(bytes[8 + i]) << (8 * i);
  double ext;
  std::memcpy(&ext, &ext_bits, 8);
  g.extent = ext;
  const size_t total = static_cast<size_t>(g.dim) * g.dim * g.dim;
  uint8_t cur = 0;
  for (size_t off = 16; off + 4 <= bytes.size(); off += 4) {
    uint32_t run = read_u32(bytes, off);
    g.occ.insert(g.occ.end(), run, cur);
    cur ^= 1;
  }
  if (g.occ.size() != total)
    throw std::runtime_error("occupancy rle: truncated payload");
  return g;
}

}  // namespace fk
