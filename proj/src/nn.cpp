#include "forgekit/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fk {

namespace {

bool needs_grad(const Tensor& t) {
  return t.node()->requires_grad || t.node()->backprop != nullptr;
}

Tensor init_normal(const Shape& s, real stddev, std::mt19937_64& rng) {
  std::normal_distribution<real> dist(0.0, stddev);
  std::vector<real> data(static_cast<size_t>(numel(s)));
  for (auto& v : data) v = dist(rng);
  Tensor t = Tensor::from_data(s, std::move(data));
  t.set_requires_grad(true);
  return t;
}

Tensor init_zeros(const Shape& s) {
  Tensor t = Tensor::zeros(s);
  t.set_requires_grad(true);
  return t;
}

// Valid output range [o_min, o_max] for one kernel tap: o*stride - pad + p
// must land in [0, in).
inline void tap_range(int in, int out, int stride, int pad, int p, int& o_min,
                      int& o_max) {
  o_min = std::max(0, (pad - p + stride - 1) / stride);
  o_max = std::min(out - 1, (in - 1 + pad - p) / stride);
}

}  // namespace

// ---------------------------------------------------------------------------
// conv2d

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride,
              int pad) {
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  if (xs.size() != 3 || ws.size() != 4 || xs[0] != ws[1])
    throw std::invalid_argument("conv2d: bad shapes " + shape_str(xs) + " " +
                                shape_str(ws));
  const int ci = xs[0], ih = xs[1], iw = xs[2];
  const int co = ws[0], kh = ws[2], kw = ws[3];
  const int oh = (ih + 2 * pad - kh) / stride + 1;
  const int ow = (iw + 2 * pad - kw) / stride + 1;

  std::vector<NodeRef> parents{x.node(), w.node()};
  if (b.defined()) parents.push_back(b.node());
  auto n = make_node({co, oh, ow}, false);
  n->parents = parents;
  Tensor out(n);

  real* po = out.data();
  const real* px = x.data();
  const real* pw = w.data();
  if (b.defined()) {
    const real* pb = b.data();
    for (int o = 0; o < co; ++o)
      std::fill(po + o * oh * ow, po + (o + 1) * oh * ow, pb[o]);
  }
  for (int o = 0; o < co; ++o)
    for (int i = 0; i < ci; ++i)
      for (int p = 0; p < kh; ++p)
        for (int q = 0; q < kw; ++q) {
          const real wv = pw[((o * ci + i) * kh + p) * kw + q];
          if (wv == 0.0) continue;
          int y0, y1, x0, x1;
          tap_range(ih, oh, stride, pad, p, y0, y1);
          tap_range(iw, ow, stride, pad, q, x0, x1);
          for (int oy = y0; oy <= y1; ++oy) {
            const real* xrow = px + (i * ih + oy * stride - pad + p) * iw +
                               (x0 * stride - pad + q);
            real* orow = po + (o * oh + oy) * ow + x0;
            if (stride == 1) {
              for (int ox = 0; ox <= x1 - x0; ++ox) orow[ox] += wv * xrow[ox];
            } else {
              for (int ox = 0; ox <= x1 - x0; ++ox)
                orow[ox] += wv * xrow[ox * stride];
            }
          }
        }

  if (needs_grad(x) || needs_grad(w) || (b.defined() && needs_grad(b))) {
    NodeRef nx = x.node(), nw = w.node();
    NodeRef nb = b.defined() ? b.node() : nullptr;
    const bool gx = needs_grad(x);
    out.node()->backprop = [=](Node& self) {
      const real* g = self.grad.data();
      const real* px = nx->value.data();
      const real* pw = nw->value.data();
      real* dx = nx->grad.data();
      real* dw = nw->grad.data();
      if (nb) {
        real* db = nb->grad.data();
        for (int o = 0; o < co; ++o) {
          real acc = 0;
          const real* grow = g + o * oh * ow;
          for (int i = 0; i < oh * ow; ++i) acc += grow[i];
          db[o] += acc;
        }
      }
      for (int o = 0; o < co; ++o)
        for (int i = 0; i < ci; ++i)
          for (int p = 0; p < kh; ++p)
            for (int q = 0; q < kw; ++q) {
              const real wv = pw[((o * ci + i) * kh + p) * kw + q];
              real wacc = 0;
              int y0, y1, x0, x1;
              tap_range(ih, oh, stride, pad, p, y0, y1);
              tap_range(iw, ow, stride, pad, q, x0, x1);
              for (int oy = y0; oy <= y1; ++oy) {
                const int xbase =
                    (i * ih + oy * stride - pad + p) * iw + (x0 * stride - pad + q);
                const real* grow = g + (o * oh + oy) * ow + x0;
                const real* xrow = px + xbase;
                real* dxrow = dx + xbase;
                for (int ox = 0; ox <= x1 - x0; ++ox) {
                  const real gv = grow[ox];
                  wacc += gv * xrow[ox * stride];
                  if (gx) dxrow[ox * stride] += wv * gv;
                }
              }
              dw[((o * ci + i) * kh + p) * kw + q] += wacc;
            }
    };
  }
  return out;
}

// ---------------------------------------------------------------------------
// conv3d

Tensor conv3d(const Tensor& x, const Tensor& w, const Tensor& b, int stride,
              int pad) {
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  if (xs.size() != 4 || ws.size() != 5 || xs[0] != ws[1])
    throw std::invalid_argument("conv3d: bad shapes " + shape_str(xs) + " " +
                                shape_str(ws));
  const int ci = xs[0], id = xs[1], ih = xs[2], iw = xs[3];
  const int co = ws[0], kd = ws[2], kh = ws[3], kw = ws[4];
  const int od = (id + 2 * pad - kd) / stride + 1;
  const int oh = (ih + 2 * pad - kh) / stride + 1;
  const int ow = (iw + 2 * pad - kw) / stride + 1;

  std::vector<NodeRef> parents{x.node(), w.node()};
  if (b.defined()) parents.push_back(b.node());
  auto n = make_node({co, od, oh, ow}, false);
  n->parents = parents;
  Tensor out(n);

  real* po = out.data();
  const real* px = x.data();
  const real* pw = w.data();
  const int64_t ovol = static_cast<int64_t>(od) * oh * ow;
  if (b.defined()) {
    const real* pb = b.data();
    for (int o = 0; o < co; ++o)
      std::fill(po + o * ovol, po + (o + 1) * ovol, pb[o]);
  }
  for (int o = 0; o < co; ++o)
    for (int i = 0; i < ci; ++i)
      for (int r = 0; r < kd; ++r)
        for (int p = 0; p < kh; ++p)
          for (int q = 0; q < kw; ++q) {
            const real wv = pw[(((o * ci + i) * kd + r) * kh + p) * kw + q];
            if (wv == 0.0) continue;
            int z0, z1, y0, y1, x0, x1;
            tap_range(id, od, stride, pad, r, z0, z1);
            tap_range(ih, oh, stride, pad, p, y0, y1);
            tap_range(iw, ow, stride, pad, q, x0, x1);
            for (int oz = z0; oz <= z1; ++oz)
              for (int oy = y0; oy <= y1; ++oy) {
                const real* xrow =
                    px + ((i * id + oz * stride - pad + r) * ih + oy * stride -
                          pad + p) *
                             iw +
                    (x0 * stride - pad + q);
                real* orow = po + ((o * od + oz) * oh + oy) * ow + x0;
                if (stride == 1) {
                  for (int ox = 0; ox <= x1 - x0; ++ox)
                    orow[ox] += wv * xrow[ox];
                } else {
                  for (int ox = 0; ox <= x1 - x0; ++ox)
                    orow[ox] += wv * xrow[ox * stride];
                }
              }
          }

  if (needs_grad(x) || needs_grad(w) || (b.defined() && needs_grad(b))) {
    NodeRef nx = x.node(), nw = w.node();
    NodeRef nb = b.defined() ? b.node() : nullptr;
    const bool gx = needs_grad(x);
    out.node()->backprop = [=](Node& self) {
      const real* g = self.grad.data();
      const real* px = nx->value.data();
      const real* pw = nw->value.data();
      real* dx = nx->grad.data();
      real* dw = nw->grad.data();
      if (nb) {
        real* db = nb->grad.data();
        for (int o = 0; o < co; ++o) {
          real acc = 0;
          const real* grow = g + o * ovol;
          for (int64_t i = 0; i < ovol; ++i) acc += grow[i];
          db[o] += acc;
        }
      }
      for (int o = 0; o < co; ++o)
        for (int i = 0; i < ci; ++i)
          for (int r = 0; r < kd; ++r)
            for (int p = 0; p < kh; ++p)
              for (int q = 0; q < kw; ++q) {
                const real wv = pw[(((o * ci + i) * kd + r) * kh + p) * kw + q];
                real wacc = 0;
                int z0, z1, y0, y1, x0, x1;
                tap_range(id, od, stride, pad, r, z0, z1);
                tap_range(ih, oh, stride, pad, p, y0, y1);
                tap_range(iw, ow, stride, pad, q, x0, x1);
                for (int oz = z0; oz <= z1; ++oz)
                  for (int oy = y0; oy <= y1; ++oy) {
                    const int xbase =
                        ((i * id + oz * stride - pad + r) * ih + oy * stride -
                         pad + p) *
                            iw +
                        (x0 * stride - pad + q);
                    const real* grow = g + ((o * od + oz) * oh + oy) * ow + x0;
                    const real* xrow = px + xbase;
                    real* dxrow = dx + xbase;
                    for (int ox = 0; ox <= x1 - x0; ++ox) {
                      const real gv = grow[ox];
                      wacc += gv * xrow[ox * stride];
                      if (gx) dxrow[ox * stride] += wv * gv;
                    }
                  }
                dw[(((o * ci + i) * kd + r) * kh + p) * kw + q] += wacc;
              }
    };
  }
  return out;
}

// ---------------------------------------------------------------------------
// upsampling

Tensor upsample2x_2d(const Tensor& x) {
  const Shape& s = x.shape();
  if (s.size() != 3) throw std::invalid_argument("upsample2x_2d: rank != 3");
  const int c = s[0], h = s[1], w = s[2];
  auto n = make_node({c, 2 * h, 2 * w}, false);
  n->parents = {x.node()};
  Tensor out(n);
  const real* px = x.data();
  real* po = out.data();
  for (int i = 0; i < c; ++i)
    for (int y = 0; y < 2 * h; ++y)
      for (int xx = 0; xx < 2 * w; ++xx)
        po[(i * 2 * h + y) * 2 * w + xx] = px[(i * h + y / 2) * w + xx / 2];
  if (needs_grad(x)) {
    NodeRef nx = x.node();
    out.node()->backprop = [nx, c, h, w](Node& self) {
      for (int i = 0; i < c; ++i)
        for (int y = 0; y < 2 * h; ++y)
          for (int xx = 0; xx < 2 * w; ++xx)
            nx->grad[(i * h + y / 2) * w + xx / 2] +=
                self.grad[(i * 2 * h + y) * 2 * w + xx];
    };
  }
  return out;
}

Tensor upsample2x_3d(const Tensor& x) {
  const Shape& s = x.shape();
  if (s.size() != 4) throw std::invalid_argument("upsample2x_3d: rank != 4");
  const int c = s[0], d = s[1], h = s[2], w = s[3];
  auto n = make_node({c, 2 * d, 2 * h, 2 * w}, false);
  n->parents = {x.node()};
  Tensor out(n);
  const real* px = x.data();
  real* po = out.data();
  for (int i = 0; i < c; ++i)
    for (int z = 0; z < 2 * d; ++z)
      for (int y = 0; y < 2 * h; ++y)
        for (int xx = 0; xx < 2 * w; ++xx)
          po[((i * 2 * d + z) * 2 * h + y) * 2 * w + xx] =
              px[((i * d + z / 2) * h + y / 2) * w + xx / 2];
  if (needs_grad(x)) {
    NodeRef nx = x.node();
    out.node()->backprop = [nx, c, d, h, w](Node& self) {
      for (int i = 0; i < c; ++i)
        for (int z = 0; z < 2 * d; ++z)
          for (int y = 0; y < 2 * h; ++y)
            for (int xx = 0; xx < 2 * w; ++xx)
              nx->grad[((i * d + z / 2) * h + y / 2) * w + xx / 2] +=
                  self.grad[((i * 2 * d + z) * 2 * h + y) * 2 * w + xx];
    };
  }
  return out;
}

// ---------------------------------------------------------------------------
// trilinear sampling

Tensor trilinear_sample(const Tensor& grid, const Tensor& pts) {
  const Shape& gs = grid.shape();
  const Shape& ps = pts.shape();
  if (gs.size() != 4 || ps.size() != 2 || ps[1] != 3)
    throw std::invalid_argument("trilinear_sample: bad shapes");
  const int c = gs[0], d = gs[1], h = gs[2], w = gs[3];
  const int n = ps[0];
  auto node = make_node({n, c}, false);
  node->parents = {grid.node(), pts.node()};
  Tensor out(node);

  const real* pg = grid.data();
  const real* pp = pts.data();
  real* po = out.data();

  auto cell = [&](int ch, int z, int y, int x) -> real {
    if (z < 0 || z >= d || y < 0 || y >= h || x < 0 || x >= w) return 0.0;
    return pg[((ch * d + z) * h + y) * w + x];
  };

  for (int i = 0; i < n; ++i) {
    const real z = pp[i * 3 + 0], y = pp[i * 3 + 1], x = pp[i * 3 + 2];
    const int z0 = static_cast<int>(std::floor(z));
    const int y0 = static_cast<int>(std::floor(y));
    const int x0 = static_cast<int>(std::floor(x));
    const real fz = z - z0, fy = y - y0, fx = x - x0;
    for (int ch = 0; ch < c; ++ch) {
      real acc = 0;
      for (int dz = 0; dz < 2; ++dz)
        for (int dy = 0; dy < 2; ++dy)
          for (int dxb = 0; dxb < 2; ++dxb) {
            const real wz = dz ? fz : 1 - fz;
            const real wy = dy ? fy : 1 - fy;
            const real wx = dxb ? fx : 1 - fx;
            acc += wz * wy * wx * cell(ch, z0 + dz, y0 + dy, x0 + dxb);
          }
      po[i * c + ch] = acc;
    }
  }

  if (needs_grad(grid) || needs_grad(pts)) {
    NodeRef ng = grid.node(), np = pts.node();
    const bool gg = needs_grad(grid), gp = needs_grad(pts);
    out.node()->backprop = [=](Node& self) {
      const real* g = self.grad.data();
      const real* pg = ng->value.data();
      const real* pp = np->value.data();
      auto cell = [&](int ch, int z, int y, int x) -> real {
        if (z < 0 || z >= d || y < 0 || y >= h || x < 0 || x >= w) return 0.0;
        return pg[((ch * d + z) * h + y) * w + x];
      };
      for (int i = 0; i < n; ++i) {
        const real z = pp[i * 3 + 0], y = pp[i * 3 + 1], x = pp[i * 3 + 2];
        const int z0 = static_cast<int>(std::floor(z));
        const int y0 = static_cast<int>(std::floor(y));
        const int x0 = static_cast<int>(std::floor(x));
        const real fz = z - z0, fy = y - y0, fx = x - x0;
        real dz_acc = 0, dy_acc = 0, dx_acc = 0;
        for (int ch = 0; ch < c; ++ch) {
          const real gv = g[i * c + ch];
          if (gv == 0.0) continue;
          for (int dz = 0; dz < 2; ++dz)
            for (int dy = 0; dy < 2; ++dy)
              for (int dxb = 0; dxb < 2; ++dxb) {
                const real wz = dz ? fz : 1 - fz;
                const real wy = dy ? fy : 1 - fy;
                const real wx = dxb ? fx : 1 - fx;
                const int zz = z0 + dz, yy = y0 + dy, xx = x0 + dxb;
                if (gg && zz >= 0 && zz < d && yy >= 0 && yy < h && xx >= 0 &&
                    xx < w)
                  ng->grad[((ch * d + zz) * h + yy) * w + xx] +=
                      gv * wz * wy * wx;
                if (gp) {
                  const real v = cell(ch, zz, yy, xx);
                  if (v != 0.0) {
                    dz_acc += gv * (dz ? 1.0 : -1.0) * wy * wx * v;
                    dy_acc += gv * wz * (dy ? 1.0 : -1.0) * wx * v;
                    dx_acc += gv * wz * wy * (dxb ? 1.0 : -1.0) * v;
                  }
                }
              }
        }
        if (gp) {
          np->grad[i * 3 + 0] += dz_acc;
          np->grad[i * 3 + 1] += dy_acc;
          np->grad[i * 3 + 2] += dx_acc;
        }
      }
    };
  }
  return out;
}

// ---------------------------------------------------------------------------
// ray-cube intersection

RaySegments ray_cube_intersect(const Tensor& origins, const Tensor& dirs,
                               real half, const std::array<real, 3>& center) {
  const int n = origins.shape()[0];
  // Guard near-zero direction components with a constant substitute; the
  // substituted lanes carry no gradient, which is the correct subgradient for
  // grazing rays.
  const real eps = 1e-12;
  std::vector<char> tiny(static_cast<size_t>(n) * 3);
  std::vector<real> safe(static_cast<size_t>(n) * 3);
  const real* pd = dirs.data();
  for (int64_t i = 0; i < n * 3; ++i) {
    tiny[i] = std::fabs(pd[i]) < eps;
    safe[i] = pd[i] >= 0 ? eps : -eps;
  }
  Tensor d_safe = where(tiny, Tensor::from_data(dirs.shape(), safe), dirs);

  Tensor c = Tensor::from_data({1, 3}, {center[0], center[1], center[2]});
  Tensor rel = origins - c;
  Tensor t_lo = rsub(-half, rel) / d_safe;  // (-half - rel) / d
  Tensor t_hi = rsub(half, rel) / d_safe;   // (half - rel) / d
  Tensor axis_near = minimum(t_lo, t_hi);
  Tensor axis_far = maximum(t_lo, t_hi);
  Tensor t_near = maximum(max_lastdim(axis_near), 0.0);  // [n,1]
  Tensor t_far = min_lastdim(axis_far);
  // miss: clamp far down to near so segment length is zero
  std::vector<char> miss(n);
  for (int i = 0; i < n; ++i)
    miss[i] = t_far.data()[i] <= t_near.data()[i];
  Tensor t_far_fixed = where(miss, detach(t_near), t_far);
  return {t_near, t_far_fixed};
}

// ---------------------------------------------------------------------------
// layers

Linear Linear::make(int in, int out, std::mt19937_64& rng) {
  Linear l;
  l.w = init_normal({out, in}, std::sqrt(2.0 / in), rng);
  l.b = init_zeros({out});
  return l;
}

Tensor Linear::operator()(const Tensor& x) const {
  return matmul(x, transpose2d(w)) + reshape(b, {1, b.dim(0)});
}

void Linear::register_params(ParamMap& m, const std::string& prefix) const {
  m[prefix + ".w"] = w;
  m[prefix + ".b"] = b;
}

Conv2dLayer Conv2dLayer::make(int cin, int cout, int k, int stride, int pad,
                              std::mt19937_64& rng) {
  Conv2dLayer l;
  l.w = init_normal({cout, cin, k, k}, std::sqrt(2.0 / (cin * k * k)), rng);
  l.b = init_zeros({cout});
  l.stride = stride;
  l.pad = pad;
  return l;
}

Tensor Conv2dLayer::operator()(const Tensor& x) const {
  return conv2d(x, w, b, stride, pad);
}

void Conv2dLayer::register_params(ParamMap& m, const std::string& prefix) const {
  m[prefix + ".w"] = w;
  m[prefix + ".b"] = b;
}

Conv3dLayer Conv3dLayer::make(int cin, int cout, int k, int stride, int pad,
                              std::mt19937_64& rng) {
  Conv3dLayer l;
  l.w = init_normal({cout, cin, k, k, k}, std::sqrt(2.0 / (cin * k * k * k)), rng);
  l.b = init_zeros({cout});
  l.stride = stride;
  l.pad = pad;
  return l;
}

Tensor Conv3dLayer::operator()(const Tensor& x) const {
  return conv3d(x, w, b, stride, pad);
}

void Conv3dLayer::register_params(ParamMap& m, const std::string& prefix) const {
  m[prefix + ".w"] = w;
  m[prefix + ".b"] = b;
}

ConvGRU3d ConvGRU3d::make(int channels, std::mt19937_64& rng) {
  ConvGRU3d g;
  g.update_gate = Conv3dLayer::make(2 * channels, channels, 3, 1, 1, rng);
  g.reset_gate = Conv3dLayer::make(2 * channels, channels, 3, 1, 1, rng);
  g.candidate = Conv3dLayer::make(2 * channels, channels, 3, 1, 1, rng);
  return g;
}

Tensor ConvGRU3d::operator()(const Tensor& h, const Tensor& x) const {
  Tensor hx = concat({h, x}, 0);
  Tensor z = sigmoid(update_gate(hx));
  Tensor r = sigmoid(reset_gate(hx));
  Tensor cand = tanh_t(candidate(concat({r * h, x}, 0)));
  return (1.0 - z) * h + z * cand;
}

void ConvGRU3d::register_params(ParamMap& m, const std::string& prefix) const {
  update_gate.register_params(m, prefix + ".z");
  reset_gate.register_params(m, prefix + ".r");
  candidate.register_params(m, prefix + ".n");
}

AttentionBlock AttentionBlock::make(int dim, int heads, std::mt19937_64& rng) {
  if (dim % heads != 0)
    throw std::invalid_argument("AttentionBlock: dim % heads != 0");
  AttentionBlock a;
  a.heads = heads;
  a.wq = Linear::make(dim, dim, rng);
  a.wk = Linear::make(dim, dim, rng);
  a.wv = Linear::make(dim, dim, rng);
  a.wo = Linear::make(dim, dim, rng);
  a.ff1 = Linear::make(dim, 2 * dim, rng);
  a.ff2 = Linear::make(2 * dim, dim, rng);
  return a;
}

namespace {
Tensor rmsnorm(const Tensor& x) {
  const int d = x.shape().back();
  Tensor ms = sum_lastdim(pow2(x)) / static_cast<real>(d);
  return x / sqrt(ms + 1e-8);
}
}  // namespace

Tensor AttentionBlock::operator()(const Tensor& q, const Tensor& kv) const {
  const int dim = q.shape()[1];
  const int dh = dim / heads;
  Tensor qn = rmsnorm(q);
  Tensor kn = rmsnorm(kv);
  Tensor Q = wq(qn), K = wk(kn), V = wv(kn);
  std::vector<Tensor> head_out;
  const real scale = 1.0 / std::sqrt(static_cast<real>(dh));
  for (int h = 0; h < heads; ++h) {
    Tensor qh = narrow(Q, 1, h * dh, dh);
    Tensor kh = narrow(K, 1, h * dh, dh);
    Tensor vh = narrow(V, 1, h * dh, dh);
    Tensor att = softmax_lastdim(matmul(qh, transpose2d(kh)) * scale);
    head_out.push_back(matmul(att, vh));
  }
  Tensor res = q + wo(concat(head_out, 1));
  Tensor ff = ff2(relu(ff1(rmsnorm(res))));
  return res + ff;
}

void AttentionBlock::register_params(ParamMap& m,
                                     const std::string& prefix) const {
  wq.register_params(m, prefix + ".wq");
  wk.register_params(m, prefix + ".wk");
  wv.register_params(m, prefix + ".wv");
  wo.register_params(m, prefix + ".wo");
  ff1.register_params(m, prefix + ".ff1");
  ff2.register_params(m, prefix + ".ff2");
}

// ---------------------------------------------------------------------------
// Adam

void Adam::reset(size_t n_params) {
  m.assign(n_params, {});
  v.assign(n_params, {});
  step_count = 0;
}

void Adam::step(std::vector<Tensor>& params) {
  if (m.size() != params.size()) reset(params.size());
  ++step_count;
  const real bc1 = 1.0 - std::pow(beta1, static_cast<real>(step_count));
  const real bc2 = 1.0 - std::pow(beta2, static_cast<real>(step_count));
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    if (p.grad().size() != p.values().size()) continue;  // unused this step
    auto& mi = m[i];
    auto& vi = v[i];
    if (mi.size() != p.values().size()) {
      mi.assign(p.values().size(), 0.0);
      vi.assign(p.values().size(), 0.0);
    }
    real* pv = p.data();
    const real* g = p.grad().data();
    for (size_t j = 0; j < p.values().size(); ++j) {
      mi[j] = beta1 * mi[j] + (1 - beta1) * g[j];
      vi[j] = beta2 * vi[j] + (1 - beta2) * g[j] * g[j];
      pv[j] -= lr * (mi[j] / bc1) / (std::sqrt(vi[j] / bc2) + eps);
    }
  }
}

std::vector<Tensor> param_list(ParamMap& m) {
  std::vector<Tensor> out;
  out.reserve(m.size());
  for (auto& [k, t] : m) out.push_back(t);
  return out;
}

void zero_grads(ParamMap& m) {
  for (auto& [k, t] : m) t.zero_grad();
}

}  // namespace fk
