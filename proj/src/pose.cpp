#include "forgekit/pose.hpp"

#include <cmath>
#include <stdexcept>

namespace fk {

namespace {

int log2_exact(int v, const char* what) {
  int n = 0;
  for (int s = v; s > 1; s /= 2) {
    if (s % 2 != 0) throw std::invalid_argument(what);
    ++n;
  }
  return n;
}

// tokens: [C,H,W] map -> [H*W, C]
Tensor to_tokens(const Tensor& map) {
  const int c = map.dim(0), n = map.dim(1) * map.dim(2);
  return transpose2d(reshape(map, {c, n}));
}

Tensor from_tokens(const Tensor& tok, int h, int w) {
  return reshape(transpose2d(tok), {tok.dim(1), h, w});
}

}  // namespace

Tensor correlation_1d(const Tensor& q, const Tensor& c, const Tensor& pe,
                      bool softmax_norm, real inv_temp) {
  Tensor s = matmul(q, transpose2d(c)) * inv_temp;
  if (softmax_norm) s = softmax_lastdim(s);
  return matmul(s, pe);
}

PoseEstimator PoseEstimator::make(const Config& cfg, std::mt19937_64& rng) {
  if (cfg.pe_ch % 6 != 0)
    throw std::invalid_argument("pose: pe_ch must be divisible by 6");
  const int n_bstages = log2_exact(cfg.stride, "pose: stride not a power of two");
  const int tr = cfg.img_res / cfg.stride;
  const int n_collapse = log2_exact(tr, "pose: token map not a power of two");
  const int n_pdown =
      log2_exact(cfg.grid_dim / cfg.pair_dim, "pose: pair_dim ratio");
  const int n_preduce = log2_exact(cfg.pair_dim, "pose: pair_dim");

  PoseEstimator pe;
  pe.cfg = cfg;
  pe.g_stem = Conv2dLayer::make(cfg.img_ch, cfg.backbone_base, 3, 1, 1, rng);
  int w = cfg.backbone_base;
  for (int i = 0; i < n_bstages; ++i) {
    Stage st;
    st.down = Conv2dLayer::make(w, w * 2, 3, 2, 1, rng);
    st.r1 = Conv2dLayer::make(w * 2, w * 2, 3, 1, 1, rng);
    st.r2 = Conv2dLayer::make(w * 2, w * 2, 3, 1, 1, rng);
    pe.g_stages.push_back(st);
    w *= 2;
  }
  pe.g_head = Conv2dLayer::make(w, cfg.tok_ch, 3, 1, 1, rng);

  std::normal_distribution<real> pedist(0.0, 0.02);
  std::vector<real> pev(static_cast<size_t>(tr) * tr * cfg.tok_ch);
  for (auto& v : pev) v = pedist(rng);
  pe.learned_pe = Tensor::from_data({tr * tr, cfg.tok_ch}, std::move(pev));

  for (int i = 0; i < 3; ++i)
    pe.gpr.push_back({AttentionBlock::make(cfg.tok_ch, cfg.heads, rng),
                      AttentionBlock::make(cfg.tok_ch, cfg.heads, rng)});

  for (int i = 0; i < n_collapse; ++i) {
    const int cout = (i == n_collapse - 1) ? cfg.feat_dim : cfg.tok_ch;
    pe.g_collapse.push_back(
        Conv2dLayer::make(cfg.tok_ch, cout, 3, 2, 1, rng));
  }

  if (n_pdown == 0) {
    pe.pair_down.push_back(
        Conv3dLayer::make(cfg.grid_ch, cfg.pair_ch, 3, 1, 1, rng));
  } else {
    int cin = cfg.grid_ch;
    for (int i = 0; i < n_pdown; ++i) {
      pe.pair_down.push_back(Conv3dLayer::make(cin, cfg.pair_ch, 3, 2, 1, rng));
      cin = cfg.pair_ch;
    }
  }
  pe.pair_attn = AttentionBlock::make(cfg.pe_ch, cfg.heads, rng);
  for (int i = 0; i < n_preduce; ++i) {
    const int cout = (i == n_preduce - 1) ? cfg.feat_dim : cfg.pe_ch;
    pe.pair_reduce.push_back(Conv3dLayer::make(cfg.pe_ch, cout, 3, 2, 1, rng));
  }
  pe.pe1d =
      make_positional_embedding(cfg.pair_dim, cfg.pair_dim, cfg.pair_dim,
                                cfg.pe_ch);
  pe.pe1d_t = Tensor::from_data(
      {static_cast<int>(pe.pe1d.rows()), cfg.pe_ch}, pe.pe1d.values);

  pe.mlp1 = Linear::make(2 * cfg.feat_dim, cfg.mlp_hidden, rng);
  pe.mlp2 = Linear::make(cfg.mlp_hidden, 7, rng);
  return pe;
}

Tensor PoseEstimator::global_features(const std::vector<Tensor>& images,
                                      int canonical_index) const {
  const int k = static_cast<int>(images.size());
  if (k < 2) throw std::invalid_argument("global_features: need k >= 2 views");
  const int tr = cfg.img_res / cfg.stride;
  const int n2d = tr * tr;

  auto backbone = [&](const Tensor& img) {
    if (img.dim(1) != cfg.img_res || img.dim(2) != cfg.img_res)
      throw std::invalid_argument("global_features: bad image resolution");
    Tensor x = leaky_relu(g_stem(img));
    for (const auto& st : g_stages) {
      x = leaky_relu(st.down(x));
      Tensor h = leaky_relu(st.r1(x));
      x = leaky_relu(st.r2(h) + x);
    }
    return g_head(x);
  };

  Tensor k_g;
  std::vector<Tensor> queries;
  for (int i = 0; i < k; ++i) {
    Tensor tok = to_tokens(backbone(images[i])) + learned_pe;
    if (i == canonical_index)
      k_g = tok;
    else
      queries.push_back(tok);
  }
  Tensor q = concat(queries, 0);  // [(k-1)*N2d, tok_ch]
  for (const auto& g : gpr) {
    q = g.cross(q, k_g);
    q = g.self(q, q);
  }

  std::vector<Tensor> rows;
  for (int i = 0; i < k - 1; ++i) {
    Tensor x = from_tokens(narrow(q, 0, i * n2d, n2d), tr, tr);
    for (size_t j = 0; j < g_collapse.size(); ++j) {
      x = g_collapse[j](x);
      if (j + 1 < g_collapse.size()) x = leaky_relu(x);
    }
    rows.push_back(reshape(x, {1, cfg.feat_dim}));
  }
  return concat(rows, 0);
}

Tensor PoseEstimator::pair_tokens(const Tensor& grid) const {
  if (grid.dim(0) != cfg.grid_ch || grid.dim(1) != cfg.grid_dim)
    throw std::invalid_argument("pairwise: grid shape mismatch");
  Tensor x = grid;
  for (size_t i = 0; i < pair_down.size(); ++i) {
    x = pair_down[i](x);
    if (i + 1 < pair_down.size()) x = leaky_relu(x);
  }
  const int n = x.dim(1) * x.dim(2) * x.dim(3);
  return transpose2d(reshape(x, {cfg.pair_ch, n}));  // [N3d, pair_ch]
}

Tensor PoseEstimator::pairwise_pair(const Tensor& z_query,
                                    const Tensor& z_canonical) const {
  if (z_query.shape() != z_canonical.shape())
    throw std::invalid_argument("pairwise: query/canonical shape mismatch");
  Tensor q = pair_tokens(z_query);
  Tensor c = pair_tokens(z_canonical);
  Tensor corr = correlation_1d(q, c, pe1d_t, cfg.pairwise_softmax,
                               1.0 / std::sqrt(static_cast<real>(cfg.pair_ch)));
  Tensor refined = pair_attn(corr, corr);  // [N3d, pe_ch]
  const int pd = cfg.pair_dim;
  Tensor x = reshape(transpose2d(refined), {cfg.pe_ch, pd, pd, pd});
  for (size_t i = 0; i < pair_reduce.size(); ++i) {
    x = pair_reduce[i](x);
    if (i + 1 < pair_reduce.size()) x = leaky_relu(x);
  }
  return reshape(x, {1, cfg.feat_dim});
}

Tensor PoseEstimator::pairwise_features(const std::vector<Tensor>& grids,
                                        int canonical_index) const {
  const int k = static_cast<int>(grids.size());
  if (k < 2) throw std::invalid_argument("pairwise_features: need k >= 2");
  std::vector<Tensor> rows;
  for (int i = 0; i < k; ++i)
    if (i != canonical_index)
      rows.push_back(pairwise_pair(grids[i], grids[canonical_index]));
  return concat(rows, 0);
}

Tensor PoseEstimator::regress(const Tensor& p_global, const Tensor& p_pairwise,
                              bool training, std::mt19937_64* rng) const {
  if (p_global.dim(0) != p_pairwise.dim(0))
    throw std::invalid_argument("regress: row count mismatch");
  Tensor x = concat({p_global, p_pairwise}, 1);
  if (training) {
    if (!rng) throw std::invalid_argument("regress: training needs an rng");
    x = dropout(x, cfg.dropout_p, *rng, true);
  }
  Tensor raw = mlp2(leaky_relu(mlp1(x)));  // [k-1,7]
  Tensor quat = narrow(raw, 1, 0, 4);
  Tensor trans = narrow(raw, 1, 4, 3);
  Tensor qn = quat / sqrt(sum_lastdim(pow2(quat)));
  std::vector<char> flip(static_cast<size_t>(qn.numel()), 0);
  for (int r = 0; r < qn.dim(0); ++r)
    if (qn.data()[r * 4] < 0)
      for (int j = 0; j < 4; ++j) flip[r * 4 + j] = 1;
  Tensor qh = where(flip, neg(qn), qn);
  return concat({qh, trans}, 1);
}

RelativePoseSet PoseEstimator::estimate(const std::vector<Tensor>& images,
                                        const std::vector<Tensor>& grids,
                                        int canonical_index) const {
  if (images.size() != grids.size())
    throw std::invalid_argument("estimate: view count mismatch");
  Tensor pg = global_features(images, canonical_index);
  Tensor pl = pairwise_features(grids, canonical_index);
  return pose_set_from_tensor(regress(pg, pl, false, nullptr),
                              canonical_index);
}

void PoseEstimator::register_params(ParamMap& m, const std::string& prefix) {
  g_stem.register_params(m, prefix + ".g_stem");
  for (size_t i = 0; i < g_stages.size(); ++i) {
    const std::string p = prefix + ".g_s" + std::to_string(i);
    g_stages[i].down.register_params(m, p + ".down");
    g_stages[i].r1.register_params(m, p + ".r1");
    g_stages[i].r2.register_params(m, p + ".r2");
  }
  g_head.register_params(m, prefix + ".g_head");
  m[prefix + ".learned_pe"] = learned_pe;
  for (size_t i = 0; i < gpr.size(); ++i) {
    const std::string p = prefix + ".gpr" + std::to_string(i);
    gpr[i].cross.register_params(m, p + ".cross");
    gpr[i].self.register_params(m, p + ".self");
  }
  for (size_t i = 0; i < g_collapse.size(); ++i)
    g_collapse[i].register_params(m,
                                  prefix + ".g_collapse" + std::to_string(i));
  for (size_t i = 0; i < pair_down.size(); ++i)
    pair_down[i].register_params(m, prefix + ".p_down" + std::to_string(i));
  pair_attn.register_params(m, prefix + ".p_attn");
  for (size_t i = 0; i < pair_reduce.size(); ++i)
    pair_reduce[i].register_params(m, prefix + ".p_reduce" + std::to_string(i));
  mlp1.register_params(m, prefix + ".mlp1");
  mlp2.register_params(m, prefix + ".mlp2");
}

RelativePoseSet pose_set_from_tensor(const Tensor& rows7,
                                     int canonical_index) {
  RelativePoseSet out;
  out.canonical_index = canonical_index;
  for (int r = 0; r < rows7.dim(0); ++r) {
    const real* d = rows7.data() + r * 7;
    CameraPose p;
    p.rotation =
        Quaternion{d[0], d[1], d[2], d[3]}.normalized().hemisphere();
    p.translation = {d[4], d[5], d[6]};
    out.poses.push_back(p);
  }
  return out;
}

}  // namespace fk
