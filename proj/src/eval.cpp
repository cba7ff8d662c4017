#include "forgekit/eval.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace fk {

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

std::vector<real> gaussian_kernel_11() {
  std::vector<real> k(11);
  real sum = 0;
  for (int i = 0; i < 11; ++i) {
    const real x = i - 5.0;
    k[i] = std::exp(-x * x / (2 * 1.5 * 1.5));
    sum += k[i];
  }
  for (auto& v : k) v /= sum;
  return k;
}

// separable valid-mode Gaussian filtering of one [H,W] plane
std::vector<real> gauss_filter(const real* img, int h, int w, int& oh,
                               int& ow) {
  static const std::vector<real> k = gaussian_kernel_11();
  ow = w - 10;
  oh = h - 10;
  std::vector<real> tmp(static_cast<size_t>(h) * ow);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      real s = 0;
      for (int i = 0; i < 11; ++i) s += k[i] * img[y * w + x + i];
      tmp[y * ow + x] = s;
    }
  std::vector<real> out(static_cast<size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      real s = 0;
      for (int i = 0; i < 11; ++i) s += k[i] * tmp[(y + i) * ow + x];
      out[y * ow + x] = s;
    }
  return out;
}

}  // namespace

real psnr(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "psnr");
  real mse = 0;
  for (int64_t i = 0; i < a.numel(); ++i) {
    const real d = a.data()[i] - b.data()[i];
    mse += d * d;
  }
  mse /= a.numel();
  if (mse < 1e-10) return 100.0;
  return 10.0 * std::log10(1.0 / mse);
}

real psnr_masked(const Tensor& a, const Tensor& b, const Tensor& mask) {
  check_same_shape(a, b, "psnr_masked");
  const int64_t hw = mask.numel();
  const int64_t ch = a.numel() / hw;
  real mse = 0;
  int64_t n = 0;
  for (int64_t i = 0; i < hw; ++i) {
    if (mask.data()[i] <= 0.5) continue;
    for (int64_t c = 0; c < ch; ++c) {
      const real d = a.data()[c * hw + i] - b.data()[c * hw + i];
      mse += d * d;
      ++n;
    }
  }
  if (n == 0) return 100.0;
  mse /= n;
  if (mse < 1e-10) return 100.0;
  return 10.0 * std::log10(1.0 / mse);
}

real ssim(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "ssim");
  const int c = a.dim(0), h = a.dim(1), w = a.dim(2);
  if (h < 11 || w < 11) throw std::invalid_argument("ssim: image too small");
  const real c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  real total = 0;
  for (int ch = 0; ch < c; ++ch) {
    const real* pa = a.data() + static_cast<int64_t>(ch) * h * w;
    const real* pb = b.data() + static_cast<int64_t>(ch) * h * w;
    std::vector<real> aa(static_cast<size_t>(h) * w), bb(aa.size()),
        ab(aa.size());
    for (size_t i = 0; i < aa.size(); ++i) {
      aa[i] = pa[i] * pa[i];
      bb[i] = pb[i] * pb[i];
      ab[i] = pa[i] * pb[i];
    }
    int oh, ow;
    auto mu_a = gauss_filter(pa, h, w, oh, ow);
    auto mu_b = gauss_filter(pb, h, w, oh, ow);
    auto s_aa = gauss_filter(aa.data(), h, w, oh, ow);
    auto s_bb = gauss_filter(bb.data(), h, w, oh, ow);
    auto s_ab = gauss_filter(ab.data(), h, w, oh, ow);
    real acc = 0;
    for (size_t i = 0; i < mu_a.size(); ++i) {
      const real va = s_aa[i] - mu_a[i] * mu_a[i];
      const real vb = s_bb[i] - mu_b[i] * mu_b[i];
      const real cov = s_ab[i] - mu_a[i] * mu_b[i];
      acc += ((2 * mu_a[i] * mu_b[i] + c1) * (2 * cov + c2)) /
             ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2));
    }
    total += acc / mu_a.size();
  }
  return total / c;
}

PoseErrors pose_errors(const RelativePoseSet& gt, const RelativePoseSet& pred) {
  if (gt.poses.size() != pred.poses.size())
    throw std::invalid_argument("pose_errors: arity mismatch");
  PoseErrors e;
  for (size_t i = 0; i < gt.poses.size(); ++i) {
    const real r =
        rotation_error_deg(gt.poses[i].rotation, pred.poses[i].rotation);
    e.per_query_deg.push_back(r);
    e.rotation_deg += r;
    e.translation_m +=
        translation_error(gt.poses[i].translation, pred.poses[i].translation);
  }
  const real n = static_cast<real>(gt.poses.size());
  e.rotation_deg /= n;
  e.translation_m /= n;
  return e;
}

real depth_l1(const Tensor& gt_depth, const Tensor& pred_depth,
              const Tensor& gt_mask, bool* empty_mask) {
  check_same_shape(gt_depth, pred_depth, "depth_l1");
  real acc = 0;
  int64_t n = 0;
  for (int64_t i = 0; i < gt_depth.numel(); ++i) {
    if (gt_mask.data()[i] <= 0.5) continue;
    acc += std::fabs(gt_depth.data()[i] - pred_depth.data()[i]);
    ++n;
  }
  if (empty_mask) *empty_mask = (n == 0);
  return n ? acc / n : 0.0;
}

real voxel_iou(const OccupancyGrid& pred, const OccupancyGrid& gt) {
  if (pred.dim != gt.dim)
    throw std::invalid_argument("voxel_iou: shape mismatch");
  int64_t inter = 0, uni = 0;
  for (size_t i = 0; i < pred.occ.size(); ++i) {
    const bool p = pred.occ[i] != 0, g = gt.occ[i] != 0;
    inter += (p && g);
    uni += (p || g);
  }
  return uni ? static_cast<real>(inter) / uni : 1.0;
}

real median(std::vector<real> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

SceneMetrics EvalReport::aggregate() const {
  SceneMetrics agg;
  agg.scene_id = "aggregate";
  if (scenes.empty()) return agg;
  for (const SceneMetrics& s : scenes) {
    agg.psnr += s.psnr;
    agg.masked_psnr += s.masked_psnr;
    agg.ssim += s.ssim;
    agg.rot_err_mean += s.rot_err_mean;
    agg.rot_err_median += s.rot_err_median;
    agg.trans_err += s.trans_err;
    agg.depth_l1 += s.depth_l1;
    agg.voxel_iou += s.voxel_iou;
    agg.has_pose = agg.has_pose || s.has_pose;
  }
  const real n = static_cast<real>(scenes.size());
  agg.psnr /= n;
  agg.masked_psnr /= n;
  agg.ssim /= n;
  agg.rot_err_mean /= n;
  agg.rot_err_median /= n;
  agg.trans_err /= n;
  agg.depth_l1 /= n;
  agg.voxel_iou /= n;
  return agg;
}

std::string EvalReport::to_json() const {
  using json = nlohmann::json;
  auto scene_json = [](const SceneMetrics& s) {
    json j{{"scene_id", s.scene_id}, {"psnr", s.psnr},
           {"masked_psnr", s.masked_psnr}, {"ssim", s.ssim},
           {"lpips", nullptr},  // intentionally unreported
           {"depth_l1", s.depth_l1}, {"voxel_iou", s.voxel_iou}};
    if (s.has_pose) {
      j["rot_err_mean"] = s.rot_err_mean;
      j["rot_err_median"] = s.rot_err_median;
      j["trans_err"] = s.trans_err;
    } else {
      j["rot_err_mean"] = nullptr;
      j["rot_err_median"] = nullptr;
      j["trans_err"] = nullptr;
    }
    return j;
  };
  json j{{"schema_version", schema_version},
         {"variant", variant},
         {"dataset_id", dataset_id},
         {"config_hash", config_hash}};
  json sc = json::array();
  for (const SceneMetrics& s : scenes) sc.push_back(scene_json(s));
  j["scenes"] = sc;
  j["aggregate"] = scene_json(aggregate());
  return j.dump(2) + "\n";
}

std::string EvalReport::to_table() const {
  std::ostringstream os;
  auto row = [&os](const SceneMetrics& s) {
    char buf[256];
    if (s.has_pose)
      std::snprintf(buf, sizeof(buf),
                    "%-12s %8.3f %8.3f %7.4f %8.2f %8.2f %8.4f %8.4f %8.4f\n",
                    s.scene_id.c_str(), s.psnr, s.masked_psnr, s.ssim,
                    s.rot_err_mean, s.rot_err_median, s.trans_err, s.depth_l1,
                    s.voxel_iou);
    else
      std::snprintf(buf, sizeof(buf),
                    "%-12s %8.3f %8.3f %7.4f %8s %8s %8s %8.4f %8.4f\n",
                    s.scene_id.c_str(), s.psnr, s.masked_psnr, s.ssim, "-",
                    "-", "-", s.depth_l1, s.voxel_iou);
    os << buf;
  };
  os << "variant: " << variant << "  dataset: " << dataset_id
     << "  config: " << config_hash << "\n";
  char hdr[256];
  std::snprintf(hdr, sizeof(hdr),
                "%-12s %8s %8s %7s %8s %8s %8s %8s %8s\n", "scene", "psnr",
                "m-psnr", "ssim", "rot", "rot-med", "trans", "depth", "iou");
  os << hdr;
  for (const SceneMetrics& s : scenes) row(s);
  row(aggregate());
  return os.str();
}

}  // namespace fk
