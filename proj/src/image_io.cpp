#include "forgekit/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

namespace fk {

namespace {

uint8_t to_u8(real v) {
  return static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

void encode_and_write(const std::string& path, const cv::Mat& m) {
  std::vector<uchar> buf;
  if (!cv::imencode(".png", m, buf))
    throw std::runtime_error("png encode failed: " + path);
  atomic_write_bytes(path, std::string(buf.begin(), buf.end()));
}

cv::Mat decode_file(const std::string& path, int flags) {
  std::string bytes = read_bytes(path);
  std::vector<uchar> buf(bytes.begin(), bytes.end());
  cv::Mat m = cv::imdecode(buf, flags);
  if (m.empty()) throw std::runtime_error("png decode failed: " + path);
  return m;
}

}  // namespace

void write_png_rgb(const std::string& path, const Tensor& img) {
  const int h = img.dim(1), w = img.dim(2);
  cv::Mat m(h, w, CV_8UC3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      auto& px = m.at<cv::Vec3b>(y, x);  // BGR
      px[2] = to_u8(img.data()[(0 * h + y) * w + x]);
      px[1] = to_u8(img.data()[(1 * h + y) * w + x]);
      px[0] = to_u8(img.data()[(2 * h + y) * w + x]);
    }
  encode_and_write(path, m);
}

void write_png_gray(const std::string& path, const Tensor& img) {
  const int h = img.dim(1), w = img.dim(2);
  cv::Mat m(h, w, CV_8UC1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      m.at<uint8_t>(y, x) = to_u8(img.data()[y * w + x]);
  encode_and_write(path, m);
}

Tensor read_png_rgb(const std::string& path) {
  cv::Mat m = decode_file(path, cv::IMREAD_COLOR);
  const int h = m.rows, w = m.cols;
  Tensor img = Tensor::zeros({3, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const auto& px = m.at<cv::Vec3b>(y, x);
      img.data()[(0 * h + y) * w + x] = px[2] / 255.0;
      img.data()[(1 * h + y) * w + x] = px[1] / 255.0;
      img.data()[(2 * h + y) * w + x] = px[0] / 255.0;
    }
  return img;
}

Tensor read_png_gray(const std::string& path) {
  cv::Mat m = decode_file(path, cv::IMREAD_GRAYSCALE);
  const int h = m.rows, w = m.cols;
  Tensor img = Tensor::zeros({1, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      img.data()[y * w + x] = m.at<uint8_t>(y, x) / 255.0;
  return img;
}

void write_depth_bin(const std::string& path, const Tensor& depth) {
  std::string bytes(depth.numel() * sizeof(float), '\0');
  for (int64_t i = 0; i < depth.numel(); ++i) {
    const float f = static_cast<float>(depth.data()[i]);
    std::memcpy(bytes.data() + i * sizeof(float), &f, sizeof(float));
  }
  atomic_write_bytes(path, bytes);
}

Tensor read_depth_bin(const std::string& path, int height, int width) {
  std::string bytes = read_bytes(path);
  const int64_t n = static_cast<int64_t>(height) * width;
  if (bytes.size() != n * sizeof(float))
    throw std::runtime_error("depth size mismatch: " + path);
  Tensor d = Tensor::zeros({1, height, width});
  for (int64_t i = 0; i < n; ++i) {
    float f;
    std::memcpy(&f, bytes.data() + i * sizeof(float), sizeof(float));
    d.data()[i] = f;
  }
  return d;
}

void atomic_write_bytes(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for write: " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("rename failed: " + path);
}

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

}  // namespace fk
