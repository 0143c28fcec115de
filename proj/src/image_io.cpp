#include "occlane/image_io.hpp"

#include <array>
#include <fstream>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace occlane {

namespace fs = std::filesystem;

namespace {

cv::Mat decode(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("no such file: " + path.string());
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (m.empty()) throw IoError("cannot decode image: " + path.string());
  if (m.depth() != CV_8U) throw IoError("unsupported bit depth (need 8-bit): " + path.string());
  return m;
}

template <int C>
Raster<C> from_mat(const cv::Mat& m) {
  Raster<C> out(m.cols, m.rows);
  for (int y = 0; y < m.rows; ++y) {
    const auto* src = m.ptr<std::uint8_t>(y);
    std::copy(src, src + static_cast<std::size_t>(m.cols) * C, out.row(y));
  }
  return out;
}

RasterImage image_from_bgr(const cv::Mat& bgr) {
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  return from_mat<3>(rgb);
}

RasterRgba rgba_from_bgra(const cv::Mat& bgra) {
  cv::Mat rgba;
  cv::cvtColor(bgra, rgba, cv::COLOR_BGRA2RGBA);
  return from_mat<4>(rgba);
}

template <int C>
cv::Mat to_mat(const Raster<C>& r) {
  cv::Mat m(r.height(), r.width(), CV_8UC(C));
  for (int y = 0; y < r.height(); ++y) {
    std::copy(r.row(y), r.row(y) + static_cast<std::size_t>(r.width()) * C, m.ptr<std::uint8_t>(y));
  }
  return m;
}

void write_png(const cv::Mat& m, const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  const std::vector<int> params = {cv::IMWRITE_PNG_COMPRESSION, 3};
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), m, params);
  } catch (const cv::Exception& e) {
    throw IoError("cannot write " + path.string() + ": " + e.what());
  }
  if (!ok) throw IoError("cannot write " + path.string());
}

}  // namespace

std::variant<RasterImage, RasterMask> load_raster(const fs::path& path) {
  cv::Mat m = decode(path);
  switch (m.channels()) {
    case 1:
      return from_mat<1>(m);
    case 3:
      return image_from_bgr(m);
    default:
      throw IoError("unsupported channel count " + std::to_string(m.channels()) + ": " + path.string());
  }
}

RasterImage load_image(const fs::path& path) {
  auto r = load_raster(path);
  if (auto* img = std::get_if<RasterImage>(&r)) return std::move(*img);
  throw IoError("expected a 3-channel image: " + path.string());
}

RasterMask load_mask(const fs::path& path) {
  auto r = load_raster(path);
  if (auto* mask = std::get_if<RasterMask>(&r)) return std::move(*mask);
  throw IoError("expected a 1-channel mask: " + path.string());
}

RasterRgba load_rgba(const fs::path& path) {
  cv::Mat m = decode(path);
  if (m.channels() != 4) throw IoError("expected a 4-channel RGBA image: " + path.string());
  return rgba_from_bgra(m);
}

void save_raster(const RasterImage& image, const fs::path& path) {
  cv::Mat bgr;
  cv::cvtColor(to_mat(image), bgr, cv::COLOR_RGB2BGR);
  write_png(bgr, path);
}

void save_raster(const RasterMask& mask, const fs::path& path) { write_png(to_mat(mask), path); }

void save_raster(const RasterRgba& rgba, const fs::path& path) {
  cv::Mat bgra;
  cv::cvtColor(to_mat(rgba), bgra, cv::COLOR_RGBA2BGRA);
  write_png(bgra, path);
}

Size png_dimensions(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("no such file: " + path.string());
  std::array<unsigned char, 24> head{};
  in.read(reinterpret_cast<char*>(head.data()), head.size());
  static constexpr std::array<unsigned char, 8> kSig = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (in.gcount() != static_cast<std::streamsize>(head.size()) || !std::equal(kSig.begin(), kSig.end(), head.begin())) {
    throw IoError("not a PNG file: " + path.string());
  }
  auto be32 = [&](int off) {
    return static_cast<int>((head[off] << 24) | (head[off + 1] << 16) | (head[off + 2] << 8) | head[off + 3]);
  };
  return Size{be32(16), be32(20)};
}

}  // namespace occlane
