#include "rbc/image.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

namespace rbc {

GrayImage to_gray(const RgbImage& img) {
  GrayImage out(img.width(), img.height());
  auto src = img.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) {
    // Fixed-point BT.601 weights (sum 1000) keep the conversion exact.
    const int v = 299 * src[i].r + 587 * src[i].g + 114 * src[i].b;
    dst[i] = static_cast<std::uint8_t>((v + 500) / 1000);
  }
  return out;
}

std::size_t count_foreground(const BinaryImage& mask) {
  std::size_t n = 0;
  for (auto v : mask.pixels()) n += v != 0;
  return n;
}

RgbImage read_image(const std::filesystem::path& path) {
  cv::Mat bgr;
  try {
    bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  } catch (const cv::Exception& e) {
    throw_io("cannot decode image " + path.string() + ": " + e.what());
  }
  if (bgr.empty()) throw_io("cannot decode image " + path.string());
  RgbImage out(bgr.cols, bgr.rows);
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) out.at(x, y) = Rgb{row[x][2], row[x][1], row[x][0]};
  }
  return out;
}

void write_png(const std::filesystem::path& path, const RgbImage& img) {
  cv::Mat bgr(img.height(), img.width(), CV_8UC3);
  for (int y = 0; y < img.height(); ++y) {
    auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < img.width(); ++x) {
      const Rgb p = img.at(x, y);
      row[x] = cv::Vec3b(p.b, p.g, p.r);
    }
  }
  if (!cv::imwrite(path.string(), bgr)) throw_io("cannot write " + path.string());
}

void write_png(const std::filesystem::path& path, const GrayImage& img) {
  cv::Mat m(img.height(), img.width(), CV_8UC1);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) m.at<std::uint8_t>(y, x) = img.at(x, y);
  if (!cv::imwrite(path.string(), m)) throw_io("cannot write " + path.string());
}

}  // namespace rbc
