#include "fdri/image.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fdri/errors.hpp"

namespace fdri {

Image::Image(int width, int height, double fill) : width_(width), height_(height) {
  if (width < 1 || height < 1) throw InvalidArgument("image dimensions must be positive");
  pixels_.assign(static_cast<std::size_t>(width) * height, fill);
}

Image::Image(int width, int height, std::vector<double> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  if (width < 1 || height < 1) throw InvalidArgument("image dimensions must be positive");
  if (pixels_.size() != static_cast<std::size_t>(width) * height)
    throw InvalidArgument("pixel count " + std::to_string(pixels_.size()) + " does not match " +
                          std::to_string(width) + "x" + std::to_string(height));
  for (double p : pixels_)
    if (!std::isfinite(p)) throw InvalidArgument("image contains non-finite pixels");
}

double Image::mean() const {
  if (pixels_.empty()) return 0.0;
  return std::accumulate(pixels_.begin(), pixels_.end(), 0.0) / static_cast<double>(pixels_.size());
}

double Image::norm() const { return vec().norm(); }

Image image_from_vector(const Eigen::Ref<const Eigen::VectorXd>& v, int width, int height) {
  if (v.size() != static_cast<Eigen::Index>(width) * height)
    throw InvalidArgument("vector length does not match image shape");
  return Image(width, height, std::vector<double>(v.data(), v.data() + v.size()));
}

Image resize_bilinear(const Image& src, int width, int height) {
  if (src.empty()) throw InvalidArgument("cannot resize an empty image");
  if (src.width() == width && src.height() == height) return src;
  Image out(width, height);
  // Pixel-center alignment.
  const double sx = static_cast<double>(src.width()) / width;
  const double sy = static_cast<double>(src.height()) / height;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, src.height() - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, src.height() - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, src.width() - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, src.width() - 1);
      const double wx = fx - x0;
      const double top = (1 - wx) * src(x0, y0) + wx * src(x1, y0);
      const double bot = (1 - wx) * src(x0, y1) + wx * src(x1, y1);
      out(x, y) = (1 - wy) * top + wy * bot;
    }
  }
  return out;
}

Image clipped(const Image& img, double lo, double hi) {
  Image out = img;
  for (double& p : out.pixels()) p = std::clamp(p, lo, hi);
  return out;
}

}  // namespace fdri
