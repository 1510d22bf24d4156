#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace fdri {

// Real-valued pixel grid stored row-major. Scene images are nominally in
// [0,1]; sampling patterns are unconstrained.
class Image {
 public:
  Image() = default;
  Image(int width, int height, double fill = 0.0);
  Image(int width, int height, std::vector<double> pixels);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return pixels_.size(); }
  bool empty() const noexcept { return pixels_.empty(); }

  double& operator()(int x, int y) { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
  double operator()(int x, int y) const { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }

  std::span<double> pixels() noexcept { return pixels_; }
  std::span<const double> pixels() const noexcept { return pixels_; }
  const std::vector<double>& data() const noexcept { return pixels_; }

  Eigen::Map<Eigen::VectorXd> vec() { return {pixels_.data(), static_cast<Eigen::Index>(pixels_.size())}; }
  Eigen::Map<const Eigen::VectorXd> vec() const {
    return {pixels_.data(), static_cast<Eigen::Index>(pixels_.size())};
  }

  bool same_shape(const Image& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }

  double mean() const;
  double norm() const;

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> pixels_;
};

// Builds an image from a flat row-major vector of length width*height.
Image image_from_vector(const Eigen::Ref<const Eigen::VectorXd>& v, int width, int height);

// Resamples to (width, height) by bilinear interpolation.
Image resize_bilinear(const Image& src, int width, int height);

// Clamps every pixel to [lo, hi].
Image clipped(const Image& img, double lo = 0.0, double hi = 1.0);

}  // namespace fdri
