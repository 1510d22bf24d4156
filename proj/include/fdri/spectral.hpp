#pragma once

#include <vector>

#include <Eigen/Core>

#include "fdri/image.hpp"

namespace fdri::spectral {

inline constexpr double kDefaultEps = 1e-5;
inline constexpr double kDefaultMu = 0.5;

struct Frequency {
  double wx;  // radians/pixel, in (-pi, pi]
  double wy;
};

// Angular frequency of every DFT index on a width x height grid, row-major.
//
// Along an axis of length N, index j maps to 2*pi*j'/N with j' = j for
// j <= N/2 and j' = j - N otherwise (unshifted DFT order, Nyquist at +pi).
class FrequencyGrid {
 public:
  FrequencyGrid(int width, int height);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return omegas_.size(); }
  const Frequency& operator[](std::size_t i) const { return omegas_[i]; }
  const std::vector<Frequency>& omegas() const noexcept { return omegas_; }

  // Index holding (-wx, -wy) for the frequency at i.
  std::size_t mirror(std::size_t i) const;

  bool matches(const Image& img) const noexcept {
    return img.width() == width_ && img.height() == height_;
  }

 private:
  int width_;
  int height_;
  std::vector<Frequency> omegas_;
};

FrequencyGrid freq_grid(int width, int height);

// Signed angular frequency of DFT index j on an axis of length n.
double axis_frequency(int j, int n);

// Diagonal Fourier-domain regularization weights (the inverse square root of
// the composite criterion's transfer function) together with (mu, eps).
//
//   gamma = [ (1-mu)^2 (sin^2 wx + sin^2 wy) + mu^2 (wx^2 + wy^2) / (2 pi^2) + eps ]^(-1/2)
//
// mu = 0 penalizes the discrete gradient only. Its transfer function
// sin(w) vanishes at Nyquist, so there the weight is bounded only by eps.
// mu = 1 is a pure |w| high-frequency penalty.
class SpectralFilter {
 public:
  SpectralFilter(FrequencyGrid grid, std::vector<double> gamma, double mu, double eps);

  const FrequencyGrid& grid() const noexcept { return grid_; }
  const std::vector<double>& gamma() const noexcept { return gamma_; }
  double mu() const noexcept { return mu_; }
  double eps() const noexcept { return eps_; }
  int width() const noexcept { return grid_.width(); }
  int height() const noexcept { return grid_.height(); }

 private:
  FrequencyGrid grid_;
  std::vector<double> gamma_;
  double mu_;
  double eps_;
};

SpectralFilter build_gamma(const FrequencyGrid& grid, double mu = kDefaultMu, double eps = kDefaultEps);

// Filter with every weight equal to `value`. Used for identity checks.
SpectralFilter constant_filter(const FrequencyGrid& grid, double value);

// Circulant operators diagonalized by the 2D DFT.
enum class Circulant {
  kCriterion,         // C = F* diag(gamma^-2) F
  kCriterionInverse,  // C^-1 = F* diag(gamma^2) F
  kGamma,             // F* diag(gamma) F
  kGammaInverse,      // F* diag(gamma^-1) F
};

// Exponent applied to gamma for each operator.
int gamma_exponent(Circulant op) noexcept;

// Applies a circulant operator to a real image via 2D FFT.
//
// Throws ConsistencyError if the inverse transform leaves an imaginary part
// larger than 1e-6 of the real part's norm; gamma is centrally symmetric, so
// any such residue means the filter or grid is broken.
Image apply_circulant(const SpectralFilter& filter, const Image& image, Circulant op);

// Same operator applied in place to each row of a row-major matrix whose rows
// are flattened images of the filter's resolution.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
void apply_circulant_rows(const SpectralFilter& filter, Eigen::Ref<RowMatrix> rows, Circulant op);

// Quadratic criterion E(x) = x^T C x evaluated in the Fourier domain as
// sum_i gamma_i^-2 |x-hat_i|^2 / n (unitary DFT normalization).
double criterion(const SpectralFilter& filter, const Image& image);

}  // namespace fdri::spectral
