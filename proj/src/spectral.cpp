#include "fdri/spectral.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "fdri/errors.hpp"
#include "fdri/fft.hpp"

namespace fdri::spectral {

using std::numbers::pi;

double axis_frequency(int j, int n) {
  const int aliased = (2 * j <= n) ? j : j - n;
  return 2.0 * pi * aliased / n;
}

FrequencyGrid::FrequencyGrid(int width, int height) : width_(width), height_(height) {
  if (width < 1 || height < 1) throw InvalidArgument("frequency grid dimensions must be positive");
  omegas_.reserve(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y) {
    const double wy = axis_frequency(y, height);
    for (int x = 0; x < width; ++x) omegas_.push_back({axis_frequency(x, width), wy});
  }
}

std::size_t FrequencyGrid::mirror(std::size_t i) const {
  const auto x = static_cast<int>(i % width_);
  const auto y = static_cast<int>(i / width_);
  const int mx = (width_ - x) % width_;
  const int my = (height_ - y) % height_;
  return static_cast<std::size_t>(my) * width_ + mx;
}

FrequencyGrid freq_grid(int width, int height) { return FrequencyGrid(width, height); }

SpectralFilter::SpectralFilter(FrequencyGrid grid, std::vector<double> gamma, double mu, double eps)
    : grid_(std::move(grid)), gamma_(std::move(gamma)), mu_(mu), eps_(eps) {
  if (gamma_.size() != grid_.size()) throw InvalidArgument("gamma length does not match grid");
  for (double g : gamma_)
    if (!(g > 0.0) || !std::isfinite(g)) throw InvalidArgument("gamma must be finite and positive");
}

SpectralFilter build_gamma(const FrequencyGrid& grid, double mu, double eps) {
  if (!(mu >= 0.0 && mu <= 1.0)) throw InvalidArgument("mu must lie in [0,1], got " + std::to_string(mu));
  if (!(eps > 0.0)) throw InvalidArgument("eps must be positive, got " + std::to_string(eps));
  const double grad_w = (1.0 - mu) * (1.0 - mu);
  const double high_w = mu * mu / (2.0 * pi * pi);
  std::vector<double> gamma(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto [wx, wy] = grid[i];
    const double sx = std::sin(wx);
    const double sy = std::sin(wy);
    const double c_hat = grad_w * (sx * sx + sy * sy) + high_w * (wx * wx + wy * wy) + eps;
    gamma[i] = 1.0 / std::sqrt(c_hat);
  }
  return SpectralFilter(grid, std::move(gamma), mu, eps);
}

SpectralFilter constant_filter(const FrequencyGrid& grid, double value) {
  return SpectralFilter(grid, std::vector<double>(grid.size(), value), 0.0, 1.0 / (value * value));
}

int gamma_exponent(Circulant op) noexcept {
  switch (op) {
    case Circulant::kCriterion: return -2;
    case Circulant::kCriterionInverse: return 2;
    case Circulant::kGamma: return 1;
    case Circulant::kGammaInverse: return -1;
  }
  return 0;
}

namespace {

std::vector<double> diagonal(const SpectralFilter& filter, Circulant op) {
  const int e = gamma_exponent(op);
  std::vector<double> d(filter.gamma().size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double g = filter.gamma()[i];
    switch (e) {
      case 2: d[i] = g * g; break;
      case -2: d[i] = 1.0 / (g * g); break;
      case 1: d[i] = g; break;
      default: d[i] = 1.0 / g; break;
    }
  }
  // Normalization of the inverse DFT folded into the diagonal.
  const double inv_n = 1.0 / static_cast<double>(d.size());
  for (double& v : d) v *= inv_n;
  return d;
}

// Filters one flattened image through `buf`, writing the real result to `out`.
void filter_one(const double* in, double* out, const std::vector<double>& diag, fft::Buffer& buf,
                int width, int height) {
  const std::size_t n = diag.size();
  auto* c = buf.data();
  for (std::size_t i = 0; i < n; ++i) c[i] = {in[i], 0.0};
  fft::forward(buf, width, height);
  for (std::size_t i = 0; i < n; ++i) c[i] *= diag[i];
  fft::inverse(buf, width, height);
  double re2 = 0.0;
  double im2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = c[i].real();
    re2 += c[i].real() * c[i].real();
    im2 += c[i].imag() * c[i].imag();
  }
  if (im2 > 1e-12 * re2 && im2 > 0.0)
    throw ConsistencyError("circulant output has imaginary residue " + std::to_string(std::sqrt(im2)) +
                           " relative to real norm " + std::to_string(std::sqrt(re2)));
}

}  // namespace

Image apply_circulant(const SpectralFilter& filter, const Image& image, Circulant op) {
  if (!filter.grid().matches(image))
    throw InvalidArgument("image " + std::to_string(image.width()) + "x" + std::to_string(image.height()) +
                          " does not match filter grid " + std::to_string(filter.width()) + "x" +
                          std::to_string(filter.height()));
  const auto diag = diagonal(filter, op);
  fft::Buffer buf(diag.size());
  Image out(image.width(), image.height());
  filter_one(image.pixels().data(), out.pixels().data(), diag, buf, image.width(), image.height());
  return out;
}

void apply_circulant_rows(const SpectralFilter& filter, Eigen::Ref<RowMatrix> rows, Circulant op) {
  if (rows.cols() != static_cast<Eigen::Index>(filter.grid().size()))
    throw InvalidArgument("row length does not match filter grid");
  const auto diag = diagonal(filter, op);
  const Eigen::Index count = rows.rows();
  const int w = filter.width();
  const int h = filter.height();
  // Exceptions must not escape an OpenMP region; collect and rethrow.
  std::exception_ptr failure;
#pragma omp parallel
  {
    fft::Buffer buf(diag.size());
#pragma omp for schedule(static)
    for (Eigen::Index r = 0; r < count; ++r) {
      try {
        double* row = rows.row(r).data();
        filter_one(row, row, diag, buf, w, h);
      } catch (...) {
#pragma omp critical
        failure = std::current_exception();
      }
    }
  }
  if (failure) std::rethrow_exception(failure);
}

double criterion(const SpectralFilter& filter, const Image& image) {
  if (!filter.grid().matches(image)) throw InvalidArgument("image does not match filter grid");
  const std::size_t n = image.size();
  fft::Buffer buf(n);
  for (std::size_t i = 0; i < n; ++i) buf.data()[i] = {image.pixels()[i], 0.0};
  fft::forward(buf, image.width(), image.height());
  double e = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double g = filter.gamma()[i];
    e += std::norm(buf.data()[i]) / (g * g);
  }
  return e / static_cast<double>(n);
}

}  // namespace fdri::spectral
