#include "fdri/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "fdri/errors.hpp"
#include "fdri/fft.hpp"
#include "fdri/spectral.hpp"

namespace fdri::metrics {

QualityReport psnr(const Image& reference, const Image& test, double peak) {
  if (!reference.same_shape(test)) throw InvalidArgument("PSNR needs images of equal resolution");
  if (!(peak > 0.0)) throw InvalidArgument("PSNR peak must be positive");
  const double mse = (reference.vec() - test.vec()).squaredNorm() / static_cast<double>(reference.size());
  const double db = mse > 0.0 ? 10.0 * std::log10(peak * peak / mse) : std::numeric_limits<double>::infinity();
  return {db, mse, peak};
}

Evaluation evaluate(const Image& reference, const Image& reconstruction, double exact_tolerance) {
  if (!reference.same_shape(reconstruction)) throw InvalidArgument("evaluation needs images of equal resolution");
  const double ref_norm = reference.norm();
  const double diff = (reference.vec() - reconstruction.vec()).norm();
  const double rel = ref_norm > 0.0 ? diff / ref_norm : diff;
  Evaluation out{psnr(reference, clipped(reconstruction)), rel, rel <= exact_tolerance};
  if (out.exact) {
    out.quality.mse = 0.0;
    out.quality.psnr_db = std::numeric_limits<double>::infinity();
  }
  return out;
}

Image mean_spectrum(const sampling::PatternSet& set) {
  if (set.patterns.empty()) throw InvalidArgument("mean spectrum of an empty pattern set");
  const int w = set.width;
  const int h = set.height;
  const std::size_t n = static_cast<std::size_t>(w) * h;
  std::vector<double> acc(n, 0.0);
  fft::Buffer buf(n);
  for (const auto& p : set.patterns) {
    for (std::size_t i = 0; i < n; ++i) buf.data()[i] = {p.pixels()[i], 0.0};
    fft::forward(buf, w, h);
    double norm2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) norm2 += std::norm(buf.data()[i]);
    if (norm2 == 0.0) continue;
    const double inv = 1.0 / std::sqrt(norm2);
    for (std::size_t i = 0; i < n; ++i) acc[i] += std::abs(buf.data()[i]) * inv;
  }
  Image out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out((x + w / 2) % w, (y + h / 2) % h) = acc[static_cast<std::size_t>(y) * w + x];
  return out;
}

double spectrum_fraction_above(const Image& centered, double cutoff) {
  const int w = centered.width();
  const int h = centered.height();
  double total = 0.0;
  double above = 0.0;
  for (int cy = 0; cy < h; ++cy) {
    const double wy = spectral::axis_frequency(((cy - h / 2) % h + h) % h, h);
    for (int cx = 0; cx < w; ++cx) {
      const double wx = spectral::axis_frequency(((cx - w / 2) % w + w) % w, w);
      const double v = centered(cx, cy);
      total += v;
      if (std::hypot(wx, wy) > cutoff) above += v;
    }
  }
  return total > 0.0 ? above / total : 0.0;
}

BenchReport bench_reconstruct(const recon::ReconstructionMatrix& p, const Eigen::Ref<const Eigen::VectorXd>& y,
                              std::size_t iterations, std::size_t warmup) {
  if (iterations < 1) throw InvalidArgument("benchmark needs at least one iteration");
  Eigen::VectorXd out(p.n());
  for (std::size_t i = 0; i < warmup; ++i) recon::reconstruct_into(p, y, out);
  std::vector<double> ms(iterations);
  for (auto& t : ms) {
    const auto start = std::chrono::steady_clock::now();
    recon::reconstruct_into(p, y, out);
    t = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  }
  std::vector<double> sorted = ms;
  std::sort(sorted.begin(), sorted.end());
  auto quantile = [&](double q) {
    const auto idx = static_cast<std::size_t>(std::ceil(q * sorted.size())) - 1;
    return sorted[std::min(idx, sorted.size() - 1)];
  };
  BenchReport r;
  r.iterations = iterations;
  r.median_ms = sorted.size() % 2 ? sorted[sorted.size() / 2]
                                  : 0.5 * (sorted[sorted.size() / 2 - 1] + sorted[sorted.size() / 2]);
  r.mean_ms = std::accumulate(ms.begin(), ms.end(), 0.0) / static_cast<double>(ms.size());
  r.p99_ms = std::max(quantile(0.99), r.median_ms);
  r.min_ms = sorted.front();
  r.precision = p.precision();
  r.k = p.k();
  r.n = p.n();
  return r;
}

}  // namespace fdri::metrics
