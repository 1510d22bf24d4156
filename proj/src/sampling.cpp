#include "fdri/sampling.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <string>

#include "fdri/digest.hpp"
#include "fdri/errors.hpp"
#include "fdri/fft.hpp"
#include "fdri/spectral.hpp"

namespace fdri::sampling {

using std::numbers::pi;

std::string_view to_string(Protocol p) noexcept {
  switch (p) {
    case Protocol::kDct: return "dct";
    case Protocol::kWalshHadamard: return "walsh-hadamard";
    case Protocol::kMorletNoise: return "morlet-noise";
  }
  return "unknown";
}

Protocol parse_protocol(std::string_view name) {
  if (name == "dct") return Protocol::kDct;
  if (name == "walsh" || name == "walsh-hadamard" || name == "hadamard") return Protocol::kWalshHadamard;
  if (name == "morlet" || name == "morlet-noise") return Protocol::kMorletNoise;
  throw InvalidArgument("unknown protocol '" + std::string(name) + "'");
}

bool is_power_of_two(int v) noexcept { return v > 0 && (v & (v - 1)) == 0; }

// ---------------------------------------------------------------------------
// DCT
// ---------------------------------------------------------------------------

double dct_factor(int u, int x, int n) {
  const double a = (u == 0) ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
  return a * std::cos(pi * (2.0 * x + 1.0) * u / (2.0 * n));
}

Eigen::MatrixXd dct_matrix(int n) {
  Eigen::MatrixXd d(n, n);
  for (int u = 0; u < n; ++u)
    for (int x = 0; x < n; ++x) d(u, x) = dct_factor(u, x, n);
  return d;
}

Image dct_basis_function(int u, int v, int width, int height) {
  if (width < 1 || height < 1) throw InvalidArgument("resolution must be positive");
  if (u < 0 || u >= width || v < 0 || v >= height)
    throw InvalidArgument("DCT index (" + std::to_string(u) + "," + std::to_string(v) + ") out of range");
  std::vector<double> fx(width), fy(height);
  for (int x = 0; x < width; ++x) fx[x] = dct_factor(u, x, width);
  for (int y = 0; y < height; ++y) fy[y] = dct_factor(v, y, height);
  Image img(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) img(x, y) = fy[y] * fx[x];
  return img;
}

// ---------------------------------------------------------------------------
// Walsh-Hadamard
// ---------------------------------------------------------------------------

namespace {

int bit_reverse(int v, int bits) {
  int r = 0;
  for (int b = 0; b < bits; ++b) r |= ((v >> b) & 1) << (bits - 1 - b);
  return r;
}

int log2_exact(int n) {
  int bits = 0;
  while ((1 << bits) < n) ++bits;
  return bits;
}

void require_power_of_two(int width, int height) {
  if (!is_power_of_two(width) || !is_power_of_two(height))
    throw InvalidArgument("Walsh-Hadamard sampling requires power-of-two resolution, got " +
                          std::to_string(width) + "x" + std::to_string(height));
}

}  // namespace

std::vector<int> walsh_row(int sequency, int n) {
  if (!is_power_of_two(n)) throw InvalidArgument("Walsh length must be a power of two");
  if (sequency < 0 || sequency >= n) throw InvalidArgument("sequency out of range");
  // Natural-order Hadamard row holding sequency s is bitreverse(gray(s)).
  const int row = bit_reverse(sequency ^ (sequency >> 1), log2_exact(n));
  std::vector<int> out(n);
  for (int x = 0; x < n; ++x) out[x] = (std::popcount(static_cast<unsigned>(row & x)) & 1) ? -1 : 1;
  return out;
}

Eigen::MatrixXd walsh_matrix(int n) {
  Eigen::MatrixXd w(n, n);
  const double s = 1.0 / std::sqrt(static_cast<double>(n));
  for (int q = 0; q < n; ++q) {
    const auto row = walsh_row(q, n);
    for (int x = 0; x < n; ++x) w(q, x) = s * row[x];
  }
  return w;
}

Image walsh_hadamard_function(int sx, int sy, int width, int height) {
  require_power_of_two(width, height);
  if (sx < 0 || sx >= width || sy < 0 || sy >= height) throw InvalidArgument("sequency index out of range");
  const auto rx = walsh_row(sx, width);
  const auto ry = walsh_row(sy, height);
  const double s = 1.0 / std::sqrt(static_cast<double>(width) * height);
  Image img(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) img(x, y) = s * rx[x] * ry[y];
  return img;
}

Image walsh_hadamard_function(int s, int width, int height) {
  require_power_of_two(width, height);
  if (s < 0 || s >= width * height) throw InvalidArgument("Walsh-Hadamard index out of range");
  const auto order = walsh_sequency_order(width, height);
  return walsh_hadamard_function(order[s].u, order[s].v, width, height);
}

// ---------------------------------------------------------------------------
// Morlet
// ---------------------------------------------------------------------------

std::complex<double> ComplexImage::mean() const {
  std::complex<double> s{};
  for (const auto& p : pixels) s += p;
  return s / static_cast<double>(pixels.size());
}

double ComplexImage::norm() const {
  double s = 0.0;
  for (const auto& p : pixels) s += std::norm(p);
  return std::sqrt(s);
}

namespace {

void require_valid(const MorletParams& p) {
  if (!(p.sigma > 0.0)) throw InvalidArgument("Morlet sigma must be positive");
  if (!(p.n_p > 0.0)) throw InvalidArgument("Morlet n_p must be positive");
  if (!std::isfinite(p.theta)) throw InvalidArgument("Morlet theta must be finite");
}

}  // namespace

MorletWavelet morlet_wavelet(const MorletParams& params, int width, int height) {
  require_valid(params);
  if (width < 1 || height < 1) throw InvalidArgument("resolution must be positive");
  const double k0 = pi * params.n_p / (2.0 * params.sigma);
  const double c = std::cos(params.theta);
  const double s = std::sin(params.theta);
  const double two_s2 = 2.0 * params.sigma * params.sigma;
  const int cx = width / 2;
  const int cy = height / 2;

  const std::size_t n = static_cast<std::size_t>(width) * height;
  std::vector<double> envelope(n);
  std::vector<std::complex<double>> carrier(n);
  double env_sum = 0.0;
  std::complex<double> modulated_sum{};
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double dx = x - cx;
      const double dy = y - cy;
      const std::size_t i = static_cast<std::size_t>(y) * width + x;
      envelope[i] = std::exp(-(dx * dx + dy * dy) / two_s2);
      carrier[i] = std::polar(1.0, k0 * (dx * c + dy * s));
      env_sum += envelope[i];
      modulated_sum += envelope[i] * carrier[i];
    }
  }
  MorletWavelet w;
  w.kappa = modulated_sum / env_sum;
  w.g.width = width;
  w.g.height = height;
  w.g.pixels.resize(n);
  double norm2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    w.g.pixels[i] = envelope[i] * (carrier[i] - w.kappa);
    norm2 += std::norm(w.g.pixels[i]);
  }
  if (!(norm2 > 0.0)) throw InvalidArgument("Morlet wavelet vanishes on this grid");
  w.scale = 1.0 / std::sqrt(norm2);
  for (auto& p : w.g.pixels) p *= w.scale;
  return w;
}

namespace {

void standardize(Image& img) {
  const double m = img.mean();
  for (double& p : img.pixels()) p -= m;
  const double nrm = img.norm();
  if (nrm > 0.0)
    for (double& p : img.pixels()) p /= nrm;
}

}  // namespace

Image morlet_noise_pattern(const MorletParams& params, std::uint64_t seed, int width, int height) {
  const auto wavelet = morlet_wavelet(params, width, height);
  const std::size_t n = wavelet.g.pixels.size();

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  fft::Buffer noise(n);
  for (std::size_t i = 0; i < n; ++i) noise.data()[i] = {normal(rng), 0.0};

  fft::Buffer kernel(n);
  std::copy(wavelet.g.pixels.begin(), wavelet.g.pixels.end(), kernel.data());
  fft::forward(noise, width, height);
  fft::forward(kernel, width, height);
  for (std::size_t i = 0; i < n; ++i) noise.data()[i] *= kernel.data()[i];
  fft::inverse(noise, width, height);

  Image out(width, height);
  for (std::size_t i = 0; i < n; ++i) out.pixels()[i] = noise.data()[i].real();
  standardize(out);
  return out;
}

MorletParams sigma_schedule(double omega, double sigma_min, double sigma_max, double omega_min,
                            double omega_max) {
  if (!(sigma_min < sigma_max)) throw InvalidArgument("sigma_min must be below sigma_max");
  if (!(sigma_min > 0.0)) throw InvalidArgument("sigma_min must be positive");
  if (!(omega_min <= omega_max)) throw InvalidArgument("omega_min must not exceed omega_max");
  if (!(omega >= omega_min && omega <= omega_max))
    throw InvalidArgument("omega " + std::to_string(omega) + " outside [" + std::to_string(omega_min) + ", " +
                          std::to_string(omega_max) + "]");
  const double span = omega_max - omega_min;
  const double t = span > 0.0 ? (omega_max - omega) / span : 1.0;
  const double sigma = sigma_min + (sigma_max - sigma_min) * t;
  return {sigma, 2.0 * sigma * omega, 0.0};
}

// ---------------------------------------------------------------------------
// Ranking
// ---------------------------------------------------------------------------

namespace {

bool ranked_before(const RankedIndex& a, const RankedIndex& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.u + a.v != b.u + b.v) return a.u + a.v < b.u + b.v;
  return a.u < b.u;
}

std::vector<RankedIndex> rank_separable(const std::vector<Image>& db, const Eigen::MatrixXd& along_w,
                                        const Eigen::MatrixXd& along_h) {
  const auto w = static_cast<int>(along_w.rows());
  const auto h = static_cast<int>(along_h.rows());
  Eigen::MatrixXd total = Eigen::MatrixXd::Zero(h, w);
  for (const auto& img : db) {
    if (img.width() != w || img.height() != h) throw InvalidArgument("database image has wrong resolution");
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> x(
        img.pixels().data(), h, w);
    // coef(v, u) = sum_y sum_x B_h(v, y) x(y, x) B_w(u, x)
    total += (along_h * x * along_w.transpose()).cwiseAbs();
  }
  if (!db.empty()) total /= static_cast<double>(db.size());
  // FMA round-off leaves ~1e-17 where a coefficient is exactly zero
  const double floor = 1e-12 * total.maxCoeff();
  total = (total.array() < floor).select(0.0, total);
  std::vector<RankedIndex> out;
  out.reserve(static_cast<std::size_t>(w) * h);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) out.push_back({u, v, total(v, u)});
  std::stable_sort(out.begin(), out.end(), ranked_before);
  return out;
}

}  // namespace

std::vector<RankedIndex> rank_dct(const std::vector<Image>& db, int width, int height) {
  return rank_separable(db, dct_matrix(width), dct_matrix(height));
}

std::vector<RankedIndex> rank_walsh(const std::vector<Image>& db, int width, int height) {
  require_power_of_two(width, height);
  return rank_separable(db, walsh_matrix(width), walsh_matrix(height));
}

std::vector<RankedIndex> dct_zigzag_order(int width, int height) {
  std::vector<RankedIndex> out;
  out.reserve(static_cast<std::size_t>(width) * height);
  for (int d = 0; d <= width + height - 2; ++d) {
    const int u_lo = std::max(0, d - (height - 1));
    const int u_hi = std::min(d, width - 1);
    // Odd diagonals run with u descending, even ones with u ascending (JPEG order).
    if (d % 2 == 1)
      for (int u = u_hi; u >= u_lo; --u) out.push_back({u, d - u, 0.0});
    else
      for (int u = u_lo; u <= u_hi; ++u) out.push_back({u, d - u, 0.0});
  }
  return out;
}

std::vector<RankedIndex> walsh_sequency_order(int width, int height) {
  std::vector<RankedIndex> out;
  out.reserve(static_cast<std::size_t>(width) * height);
  for (int v = 0; v < height; ++v)
    for (int u = 0; u < width; ++u) out.push_back({u, v, 0.0});
  std::stable_sort(out.begin(), out.end(), ranked_before);
  return out;
}

namespace {

double bin_width(int width, int height) { return 2.0 * pi / std::max(width, height); }

std::size_t radial_bin(const spectral::Frequency& f, double dw) {
  return static_cast<std::size_t>(std::lround(std::hypot(f.wx, f.wy) / dw));
}

}  // namespace

std::vector<double> radial_mean_spectrum(const std::vector<Image>& db, int width, int height) {
  const auto grid = spectral::freq_grid(width, height);
  const double dw = bin_width(width, height);
  std::size_t bins = 0;
  for (const auto& f : grid.omegas()) bins = std::max(bins, radial_bin(f, dw) + 1);

  const std::size_t n = grid.size();
  std::vector<double> magnitude(n, 0.0);
  if (db.empty()) {
    for (std::size_t i = 0; i < n; ++i) {
      const double r = std::hypot(grid[i].wx, grid[i].wy);
      magnitude[i] = r > 0.0 ? 1.0 / r : 1.0 / dw;
    }
  } else {
    fft::Buffer buf(n);
    for (const auto& img : db) {
      if (img.width() != width || img.height() != height)
        throw InvalidArgument("database image has wrong resolution");
      for (std::size_t i = 0; i < n; ++i) buf.data()[i] = {img.pixels()[i], 0.0};
      fft::forward(buf, width, height);
      for (std::size_t i = 0; i < n; ++i) magnitude[i] += std::abs(buf.data()[i]);
    }
    for (double& m : magnitude) m /= static_cast<double>(db.size());
  }

  std::vector<double> sum(bins, 0.0);
  std::vector<int> count(bins, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto b = radial_bin(grid[i], dw);
    sum[b] += magnitude[i];
    ++count[b];
  }
  for (std::size_t b = 0; b < bins; ++b) sum[b] = count[b] ? sum[b] / count[b] : 0.0;
  return sum;
}

std::string database_digest(const std::vector<Image>& db, int width, int height) {
  Digest d;
  d.update_pod(static_cast<std::int64_t>(width)).update_pod(static_cast<std::int64_t>(height));
  d.update_pod(static_cast<std::uint64_t>(db.size()));
  for (const auto& img : db) d.update(std::as_bytes(img.pixels()));
  return d.hex();
}

// ---------------------------------------------------------------------------
// Selection
// ---------------------------------------------------------------------------

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Inverse CDF of a piecewise-constant density over radial bins [lo_bin, hi_bin],
// each bin b covering [(b - 1/2) dw, (b + 1/2) dw] clipped to the band.
double band_quantile(const std::vector<double>& profile, std::size_t lo_bin, std::size_t hi_bin, double dw,
                     double q) {
  const double band_lo = lo_bin * dw;
  const double band_hi = hi_bin * dw;
  if (hi_bin == lo_bin) return band_lo;
  std::vector<double> mass;
  std::vector<double> edges;
  double total = 0.0;
  for (std::size_t b = lo_bin; b <= hi_bin; ++b) {
    const double a = std::max(band_lo, (b - 0.5) * dw);
    const double e = std::min(band_hi, (b + 0.5) * dw);
    edges.push_back(a);
    mass.push_back(profile[b] * (e * e - a * a));
    total += mass.back();
  }
  edges.push_back(band_hi);
  double target = q * total;
  for (std::size_t j = 0; j < mass.size(); ++j) {
    if (target <= mass[j] || j + 1 == mass.size()) {
      const double frac = mass[j] > 0.0 ? std::clamp(target / mass[j], 0.0, 1.0) : 0.5;
      return edges[j] + frac * (edges[j + 1] - edges[j]);
    }
    target -= mass[j];
  }
  return band_hi;
}

PatternSet select_morlet(int k, const std::vector<Image>& db, int width, int height, const SelectOptions& opt,
                         const std::string& meta_prefix) {
  const auto& mo = opt.morlet;
  if (mo.orientations < 1) throw InvalidArgument("need at least one Morlet orientation");
  const double sigma_min = mo.sigma_min;
  const double sigma_max = mo.sigma_max > 0.0 ? mo.sigma_max : std::max(width, height) / 4.0;
  const auto profile = radial_mean_spectrum(db, width, height);
  const double dw = bin_width(width, height);

  // Significant band: bins past DC down to band_fraction of the peak,
  // capped at Nyquist.
  const auto nyquist_bin = static_cast<std::size_t>(std::floor(pi / dw + 1e-9));
  const std::size_t last = std::min(profile.size() - 1, nyquist_bin);
  double peak = 0.0;
  for (std::size_t b = 1; b <= last; ++b) peak = std::max(peak, profile[b]);
  std::size_t hi_bin = 1;
  for (std::size_t b = 1; b <= last; ++b)
    if (profile[b] >= mo.band_fraction * peak) hi_bin = b;
  const std::size_t lo_bin = 1;

  // Schedule works in units of pi rad/pixel (omega = n_p / 2 sigma).
  const double omega_min = lo_bin * dw / pi;
  const double omega_max = hi_bin * dw / pi;

  PatternSet set;
  set.protocol = Protocol::kMorletNoise;
  set.width = width;
  set.height = height;
  set.seed = opt.seed;
  set.patterns.resize(static_cast<std::size_t>(k));
  std::vector<MorletParams> params(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    const double q = (i + 0.5) / k;
    const double omega = std::clamp(band_quantile(profile, lo_bin, hi_bin, dw, q) / pi, omega_min, omega_max);
    auto p = sigma_schedule(omega, sigma_min, sigma_max, omega_min, omega_max);
    p.theta = pi * (i % mo.orientations) / mo.orientations;
    params[static_cast<std::size_t>(i)] = p;
  }
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < k; ++i) {
    const auto seed_i = splitmix64(opt.seed ^ splitmix64(static_cast<std::uint64_t>(i)));
    set.patterns[static_cast<std::size_t>(i)] =
        morlet_noise_pattern(params[static_cast<std::size_t>(i)], seed_i, width, height);
  }
  set.selection_meta = meta_prefix + ";rank=radial-spectrum-quantile;omega=[" + std::to_string(omega_min) + "," +
                       std::to_string(omega_max) + "];sigma=[" + std::to_string(sigma_min) + "," +
                       std::to_string(sigma_max) + "];orientations=" + std::to_string(mo.orientations);
  return set;
}

}  // namespace

PatternSet select_patterns(Protocol protocol, int k, const std::vector<Image>& db_in, int width, int height,
                           const SelectOptions& options) {
  if (width < 1 || height < 1) throw InvalidArgument("resolution must be positive");
  const int n = width * height;
  if (k < 1) throw InvalidArgument("k must be at least 1");
  if (protocol == Protocol::kWalshHadamard) require_power_of_two(width, height);
  if (protocol != Protocol::kMorletNoise && k > n)
    throw InvalidArgument("k = " + std::to_string(k) + " exceeds basis size n = " + std::to_string(n));

  std::vector<Image> db;
  db.reserve(db_in.size());
  for (const auto& img : db_in) db.push_back(resize_bilinear(img, width, height));
  const std::string source = db.empty() ? "rule" : "db:sha256:" + database_digest(db, width, height);

  if (protocol == Protocol::kMorletNoise) return select_morlet(k, db, width, height, options, source);

  std::vector<RankedIndex> ranking;
  std::string rule;
  if (protocol == Protocol::kDct) {
    ranking = db.empty() ? dct_zigzag_order(width, height) : rank_dct(db, width, height);
    rule = db.empty() ? "zigzag" : "mean-abs-dct-coef;ties=(u+v,u)";
  } else {
    ranking = db.empty() ? walsh_sequency_order(width, height) : rank_walsh(db, width, height);
    rule = db.empty() ? "sequency-sum;ties=(sx+sy,sx)" : "mean-abs-walsh-coef;ties=(sx+sy,sx)";
  }

  PatternSet set;
  set.protocol = protocol;
  set.width = width;
  set.height = height;
  set.seed = options.seed;
  set.selection_meta = source + ";rank=" + rule;
  set.patterns.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    const auto& r = ranking[static_cast<std::size_t>(i)];
    set.patterns.push_back(protocol == Protocol::kDct ? dct_basis_function(r.u, r.v, width, height)
                                                      : walsh_hadamard_function(r.u, r.v, width, height));
  }
  return set;
}

PatternSet binarize(const PatternSet& set) {
  if (set.binarized) throw InvalidArgument("pattern set is already binarized");
  PatternSet out = set;
  out.binarized = true;
  for (auto& p : out.patterns) {
    const double m = p.mean();
    double scale = 0.0;
    for (double v : p.pixels()) scale = std::max(scale, std::abs(v));
    const double tol = 1e-12 * scale;  // mean round-off on flat patterns
    for (double& v : p.pixels()) v = (v - m >= -tol) ? 1.0 : -1.0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Measurement matrix
// ---------------------------------------------------------------------------

MeasurementMatrix::MeasurementMatrix(RowMatrix entries, int width, int height, MatrixProvenance provenance)
    : entries_(std::move(entries)), width_(width), height_(height), provenance_(std::move(provenance)) {
  if (entries_.rows() < 1) throw InvalidArgument("measurement matrix needs at least one row");
  if (entries_.cols() != static_cast<Eigen::Index>(width) * height)
    throw InvalidArgument("measurement matrix columns do not match resolution");
  Digest d;
  d.update_pod(static_cast<std::int64_t>(entries_.rows()))
      .update_pod(static_cast<std::int64_t>(width_))
      .update_pod(static_cast<std::int64_t>(height_));
  d.update(std::as_bytes(std::span(entries_.data(), static_cast<std::size_t>(entries_.size()))));
  digest_ = d.hex();
}

MeasurementMatrix assemble_measurement_matrix(const PatternSet& set, bool include_white) {
  if (set.patterns.empty()) throw InvalidArgument("cannot assemble a measurement matrix from an empty set");
  const auto n = static_cast<Eigen::Index>(set.width) * set.height;
  const Eigen::Index offset = include_white ? 1 : 0;
  RowMatrix m(static_cast<Eigen::Index>(set.patterns.size()) + offset, n);
  if (include_white) m.row(0).setOnes();
  for (std::size_t i = 0; i < set.patterns.size(); ++i) {
    const auto& p = set.patterns[i];
    if (p.width() != set.width || p.height() != set.height)
      throw InvalidArgument("pattern resolution differs from the set's");
    m.row(static_cast<Eigen::Index>(i) + offset) = p.vec().transpose();
  }
  return MeasurementMatrix(std::move(m), set.width, set.height,
                           {set.protocol, set.binarized, include_white, set.selection_meta, set.seed});
}

}  // namespace fdri::sampling
