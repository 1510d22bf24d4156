#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "fdri/image.hpp"

namespace fdri::sampling {

enum class Protocol { kDct, kWalshHadamard, kMorletNoise };

std::string_view to_string(Protocol p) noexcept;
// Accepts "dct", "walsh", "walsh-hadamard", "morlet", "morlet-noise".
Protocol parse_protocol(std::string_view name);

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// ---------------------------------------------------------------------------
// Orthonormal bases
// ---------------------------------------------------------------------------

// 1D orthonormal DCT-II factor sqrt(c_u/N) cos(pi (2x+1) u / 2N), c_0 = 1, c_u = 2.
double dct_factor(int u, int x, int n);

// n x n matrix whose row u is the 1D DCT-II basis function u.
Eigen::MatrixXd dct_matrix(int n);

// 2D orthonormal DCT-II basis function; u runs along the width, v along the height.
Image dct_basis_function(int u, int v, int width, int height);

// Sequency-ordered 1D Walsh function (entries +-1, unnormalized). Row s has
// exactly s sign changes.
std::vector<int> walsh_row(int sequency, int n);

// n x n orthonormal sequency-ordered Walsh matrix (entries +-1/sqrt(n)).
Eigen::MatrixXd walsh_matrix(int n);

// Separable 2D Walsh-Hadamard function with sequencies (sx, sy), values +-1/sqrt(n).
Image walsh_hadamard_function(int sx, int sy, int width, int height);

// Same, addressed by position s in the deterministic low-sequency order
// (ascending sx + sy, then ascending sx).
Image walsh_hadamard_function(int s, int width, int height);

bool is_power_of_two(int v) noexcept;

// ---------------------------------------------------------------------------
// Morlet wavelets
// ---------------------------------------------------------------------------

struct MorletParams {
  double sigma;  // envelope width, pixels
  double n_p;    // periods within the envelope
  double theta;  // modulation orientation, radians
};

struct ComplexImage {
  int width = 0;
  int height = 0;
  std::vector<std::complex<double>> pixels;

  std::complex<double> mean() const;
  double norm() const;
};

struct MorletWavelet {
  ComplexImage g;
  std::complex<double> kappa;  // zero-mean correction
  double scale;                // normalization constant N
};

// g = N exp(-(x^2+y^2)/2 sigma^2) (exp(i (pi n_p / 2 sigma)(x cos theta + y sin theta)) - kappa)
// centered at pixel (width/2, height/2). kappa and N are computed on the
// discrete grid so that mean(g) = 0 and ||g|| = 1 hold exactly.
MorletWavelet morlet_wavelet(const MorletParams& params, int width, int height);

// Real part of the wavelet circularly convolved with unit-variance white
// Gaussian noise drawn from `seed`, standardized to zero mean and unit norm.
Image morlet_noise_pattern(const MorletParams& params, std::uint64_t seed, int width, int height);

// Envelope width shrinks linearly as the modulation frequency grows:
//   sigma = sigma_min + (sigma_max - sigma_min) (omega_max - omega) / (omega_max - omega_min)
// and n_p = 2 sigma omega. omega is n_p / (2 sigma), i.e. the modulation
// wavenumber in units of pi rad/pixel. theta is left at 0.
MorletParams sigma_schedule(double omega, double sigma_min, double sigma_max, double omega_min,
                            double omega_max);

// ---------------------------------------------------------------------------
// Pattern sets and selection
// ---------------------------------------------------------------------------

struct PatternSet {
  Protocol protocol = Protocol::kDct;
  int width = 0;
  int height = 0;
  std::vector<Image> patterns;  // most significant first
  bool binarized = false;
  std::string selection_meta;
  std::uint64_t seed = 0;
};

struct MorletOptions {
  double sigma_min = 2.0;
  double sigma_max = 0.0;  // 0 selects resolution / 4
  int orientations = 8;    // theta cycles over pi * j / orientations
  double band_fraction = 0.01;  // significant band: mean spectrum >= fraction * peak
};

struct SelectOptions {
  std::uint64_t seed = 0;
  MorletOptions morlet;
};

// A basis index (u along the width, v along the height) and its ranking score.
struct RankedIndex {
  int u;
  int v;
  double score;
};

// Mean absolute transform coefficient of every basis function over the
// database, sorted by descending score with ties broken by ascending (u+v, u).
// Database images must already be at (width, height).
std::vector<RankedIndex> rank_dct(const std::vector<Image>& db, int width, int height);
std::vector<RankedIndex> rank_walsh(const std::vector<Image>& db, int width, int height);

// Deterministic orders used when no database is supplied.
std::vector<RankedIndex> dct_zigzag_order(int width, int height);
std::vector<RankedIndex> walsh_sequency_order(int width, int height);

// Radial profile of the database's mean DFT magnitude, one value per bin of
// width 2 pi / max(width, height); bin 0 holds DC. An empty database yields
// a 1/|omega| model spectrum.
std::vector<double> radial_mean_spectrum(const std::vector<Image>& db, int width, int height);

// SHA-256 over the resolution and pixel content of the (resized) database.
std::string database_digest(const std::vector<Image>& db, int width, int height);

// Selects k patterns for the protocol. Database images are resampled to
// (width, height) first. With an empty database, DCT falls back to zigzag
// order and Walsh-Hadamard to ascending sequency sum.
PatternSet select_patterns(Protocol protocol, int k, const std::vector<Image>& db, int width, int height,
                           const SelectOptions& options = {});

// Thresholds each pattern at its own mean: >= mean -> +1, else -1.
PatternSet binarize(const PatternSet& set);

// ---------------------------------------------------------------------------
// Measurement matrix
// ---------------------------------------------------------------------------

struct MatrixProvenance {
  Protocol protocol = Protocol::kDct;
  bool binarized = false;
  bool include_white = false;
  std::string selection_meta;
  std::uint64_t seed = 0;
};

// k x n matrix whose rows are flattened sampling patterns.
class MeasurementMatrix {
 public:
  MeasurementMatrix(RowMatrix entries, int width, int height, MatrixProvenance provenance = {});

  Eigen::Index k() const noexcept { return entries_.rows(); }
  Eigen::Index n() const noexcept { return entries_.cols(); }
  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  const RowMatrix& entries() const noexcept { return entries_; }
  const MatrixProvenance& provenance() const noexcept { return provenance_; }

  // SHA-256 of shape and entries; binds reconstruction matrices to this M.
  const std::string& digest() const noexcept { return digest_; }

 private:
  RowMatrix entries_;
  int width_;
  int height_;
  MatrixProvenance provenance_;
  std::string digest_;
};

// Row i = pattern i flattened row-major; include_white prepends an all-ones row.
MeasurementMatrix assemble_measurement_matrix(const PatternSet& set, bool include_white = false);

}  // namespace fdri::sampling
