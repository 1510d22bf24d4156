#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "fdri/image.hpp"
#include "fdri/sampling.hpp"
#include "fdri/spectral.hpp"

namespace fdri::recon {

enum class Method { kFdriDirect, kFdriSvd, kPinv };
enum class Precision { kF64, kF32 };

std::string_view to_string(Method m) noexcept;
std::string_view to_string(Precision p) noexcept;
Method parse_method(std::string_view name);
Precision parse_precision(std::string_view name);

struct ReconProvenance {
  std::string measurement_digest;  // digest of the M this P inverts
  double mu = 0.0;                 // NaN for the plain pseudoinverse
  double eps = 0.0;
};

// n x k reconstruction matrix P, x0 = P y. Entries are stored column-major
// (each column is the image produced by a unit measurement), in either f64
// or f32. Immutable; safe to share across threads.
class ReconstructionMatrix {
 public:
  ReconstructionMatrix(Eigen::MatrixXd entries, int width, int height, Method method, ReconProvenance prov);
  ReconstructionMatrix(Eigen::MatrixXf entries, int width, int height, Method method, ReconProvenance prov);

  Eigen::Index n() const noexcept { return n_; }
  Eigen::Index k() const noexcept { return k_; }
  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  Method method() const noexcept { return method_; }
  Precision precision() const noexcept { return precision_; }
  const ReconProvenance& provenance() const noexcept { return provenance_; }

  // Only the accessor matching precision() is populated.
  const Eigen::MatrixXd& f64() const;
  const Eigen::MatrixXf& f32() const;

  // Entries widened to f64 regardless of storage precision.
  Eigen::MatrixXd as_f64() const;
  // Single-precision copy for the real-time path.
  ReconstructionMatrix to_f32() const;

 private:
  Eigen::MatrixXd d_;
  Eigen::MatrixXf f_;
  Eigen::Index n_;
  Eigen::Index k_;
  int width_;
  int height_;
  Method method_;
  Precision precision_;
  ReconProvenance provenance_;
};

struct PrecomputeReport {
  std::vector<std::pair<std::string, double>> stage_seconds;
  double condition = 1.0;  // estimate for the k x k Gram matrix
  std::string solver;
  double jitter = 0.0;     // diagonal regularization added to the Gram matrix, if any
  Eigen::Index rank = 0;   // numerical rank used by SVD-based paths

  double total_seconds() const;
};

struct PrecomputeOptions {
  // Upper bound on the scratch block of C^-1 M^T rows held at once.
  std::size_t block_bytes = std::size_t{256} << 20;
  // Gram condition above which the direct solve is refused (1/sqrt(machine eps)).
  double max_condition = 6.7108864e7;
};

using Result = std::pair<ReconstructionMatrix, PrecomputeReport>;

// P = C^-1 M^T (M C^-1 M^T)^-1 via Cholesky of the Gram matrix.
// Throws RankDeficiency if the Gram matrix is numerically singular.
Result precompute_fdri_direct(const sampling::MeasurementMatrix& m, const spectral::SpectralFilter& filter,
                              const PrecomputeOptions& options = {});

// P = Gamma (M Gamma)^+ with Gamma = F* diag(gamma) F and the pseudoinverse
// from a truncated SVD (cutoff max(k,n) * machine eps * sigma_max).
// Tolerates rank-deficient M.
Result precompute_fdri_svd(const sampling::MeasurementMatrix& m, const spectral::SpectralFilter& filter,
                           const PrecomputeOptions& options = {});

// Minimal-norm baseline P = M^+ = M^T (M M^T)^-1, falling back to a truncated
// SVD when M lacks full row rank.
Result precompute_pinv(const sampling::MeasurementMatrix& m, const PrecomputeOptions& options = {});

// Dispatches on method; filter is ignored for kPinv.
Result precompute(Method method, const sampling::MeasurementMatrix& m, const spectral::SpectralFilter& filter,
                  const PrecomputeOptions& options = {});

// x0 = P y reshaped row-major to P's resolution. No clipping.
Image reconstruct(const ReconstructionMatrix& p, const Eigen::Ref<const Eigen::VectorXd>& y);

// Allocation-free variant for the streaming path; out must have length n.
void reconstruct_into(const ReconstructionMatrix& p, const Eigen::Ref<const Eigen::VectorXd>& y,
                      Eigen::Ref<Eigen::VectorXd> out);

// max |M P - I_k|.
double right_inverse_error(const sampling::MeasurementMatrix& m, const ReconstructionMatrix& p);

// ||a - b||_F / ||b||_F.
double relative_distance(const ReconstructionMatrix& a, const ReconstructionMatrix& b);

}  // namespace fdri::recon
