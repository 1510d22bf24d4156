#include "fdri/reconstruction.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "fdri/errors.hpp"

namespace fdri::recon {

using sampling::MeasurementMatrix;
using spectral::Circulant;
using spectral::SpectralFilter;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::string_view to_string(Method m) noexcept {
  switch (m) {
    case Method::kFdriDirect: return "fdri-direct";
    case Method::kFdriSvd: return "fdri-svd";
    case Method::kPinv: return "pinv";
  }
  return "unknown";
}

std::string_view to_string(Precision p) noexcept { return p == Precision::kF32 ? "f32" : "f64"; }

Method parse_method(std::string_view name) {
  if (name == "fdri-direct" || name == "fdri" || name == "direct") return Method::kFdriDirect;
  if (name == "fdri-svd" || name == "svd") return Method::kFdriSvd;
  if (name == "pinv") return Method::kPinv;
  throw InvalidArgument("unknown method '" + std::string(name) + "'");
}

Precision parse_precision(std::string_view name) {
  if (name == "f64" || name == "double") return Precision::kF64;
  if (name == "f32" || name == "float") return Precision::kF32;
  throw InvalidArgument("unknown precision '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------

ReconstructionMatrix::ReconstructionMatrix(Eigen::MatrixXd entries, int width, int height, Method method,
                                           ReconProvenance prov)
    : d_(std::move(entries)), n_(d_.rows()), k_(d_.cols()), width_(width), height_(height), method_(method),
      precision_(Precision::kF64), provenance_(std::move(prov)) {
  if (n_ != static_cast<Eigen::Index>(width) * height) throw InvalidArgument("P rows do not match resolution");
  if (k_ < 1) throw InvalidArgument("P needs at least one column");
}

ReconstructionMatrix::ReconstructionMatrix(Eigen::MatrixXf entries, int width, int height, Method method,
                                           ReconProvenance prov)
    : f_(std::move(entries)), n_(f_.rows()), k_(f_.cols()), width_(width), height_(height), method_(method),
      precision_(Precision::kF32), provenance_(std::move(prov)) {
  if (n_ != static_cast<Eigen::Index>(width) * height) throw InvalidArgument("P rows do not match resolution");
  if (k_ < 1) throw InvalidArgument("P needs at least one column");
}

const Eigen::MatrixXd& ReconstructionMatrix::f64() const {
  if (precision_ != Precision::kF64) throw InvalidArgument("reconstruction matrix is stored in f32");
  return d_;
}

const Eigen::MatrixXf& ReconstructionMatrix::f32() const {
  if (precision_ != Precision::kF32) throw InvalidArgument("reconstruction matrix is stored in f64");
  return f_;
}

Eigen::MatrixXd ReconstructionMatrix::as_f64() const {
  return precision_ == Precision::kF64 ? d_ : Eigen::MatrixXd(f_.cast<double>());
}

ReconstructionMatrix ReconstructionMatrix::to_f32() const {
  Eigen::MatrixXf f = precision_ == Precision::kF32 ? f_ : Eigen::MatrixXf(d_.cast<float>());
  return ReconstructionMatrix(std::move(f), width_, height_, method_, provenance_);
}

double PrecomputeReport::total_seconds() const {
  double t = 0.0;
  for (const auto& [name, s] : stage_seconds) t += s;
  return t;
}

// ---------------------------------------------------------------------------

namespace {

class StageTimer {
 public:
  explicit StageTimer(PrecomputeReport& report) : report_(report), last_(clock::now()) {}
  void mark(std::string name) {
    const auto now = clock::now();
    report_.stage_seconds.emplace_back(std::move(name), std::chrono::duration<double>(now - last_).count());
    last_ = now;
  }

 private:
  using clock = std::chrono::steady_clock;
  PrecomputeReport& report_;
  clock::time_point last_;
};

void require_grid(const MeasurementMatrix& m, const SpectralFilter& filter) {
  if (m.width() != filter.width() || m.height() != filter.height())
    throw InvalidArgument("filter grid " + std::to_string(filter.width()) + "x" + std::to_string(filter.height()) +
                          " does not match measurement resolution " + std::to_string(m.width()) + "x" +
                          std::to_string(m.height()));
}

// G = M C^-1 M^T, streaming C^-1 M^T in row blocks bounded by block_bytes.
Eigen::MatrixXd filtered_gram(const MeasurementMatrix& m, const SpectralFilter& filter, std::size_t block_bytes) {
  const Eigen::Index k = m.k();
  const Eigen::Index n = m.n();
  const auto row_bytes = static_cast<std::size_t>(n) * sizeof(double);
  const Eigen::Index block = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(block_bytes / row_bytes), 1, k);
  Eigen::MatrixXd gram(k, k);
  RowMatrix scratch(block, n);
  for (Eigen::Index start = 0; start < k; start += block) {
    const Eigen::Index rows = std::min(block, k - start);
    auto b = scratch.topRows(rows);
    b = m.entries().middleRows(start, rows);
    spectral::apply_circulant_rows(filter, b, Circulant::kCriterionInverse);
    gram.middleCols(start, rows).noalias() = m.entries() * b.transpose();
  }
  // Exact symmetry for the Cholesky factorization.
  gram = 0.5 * (gram + gram.transpose()).eval();
  return gram;
}

// Solves G Z = rhs in place.
//
// G is first equilibrated, S G S with S = diag(G)^-1/2, so the condition
// estimate measures linear dependence of the rows of M rather than their
// relative scale (rescaling a row of M leaves P y unchanged). Cholesky when
// the scaled matrix is positive definite; otherwise pivoted LDL^T with
// diagonal jitter 1e-10 trace/k. Either way the condition estimate must stay
// below the limit.
void gram_solve_in_place(Eigen::MatrixXd gram, Eigen::Ref<RowMatrix> rhs, const PrecomputeOptions& options,
                         PrecomputeReport& report) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const Eigen::Index k = gram.rows();
  auto refuse = [&] {
    throw RankDeficiency("Gram matrix is numerically singular: condition estimate " +
                             std::to_string(report.condition) + " exceeds limit " +
                             std::to_string(options.max_condition) +
                             " (rows of M are linearly dependent or nearly so)",
                         report.condition);
  };

  Eigen::VectorXd scale(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const double d = gram(i, i);
    if (!(d > 0.0)) {
      report.condition = kInf;
      refuse();
    }
    scale(i) = 1.0 / std::sqrt(d);
  }
  gram = scale.asDiagonal() * gram * scale.asDiagonal();
  rhs = scale.asDiagonal() * rhs;

  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() == Eigen::Success) {
    const double rcond = llt.rcond();
    report.condition = rcond > 0.0 ? 1.0 / rcond : kInf;
    report.solver = "cholesky";
    if (!(report.condition <= options.max_condition)) refuse();
    llt.solveInPlace(rhs);
  } else {
    Eigen::LDLT<Eigen::MatrixXd> plain(gram);
    const double rcond = plain.info() == Eigen::Success ? plain.rcond() : 0.0;
    report.condition = rcond > 0.0 ? 1.0 / rcond : kInf;
    report.solver = "ldlt+jitter";
    if (!(report.condition <= options.max_condition)) refuse();
    report.jitter = 1e-10 * gram.trace() / static_cast<double>(k);
    gram.diagonal().array() += report.jitter;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    ldlt.solveInPlace(rhs);
  }
  rhs = scale.asDiagonal() * rhs;
}

// Truncated pseudoinverse of a k x n row-major matrix A, returned n x k
// column-major. Uses the thin SVD of A^T.
Eigen::MatrixXd truncated_pinv(const RowMatrix& a, PrecomputeReport& report) {
  const Eigen::Index k = a.rows();
  const Eigen::Index n = a.cols();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(a.transpose(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const double smax = s.size() ? s(0) : 0.0;
  const double cutoff = static_cast<double>(std::max(k, n)) * std::numeric_limits<double>::epsilon() * smax;
  Eigen::Index rank = 0;
  Eigen::VectorXd inv(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff) {
      inv(i) = 1.0 / s(i);
      ++rank;
    } else {
      inv(i) = 0.0;
    }
  }
  report.rank = rank;
  report.condition = rank > 0 ? std::pow(smax / s(rank - 1), 2) : std::numeric_limits<double>::infinity();
  // A^T = U S V^T  =>  A^+ = U S^+ V^T.
  return svd.matrixU() * inv.asDiagonal() * svd.matrixV().transpose();
}

ReconProvenance provenance_for(const MeasurementMatrix& m, double mu, double eps) {
  return {m.digest(), mu, eps};
}

}  // namespace

Result precompute_fdri_direct(const MeasurementMatrix& m, const SpectralFilter& filter,
                              const PrecomputeOptions& options) {
  require_grid(m, filter);
  PrecomputeReport report;
  StageTimer timer(report);
  const Eigen::Index k = m.k();
  const Eigen::Index n = m.n();

  Eigen::MatrixXd gram = filtered_gram(m, filter, options.block_bytes);
  timer.mark("gram");

  // P = C^-1 M^T G^-1. P^T = G^-1 M C^-1 (C and G symmetric), so solve
  // G Z = M in place and filter each row of Z. A row-major k x n view of Z
  // shares storage with the column-major n x k P.
  Eigen::MatrixXd p(n, k);
  Eigen::Map<RowMatrix> z(p.data(), k, n);
  z = m.entries();
  gram_solve_in_place(std::move(gram), z, options, report);
  timer.mark("solve");
  spectral::apply_circulant_rows(filter, z, Circulant::kCriterionInverse);
  timer.mark("filter");
  report.rank = k;

  return {ReconstructionMatrix(std::move(p), m.width(), m.height(), Method::kFdriDirect,
                               provenance_for(m, filter.mu(), filter.eps())),
          std::move(report)};
}

Result precompute_fdri_svd(const MeasurementMatrix& m, const SpectralFilter& filter, const PrecomputeOptions&) {
  require_grid(m, filter);
  PrecomputeReport report;
  StageTimer timer(report);
  const Eigen::Index k = m.k();
  const Eigen::Index n = m.n();

  // Rows of M Gamma are Gamma applied to each pattern (Gamma is symmetric).
  RowMatrix a = m.entries();
  spectral::apply_circulant_rows(filter, a, Circulant::kGamma);
  timer.mark("gamma");

  Eigen::MatrixXd p = truncated_pinv(a, report);
  a.resize(0, 0);
  timer.mark("svd");
  report.solver = "bdcsvd";

  Eigen::Map<RowMatrix> columns(p.data(), k, n);
  spectral::apply_circulant_rows(filter, columns, Circulant::kGamma);
  timer.mark("filter");

  return {ReconstructionMatrix(std::move(p), m.width(), m.height(), Method::kFdriSvd,
                               provenance_for(m, filter.mu(), filter.eps())),
          std::move(report)};
}

Result precompute_pinv(const MeasurementMatrix& m, const PrecomputeOptions& options) {
  PrecomputeReport report;
  StageTimer timer(report);
  const Eigen::Index k = m.k();
  const Eigen::Index n = m.n();
  const double nan = std::numeric_limits<double>::quiet_NaN();

  Eigen::MatrixXd gram(k, k);
  gram.noalias() = m.entries() * m.entries().transpose();
  timer.mark("gram");

  try {
    Eigen::MatrixXd p(n, k);
    Eigen::Map<RowMatrix> z(p.data(), k, n);
    z = m.entries();
    gram_solve_in_place(std::move(gram), z, options, report);
    report.rank = k;
    timer.mark("solve");
    return {ReconstructionMatrix(std::move(p), m.width(), m.height(), Method::kPinv, provenance_for(m, nan, nan)),
            std::move(report)};
  } catch (const RankDeficiency&) {
    // Rank-deficient M: the truncated SVD gives the minimal-norm inverse.
  }

  report.solver = "bdcsvd";
  Eigen::MatrixXd p = truncated_pinv(m.entries(), report);
  timer.mark("svd");
  return {ReconstructionMatrix(std::move(p), m.width(), m.height(), Method::kPinv, provenance_for(m, nan, nan)),
          std::move(report)};
}

Result precompute(Method method, const MeasurementMatrix& m, const SpectralFilter& filter,
                  const PrecomputeOptions& options) {
  switch (method) {
    case Method::kFdriDirect: return precompute_fdri_direct(m, filter, options);
    case Method::kFdriSvd: return precompute_fdri_svd(m, filter, options);
    case Method::kPinv: return precompute_pinv(m, options);
  }
  throw InvalidArgument("unknown method");
}

// ---------------------------------------------------------------------------

void reconstruct_into(const ReconstructionMatrix& p, const Eigen::Ref<const Eigen::VectorXd>& y,
                      Eigen::Ref<Eigen::VectorXd> out) {
  if (y.size() != p.k())
    throw InvalidArgument("measurement length " + std::to_string(y.size()) + " does not match k = " +
                          std::to_string(p.k()));
  if (out.size() != p.n()) throw InvalidArgument("output length does not match n");
  if (p.precision() == Precision::kF64) {
    out.noalias() = p.f64() * y;
  } else {
    // per-thread scratch keeps the streaming path free of allocations
    thread_local Eigen::VectorXf yf, xf;
    yf = y.cast<float>();
    xf.resize(p.n());
    xf.noalias() = p.f32() * yf;
    out = xf.cast<double>();
  }
}

Image reconstruct(const ReconstructionMatrix& p, const Eigen::Ref<const Eigen::VectorXd>& y) {
  Image out(p.width(), p.height());
  reconstruct_into(p, y, out.vec());
  return out;
}

double right_inverse_error(const MeasurementMatrix& m, const ReconstructionMatrix& p) {
  if (m.n() != p.n() || m.k() != p.k()) throw InvalidArgument("M and P shapes are incompatible");
  Eigen::MatrixXd prod(m.k(), m.k());
  if (p.precision() == Precision::kF64)
    prod.noalias() = m.entries() * p.f64();
  else
    prod.noalias() = m.entries() * p.f32().cast<double>();
  prod.diagonal().array() -= 1.0;
  return prod.cwiseAbs().maxCoeff();
}

double relative_distance(const ReconstructionMatrix& a, const ReconstructionMatrix& b) {
  if (a.n() != b.n() || a.k() != b.k()) throw InvalidArgument("reconstruction matrices differ in shape");
  const Eigen::MatrixXd da = a.as_f64();
  const Eigen::MatrixXd db = b.as_f64();
  return (da - db).norm() / db.norm();
}

}  // namespace fdri::recon
