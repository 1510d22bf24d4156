#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "fdri/errors.hpp"
#include "fdri/reconstruction.hpp"
#include "fdri/sampling.hpp"
#include "fdri/simulator.hpp"
#include "fdri/spectral.hpp"
#include "oracles.hpp"

using namespace fdri;
using namespace fdri::recon;
using sampling::MeasurementMatrix;

namespace {

MeasurementMatrix dct_rows(int k, int res) {
  return sampling::assemble_measurement_matrix(sampling::select_patterns(sampling::Protocol::kDct, k, {}, res, res));
}

// P from the dense KKT system [C M^T; M 0] [P; L] = [0; I].
Eigen::MatrixXd kkt_oracle(const MeasurementMatrix& m, const spectral::SpectralFilter& f) {
  const Eigen::Index n = m.n(), k = m.k();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n + k, n + k);
  a.topLeftCorner(n, n) = oracle::dense_criterion(f);
  a.topRightCorner(n, k) = m.entries().transpose();
  a.bottomLeftCorner(k, n) = m.entries();
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n + k, k);
  rhs.bottomRows(k).setIdentity();
  return a.fullPivLu().solve(rhs).topRows(n);
}

}  // namespace

TEST_CASE("method and precision names") {
  CHECK(parse_method("fdri") == Method::kFdriDirect);
  CHECK(parse_method("fdri-direct") == Method::kFdriDirect);
  CHECK(parse_method("svd") == Method::kFdriSvd);
  CHECK(parse_method("pinv") == Method::kPinv);
  CHECK(parse_precision("f32") == Precision::kF32);
  CHECK_THROWS_AS(parse_method("lsqr"), InvalidArgument);
  CHECK_THROWS_AS(parse_precision("f16"), InvalidArgument);
  for (auto m : {Method::kFdriDirect, Method::kFdriSvd, Method::kPinv}) CHECK(parse_method(to_string(m)) == m);
}

TEST_CASE("every method yields a right inverse") {
  const auto filter = spectral::build_gamma(spectral::freq_grid(16, 16));
  for (int k : {16, 64, 128}) {
    for (const auto& m : {oracle::random_pm1(k, 16, 16, 11 + k), dct_rows(k, 16)}) {
      for (auto method : {Method::kFdriDirect, Method::kFdriSvd, Method::kPinv}) {
        const auto [p, report] = precompute(method, m, filter);
        INFO("k=" << k << " method=" << to_string(method));
        CHECK(p.n() == 256);
        CHECK(p.k() == k);
        CHECK(right_inverse_error(m, p) < 1e-8);
        CHECK(p.provenance().measurement_digest == m.digest());
        CHECK(report.total_seconds() >= 0.0);
      }
    }
  }
}

TEST_CASE("FDRI matches the dense constrained-minimization oracle") {
  const auto filter = spectral::build_gamma(spectral::freq_grid(8, 8), 0.5, 1e-5);
  const auto m = oracle::random_pm1(20, 8, 8, 5);
  const Eigen::MatrixXd want = kkt_oracle(m, filter);
  const auto direct = precompute_fdri_direct(m, filter).first;
  const auto svd = precompute_fdri_svd(m, filter).first;
  CHECK((direct.f64() - want).norm() / want.norm() < 1e-8);
  CHECK((svd.f64() - want).norm() / want.norm() < 1e-8);

  // Stationarity: C P y is orthogonal to null(M).
  const Eigen::MatrixXd c = oracle::dense_criterion(filter);
  const Eigen::MatrixXd null = oracle::null_space(m.entries());
  const Eigen::MatrixXd grad = null.transpose() * c * direct.f64();
  CHECK(grad.cwiseAbs().maxCoeff() < 1e-8 * (c * direct.f64()).cwiseAbs().maxCoeff());

  // Feasible perturbations never lower the criterion.
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  Eigen::VectorXd y(20);
  for (auto& v : y) v = g(rng);
  const Eigen::VectorXd x = direct.f64() * y;
  const double base = x.dot(c * x);
  for (int t = 0; t < 20; ++t) {
    Eigen::VectorXd z(null.cols());
    for (auto& v : z) v = g(rng);
    const Eigen::VectorXd xp = x + 1e-2 * null * z;
    CHECK(xp.dot(c * xp) >= base);
  }
}

TEST_CASE("direct and SVD paths agree") {
  const auto filter = spectral::build_gamma(spectral::freq_grid(16, 16));
  const auto m = dct_rows(40, 16);
  const auto a = precompute_fdri_direct(m, filter).first;
  const auto b = precompute_fdri_svd(m, filter).first;
  CHECK(relative_distance(a, b) < 1e-8);
  CHECK(a.method() == Method::kFdriDirect);
  CHECK(b.method() == Method::kFdriSvd);
  CHECK(a.provenance().mu == 0.5);
  CHECK(a.provenance().eps == 1e-5);
}

TEST_CASE("a complete orthonormal basis is inverted exactly") {
  const auto filter = spectral::build_gamma(spectral::freq_grid(8, 8));
  const auto m = dct_rows(64, 8);
  const Eigen::MatrixXd mt = m.entries().transpose();
  for (auto method : {Method::kFdriDirect, Method::kFdriSvd, Method::kPinv}) {
    const auto p = precompute(method, m, filter).first;
    CHECK((p.f64() - mt).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("pinv of orthonormal rows is the transpose") {
  const auto m = dct_rows(20, 16);
  const auto p = precompute_pinv(m).first;
  CHECK((p.f64() - Eigen::MatrixXd(m.entries().transpose())).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(std::isnan(p.provenance().mu));
}

TEST_CASE("flat filters reduce FDRI to the pseudoinverse") {
  const auto grid = spectral::freq_grid(16, 16);
  const auto m = oracle::random_pm1(30, 16, 16, 9);
  const auto pinv = precompute_pinv(m).first;
  const auto flat = precompute_fdri_direct(m, spectral::constant_filter(grid, 3.0)).first;
  CHECK(relative_distance(flat, pinv) < 1e-10);
  const auto big_eps = precompute_fdri_direct(m, spectral::build_gamma(grid, 0.5, 1e6)).first;
  CHECK(relative_distance(big_eps, pinv) < 1e-3);
}

TEST_CASE("P varies continuously with mu") {
  const auto grid = spectral::freq_grid(16, 16);
  const auto m = dct_rows(30, 16);
  const auto base = precompute_fdri_direct(m, spectral::build_gamma(grid, 0.5)).first;
  const double d3 = relative_distance(precompute_fdri_direct(m, spectral::build_gamma(grid, 0.501)).first, base);
  const double d4 = relative_distance(precompute_fdri_direct(m, spectral::build_gamma(grid, 0.5001)).first, base);
  CHECK(d3 < 1e-2);
  CHECK(d4 < d3);
  CHECK(d3 / d4 == doctest::Approx(10.0).epsilon(0.2));
}

TEST_CASE("rank-deficient measurement matrices") {
  const auto filter = spectral::build_gamma(spectral::freq_grid(8, 8));
  auto rows = oracle::random_pm1(10, 8, 8, 3).entries();
  rows.row(9) = rows.row(2);
  const MeasurementMatrix m(rows, 8, 8);
  CHECK_THROWS_AS(precompute_fdri_direct(m, filter), RankDeficiency);

  const auto [p, report] = precompute_fdri_svd(m, filter);
  CHECK(report.rank == 9);
  std::mt19937_64 rng(1);
  const Image x = oracle::random_image(8, 8, rng);
  const Eigen::VectorXd y = m.entries() * x.vec();
  CHECK((m.entries() * (p.f64() * y) - y).cwiseAbs().maxCoeff() < 1e-8);

  // pinv falls back to an SVD instead of failing
  const auto pp = precompute_pinv(m).first;
  CHECK((m.entries() * (pp.f64() * y) - y).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("filter resolution must match M") {
  const auto m = dct_rows(10, 8);
  CHECK_THROWS_AS(precompute_fdri_direct(m, spectral::build_gamma(spectral::freq_grid(16, 16))), InvalidArgument);
  CHECK_THROWS_AS(precompute_fdri_svd(m, spectral::build_gamma(spectral::freq_grid(8, 4))), InvalidArgument);
}

TEST_CASE("reconstruct") {
  const auto filter = spectral::build_gamma(spectral::freq_grid(16, 16));
  const auto m = oracle::random_pm1(40, 16, 16, 21);
  const auto p = precompute_fdri_direct(m, filter).first;

  const Image zero = reconstruct(p, Eigen::VectorXd::Zero(40));
  CHECK(zero.width() == 16);
  CHECK(zero.norm() == 0.0);

  // A scene in the range of P is recovered exactly.
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  Eigen::VectorXd y0(40);
  for (auto& v : y0) v = g(rng);
  const Image scene = image_from_vector(p.f64() * y0, 16, 16);
  const auto y = sim::measure(m, scene, 0.0, 0);
  const Image back = reconstruct(p, y.values);
  CHECK((back.vec() - scene.vec()).norm() < 1e-9 * scene.norm());

  // Linearity
  const Image a = reconstruct(p, y0);
  const Image b = reconstruct(p, 2.0 * y0);
  CHECK((b.vec() - 2.0 * a.vec()).norm() < 1e-12 * b.norm());

  const auto p32 = p.to_f32();
  CHECK(p32.precision() == Precision::kF32);
  const Image c = reconstruct(p32, y0);
  CHECK((c.vec() - a.vec()).norm() < 1e-5 * a.norm());
  CHECK((p32.as_f64() - p.f64()).norm() < 1e-6 * p.f64().norm());
  CHECK_THROWS_AS(p32.f64(), InvalidArgument);

  Eigen::VectorXd out(256);
  reconstruct_into(p, y0, out);
  CHECK(out == a.vec());

  CHECK_THROWS_AS(reconstruct(p, Eigen::VectorXd::Zero(39)), InvalidArgument);
  Eigen::VectorXd small(10);
  CHECK_THROWS_AS(reconstruct_into(p, y0, small), InvalidArgument);
}

TEST_CASE("precompute is deterministic") {
  const auto filter = spectral::build_gamma(spectral::freq_grid(16, 16));
  const auto m = oracle::random_pm1(50, 16, 16, 4);
  for (auto method : {Method::kFdriDirect, Method::kFdriSvd, Method::kPinv}) {
    const auto a = precompute(method, m, filter).first;
    const auto b = precompute(method, m, filter).first;
    CHECK(a.f64() == b.f64());
  }
}
