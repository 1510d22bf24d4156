#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "fdri/errors.hpp"
#include "fdri/metrics.hpp"
#include "fdri/reconstruction.hpp"
#include "fdri/sampling.hpp"
#include "oracles.hpp"

using namespace fdri;
using namespace fdri::metrics;

TEST_CASE("psnr examples") {
  const Image a(8, 8, 0.5);
  CHECK(psnr(a, Image(8, 8, 0.6)).psnr_db == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(psnr(Image(8, 8, 0.0), Image(8, 8, 1.0)).psnr_db == doctest::Approx(0.0));
  CHECK(psnr(a, a).psnr_db == std::numeric_limits<double>::infinity());
  CHECK(psnr(a, a).mse == 0.0);
  CHECK(psnr(Image(4, 4, 0.0), Image(4, 4, 25.5), 255.0).psnr_db == doctest::Approx(20.0));
  CHECK_THROWS_AS(psnr(a, Image(4, 4)), InvalidArgument);
  CHECK_THROWS_AS(psnr(a, a, 0.0), InvalidArgument);
}

TEST_CASE("psnr is symmetric and falls with noise") {
  std::mt19937_64 rng(1);
  const Image ref = oracle::random_image(32, 32, rng);
  std::normal_distribution<double> g;
  Image noise(32, 32);
  for (double& p : noise.pixels()) p = g(rng);
  double last = std::numeric_limits<double>::infinity();
  for (double s : {0.001, 0.01, 0.05, 0.2}) {
    Image t = ref;
    t.vec() += s * noise.vec();
    CHECK(psnr(ref, t).psnr_db == doctest::Approx(psnr(t, ref).psnr_db));
    CHECK(psnr(ref, t).psnr_db < last);
    last = psnr(ref, t).psnr_db;
  }
}

TEST_CASE("mean spectrum") {
  sampling::PatternSet flat;
  flat.width = 8;
  flat.height = 8;
  flat.patterns = {Image(8, 8, 2.0)};
  const auto spec = mean_spectrum(flat);
  CHECK(spec(4, 4) == doctest::Approx(1.0));
  CHECK(spec.vec().sum() == doctest::Approx(1.0));
  CHECK(spectrum_fraction_above(spec, 0.1) == doctest::Approx(0.0));

  const auto set = sampling::select_patterns(sampling::Protocol::kDct, 10, {}, 16, 16);
  auto flipped = set;
  for (auto& p : flipped.patterns) p.vec() *= -3.0;
  const auto s1 = mean_spectrum(set);
  const auto s2 = mean_spectrum(flipped);
  CHECK((s1.vec() - s2.vec()).cwiseAbs().maxCoeff() < 1e-12);

  const double f = spectrum_fraction_above(s1, std::numbers::pi / 4);
  CHECK(f >= 0.0);
  CHECK(f <= 1.0);
  CHECK_THROWS_AS(mean_spectrum(sampling::PatternSet{}), InvalidArgument);
}

TEST_CASE("bench_reconstruct") {
  Eigen::MatrixXf p = Eigen::MatrixXf::Random(256, 20);
  const recon::ReconstructionMatrix rm(p, 16, 16, recon::Method::kPinv, {});
  const auto r = bench_reconstruct(rm, Eigen::VectorXd::Ones(20), 25);
  CHECK(r.iterations == 25);
  CHECK(r.k == 20);
  CHECK(r.n == 256);
  CHECK(r.precision == recon::Precision::kF32);
  CHECK(r.min_ms <= r.median_ms);
  CHECK(r.median_ms <= r.p99_ms);
  CHECK(r.min_ms >= 0.0);
  CHECK_THROWS_AS(bench_reconstruct(rm, Eigen::VectorXd::Ones(20), 0), InvalidArgument);
}

TEST_CASE("evaluate clips and recognizes exact recovery") {
  Image ref(4, 4, 0.5);
  ref(0, 0) = 1.0;
  Image rec = ref;
  rec(1, 1) += 1e-12;
  const auto exact = evaluate(ref, rec);
  CHECK(exact.exact);
  CHECK(exact.quality.psnr_db == std::numeric_limits<double>::infinity());

  Image over = ref;
  over(0, 0) = 1.4;  // clipped back to 1 for PSNR but not exact
  const auto e = evaluate(ref, over);
  CHECK_FALSE(e.exact);
  CHECK(e.quality.psnr_db == std::numeric_limits<double>::infinity());
  CHECK(e.relative_error > 0.1);

  Image off = ref;
  off(2, 2) = 0.6;
  CHECK(evaluate(ref, off).quality.psnr_db == doctest::Approx(psnr(ref, off).psnr_db));
}
