#pragma once

#include <cstddef>
#include <string>

#include <Eigen/Core>

#include "fdri/image.hpp"
#include "fdri/reconstruction.hpp"
#include "fdri/sampling.hpp"

namespace fdri::metrics {

struct QualityReport {
  double psnr_db;  // +infinity when mse == 0
  double mse;
  double peak;
};

// PSNR = 10 log10(peak^2 / mse). Images are compared as given; clip first
// if the evaluation convention calls for it.
QualityReport psnr(const Image& reference, const Image& test, double peak = 1.0);

struct Evaluation {
  QualityReport quality;
  double relative_error;  // ||x - ref|| / ||ref||, before clipping
  bool exact;
};

// Evaluation convention: the reconstruction is clipped to [0,1] before PSNR,
// and a relative error within exact_tolerance counts as exact recovery
// (PSNR +infinity).
Evaluation evaluate(const Image& reference, const Image& reconstruction, double exact_tolerance = 1e-8);

// Fourier-magnitude aggregate sum_i |m-hat_i| / ||m-hat_i|| over the set,
// with DC moved to pixel (width/2, height/2).
Image mean_spectrum(const sampling::PatternSet& set);

// Share of a centered spectrum map's total mass at radial frequency above
// `cutoff` radians/pixel.
double spectrum_fraction_above(const Image& centered, double cutoff);

struct BenchReport {
  std::size_t iterations = 0;
  double median_ms = 0.0;
  double mean_ms = 0.0;
  double p99_ms = 0.0;
  double min_ms = 0.0;
  recon::Precision precision = recon::Precision::kF64;
  Eigen::Index k = 0;
  Eigen::Index n = 0;
};

// Wall-clock statistics of reconstruct(P, y); `warmup` runs are discarded.
BenchReport bench_reconstruct(const recon::ReconstructionMatrix& p, const Eigen::Ref<const Eigen::VectorXd>& y,
                              std::size_t iterations, std::size_t warmup = 3);

}  // namespace fdri::metrics
