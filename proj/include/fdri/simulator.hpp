#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "fdri/image.hpp"
#include "fdri/reconstruction.hpp"
#include "fdri/sampling.hpp"

namespace fdri::sim {

struct MeasurementVector {
  Eigen::VectorXd values;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  std::string source_digest;  // digest of the generating M
};

// y = M x + noise. The noise is iid Gaussian with standard deviation
// noise_sigma * ||M x|| / sqrt(k), i.e. noise_sigma is relative to the RMS
// of the clean signal. noise_sigma = 0 gives the exact product.
MeasurementVector measure(const sampling::MeasurementMatrix& m, const Image& scene, double noise_sigma,
                          std::uint64_t seed);

// Frames fed to the stream. next() returns nullopt when exhausted.
class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual std::optional<Image> next() = 0;
};

// Replays a fixed list of frames.
class ListSource : public FrameSource {
 public:
  explicit ListSource(std::vector<Image> frames) : frames_(std::move(frames)) {}
  std::optional<Image> next() override;

 private:
  std::vector<Image> frames_;
  std::size_t pos_ = 0;
};

// Repeats one scene `count` times.
class StaticSource : public FrameSource {
 public:
  StaticSource(Image scene, std::size_t count) : scene_(std::move(scene)), count_(count) {}
  std::optional<Image> next() override;

 private:
  Image scene_;
  std::size_t count_;
  std::size_t emitted_ = 0;
};

// Bright disc on a smooth gradient, moving along a circular path.
class MovingTargetSource : public FrameSource {
 public:
  MovingTargetSource(int width, int height, std::size_t count) : width_(width), height_(height), count_(count) {}
  std::optional<Image> next() override;
  static Image frame(int width, int height, std::size_t index);

 private:
  int width_;
  int height_;
  std::size_t count_;
  std::size_t emitted_ = 0;
};

enum class ClockMode { kSimulated, kWall };

struct StreamConfig {
  double dmd_rate = 22000.0;  // patterns per second
  ClockMode clock = ClockMode::kSimulated;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  std::size_t queue_capacity = 4;
  std::size_t consumers = 1;
  bool keep_frames = true;
  bool score_against_source = true;

  // One frame's worth of exposures: k / dmd_rate seconds.
  double frame_period(Eigen::Index k) const;
};

struct FrameRecord {
  std::size_t frame_index = 0;
  double latency_ms = 0.0;
  std::optional<double> psnr_vs_source;
};

struct StreamReport {
  std::vector<FrameRecord> frames;  // in frame order
  Eigen::Index k = 0;
  double frame_period_s = 0.0;
  double nominal_rate_hz = 0.0;   // dmd_rate / k
  double achieved_rate_hz = 0.0;  // from delivery times
  std::size_t deadline_misses = 0;
  ClockMode clock = ClockMode::kSimulated;
};

struct StreamResult {
  StreamReport report;
  std::vector<Image> frames;  // reconstructions, in frame order (if kept)
};

// Called once per reconstructed frame, in frame order.
using FrameSink = std::function<void(std::size_t index, const Image& frame)>;

// Drives the acquisition/reconstruction pipeline.
//
// Every source frame is first turned into its measurement vector (the
// simulated detector output). A producer thread then releases one vector per
// frame period, on the simulated or the wall clock, into a bounded queue;
// consumer threads reconstruct, and frames are delivered strictly in order.
// Latency is the time from release to reconstructed frame; exceeding the
// frame period counts as a deadline miss and is not fatal.
//
// Simulated clock: releases happen back to back, delivery times are the
// virtual release times, so the achieved rate is the acquisition rate.
StreamResult run_stream(const StreamConfig& config, const recon::ReconstructionMatrix& p,
                        const sampling::MeasurementMatrix& m, FrameSource& source, const FrameSink& sink = {});

}  // namespace fdri::sim
