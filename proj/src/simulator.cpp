#include "fdri/simulator.hpp"

#include <chrono>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>
#include <numbers>
#include <random>
#include <thread>

#include "fdri/errors.hpp"
#include "fdri/metrics.hpp"

namespace fdri::sim {

MeasurementVector measure(const sampling::MeasurementMatrix& m, const Image& scene, double noise_sigma,
                          std::uint64_t seed) {
  if (scene.width() != m.width() || scene.height() != m.height())
    throw InvalidArgument("scene " + std::to_string(scene.width()) + "x" + std::to_string(scene.height()) +
                          " does not match measurement resolution " + std::to_string(m.width()) + "x" +
                          std::to_string(m.height()));
  if (!(noise_sigma >= 0.0)) throw InvalidArgument("noise sigma must be non-negative");
  MeasurementVector y;
  y.values.noalias() = m.entries() * scene.vec();
  y.noise_sigma = noise_sigma;
  y.seed = seed;
  y.source_digest = m.digest();
  if (noise_sigma > 0.0) {
    const double std_dev = noise_sigma * y.values.norm() / std::sqrt(static_cast<double>(m.k()));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, std_dev);
    for (Eigen::Index i = 0; i < y.values.size(); ++i) y.values(i) += normal(rng);
  }
  return y;
}

std::optional<Image> ListSource::next() {
  if (pos_ >= frames_.size()) return std::nullopt;
  return frames_[pos_++];
}

std::optional<Image> StaticSource::next() {
  if (emitted_ >= count_) return std::nullopt;
  ++emitted_;
  return scene_;
}

Image MovingTargetSource::frame(int width, int height, std::size_t index) {
  using std::numbers::pi;
  Image img(width, height);
  const double phase = 2.0 * pi * static_cast<double>(index) / 32.0;
  const double cx = width * (0.5 + 0.25 * std::cos(phase));
  const double cy = height * (0.5 + 0.25 * std::sin(phase));
  const double r = 0.12 * std::min(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double background = 0.2 + 0.3 * (x + y) / static_cast<double>(width + height);
      const double d = std::hypot(x + 0.5 - cx, y + 0.5 - cy);
      img(x, y) = d < r ? 0.9 : background;
    }
  }
  return img;
}

std::optional<Image> MovingTargetSource::next() {
  if (emitted_ >= count_) return std::nullopt;
  return frame(width_, height_, emitted_++);
}

double StreamConfig::frame_period(Eigen::Index k) const {
  if (!(dmd_rate > 0.0)) throw InvalidArgument("DMD rate must be positive");
  return static_cast<double>(k) / dmd_rate;
}

namespace {

template <typename T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(std::max<std::size_t>(capacity, 1)) {}

  void push(T item) {
    std::unique_lock lock(mutex_);
    not_full_.wait(lock, [&] { return items_.size() < capacity_; });
    items_.push_back(std::move(item));
    not_empty_.notify_one();
  }

  // Returns nullopt once closed and drained.
  std::optional<T> pop() {
    std::unique_lock lock(mutex_);
    not_empty_.wait(lock, [&] { return !items_.empty() || closed_; });
    if (items_.empty()) return std::nullopt;
    T item = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return item;
  }

  void close() {
    std::lock_guard lock(mutex_);
    closed_ = true;
    not_empty_.notify_all();
  }

 private:
  std::size_t capacity_;
  std::deque<T> items_;
  bool closed_ = false;
  std::mutex mutex_;
  std::condition_variable not_full_;
  std::condition_variable not_empty_;
};

using clock = std::chrono::steady_clock;

struct Released {
  std::size_t index;
  double release_s;  // seconds since stream start (virtual in simulated mode)
  clock::time_point release_wall;
};

}  // namespace

StreamResult run_stream(const StreamConfig& config, const recon::ReconstructionMatrix& p,
                        const sampling::MeasurementMatrix& m, FrameSource& source, const FrameSink& sink) {
  if (p.k() != m.k() || p.n() != m.n() || p.width() != m.width() || p.height() != m.height())
    throw InvalidArgument("reconstruction matrix and measurement matrix are inconsistent");
  if (!p.provenance().measurement_digest.empty() && p.provenance().measurement_digest != m.digest())
    throw ProvenanceError("reconstruction matrix was not computed for this measurement matrix");
  const double period = config.frame_period(m.k());

  // Detector output for every frame; only the k-vectors (and, for scoring,
  // the scenes) are retained.
  std::vector<Eigen::VectorXd> measurements;
  std::vector<Image> scenes;
  while (auto scene = source.next()) {
    const auto idx = measurements.size();
    measurements.push_back(measure(m, *scene, config.noise_sigma, config.seed + idx).values);
    if (config.score_against_source) scenes.push_back(std::move(*scene));
  }
  const std::size_t count = measurements.size();

  StreamResult result;
  auto& report = result.report;
  report.k = m.k();
  report.frame_period_s = period;
  report.nominal_rate_hz = 1.0 / period;
  report.clock = config.clock;
  report.frames.resize(count);
  if (config.keep_frames) result.frames.resize(count);
  std::vector<double> delivered_s(count, 0.0);

  BoundedQueue<Released> queue(config.queue_capacity);
  std::mutex deliver_mutex;
  std::map<std::size_t, Image> pending;
  std::size_t next_delivery = 0;
  const auto start = clock::now();

  auto producer = std::thread([&] {
    for (std::size_t i = 0; i < count; ++i) {
      const double release_s = (static_cast<double>(i) + 1.0) * period;
      if (config.clock == ClockMode::kWall) {
        std::this_thread::sleep_until(start + std::chrono::duration_cast<clock::duration>(
                                                  std::chrono::duration<double>(release_s)));
      }
      queue.push({i, release_s, clock::now()});
    }
    queue.close();
  });

  auto consumer = [&] {
    Eigen::VectorXd out(p.n());
    while (auto item = queue.pop()) {
      const auto t0 = config.clock == ClockMode::kWall ? item->release_wall : clock::now();
      recon::reconstruct_into(p, measurements[item->index], out);
      const auto t1 = clock::now();
      Image frame = image_from_vector(out, p.width(), p.height());

      auto& rec = report.frames[item->index];
      rec.frame_index = item->index;
      rec.latency_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
      if (config.score_against_source)
        rec.psnr_vs_source = metrics::evaluate(scenes[item->index], frame).quality.psnr_db;
      delivered_s[item->index] = config.clock == ClockMode::kWall
                                     ? std::chrono::duration<double>(t1 - start).count()
                                     : item->release_s;

      std::lock_guard lock(deliver_mutex);
      pending.emplace(item->index, std::move(frame));
      while (!pending.empty() && pending.begin()->first == next_delivery) {
        auto node = pending.extract(pending.begin());
        if (sink) sink(next_delivery, node.mapped());
        if (config.keep_frames) result.frames[next_delivery] = std::move(node.mapped());
        ++next_delivery;
      }
    }
  };

  std::vector<std::thread> consumers;
  for (std::size_t c = 0; c < std::max<std::size_t>(config.consumers, 1); ++c) consumers.emplace_back(consumer);
  producer.join();
  for (auto& t : consumers) t.join();

  for (const auto& rec : report.frames)
    if (rec.latency_ms > period * 1e3) ++report.deadline_misses;
  if (count >= 2) {
    const double span = delivered_s.back() - delivered_s.front();
    report.achieved_rate_hz = span > 0.0 ? static_cast<double>(count - 1) / span : report.nominal_rate_hz;
  } else {
    report.achieved_rate_hz = report.nominal_rate_hz;
  }
  return result;
}

}  // namespace fdri::sim
