#include "fdri/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>
#include <utility>

#include "fdri/errors.hpp"

namespace fdri::fft {

static_assert(sizeof(cplx) == sizeof(fftw_complex));

Buffer::Buffer(std::size_t n) : size_(n) {
  data_ = reinterpret_cast<cplx*>(fftw_malloc(sizeof(fftw_complex) * n));
  if (!data_) throw std::bad_alloc();
}

Buffer::~Buffer() {
  if (data_) fftw_free(data_);
}

Buffer::Buffer(Buffer&& o) noexcept : data_(std::exchange(o.data_, nullptr)), size_(std::exchange(o.size_, 0)) {}

Buffer& Buffer::operator=(Buffer&& o) noexcept {
  if (this != &o) {
    if (data_) fftw_free(data_);
    data_ = std::exchange(o.data_, nullptr);
    size_ = std::exchange(o.size_, 0);
  }
  return *this;
}

namespace {

// The FFTW planner is not thread-safe; fftw_execute_dft on an existing plan is.
class PlanCache {
 public:
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  fftw_plan get(int width, int height, int sign) {
    std::lock_guard lock(mutex_);
    const auto key = std::make_tuple(width, height, sign);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    Buffer scratch(static_cast<std::size_t>(width) * height);
    auto* p = reinterpret_cast<fftw_complex*>(scratch.data());
    fftw_plan plan = fftw_plan_dft_2d(height, width, p, p, sign, FFTW_ESTIMATE);
    if (!plan) throw ConsistencyError("FFTW failed to create a plan");
    plans_.emplace(key, plan);
    return plan;
  }

 private:
  std::mutex mutex_;
  std::map<std::tuple<int, int, int>, fftw_plan> plans_;
};

PlanCache& cache() {
  static PlanCache instance;
  return instance;
}

void run(Buffer& buf, int width, int height, int sign) {
  if (buf.size() != static_cast<std::size_t>(width) * height)
    throw InvalidArgument("FFT buffer size does not match grid");
  auto* p = reinterpret_cast<fftw_complex*>(buf.data());
  fftw_execute_dft(cache().get(width, height, sign), p, p);
}

}  // namespace

void forward(Buffer& buf, int width, int height) { run(buf, width, height, FFTW_FORWARD); }
void inverse(Buffer& buf, int width, int height) { run(buf, width, height, FFTW_BACKWARD); }

}  // namespace fdri::fft
