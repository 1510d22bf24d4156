#pragma once

#include <complex>
#include <memory>
#include <span>

namespace fdri::fft {

using cplx = std::complex<double>;

// Aligned complex scratch buffer owned per call site.
class Buffer {
 public:
  explicit Buffer(std::size_t n);
  ~Buffer();
  Buffer(Buffer&&) noexcept;
  Buffer& operator=(Buffer&&) noexcept;
  Buffer(const Buffer&) = delete;
  Buffer& operator=(const Buffer&) = delete;

  cplx* data() noexcept { return data_; }
  const cplx* data() const noexcept { return data_; }
  std::size_t size() const noexcept { return size_; }
  std::span<cplx> span() noexcept { return {data_, size_}; }
  std::span<const cplx> span() const noexcept { return {data_, size_}; }

 private:
  cplx* data_ = nullptr;
  std::size_t size_ = 0;
};

// In-place unnormalized 2D DFT over a row-major (height x width) grid.
// forward: X[k] = sum x[j] exp(-2 pi i jk/N); inverse uses +i and no scaling.
// Plans are cached per shape; execution is thread-safe.
void forward(Buffer& buf, int width, int height);
void inverse(Buffer& buf, int width, int height);

}  // namespace fdri::fft
