#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>

#include <Eigen/Core>

namespace fdri {

// Incremental SHA-256, hex-encoded output.
class Digest {
 public:
  Digest();
  ~Digest();
  Digest(const Digest&) = delete;
  Digest& operator=(const Digest&) = delete;

  Digest& update(std::span<const std::byte> bytes);
  Digest& update(std::string_view text);
  template <typename T>
  Digest& update_pod(const T& value) {
    return update(std::as_bytes(std::span<const T, 1>(&value, 1)));
  }
  template <typename Derived>
  Digest& update_matrix(const Eigen::DenseBase<Derived>& m) {
    // Hash in row-major order regardless of storage.
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) update_pod(m(r, c));
    return *this;
  }
  std::string hex();

 private:
  struct State;
  std::unique_ptr<State> state_;
};

std::string sha256_hex(std::span<const std::byte> bytes);

}  // namespace fdri
