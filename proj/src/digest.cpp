#include "fdri/digest.hpp"

#include <openssl/evp.h>

#include <array>
#include <stdexcept>

namespace fdri {

struct Digest::State {
  EVP_MD_CTX* ctx = nullptr;
  ~State() {
    if (ctx) EVP_MD_CTX_free(ctx);
  }
};

Digest::Digest() : state_(std::make_unique<State>()) {
  state_->ctx = EVP_MD_CTX_new();
  if (!state_->ctx || EVP_DigestInit_ex(state_->ctx, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 initialization failed");
}

Digest::~Digest() = default;

Digest& Digest::update(std::span<const std::byte> bytes) {
  if (!bytes.empty()) EVP_DigestUpdate(state_->ctx, bytes.data(), bytes.size());
  return *this;
}

Digest& Digest::update(std::string_view text) { return update(std::as_bytes(std::span(text.data(), text.size()))); }

std::string Digest::hex() {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(state_->ctx, md.data(), &len);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[md[i] >> 4]);
    out.push_back(kHex[md[i] & 0xf]);
  }
  EVP_DigestInit_ex(state_->ctx, EVP_sha256(), nullptr);
  return out;
}

std::string sha256_hex(std::span<const std::byte> bytes) { return Digest().update(bytes).hex(); }

}  // namespace fdri
