#include "fdri/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "fdri/digest.hpp"
#include "fdri/errors.hpp"

namespace fdri::io {

static_assert(std::endian::native == std::endian::little, "container I/O assumes a little-endian host");

// ---------------------------------------------------------------------------
// PGM
// ---------------------------------------------------------------------------

namespace {

std::string next_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

int parse_positive(const std::string& tok, const fs::path& path) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used != tok.size() || v < 1) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw IoError(path.string() + ": malformed PGM header field '" + tok + "'");
  }
}

}  // namespace

Image read_pgm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string magic = next_token(in);
  if (magic != "P5" && magic != "P2") throw IoError(path.string() + ": not a PGM file (magic '" + magic + "')");
  const int w = parse_positive(next_token(in), path);
  const int h = parse_positive(next_token(in), path);
  const int maxval = parse_positive(next_token(in), path);
  if (maxval > 65535) throw IoError(path.string() + ": maxval above 65535");
  const std::size_t n = static_cast<std::size_t>(w) * h;
  std::vector<double> px(n);
  if (magic == "P5") {
    const std::size_t bpp = maxval > 255 ? 2 : 1;
    std::vector<unsigned char> raw(n * bpp);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size())) throw IoError(path.string() + ": truncated PGM");
    for (std::size_t i = 0; i < n; ++i) {
      const unsigned v = bpp == 2 ? (unsigned{raw[2 * i]} << 8) | raw[2 * i + 1] : raw[i];
      px[i] = static_cast<double>(v) / maxval;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const std::string tok = next_token(in);
      if (tok.empty()) throw IoError(path.string() + ": truncated PGM");
      px[i] = std::stod(tok) / maxval;
    }
  }
  return Image(w, h, std::move(px));
}

void write_pgm(const fs::path& path, const Image& img, int bit_depth, double lo, double hi) {
  if (bit_depth != 8 && bit_depth != 16) throw InvalidArgument("PGM bit depth must be 8 or 16");
  if (!(hi > lo)) throw InvalidArgument("PGM range must be non-empty");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  const int maxval = bit_depth == 8 ? 255 : 65535;
  out << "P5\n" << img.width() << ' ' << img.height() << '\n' << maxval << '\n';
  std::vector<unsigned char> raw;
  raw.reserve(img.size() * (bit_depth / 8));
  for (double p : img.pixels()) {
    const double t = std::clamp((p - lo) / (hi - lo), 0.0, 1.0);
    const auto v = static_cast<unsigned>(std::lround(t * maxval));
    if (bit_depth == 16) raw.push_back(static_cast<unsigned char>(v >> 8));
    raw.push_back(static_cast<unsigned char>(v & 0xff));
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<fs::path> list_images(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError("not a readable directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".pgm" || ext == ".pnm") out.push_back(entry.path());
  }
  if (ec) throw IoError("cannot list " + dir.string() + ": " + ec.message());
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Image> read_image_dir(const fs::path& dir) {
  std::vector<Image> out;
  for (const auto& p : list_images(dir)) out.push_back(read_pgm(p));
  return out;
}

// ---------------------------------------------------------------------------
// Container
// ---------------------------------------------------------------------------

fs::path sidecar_path(const fs::path& path) { return fs::path(path.string() + ".json"); }

namespace {

constexpr std::array<char, 4> kMagic{'F', 'D', 'R', 'I'};

std::size_t dtype_size(DType t) { return t == DType::kF32 ? 4 : 8; }

class ContainerWriter {
 public:
  ContainerWriter(const fs::path& path, DType dtype, std::uint64_t rows, std::uint64_t cols)
      : path_(path), out_(path, std::ios::binary), expected_(rows * cols * dtype_size(dtype)) {
    if (!out_) throw IoError("cannot write " + path.string());
    std::array<std::byte, kHeaderBytes> header{};
    std::memcpy(header.data(), kMagic.data(), 4);
    const std::uint32_t version = kContainerVersion;
    const auto dt = static_cast<std::uint32_t>(dtype);
    std::memcpy(header.data() + 4, &version, 4);
    std::memcpy(header.data() + 8, &dt, 4);
    std::memcpy(header.data() + 16, &rows, 8);
    std::memcpy(header.data() + 24, &cols, 8);
    out_.write(reinterpret_cast<const char*>(header.data()), header.size());
  }

  void write(std::span<const std::byte> bytes) {
    out_.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    digest_.update(bytes);
    written_ += bytes.size();
  }

  // Flushes the payload and writes the sidecar with the payload digest.
  void finish(json meta) {
    if (written_ != expected_) throw ConsistencyError("container payload size mismatch");
    out_.close();
    if (!out_) throw IoError("failed writing " + path_.string());
    meta["format"] = "FDRI";
    meta["version"] = kContainerVersion;
    meta["payload_sha256"] = digest_.hex();
    std::ofstream side(sidecar_path(path_));
    if (!side) throw IoError("cannot write " + sidecar_path(path_).string());
    side << meta.dump(2) << '\n';
    if (!side) throw IoError("failed writing " + sidecar_path(path_).string());
  }

 private:
  fs::path path_;
  std::ofstream out_;
  Digest digest_;
  std::size_t expected_;
  std::size_t written_ = 0;
};

class ContainerReader {
 public:
  explicit ContainerReader(const fs::path& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw IoError("cannot open " + path.string());
    std::array<std::byte, kHeaderBytes> header{};
    in_.read(reinterpret_cast<char*>(header.data()), header.size());
    if (in_.gcount() != static_cast<std::streamsize>(header.size()))
      throw IoError(path.string() + ": truncated container header");
    if (std::memcmp(header.data(), kMagic.data(), 4) != 0) throw IoError(path.string() + ": bad magic");
    std::uint32_t version = 0, dt = 0;
    std::memcpy(&version, header.data() + 4, 4);
    std::memcpy(&dt, header.data() + 8, 4);
    std::memcpy(&header_.rows, header.data() + 16, 8);
    std::memcpy(&header_.cols, header.data() + 24, 8);
    if (version != kContainerVersion) throw IoError(path.string() + ": unsupported version " + std::to_string(version));
    if (dt != 1 && dt != 2) throw IoError(path.string() + ": unknown dtype " + std::to_string(dt));
    header_.dtype = static_cast<DType>(dt);
    remaining_ = header_.rows * header_.cols * dtype_size(header_.dtype);
    meta_ = read_sidecar(path);
  }

  const ContainerHeader& header() const { return header_; }
  const json& meta() const { return meta_; }

  void read(std::span<std::byte> bytes) {
    if (bytes.size() > remaining_) throw IoError(path_.string() + ": read past payload");
    in_.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (in_.gcount() != static_cast<std::streamsize>(bytes.size())) throw IoError(path_.string() + ": truncated payload");
    digest_.update(std::span<const std::byte>(bytes.data(), bytes.size()));
    remaining_ -= bytes.size();
  }

  // Confirms the whole payload was consumed and matches the sidecar digest.
  void finish() {
    if (remaining_ != 0) throw IoError(path_.string() + ": payload not fully read");
    if (in_.peek() != EOF) throw IoError(path_.string() + ": trailing bytes after payload");
    const auto expected = meta_.value("payload_sha256", std::string{});
    if (digest_.hex() != expected)
      throw ProvenanceError(path_.string() + ": payload digest does not match its sidecar");
  }

 private:
  fs::path path_;
  std::ifstream in_;
  ContainerHeader header_{};
  json meta_;
  Digest digest_;
  std::size_t remaining_ = 0;
};

template <typename T>
std::span<const std::byte> bytes_of(const T* data, std::size_t count) {
  return std::as_bytes(std::span<const T>(data, count));
}

template <typename T>
std::span<std::byte> writable_bytes_of(T* data, std::size_t count) {
  return std::as_writable_bytes(std::span<T>(data, count));
}

double json_number(const json& meta, const char* key) {
  if (!meta.contains(key) || meta[key].is_null()) return std::numeric_limits<double>::quiet_NaN();
  return meta[key].get<double>();
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

ContainerHeader read_header(const fs::path& path) { return ContainerReader(path).header(); }

json read_sidecar(const fs::path& path) {
  std::ifstream in(sidecar_path(path));
  if (!in) throw IoError("missing metadata sidecar " + sidecar_path(path).string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError(sidecar_path(path).string() + ": " + e.what());
  }
}

// --- measurement matrix -----------------------------------------------------

void save_measurement_matrix(const fs::path& path, const sampling::MeasurementMatrix& m) {
  ContainerWriter w(path, DType::kF64, static_cast<std::uint64_t>(m.k()), static_cast<std::uint64_t>(m.n()));
  w.write(bytes_of(m.entries().data(), static_cast<std::size_t>(m.entries().size())));
  const auto& prov = m.provenance();
  w.finish({{"kind", "measurement-matrix"},
            {"protocol", sampling::to_string(prov.protocol)},
            {"binarized", prov.binarized},
            {"include_white", prov.include_white},
            {"selection_meta", prov.selection_meta},
            {"seed", prov.seed},
            {"width", m.width()},
            {"height", m.height()},
            {"measurement_digest", m.digest()}});
}

sampling::MeasurementMatrix load_measurement_matrix(const fs::path& path) {
  ContainerReader r(path);
  const auto& meta = r.meta();
  if (meta.value("kind", "") != "measurement-matrix") throw IoError(path.string() + ": not a measurement matrix");
  if (r.header().dtype != DType::kF64) throw IoError(path.string() + ": measurement matrices are stored as f64");
  sampling::RowMatrix entries(static_cast<Eigen::Index>(r.header().rows), static_cast<Eigen::Index>(r.header().cols));
  r.read(writable_bytes_of(entries.data(), static_cast<std::size_t>(entries.size())));
  r.finish();
  sampling::MatrixProvenance prov;
  prov.protocol = sampling::parse_protocol(meta.at("protocol").get<std::string>());
  prov.binarized = meta.value("binarized", false);
  prov.include_white = meta.value("include_white", false);
  prov.selection_meta = meta.value("selection_meta", "");
  prov.seed = meta.value("seed", std::uint64_t{0});
  sampling::MeasurementMatrix m(std::move(entries), meta.at("width").get<int>(), meta.at("height").get<int>(),
                                std::move(prov));
  if (meta.value("measurement_digest", "") != m.digest())
    throw ProvenanceError(path.string() + ": measurement digest does not match its entries");
  return m;
}

// --- reconstruction matrix ---------------------------------------------------

void save_reconstruction_matrix(const fs::path& path, const recon::ReconstructionMatrix& p,
                                std::optional<recon::Precision> as, const json& extra) {
  const auto precision = as.value_or(p.precision());
  const auto dtype = precision == recon::Precision::kF32 ? DType::kF32 : DType::kF64;
  ContainerWriter w(path, dtype, static_cast<std::uint64_t>(p.n()), static_cast<std::uint64_t>(p.k()));

  // P is column-major in memory; the payload is row-major, so transpose in
  // row blocks.
  constexpr Eigen::Index kBlock = 256;
  auto emit = [&](const auto& src) {
    for (Eigen::Index r = 0; r < p.n(); r += kBlock) {
      const Eigen::Index rows = std::min(kBlock, p.n() - r);
      if (precision == recon::Precision::kF32) {
        Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> block =
            src.middleRows(r, rows).template cast<float>();
        w.write(bytes_of(block.data(), static_cast<std::size_t>(block.size())));
      } else {
        Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> block =
            src.middleRows(r, rows).template cast<double>();
        w.write(bytes_of(block.data(), static_cast<std::size_t>(block.size())));
      }
    }
  };
  if (p.precision() == recon::Precision::kF64)
    emit(p.f64());
  else
    emit(p.f32());

  json meta = extra;
  meta["kind"] = "reconstruction-matrix";
  meta["method"] = recon::to_string(p.method());
  meta["precision"] = recon::to_string(precision);
  meta["mu"] = number_or_null(p.provenance().mu);
  meta["eps"] = number_or_null(p.provenance().eps);
  meta["width"] = p.width();
  meta["height"] = p.height();
  meta["measurement_digest"] = p.provenance().measurement_digest;
  meta["verify_tolerance"] = precision == recon::Precision::kF64 ? 1e-8 : 1e-3;
  w.finish(std::move(meta));
}

recon::ReconstructionMatrix load_reconstruction_matrix(const fs::path& path, const sampling::MeasurementMatrix* m) {
  ContainerReader r(path);
  const auto& meta = r.meta();
  if (meta.value("kind", "") != "reconstruction-matrix")
    throw IoError(path.string() + ": not a reconstruction matrix");
  const auto n = static_cast<Eigen::Index>(r.header().rows);
  const auto k = static_cast<Eigen::Index>(r.header().cols);
  recon::ReconProvenance prov{meta.value("measurement_digest", ""), json_number(meta, "mu"), json_number(meta, "eps")};
  if (m && prov.measurement_digest != m->digest())
    throw ProvenanceError(path.string() + ": reconstruction matrix was computed for a different measurement matrix");
  const auto method = recon::parse_method(meta.at("method").get<std::string>());
  const int width = meta.at("width").get<int>();
  const int height = meta.at("height").get<int>();

  constexpr Eigen::Index kBlock = 256;
  auto fill = [&](auto& dst) {
    using Scalar = typename std::decay_t<decltype(dst)>::Scalar;
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> block;
    for (Eigen::Index row = 0; row < n; row += kBlock) {
      const Eigen::Index rows = std::min(kBlock, n - row);
      block.resize(rows, k);
      r.read(writable_bytes_of(block.data(), static_cast<std::size_t>(block.size())));
      dst.middleRows(row, rows) = block;
    }
  };
  if (r.header().dtype == DType::kF32) {
    Eigen::MatrixXf p(n, k);
    fill(p);
    r.finish();
    return recon::ReconstructionMatrix(std::move(p), width, height, method, std::move(prov));
  }
  Eigen::MatrixXd p(n, k);
  fill(p);
  r.finish();
  return recon::ReconstructionMatrix(std::move(p), width, height, method, std::move(prov));
}

// --- measurement vector ------------------------------------------------------

void save_measurement_vector(const fs::path& path, const sim::MeasurementVector& y) {
  ContainerWriter w(path, DType::kF64, static_cast<std::uint64_t>(y.values.size()), 1);
  w.write(bytes_of(y.values.data(), static_cast<std::size_t>(y.values.size())));
  w.finish({{"kind", "measurement-vector"},
            {"noise_sigma", y.noise_sigma},
            {"seed", y.seed},
            {"measurement_digest", y.source_digest}});
}

sim::MeasurementVector load_measurement_vector(const fs::path& path) {
  ContainerReader r(path);
  const auto& meta = r.meta();
  if (meta.value("kind", "") != "measurement-vector") throw IoError(path.string() + ": not a measurement vector");
  if (r.header().dtype != DType::kF64 || r.header().cols != 1)
    throw IoError(path.string() + ": measurement vectors are f64 columns");
  sim::MeasurementVector y;
  y.values.resize(static_cast<Eigen::Index>(r.header().rows));
  r.read(writable_bytes_of(y.values.data(), static_cast<std::size_t>(y.values.size())));
  r.finish();
  y.noise_sigma = meta.value("noise_sigma", 0.0);
  y.seed = meta.value("seed", std::uint64_t{0});
  y.source_digest = meta.value("measurement_digest", "");
  return y;
}

}  // namespace fdri::io
