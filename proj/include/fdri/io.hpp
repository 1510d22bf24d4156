#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fdri/image.hpp"
#include "fdri/reconstruction.hpp"
#include "fdri/sampling.hpp"
#include "fdri/simulator.hpp"

namespace fdri::io {

namespace fs = std::filesystem;
using json = nlohmann::json;

// ---------------------------------------------------------------------------
// PGM
// ---------------------------------------------------------------------------

// Reads binary (P5) or ASCII (P2) PGM, 8 or 16 bit, scaled to [0,1].
Image read_pgm(const fs::path& path);

// Writes P5. Pixels are clipped to [lo, hi] and mapped to 0..maxval.
void write_pgm(const fs::path& path, const Image& img, int bit_depth = 8, double lo = 0.0, double hi = 1.0);

// Sorted list of *.pgm / *.pnm files in a directory.
std::vector<fs::path> list_images(const fs::path& dir);
std::vector<Image> read_image_dir(const fs::path& dir);

// ---------------------------------------------------------------------------
// Matrix container
//
//   offset  size  field
//        0     4  magic "FDRI"
//        4     4  version (u32 = 1)
//        8     4  dtype (u32: 1 = f32, 2 = f64)
//       12     4  reserved (0)
//       16     8  rows (u64)
//       24     8  cols (u64)
//       32     -  payload, row-major, little-endian
//
// Metadata lives in a JSON sidecar at "<path>.json"; its "payload_sha256"
// must match the payload bytes on load.
// ---------------------------------------------------------------------------

enum class DType : std::uint32_t { kF32 = 1, kF64 = 2 };

inline constexpr std::uint32_t kContainerVersion = 1;
inline constexpr std::size_t kHeaderBytes = 32;

struct ContainerHeader {
  DType dtype;
  std::uint64_t rows;
  std::uint64_t cols;
};

fs::path sidecar_path(const fs::path& path);
ContainerHeader read_header(const fs::path& path);
json read_sidecar(const fs::path& path);

void save_measurement_matrix(const fs::path& path, const sampling::MeasurementMatrix& m);
sampling::MeasurementMatrix load_measurement_matrix(const fs::path& path);

// Stored in P's own precision unless `as` overrides it.
void save_reconstruction_matrix(const fs::path& path, const recon::ReconstructionMatrix& p,
                                std::optional<recon::Precision> as = std::nullopt,
                                const json& extra = json::object());
// When `m` is given, the stored measurement digest must equal m->digest().
recon::ReconstructionMatrix load_reconstruction_matrix(const fs::path& path,
                                                       const sampling::MeasurementMatrix* m = nullptr);

void save_measurement_vector(const fs::path& path, const sim::MeasurementVector& y);
sim::MeasurementVector load_measurement_vector(const fs::path& path);

}  // namespace fdri::io
