// fdri: command-line front end for pattern selection, precomputation,
// simulation and evaluation.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <nlohmann/json.hpp>
#ifdef _OPENMP
#include <omp.h>
#endif

#include "fdri/errors.hpp"
#include "fdri/io.hpp"
#include "fdri/metrics.hpp"
#include "fdri/reconstruction.hpp"
#include "fdri/sampling.hpp"
#include "fdri/simulator.hpp"
#include "fdri/spectral.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace fdri;

namespace {

enum Exit { kOk = 0, kUsage = 1, kIo = 2, kNumerical = 3, kProvenance = 4 };

bool g_json = false;

// JSON numbers cannot hold inf/nan; report them as strings.
json num(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "+infinity" : "-infinity";
  return v;
}

std::string text(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_float()) {
    std::ostringstream os;
    os << std::setprecision(6) << v.get<double>();
    return os.str();
  }
  return v.dump();
}

void emit(const std::string& type, json record) {
  if (g_json) {
    record["type"] = type;
    std::cout << record.dump() << "\n";
    return;
  }
  std::cout << type << ":";
  for (auto it = record.begin(); it != record.end(); ++it) std::cout << " " << it.key() << "=" << text(it.value());
  std::cout << "\n";
}

void set_threads(int threads) {
  if (threads <= 0) {
    if (const char* env = std::getenv("FDRI_THREADS")) threads = std::atoi(env);
  }
  if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
#ifdef _OPENMP
  omp_set_num_threads(threads);
#endif
  Eigen::setNbThreads(threads);
}

int resolve_k(int k, double ratio, int n) {
  if (k > 0) return k;
  if (!(ratio > 0.0 && ratio <= 1.0)) throw InvalidArgument("--ratio must be in (0, 1]");
  const int out = static_cast<int>(std::floor(ratio * n + 1e-9));
  if (out < 1) throw InvalidArgument("--ratio yields no patterns at this resolution");
  return out;
}

Image load_scene(const fs::path& path, int width, int height) {
  Image img = io::read_pgm(path);
  if (img.width() != width || img.height() != height) img = resize_bilinear(img, width, height);
  return img;
}

std::vector<fs::path> scene_paths(const std::vector<std::string>& inputs) {
  std::vector<fs::path> out;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      for (auto& p : io::list_images(in)) out.push_back(p);
    } else {
      out.emplace_back(in);
    }
  }
  if (out.empty()) throw IoError("no input images");
  return out;
}

// Rows of M back as images; the white row, if present, is skipped.
sampling::PatternSet patterns_of(const sampling::MeasurementMatrix& m) {
  sampling::PatternSet set;
  set.protocol = m.provenance().protocol;
  set.width = m.width();
  set.height = m.height();
  set.binarized = m.provenance().binarized;
  set.seed = m.provenance().seed;
  set.selection_meta = m.provenance().selection_meta;
  const Eigen::Index first = m.provenance().include_white ? 1 : 0;
  for (Eigen::Index i = first; i < m.k(); ++i)
    set.patterns.push_back(image_from_vector(m.entries().row(i).transpose(), m.width(), m.height()));
  return set;
}

// ---------------------------------------------------------------------------

struct SelectArgs {
  std::string protocol = "dct";
  int res = 64, width = 0, height = 0, k = 0;
  double ratio = 0.03;
  bool binarize = false, white = false;
  std::string db, out, pgm_dir, pgm_levels = "scaled";
  std::uint64_t seed = 0;
  double sigma_min = 2.0, sigma_max = 0.0;
};

int cmd_select(const SelectArgs& a) {
  const int w = a.width > 0 ? a.width : a.res;
  const int h = a.height > 0 ? a.height : a.res;
  if (w < 1 || h < 1) throw InvalidArgument("resolution must be positive");
  const auto protocol = sampling::parse_protocol(a.protocol);
  const int k = resolve_k(a.k, a.ratio, w * h);
  if (a.pgm_levels != "scaled" && a.pgm_levels != "binary") throw InvalidArgument("--pgm-levels is scaled or binary");
  if (a.pgm_levels == "binary" && !a.binarize) throw InvalidArgument("--pgm-levels binary needs --binarize");

  std::vector<Image> db;
  if (!a.db.empty()) db = io::read_image_dir(a.db);

  sampling::SelectOptions opts;
  opts.seed = a.seed;
  opts.morlet.sigma_min = a.sigma_min;
  opts.morlet.sigma_max = a.sigma_max;
  auto set = sampling::select_patterns(protocol, k, db, w, h, opts);
  if (a.binarize) set = sampling::binarize(set);
  const auto m = sampling::assemble_measurement_matrix(set, a.white);
  io::save_measurement_matrix(a.out, m);

  if (!a.pgm_dir.empty()) {
    fs::create_directories(a.pgm_dir);
    for (std::size_t i = 0; i < set.patterns.size(); ++i) {
      std::ostringstream name;
      name << "pattern_" << std::setw(5) << std::setfill('0') << i << ".pgm";
      const auto& p = set.patterns[i];
      if (a.pgm_levels == "binary") {
        io::write_pgm(fs::path(a.pgm_dir) / name.str(), p, 8, -1.0, 1.0);  // -1 -> 0, +1 -> 255
      } else {
        const auto [lo, hi] = std::minmax_element(p.pixels().begin(), p.pixels().end());
        io::write_pgm(fs::path(a.pgm_dir) / name.str(), p, 8, *lo, *hi > *lo ? *hi : *lo + 1.0);
      }
    }
  }

  emit("select", {{"protocol", std::string(sampling::to_string(protocol))},
                  {"width", w},
                  {"height", h},
                  {"k", m.k()},
                  {"patterns", set.patterns.size()},
                  {"binarized", set.binarized},
                  {"include_white", a.white},
                  {"seed", a.seed},
                  {"database_images", db.size()},
                  {"selection", set.selection_meta},
                  {"measurement_digest", m.digest()},
                  {"out", a.out}});
  return kOk;
}

struct PrecomputeArgs {
  std::string patterns, out, method = "fdri-direct", precision = "f64";
  double mu = spectral::kDefaultMu, eps = spectral::kDefaultEps;
  double block_mb = 256.0;
};

json report_json(const recon::PrecomputeReport& r) {
  json stages = json::object();
  for (const auto& [name, s] : r.stage_seconds) stages[name] = s;
  return {{"solver", r.solver},     {"condition", num(r.condition)}, {"jitter", r.jitter},
          {"rank", r.rank},         {"seconds", r.total_seconds()},  {"stages", stages}};
}

int cmd_precompute(const PrecomputeArgs& a) {
  const auto m = io::load_measurement_matrix(a.patterns);
  const auto method = recon::parse_method(a.method);
  const auto precision = recon::parse_precision(a.precision);
  const auto filter = spectral::build_gamma(spectral::freq_grid(m.width(), m.height()), a.mu, a.eps);
  recon::PrecomputeOptions opts;
  opts.block_bytes = static_cast<std::size_t>(a.block_mb * (1 << 20));
  const auto [p, report] = recon::precompute(method, m, filter, opts);
  io::save_reconstruction_matrix(a.out, p, precision);
  json rec = report_json(report);
  rec["method"] = std::string(recon::to_string(method));
  rec["precision"] = std::string(recon::to_string(precision));
  rec["mu"] = method == recon::Method::kPinv ? json(nullptr) : json(a.mu);
  rec["eps"] = method == recon::Method::kPinv ? json(nullptr) : json(a.eps);
  rec["n"] = p.n();
  rec["k"] = p.k();
  rec["out"] = a.out;
  emit("precompute", rec);
  return kOk;
}

int cmd_verify(const std::string& patterns, const std::string& matrix, double tol) {
  const auto m = io::load_measurement_matrix(patterns);
  const auto p = io::load_reconstruction_matrix(matrix, &m);
  if (!(tol > 0.0)) tol = io::read_sidecar(matrix).value("verify_tolerance", 1e-8);
  const double err = recon::right_inverse_error(m, p);
  const bool ok = err < tol;
  emit("verify", {{"right_inverse_error", err}, {"tolerance", tol}, {"pass", ok}, {"k", p.k()}, {"n", p.n()}});
  return ok ? kOk : kNumerical;
}

int cmd_compare(const std::string& a, const std::string& b, double tol) {
  const auto pa = io::load_reconstruction_matrix(a);
  const auto pb = io::load_reconstruction_matrix(b);
  if (pa.provenance().measurement_digest != pb.provenance().measurement_digest)
    throw ProvenanceError("matrices were computed for different measurement matrices");
  const double d = recon::relative_distance(pa, pb);
  const bool ok = d < tol;
  emit("compare", {{"a", std::string(recon::to_string(pa.method()))},
                   {"b", std::string(recon::to_string(pb.method()))},
                   {"relative_distance", d},
                   {"tolerance", tol},
                   {"pass", ok}});
  return ok ? kOk : kNumerical;
}

int cmd_measure(const std::string& patterns, const std::string& image, double sigma, std::uint64_t seed,
                const std::string& out) {
  const auto m = io::load_measurement_matrix(patterns);
  const Image scene = load_scene(image, m.width(), m.height());
  const auto y = sim::measure(m, scene, sigma, seed);
  io::save_measurement_vector(out, y);
  emit("measure", {{"k", y.values.size()}, {"sigma", sigma}, {"seed", seed}, {"norm", y.values.norm()}, {"out", out}});
  return kOk;
}

int cmd_reconstruct(const std::string& matrix, const std::string& measurements, const std::string& patterns,
                    const std::string& reference, const std::string& out) {
  std::optional<sampling::MeasurementMatrix> m;
  if (!patterns.empty()) m = io::load_measurement_matrix(patterns);
  const auto p = io::load_reconstruction_matrix(matrix, m ? &*m : nullptr);
  const auto y = io::load_measurement_vector(measurements);
  if (!y.source_digest.empty() && y.source_digest != p.provenance().measurement_digest)
    throw ProvenanceError("measurements were taken with a different measurement matrix");
  const Image x = recon::reconstruct(p, y.values);
  if (!out.empty()) io::write_pgm(out, x);
  json rec{{"width", x.width()}, {"height", x.height()}, {"method", std::string(recon::to_string(p.method()))}};
  if (!reference.empty()) {
    const auto e = metrics::evaluate(load_scene(reference, x.width(), x.height()), x);
    rec["psnr_db"] = num(e.quality.psnr_db);
    rec["relative_error"] = e.relative_error;
  }
  if (!out.empty()) rec["out"] = out;
  emit("reconstruct", rec);
  return kOk;
}

struct RunArgs {
  std::string patterns, matrix, clock = "sim", out_dir, precision;
  std::vector<std::string> images;
  std::size_t moving = 0, repeat = 1, consumers = 1, queue = 4;
  double dmd_rate = 22000.0, sigma = 0.0;
  std::uint64_t seed = 0;
  bool frames = false;
};

int cmd_run(const RunArgs& a) {
  const auto m = io::load_measurement_matrix(a.patterns);
  auto p = io::load_reconstruction_matrix(a.matrix, &m);
  if (a.precision == "f32" && p.precision() != recon::Precision::kF32) p = p.to_f32();

  std::unique_ptr<sim::FrameSource> source;
  std::vector<std::string> names;
  if (a.moving > 0) {
    if (!a.images.empty()) throw InvalidArgument("use either --images or --moving");
    source = std::make_unique<sim::MovingTargetSource>(m.width(), m.height(), a.moving);
  } else {
    std::vector<Image> scenes;
    for (const auto& path : scene_paths(a.images)) {
      const Image img = load_scene(path, m.width(), m.height());
      for (std::size_t r = 0; r < a.repeat; ++r) {
        scenes.push_back(img);
        names.push_back(path.stem().string());
      }
    }
    source = std::make_unique<sim::ListSource>(std::move(scenes));
  }

  sim::StreamConfig cfg;
  cfg.dmd_rate = a.dmd_rate;
  if (a.clock == "sim" || a.clock == "simulated") cfg.clock = sim::ClockMode::kSimulated;
  else if (a.clock == "wall") cfg.clock = sim::ClockMode::kWall;
  else throw InvalidArgument("--clock is sim or wall");
  cfg.noise_sigma = a.sigma;
  cfg.seed = a.seed;
  cfg.consumers = a.consumers;
  cfg.queue_capacity = a.queue;
  cfg.keep_frames = false;

  if (!a.out_dir.empty()) fs::create_directories(a.out_dir);
  const auto sink = [&](std::size_t i, const Image& frame) {
    if (a.out_dir.empty()) return;
    std::ostringstream name;
    name << "frame_" << std::setw(5) << std::setfill('0') << i << ".pgm";
    io::write_pgm(fs::path(a.out_dir) / name.str(), frame);
  };
  const auto res = sim::run_stream(cfg, p, m, *source, sink);
  const auto& r = res.report;

  double psnr_sum = 0.0;
  std::size_t scored = 0;
  for (const auto& f : r.frames) {
    if (f.psnr_vs_source && std::isfinite(*f.psnr_vs_source)) {
      psnr_sum += *f.psnr_vs_source;
      ++scored;
    }
    if (!a.frames) continue;
    json rec{{"frame", f.frame_index}, {"latency_ms", f.latency_ms}};
    if (f.frame_index < names.size()) rec["image"] = names[f.frame_index];
    if (f.psnr_vs_source) rec["psnr_db"] = num(*f.psnr_vs_source);
    emit("frame", rec);
  }
  double max_latency = 0.0;
  for (const auto& f : r.frames) max_latency = std::max(max_latency, f.latency_ms);
  emit("run", {{"frames", r.frames.size()},
               {"k", r.k},
               {"clock", cfg.clock == sim::ClockMode::kWall ? "wall" : "sim"},
               {"precision", std::string(recon::to_string(p.precision()))},
               {"frame_period_ms", r.frame_period_s * 1e3},
               {"nominal_rate_hz", r.nominal_rate_hz},
               {"achieved_rate_hz", r.achieved_rate_hz},
               {"deadline_misses", r.deadline_misses},
               {"max_latency_ms", max_latency},
               {"mean_psnr_db", scored ? json(psnr_sum / scored) : json(nullptr)}});
  return kOk;
}

struct EvalArgs {
  std::string patterns;
  std::vector<std::string> matrices, images;
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

int cmd_eval(const EvalArgs& a) {
  const auto m = io::load_measurement_matrix(a.patterns);
  std::vector<recon::ReconstructionMatrix> ps;
  std::vector<std::string> labels;
  for (const auto& path : a.matrices) {
    ps.push_back(io::load_reconstruction_matrix(path, &m));
    std::string label(recon::to_string(ps.back().method()));
    if (std::count(labels.begin(), labels.end(), label)) label = fs::path(path).stem().string();
    labels.push_back(label);
  }
  const auto paths = scene_paths(a.images);
  std::vector<double> sums(ps.size(), 0.0);
  std::vector<std::size_t> finite(ps.size(), 0);

  if (!g_json) {
    std::cout << std::left << std::setw(24) << "image";
    for (const auto& l : labels) std::cout << std::right << std::setw(14) << l;
    std::cout << "\n";
  }
  std::uint64_t scene_seed = a.seed;
  for (const auto& path : paths) {
    const Image scene = load_scene(path, m.width(), m.height());
    const auto y = sim::measure(m, scene, a.sigma, scene_seed++);
    json row{{"image", path.stem().string()}};
    if (!g_json) std::cout << std::left << std::setw(24) << path.stem().string();
    for (std::size_t j = 0; j < ps.size(); ++j) {
      const auto e = metrics::evaluate(scene, recon::reconstruct(ps[j], y.values));
      row["psnr_db"][labels[j]] = num(e.quality.psnr_db);
      if (std::isfinite(e.quality.psnr_db)) {
        sums[j] += e.quality.psnr_db;
        ++finite[j];
      }
      if (!g_json) std::cout << std::right << std::setw(14) << std::fixed << std::setprecision(2) << e.quality.psnr_db;
    }
    if (g_json) emit("eval_image", row);
    else std::cout << "\n";
  }
  json mean = json::object();
  for (std::size_t j = 0; j < ps.size(); ++j) mean[labels[j]] = finite[j] ? json(sums[j] / finite[j]) : json("+infinity");
  if (g_json) {
    emit("eval", {{"images", paths.size()}, {"k", m.k()}, {"sigma", a.sigma}, {"mean_psnr_db", mean}});
  } else {
    std::cout << std::left << std::setw(24) << "mean";
    for (const auto& l : labels) std::cout << std::right << std::setw(14) << text(mean[l]);
    std::cout << "\n";
  }
  return kOk;
}

struct BenchArgs {
  std::string matrix, precision = "f32";
  int res = 256, k = 0;
  double ratio = 0.03, budget_ms = 88.0;
  std::size_t iterations = 50;
  std::uint64_t seed = 0;
};

int cmd_bench(const BenchArgs& a) {
  const auto precision = recon::parse_precision(a.precision);
  std::optional<recon::ReconstructionMatrix> p;
  if (!a.matrix.empty()) {
    p = io::load_reconstruction_matrix(a.matrix);
    if (precision == recon::Precision::kF32 && p->precision() != recon::Precision::kF32) p = p->to_f32();
  } else {
    // Only the shape matters for timing.
    const int n = a.res * a.res;
    const int k = resolve_k(a.k, a.ratio, n);
    std::mt19937_64 rng(a.seed);
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    Eigen::MatrixXf entries(n, k);
    for (Eigen::Index i = 0; i < entries.size(); ++i) entries.data()[i] = u(rng);
    recon::ReconstructionMatrix synth(std::move(entries), a.res, a.res, recon::Method::kFdriDirect, {});
    p = precision == recon::Precision::kF32 ? std::move(synth) : recon::ReconstructionMatrix(synth.as_f64(), a.res, a.res, recon::Method::kFdriDirect, {});
  }
  std::mt19937_64 rng(a.seed + 1);
  std::normal_distribution<double> g;
  Eigen::VectorXd y(p->k());
  for (auto& v : y) v = g(rng);
  const auto r = metrics::bench_reconstruct(*p, y, a.iterations);
  emit("bench", {{"n", r.n},
                 {"k", r.k},
                 {"precision", std::string(recon::to_string(r.precision))},
                 {"iterations", r.iterations},
                 {"median_ms", r.median_ms},
                 {"mean_ms", r.mean_ms},
                 {"p99_ms", r.p99_ms},
                 {"min_ms", r.min_ms},
                 {"budget_ms", a.budget_ms},
                 {"within_budget", r.median_ms < a.budget_ms}});
  return kOk;
}

int cmd_spectrum(const std::string& patterns, double cutoff, const std::string& out) {
  const auto m = io::load_measurement_matrix(patterns);
  const auto set = patterns_of(m);
  const Image spec = metrics::mean_spectrum(set);
  if (!out.empty()) {
    Image logged = spec;
    for (double& v : logged.pixels()) v = std::log1p(v);
    const auto [lo, hi] = std::minmax_element(logged.pixels().begin(), logged.pixels().end());
    io::write_pgm(out, logged, 8, *lo, *hi > *lo ? *hi : *lo + 1.0);
  }
  json rec{{"patterns", set.patterns.size()},
           {"binarized", set.binarized},
           {"cutoff", cutoff},
           {"fraction_above", metrics::spectrum_fraction_above(spec, cutoff)}};
  if (!out.empty()) rec["out"] = out;
  emit("spectrum", rec);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fourier-domain regularized inversion for single-pixel imaging"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_flag("--json", g_json, "Emit JSON lines");
  app.add_option("--threads", threads, "Worker threads (default: FDRI_THREADS or all cores)");

  SelectArgs sel;
  auto* select = app.add_subcommand("select", "Select sampling patterns and write M");
  select->add_option("--protocol", sel.protocol, "dct | walsh | morlet")->capture_default_str();
  select->add_option("--res", sel.res, "Square resolution")->capture_default_str();
  select->add_option("--width", sel.width, "Width (overrides --res)");
  select->add_option("--height", sel.height, "Height (overrides --res)");
  auto* ratio_opt = select->add_option("--ratio", sel.ratio, "Compression ratio k/n")->capture_default_str();
  select->add_option("-k", sel.k, "Pattern count")->excludes(ratio_opt);
  select->add_flag("--binarize", sel.binarize, "Threshold patterns to +-1");
  select->add_flag("--white", sel.white, "Prepend an all-ones row");
  select->add_option("--db", sel.db, "Database image directory");
  select->add_option("--seed", sel.seed)->capture_default_str();
  select->add_option("--sigma-min", sel.sigma_min, "Morlet smallest envelope")->capture_default_str();
  select->add_option("--sigma-max", sel.sigma_max, "Morlet largest envelope (0: res/4)")->capture_default_str();
  select->add_option("--pgm-dir", sel.pgm_dir, "Also dump patterns as PGM");
  select->add_option("--pgm-levels", sel.pgm_levels, "scaled | binary ({0,1} for binarized sets)")
      ->capture_default_str();
  select->add_option("-o,--out", sel.out, "Output container")->required();

  PrecomputeArgs pre;
  auto* precompute = app.add_subcommand("precompute", "Compute the reconstruction matrix P");
  precompute->add_option("--patterns", pre.patterns, "Measurement matrix container")->required();
  precompute->add_option("--method", pre.method, "fdri-direct | fdri-svd | pinv")->capture_default_str();
  precompute->add_option("--mu", pre.mu)->capture_default_str();
  precompute->add_option("--eps", pre.eps)->capture_default_str();
  precompute->add_option("--precision", pre.precision, "Stored precision f64 | f32")->capture_default_str();
  precompute->add_option("--block-mb", pre.block_mb, "Scratch memory budget")->capture_default_str();
  precompute->add_option("-o,--out", pre.out)->required();

  std::string v_patterns, v_matrix;
  double v_tol = 0.0;
  auto* verify = app.add_subcommand("verify", "Check M P = I");
  verify->add_option("--patterns", v_patterns)->required();
  verify->add_option("--matrix", v_matrix)->required();
  verify->add_option("--tol", v_tol, "Override the stored tolerance");

  std::string c_a, c_b;
  double c_tol = 1e-8;
  auto* compare = app.add_subcommand("compare", "Relative distance between two P files");
  compare->add_option("a", c_a)->required();
  compare->add_option("b", c_b)->required();
  compare->add_option("--tol", c_tol)->capture_default_str();

  std::string m_patterns, m_image, m_out;
  double m_sigma = 0.0;
  std::uint64_t m_seed = 0;
  auto* measure = app.add_subcommand("measure", "Simulate detector readings for an image");
  measure->add_option("--patterns", m_patterns)->required();
  measure->add_option("--image", m_image)->required();
  measure->add_option("--sigma", m_sigma, "Noise relative to RMS signal")->capture_default_str();
  measure->add_option("--seed", m_seed)->capture_default_str();
  measure->add_option("-o,--out", m_out)->required();

  std::string r_matrix, r_meas, r_patterns, r_ref, r_out;
  auto* reconstruct = app.add_subcommand("reconstruct", "x = P y");
  reconstruct->add_option("--matrix", r_matrix)->required();
  reconstruct->add_option("--measurements", r_meas)->required();
  reconstruct->add_option("--patterns", r_patterns, "Check P against this M");
  reconstruct->add_option("--reference", r_ref, "Report PSNR against this image");
  reconstruct->add_option("-o,--out", r_out, "Output PGM");

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Stream frames through acquisition and reconstruction");
  run->add_option("--patterns", run_args.patterns)->required();
  run->add_option("--matrix", run_args.matrix)->required();
  auto* images_opt = run->add_option("--images", run_args.images, "Image files or directories");
  run->add_option("--repeat", run_args.repeat, "Frames per input image")->capture_default_str();
  run->add_option("--moving", run_args.moving, "Synthetic moving-target frames")->excludes(images_opt);
  run->add_option("--clock", run_args.clock, "sim | wall")->capture_default_str();
  run->add_option("--dmd-rate", run_args.dmd_rate, "Patterns per second")->capture_default_str();
  run->add_option("--sigma", run_args.sigma)->capture_default_str();
  run->add_option("--seed", run_args.seed)->capture_default_str();
  run->add_option("--consumers", run_args.consumers)->capture_default_str();
  run->add_option("--queue", run_args.queue)->capture_default_str();
  run->add_option("--precision", run_args.precision, "f32 converts P for the stream");
  run->add_option("--out-dir", run_args.out_dir, "Write frames as PGM");
  run->add_flag("--frames", run_args.frames, "Report every frame");

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "PSNR table over images for one or more P");
  eval->add_option("--patterns", ev.patterns)->required();
  eval->add_option("--matrix", ev.matrices, "Repeatable")->required();
  eval->add_option("--images", ev.images)->required();
  eval->add_option("--sigma", ev.sigma)->capture_default_str();
  eval->add_option("--seed", ev.seed)->capture_default_str();

  BenchArgs be;
  auto* bench = app.add_subcommand("bench", "Time x = P y");
  bench->add_option("--matrix", be.matrix, "P file (default: random P of the given shape)");
  bench->add_option("--res", be.res)->capture_default_str();
  auto* bratio = bench->add_option("--ratio", be.ratio)->capture_default_str();
  bench->add_option("-k", be.k)->excludes(bratio);
  bench->add_option("--precision", be.precision)->capture_default_str();
  bench->add_option("--iterations", be.iterations)->capture_default_str();
  bench->add_option("--budget-ms", be.budget_ms)->capture_default_str();
  bench->add_option("--seed", be.seed)->capture_default_str();

  std::string s_patterns, s_out;
  double s_cutoff = std::numbers::pi / 2;
  auto* spectrum = app.add_subcommand("spectrum", "Mean Fourier magnitude of a pattern set");
  spectrum->add_option("--patterns", s_patterns)->required();
  spectrum->add_option("--cutoff", s_cutoff, "Radial frequency, rad/pixel")->capture_default_str();
  spectrum->add_option("-o,--out", s_out, "Write the centered spectrum (log scale) as PGM");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    set_threads(threads);
    if (*select) return cmd_select(sel);
    if (*precompute) return cmd_precompute(pre);
    if (*verify) return cmd_verify(v_patterns, v_matrix, v_tol);
    if (*compare) return cmd_compare(c_a, c_b, c_tol);
    if (*measure) return cmd_measure(m_patterns, m_image, m_sigma, m_seed, m_out);
    if (*reconstruct) return cmd_reconstruct(r_matrix, r_meas, r_patterns, r_ref, r_out);
    if (*run) {
      if (run_args.images.empty() && run_args.moving == 0) throw InvalidArgument("run needs --images or --moving");
      return cmd_run(run_args);
    }
    if (*eval) return cmd_eval(ev);
    if (*bench) return cmd_bench(be);
    if (*spectrum) return cmd_spectrum(s_patterns, s_cutoff, s_out);
  } catch (const ProvenanceError& e) {
    std::cerr << "provenance error: " << e.what() << "\n";
    return kProvenance;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const RankDeficiency& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kNumerical;
  } catch (const ConsistencyError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kNumerical;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumerical;
  }
  return kUsage;
}
