// mcspi command-line front end.
//
// Exit codes: 0 success, 2 configuration / input error, 3 protocol or
// alignment error, 4 numeric or domain error.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mcspi/mcspi.hpp"

namespace fs = std::filesystem;
using namespace mcspi;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitProtocol = 3;
constexpr int kExitDomain = 4;

fs::path output_root(const std::string& explicit_dir, const fs::path& fallback) {
  if (!explicit_dir.empty()) return explicit_dir;
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
  return fallback;
}

std::vector<TrackFix> load_fixes(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open fixes file '" + path + "'");
  return read_track_csv(is);
}

std::vector<std::uint64_t> parse_taus(const std::string& list) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stoull(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw ConfigError("--snapshots expects comma-separated integers, got '" + item + "'");
    }
  }
  return out;
}

SequencePlan load_plan(const std::string& path) { return plan_from_json(read_json_file(path)); }

int cmd_gen_patterns(std::size_t size, const std::string& order, const std::string& cache, std::size_t count) {
  if (order != "cake-cut" && order != "natural") throw ConfigError("--order must be cake-cut or natural");
  const auto indices = order == "cake-cut" ? cake_cut_order(size) : natural_order(size);
  const std::size_t shown = count == 0 ? indices.size() : std::min(count, indices.size());
  if (!cache.empty()) write_pattern_cache(cache, size, order, shown);
  std::cout << "rank,basis_index,block_count\n";
  for (std::size_t k = 0; k < shown; ++k) {
    std::cout << k << ',' << indices[k] << ',' << basis_block_count(size, indices[k]) << '\n';
  }
  return 0;
}

int cmd_simulate(const std::string& config_path, const std::string& out_dir) {
  const auto config = config_from_json(read_json_file(config_path));
  const auto object = detail::stage("scene", [&] { return load_object(config.object); });
  SceneState scene = detail::stage("scene", [&] { return SceneState(config.field_size, config.field_size, object); });
  const auto [plan, acq] = simulate(config, scene);
  const fs::path dir = out_dir.empty() ? resolve_output_dir(config) : fs::path(out_dir);
  fs::create_directories(dir);
  write_text(dir / "config.json", nlohmann::json(config).dump(2) + "\n");
  write_text(dir / "provenance.json", provenance_json(config).dump(2) + "\n");
  write_text(dir / "plan.json", plan_to_json(plan).dump(2) + "\n");
  write_stream_file((dir / "stream.bin").string(), acq.records);
  if (config.write_stream_csv) write_stream_file((dir / "stream.csv").string(), acq.records);
  std::ostringstream truth;
  write_truth_csv(truth, acq.truth);
  write_text(dir / "truth.csv", truth.str());
  std::cout << "wrote " << acq.records.size() << " records (" << plan.num_sets << " sets) to " << dir.string() << "\n";
  return 0;
}

int cmd_track(const std::string& stream_path, const std::string& plan_path, const std::string& truth_path,
              const std::string& reference, const std::string& i1, std::size_t window, const std::string& out_dir) {
  const auto stream = read_stream_file(stream_path);
  const auto plan = load_plan(plan_path);
  std::vector<SetTruth> truth;
  if (!truth_path.empty()) {
    std::ifstream is(truth_path);
    if (!is) throw ConfigError("cannot open truth file '" + truth_path + "'");
    truth = read_truth_csv(is);
  }
  ExperimentConfig c;
  c.reference_mode = reference;
  c.i1_source = i1;
  c.smoothing_window = window;
  validate(c);
  const auto result = track_run(stream, plan, track_options(c), truth);
  const fs::path dir = output_root(out_dir, fs::path(stream_path).parent_path());
  if (!dir.empty()) fs::create_directories(dir);
  std::ostringstream csv;
  write_track_csv(csv, result.fixes);
  write_text(dir / "track.csv", csv.str());
  const auto summary = track_summary_json(result.summary).dump(2);
  write_text(dir / "track_summary.json", summary + "\n");
  std::cout << summary << "\n";
  return 0;
}

int cmd_reconstruct(const std::string& stream_path, const std::string& fixes_path, std::string plan_path, bool no_comp,
                    const std::string& snapshots, const std::string& out_dir) {
  if (plan_path.empty()) plan_path = (fs::path(stream_path).parent_path() / "plan.json").string();
  const auto stream = read_stream_file(stream_path);
  const auto plan = load_plan(plan_path);
  const auto fixes = load_fixes(fixes_path);
  const auto mode = no_comp ? ReconMode::Uncompensated : ReconMode::Compensated;
  const auto recon = mcspi_run(stream, plan, fixes, mode, parse_taus(snapshots));
  const fs::path dir = output_root(out_dir, fs::path(stream_path).parent_path());
  if (!dir.empty()) fs::create_directories(dir);
  const std::string stem = no_comp ? "recon_uncompensated" : "recon_compensated";
  export_image(dir, stem, recon.image);
  ModeOutcome m;
  m.recon = recon;
  write_snapshot_series(dir / "snapshots", no_comp ? "uncompensated" : "compensated", m);
  std::cout << "eta " << recon.eta << ", " << recon.snapshots.size() << " snapshots, image " << (dir / stem).string()
            << ".spiimg\n";
  return 0;
}

ImageD load_image_any(const std::string& path) {
  const auto ext = fs::path(path).extension().string();
  if (ext == ".png" || ext == ".PNG") {
#ifdef MCSPI_HAS_PNG
    return read_png_gray(path);
#else
    throw ConfigError("built without PNG support");
#endif
  }
  return load_grid(path);
}

int cmd_metrics(const std::string& a_path, const std::string& b_path, double peakval, bool raw) {
  auto a = load_image_any(a_path), b = load_image_any(b_path);
  if (!raw) {
    a = display_normalize(a);
    b = display_normalize(b);
  }
  const double m = mse(a, b);
  const nlohmann::json out = {{"mse", m}, {"psnr", json_number(psnr_from_mse(m, peakval))},
                              {"correlation", pearson_correlation(a, b)}, {"normalized", !raw}};
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_run(const std::string& preset, const std::vector<std::string>& sets) {
  const auto r = run_preset(preset, sets, true);
  const nlohmann::json out = {
      {"preset", preset},
      {"output_dir", resolve_output_dir(r.config).string()},
      {"mean_abs_error_px", r.track.summary.mean_abs_error_px ? nlohmann::json(*r.track.summary.mean_abs_error_px)
                                                               : nlohmann::json(nullptr)},
      {"fixes", r.track.summary.fixes},
      {"gaps", r.track.summary.gaps},
      {"psnr_compensated", json_number(r.compensated.psnr)},
      {"psnr_uncompensated", json_number(r.uncompensated.psnr)},
  };
  std::cout << out.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Motion-compensated single-pixel imaging toolkit"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  app.footer(std::string("Environment: ") + kOutputDirEnv + " overrides the output directory.");

  std::size_t size = 0, count = 0;
  std::string order = "cake-cut", cache;
  auto* gen = app.add_subcommand("gen-patterns", "List (and optionally cache) the ordered Hadamard basis");
  gen->add_option("--size", size, "Pattern side N (power of two)")->required();
  gen->add_option("--order", order, "cake-cut or natural")->capture_default_str();
  gen->add_option("--cache", cache, "Write a SPIPAT v1 pattern cache");
  gen->add_option("--count", count, "Only the first COUNT patterns (0 = all)");

  std::string config_path, out_dir;
  auto* sim = app.add_subcommand("simulate", "Generate the sequence plan and a simulated bucket stream");
  sim->add_option("--config", config_path, "Experiment config JSON")->required();
  sim->add_option("--out", out_dir, "Output directory");

  std::string stream_path, plan_path, truth_path, reference = "field-center", i1 = "last-pair";
  std::size_t window = 1;
  auto* trk = app.add_subcommand("track", "Centroid fixes from a bucket stream");
  trk->add_option("--stream", stream_path, "Bucket stream (CSV or SPIBKT v1)")->required();
  trk->add_option("--plan", plan_path, "Plan JSON")->required();
  trk->add_option("--truth", truth_path, "Ground-truth CSV for the error summary");
  trk->add_option("--reference", reference, "field-center or first-fix")->capture_default_str();
  trk->add_option("--i1", i1, "last-pair or mean-of-pairs")->capture_default_str();
  trk->add_option("--smooth", window, "Trailing moving-average window")->capture_default_str();
  trk->add_option("--out", out_dir, "Output directory");

  std::string fixes_path, snapshots;
  bool no_comp = false;
  auto* rec = app.add_subcommand("reconstruct", "Correlation reconstruction from a stream and its fixes");
  rec->add_option("--stream", stream_path, "Bucket stream (CSV or SPIBKT v1)")->required();
  rec->add_option("--fixes", fixes_path, "Track CSV")->required();
  rec->add_option("--plan", plan_path, "Plan JSON (default: plan.json next to the stream)");
  rec->add_flag("--no-comp", no_comp, "Disable motion compensation");
  rec->add_option("--snapshots", snapshots, "Comma-separated tau checkpoints");
  rec->add_option("--out", out_dir, "Output directory");

  std::string image_a, image_b;
  double peakval = 1.0;
  bool raw = false;
  auto* met = app.add_subcommand("metrics", "MSE / PSNR between two images");
  met->add_option("--image", image_a, "Image (SPIIMG, PGM or PNG)")->required();
  met->add_option("--ref", image_b, "Reference image")->required();
  met->add_option("--peakval", peakval, "Peak value")->capture_default_str();
  met->add_flag("--raw", raw, "Skip min-max normalization");

  std::string preset;
  std::vector<std::string> sets;
  auto* run = app.add_subcommand("run", "Run a preset end to end and write all artifacts");
  run->add_option("--preset", preset, "sim-path, sim-random, pendulum or static")->required();
  run->add_option("--set", sets, "Config override key=value (repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*gen) return cmd_gen_patterns(size, order, cache, count);
    if (*sim) return cmd_simulate(config_path, out_dir);
    if (*trk) return cmd_track(stream_path, plan_path, truth_path, reference, i1, window, out_dir);
    if (*rec) return cmd_reconstruct(stream_path, fixes_path, plan_path, no_comp, snapshots, out_dir);
    if (*met) return cmd_metrics(image_a, image_b, peakval, raw);
    if (*run) return cmd_run(preset, sets);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ProtocolError& e) {
    std::cerr << "protocol error: " << e.what() << "\n";
    return kExitProtocol;
  } catch (const DomainError& e) {
    std::cerr << "domain error: " << e.what() << "\n";
    return kExitDomain;
  } catch (const CapacityError& e) {
    std::cerr << "capacity error: " << e.what() << "\n";
    return kExitDomain;
  }
  return 0;
}
