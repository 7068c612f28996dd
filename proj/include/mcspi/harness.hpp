#pragma once

// End-to-end experiments: pattern plan -> acquisition -> tracking -> both
// reconstruction modes -> metrics, plus artifact export.

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "acquisition.hpp"
#include "config.hpp"
#include "errors.hpp"
#include "image_io.hpp"
#include "metrics.hpp"
#include "patterns.hpp"
#include "reconstruction.hpp"
#include "scene.hpp"
#include "tracking.hpp"
#include "version.hpp"

#ifdef MCSPI_HAS_PNG
#include "png_io.hpp"
#endif

namespace mcspi {

inline constexpr const char* kOutputDirEnv = "MCSPI_OUTPUT_DIR";

/// Desk-scale configuration for a named preset.
inline ExperimentConfig preset_config(const std::string& name) {
  ExperimentConfig c;
  c.preset = name;
  if (name == "static") {
    c.field_size = 64;
    c.object = {"builtin:plane", 32};
    c.trajectory.model = TrajectoryModel::Static;
    c.snapshots = {1024, 4096, 16384};
  } else if (name == "sim-path") {
    // One pixel per set around a closed loop. A single basis pass leaves
    // strong cross-talk from the varying shifts; four passes average it down.
    c.field_size = 128;
    c.object = {"builtin:plane", 48};
    c.trajectory.model = TrajectoryModel::PresetPath;
    c.trajectory.step = 1.0;
    c.trajectory.loop = true;
    c.trajectory.waypoints = {{0, 0}, {30, 18}, {-12, 32}, {-32, -6}, {-8, -32}, {28, -20}};
    c.basis_passes = 4;
    c.snapshots = {16384, 65536, 262144};
  } else if (name == "sim-random") {
    // Random direction, 0..30 px per set; the basis is cycled 8 times and
    // snapshots fall after 1, 2, 4 and 8 passes.
    c.field_size = 128;
    c.object = {"builtin:resolution", 48};
    c.trajectory.model = TrajectoryModel::RandomWalk;
    c.trajectory.max_step = 30.0;
    c.trajectory.seed = 2023;
    c.basis_passes = 8;
    c.snapshots = {65536, 131072, 262144, 524288};
  } else if (name == "pendulum") {
    c.field_size = 128;
    c.object = {"builtin:plane", 40};
    c.trajectory.model = TrajectoryModel::Pendulum;
    c.trajectory.amplitude_x = 70.0;
    c.trajectory.amplitude_y = 40.0;
    c.trajectory.phi0 = 0.6;
    c.trajectory.period = 900.0;
    c.basis_passes = 2;
    c.psnr_reference = "static";
    c.snapshots = {16384, 65536, 131072};
  } else {
    throw ConfigError("unknown preset '" + name + "' (expected sim-path, sim-random, pendulum, static)");
  }
  c.output_dir = "mcspi_out/" + name;
  return c;
}

inline ObjectImage load_object(const ObjectSpec& spec) {
  if (spec.source.rfind("builtin:", 0) == 0) return builtin_object(spec.source.substr(8), spec.size);
  const auto ext = std::filesystem::path(spec.source).extension().string();
  if (ext == ".png" || ext == ".PNG") {
#ifdef MCSPI_HAS_PNG
    return ObjectImage(read_png_gray(spec.source));
#else
    throw ConfigError("built without PNG support");
#endif
  }
  return ObjectImage(load_grid(spec.source));
}

struct ModeOutcome {
  ReconResult recon;
  double mse = 0.0;
  double psnr = 0.0;
  double correlation = 0.0;
  std::vector<SeriesPoint> series;
};

struct ExperimentResult {
  ExperimentConfig config;
  SequencePlan plan;
  AcquisitionResult acquisition;
  TrackResult track;
  ImageD ground_truth;  // object at zero displacement
  ImageD reference;     // what PSNR is measured against
  ModeOutcome compensated;
  ModeOutcome uncompensated;

  MetricsReport report() const {
    return {compensated.mse, compensated.psnr, track.summary.mean_abs_error_px, compensated.series};
  }
};

namespace detail {

template <typename Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
  const std::string prefix = std::string(name) + " stage: ";
  try {
    return fn();
  } catch (const NoObjectError& e) {
    throw NoObjectError(prefix + e.what());
  } catch (const EmptyAccumulatorError& e) {
    throw EmptyAccumulatorError(prefix + e.what());
  } catch (const DomainError& e) {
    throw DomainError(prefix + e.what());
  } catch (const CapacityError& e) {
    throw CapacityError(prefix + e.what());
  } catch (const ProtocolError& e) {
    throw ProtocolError(prefix + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(prefix + e.what());
  }
}

}  // namespace detail

/// Normalized (min-max to [0,1], peak 1) comparison of an image against a
/// reference.
inline std::pair<double, double> normalized_mse_psnr(const ImageD& image, const ImageD& reference) {
  const double m = mse(display_normalize(image), display_normalize(reference));
  return {m, psnr_from_mse(m, 1.0)};
}

inline ModeOutcome evaluate_mode(ReconResult recon, const ImageD& reference) {
  ModeOutcome out;
  std::tie(out.mse, out.psnr) = normalized_mse_psnr(recon.image, reference);
  out.correlation = pearson_correlation(recon.image, reference);
  for (const auto& s : recon.snapshots) {
    const auto [m, p] = normalized_mse_psnr(s.image, reference);
    out.series.push_back({s.tau, m, p});
  }
  out.recon = std::move(recon);
  return out;
}

inline Trajectory resolve_trajectory(const ExperimentConfig& config, const SceneState& scene) {
  Trajectory t = config.trajectory;
  if (!config.waypoints_csv.empty()) load_waypoints_csv(config.waypoints_csv, t);
  if (t.model == TrajectoryModel::RandomWalk && config.clamp_to_field && !t.bounds) t.bounds = scene.in_field_bounds();
  return t;
}

/// Pattern generation and acquisition only.
inline std::pair<SequencePlan, AcquisitionResult> simulate(const ExperimentConfig& config, SceneState& scene) {
  auto plan = detail::stage("patterns", [&] {
    return make_plan(config.field_size, config.n, config.effective_num_pairs(), config.ordering);
  });
  auto acq = detail::stage("acquisition", [&] {
    const auto traj = resolve_trajectory(config, scene);
    return run_acquisition(scene, traj, plan, config.noise, {config.per_pattern_motion});
  });
  return {std::move(plan), std::move(acq)};
}

inline TrackOptions track_options(const ExperimentConfig& c) {
  TrackOptions o;
  o.i1_source = c.i1_source == "mean-of-pairs" ? I1Source::MeanOfPairs : I1Source::LastPair;
  o.reference_mode = c.reference_mode == "first-fix" ? ReferenceMode::FirstFix : ReferenceMode::FieldCenter;
  o.smoothing_window = c.smoothing_window;
  return o;
}

/// Runs the full pipeline in memory.
inline ExperimentResult run_experiment(const ExperimentConfig& config) {
  validate(config);
  ExperimentResult r;
  r.config = config;
  auto object = detail::stage("scene", [&] { return load_object(config.object); });
  SceneState scene = detail::stage("scene", [&] { return SceneState(config.field_size, config.field_size, object); });
  r.ground_truth = render_frame(scene, Displacement{});

  std::tie(r.plan, r.acquisition) = simulate(config, scene);
  r.track = detail::stage("tracking", [&] {
    return track_run(r.acquisition.records, r.plan, track_options(config), r.acquisition.truth);
  });

  r.reference = r.ground_truth;
  if (config.psnr_reference == "static") {
    r.reference = detail::stage("reference", [&] {
      ExperimentConfig still = config;
      still.trajectory = Trajectory{};
      still.waypoints_csv.clear();
      still.num_pairs = 0;
      still.basis_passes = 1;
      still.per_pattern_motion = false;
      SceneState s(config.field_size, config.field_size, object);
      auto [plan, acq] = simulate(still, s);
      const auto fixes = fixes_from_displacements(std::vector<Displacement>(plan.num_sets));
      return mcspi_run(acq.records, plan, fixes, ReconMode::Uncompensated).image;
    });
  }

  r.compensated = detail::stage("reconstruction", [&] {
    return evaluate_mode(mcspi_run(r.acquisition.records, r.plan, r.track.fixes, ReconMode::Compensated, config.snapshots),
                         r.reference);
  });
  r.uncompensated = detail::stage("reconstruction", [&] {
    return evaluate_mode(
        mcspi_run(r.acquisition.records, r.plan, r.track.fixes, ReconMode::Uncompensated, config.snapshots),
        r.reference);
  });
  return r;
}

// ---------------------------------------------------------------------------
// Artifacts

inline nlohmann::json json_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return nullptr;
  return v;
}

inline nlohmann::json track_summary_json(const TrackSummary& s) {
  return {{"mean_abs_error_px", s.mean_abs_error_px ? nlohmann::json(*s.mean_abs_error_px) : nlohmann::json(nullptr)},
          {"fixes", s.fixes},
          {"gaps", s.gaps}};
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw ConfigError("cannot write '" + p.string() + "'");
  os << text;
}

inline void export_image(const std::filesystem::path& dir, const std::string& stem, const ImageD& img) {
  save_spiimg((dir / (stem + ".spiimg")).string(), img);
  save_pgm((dir / (stem + ".pgm")).string(), display_normalize(img), 65535);
}

inline void write_truth_csv(std::ostream& os, std::span<const SetTruth> truth) {
  os << "set,rx,ry,centroid_x,centroid_y,inside\n";
  os << std::setprecision(17);
  for (const auto& t : truth) {
    os << t.set << ',' << t.displacement.rx << ',' << t.displacement.ry << ',' << t.centroid_x << ','
       << t.centroid_y << ',' << (t.inside ? 1 : 0) << '\n';
  }
}

inline std::vector<SetTruth> read_truth_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("set,rx,ry,centroid_x,centroid_y,inside", 0) != 0) {
    throw ConfigError("truth CSV: missing header");
  }
  std::vector<SetTruth> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string f[6];
    for (auto& field : f) {
      if (!std::getline(ls, field, ',')) throw ConfigError("truth CSV: malformed line");
    }
    try {
      out.push_back({std::stoull(f[0]), {std::stod(f[1]), std::stod(f[2])}, std::stod(f[3]), std::stod(f[4]),
                     std::stoi(f[5]) != 0});
    } catch (const std::logic_error&) {
      throw ConfigError("truth CSV: malformed line");
    }
  }
  return out;
}

inline nlohmann::json provenance_json(const ExperimentConfig& c) {
  return {{"tool", "mcspi"},
          {"version", kVersion},
          {"config", c},
          {"seeds", {{"trajectory", c.trajectory.seed}, {"noise", c.noise.seed}}}};
}

inline void write_snapshot_series(const std::filesystem::path& dir, const std::string& prefix, const ModeOutcome& m) {
  std::filesystem::create_directories(dir);
  std::size_t k = 0;
  for (const auto& s : m.recon.snapshots) {
    std::ostringstream stem;
    stem << prefix << '_' << std::setw(4) << std::setfill('0') << ++k << "_tau" << s.tau;
    export_image(dir, stem.str(), s.image);
  }
}

/// Writes every artifact of a finished experiment into `dir`.
inline void write_artifacts(const ExperimentResult& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text(dir / "config.json", nlohmann::json(r.config).dump(2) + "\n");
  write_text(dir / "provenance.json", provenance_json(r.config).dump(2) + "\n");
  write_text(dir / "plan.json", plan_to_json(r.plan).dump(2) + "\n");
  write_stream_file((dir / "stream.bin").string(), r.acquisition.records);
  if (r.config.write_stream_csv) write_stream_file((dir / "stream.csv").string(), r.acquisition.records);
  {
    std::ostringstream os;
    write_truth_csv(os, r.acquisition.truth);
    write_text(dir / "truth.csv", os.str());
  }
  {
    std::ostringstream os;
    write_track_csv(os, r.track.fixes);
    write_text(dir / "track.csv", os.str());
  }
  write_text(dir / "track_summary.json", track_summary_json(r.track.summary).dump(2) + "\n");

  export_image(dir, "ground_truth", r.ground_truth);
  if (r.config.psnr_reference == "static") export_image(dir, "reference_static", r.reference);
  export_image(dir, "recon_compensated", r.compensated.recon.image);
  export_image(dir, "recon_uncompensated", r.uncompensated.recon.image);
  write_snapshot_series(dir / "snapshots", "compensated", r.compensated);
  write_snapshot_series(dir / "snapshots", "uncompensated", r.uncompensated);

  std::ostringstream series;
  series << "mode,tau,mse,psnr\n" << std::setprecision(17);
  for (const auto* m : {&r.compensated, &r.uncompensated}) {
    for (const auto& p : m->series) {
      series << (m == &r.compensated ? "compensated" : "uncompensated") << ',' << p.tau << ',' << p.mse << ','
             << p.psnr << '\n';
    }
  }
  write_text(dir / "metrics_series.csv", series.str());

  auto mode_json = [](const ModeOutcome& m) {
    nlohmann::json s = nlohmann::json::array();
    for (const auto& p : m.series) s.push_back({{"tau", p.tau}, {"mse", p.mse}, {"psnr", json_number(p.psnr)}});
    return nlohmann::json{{"mse", m.mse},
                          {"psnr", json_number(m.psnr)},
                          {"correlation", m.correlation},
                          {"eta", m.recon.eta},
                          {"series", s}};
  };
  const nlohmann::json metrics = {
      {"preset", r.config.preset},
      {"psnr_reference", r.config.psnr_reference},
      {"mean_abs_position_error_px", r.track.summary.mean_abs_error_px ? nlohmann::json(*r.track.summary.mean_abs_error_px)
                                                                       : nlohmann::json(nullptr)},
      {"compensated", mode_json(r.compensated)},
      {"uncompensated", mode_json(r.uncompensated)},
      {"psnr_gain_db", json_number(r.compensated.psnr - r.uncompensated.psnr)},
  };
  write_text(dir / "metrics.json", metrics.dump(2) + "\n");
}

inline std::filesystem::path resolve_output_dir(const ExperimentConfig& c) {
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) {
    return std::filesystem::path(env) / (c.preset.empty() ? "custom" : c.preset);
  }
  return c.output_dir;
}

/// Preset + "key=value" overrides -> run -> artifacts. Returns the report.
inline ExperimentResult run_preset(const std::string& name, const std::vector<std::string>& overrides = {},
                                   bool write = true) {
  nlohmann::json j = preset_config(name);
  for (const auto& o : overrides) apply_override(j, o);
  const auto config = config_from_json(j, preset_config(name));
  auto result = run_experiment(config);
  if (write) write_artifacts(result, resolve_output_dir(config));
  return result;
}

}  // namespace mcspi
