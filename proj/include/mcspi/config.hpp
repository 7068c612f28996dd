#pragma once

// Experiment configuration and its JSON form. Every field round-trips.

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "acquisition.hpp"
#include "errors.hpp"
#include "patterns.hpp"
#include "scene.hpp"

namespace mcspi {

struct ObjectSpec {
  std::string source = "builtin:plane";  // "builtin:<square|plane|resolution>" or a .pgm/.png path
  std::size_t size = 48;                 // side of built-in objects
  friend bool operator==(const ObjectSpec&, const ObjectSpec&) = default;
};

struct ExperimentConfig {
  std::string preset = "custom";
  std::size_t field_size = 128;
  ObjectSpec object;
  Trajectory trajectory;
  std::string waypoints_csv;    // optional set_index,x,y path for preset-path
  bool clamp_to_field = true;   // random walk stays inside the field
  std::size_t n = 2;
  std::size_t num_pairs = 0;    // 0 = basis_passes full passes over the basis
  std::size_t basis_passes = 1;
  std::string ordering = "cake-cut";
  NoiseModel noise;
  bool per_pattern_motion = false;
  std::vector<std::uint64_t> snapshots;  // tau checkpoints
  std::string i1_source = "last-pair";   // or "mean-of-pairs"
  std::string reference_mode = "field-center";  // or "first-fix"
  std::size_t smoothing_window = 1;
  std::string psnr_reference = "ground-truth";  // or "static"
  bool write_stream_csv = false;
  std::string output_dir = "mcspi_out";

  std::size_t effective_num_pairs() const {
    return num_pairs == 0 ? basis_passes * field_size * field_size : num_pairs;
  }
};

// ---------------------------------------------------------------------------
// JSON

inline void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  using nlohmann::json;
  json waypoints = json::array();
  for (const auto& w : c.trajectory.waypoints) waypoints.push_back({w.x, w.y});
  json traj = {
      {"model", to_string(c.trajectory.model)},
      {"seed", c.trajectory.seed},
      {"step", c.trajectory.step},
      {"loop", c.trajectory.loop},
      {"waypoints", waypoints},
      {"times", c.trajectory.times},
      {"max_step", c.trajectory.max_step},
      {"amplitude_x", c.trajectory.amplitude_x},
      {"amplitude_y", c.trajectory.amplitude_y},
      {"phi0", c.trajectory.phi0},
      {"period", c.trajectory.period},
  };
  if (c.trajectory.bounds) {
    const auto& b = *c.trajectory.bounds;
    traj["bounds"] = {b.rx_min, b.rx_max, b.ry_min, b.ry_max};
  }
  j = json{
      {"preset", c.preset},
      {"field_size", c.field_size},
      {"object", {{"source", c.object.source}, {"size", c.object.size}}},
      {"trajectory", traj},
      {"waypoints_csv", c.waypoints_csv},
      {"clamp_to_field", c.clamp_to_field},
      {"n", c.n},
      {"num_pairs", c.num_pairs},
      {"basis_passes", c.basis_passes},
      {"ordering", c.ordering},
      {"noise",
       {{"kind", c.noise.kind == NoiseKind::None ? "none" : "gaussian"},
        {"sigma", c.noise.sigma},
        {"seed", c.noise.seed}}},
      {"per_pattern_motion", c.per_pattern_motion},
      {"snapshots", c.snapshots},
      {"i1_source", c.i1_source},
      {"reference_mode", c.reference_mode},
      {"smoothing_window", c.smoothing_window},
      {"psnr_reference", c.psnr_reference},
      {"write_stream_csv", c.write_stream_csv},
      {"output_dir", c.output_dir},
  };
}

namespace detail {

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known, const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ConfigError("unknown config key '" + where + key + "'");
  }
}

}  // namespace detail

inline void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  using detail::read_field;
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  detail::reject_unknown(j,
                         {"preset", "field_size", "object", "trajectory", "waypoints_csv", "clamp_to_field", "n",
                          "num_pairs", "basis_passes", "ordering", "noise", "per_pattern_motion", "snapshots", "i1_source",
                          "reference_mode", "smoothing_window", "psnr_reference", "write_stream_csv", "output_dir"},
                         "");
  read_field(j, "preset", c.preset);
  read_field(j, "field_size", c.field_size);
  if (j.contains("object")) {
    const auto& o = j.at("object");
    detail::reject_unknown(o, {"source", "size"}, "object.");
    read_field(o, "source", c.object.source);
    read_field(o, "size", c.object.size);
  }
  if (j.contains("trajectory")) {
    const auto& t = j.at("trajectory");
    detail::reject_unknown(t,
                           {"model", "seed", "step", "loop", "waypoints", "times", "max_step", "amplitude_x",
                            "amplitude_y", "phi0", "period", "bounds"},
                           "trajectory.");
    auto& tr = c.trajectory;
    if (t.contains("model")) tr.model = trajectory_model_from_string(t.at("model").get<std::string>());
    read_field(t, "seed", tr.seed);
    read_field(t, "step", tr.step);
    read_field(t, "loop", tr.loop);
    if (t.contains("waypoints")) {
      tr.waypoints.clear();
      for (const auto& w : t.at("waypoints")) {
        if (!w.is_array() || w.size() != 2) throw ConfigError("trajectory.waypoints entries must be [x, y]");
        tr.waypoints.push_back({w[0].get<double>(), w[1].get<double>()});
      }
    }
    read_field(t, "times", tr.times);
    read_field(t, "max_step", tr.max_step);
    read_field(t, "amplitude_x", tr.amplitude_x);
    read_field(t, "amplitude_y", tr.amplitude_y);
    read_field(t, "phi0", tr.phi0);
    read_field(t, "period", tr.period);
    if (t.contains("bounds")) {
      const auto& b = t.at("bounds");
      if (b.is_null()) {
        tr.bounds.reset();
      } else {
        if (!b.is_array() || b.size() != 4) throw ConfigError("trajectory.bounds must be [rx_min, rx_max, ry_min, ry_max]");
        tr.bounds = DisplacementBounds{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
      }
    }
  }
  read_field(j, "waypoints_csv", c.waypoints_csv);
  read_field(j, "clamp_to_field", c.clamp_to_field);
  read_field(j, "n", c.n);
  read_field(j, "num_pairs", c.num_pairs);
  read_field(j, "basis_passes", c.basis_passes);
  read_field(j, "ordering", c.ordering);
  if (j.contains("noise")) {
    const auto& nz = j.at("noise");
    detail::reject_unknown(nz, {"kind", "sigma", "seed"}, "noise.");
    if (nz.contains("kind")) {
      const auto kind = nz.at("kind").get<std::string>();
      if (kind == "none") {
        c.noise.kind = NoiseKind::None;
      } else if (kind == "gaussian") {
        c.noise.kind = NoiseKind::AdditiveGaussian;
      } else {
        throw ConfigError("noise.kind must be 'none' or 'gaussian'");
      }
    }
    read_field(nz, "sigma", c.noise.sigma);
    read_field(nz, "seed", c.noise.seed);
  }
  read_field(j, "per_pattern_motion", c.per_pattern_motion);
  read_field(j, "snapshots", c.snapshots);
  read_field(j, "i1_source", c.i1_source);
  read_field(j, "reference_mode", c.reference_mode);
  read_field(j, "smoothing_window", c.smoothing_window);
  read_field(j, "psnr_reference", c.psnr_reference);
  read_field(j, "write_stream_csv", c.write_stream_csv);
  read_field(j, "output_dir", c.output_dir);
}

/// Re-checks every component precondition; throws ConfigError.
inline void validate(const ExperimentConfig& c) {
  auto fail = [](const std::string& m) { throw ConfigError("config: " + m); };
  if (!is_power_of_two(c.field_size)) fail("field_size must be a power of two");
  if (c.field_size > 1024) fail("field_size above 1024 is not supported");
  if (c.n < 2 || c.n % 2 != 0) fail("n must be even and >= 2");
  if (c.num_pairs == 0 && c.basis_passes == 0) fail("basis_passes must be >= 1 when num_pairs is 0");
  if (c.ordering != "cake-cut" && c.ordering != "natural") fail("ordering must be 'cake-cut' or 'natural'");
  if (c.noise.sigma < 0.0) fail("noise.sigma must be >= 0");
  if (c.object.source.rfind("builtin:", 0) == 0 && c.object.size > c.field_size) fail("object larger than field");
  if (c.trajectory.step < 0.0) fail("trajectory.step must be >= 0");
  if (c.trajectory.max_step < 0.0) fail("trajectory.max_step must be >= 0");
  if (c.trajectory.model == TrajectoryModel::Pendulum && !(c.trajectory.period > 0.0)) {
    fail("trajectory.period must be positive");
  }
  if (!c.trajectory.times.empty() && c.trajectory.times.size() != c.trajectory.waypoints.size()) {
    fail("trajectory.times must match trajectory.waypoints");
  }
  if (c.i1_source != "last-pair" && c.i1_source != "mean-of-pairs") fail("i1_source must be 'last-pair' or 'mean-of-pairs'");
  if (c.reference_mode != "field-center" && c.reference_mode != "first-fix") {
    fail("reference_mode must be 'field-center' or 'first-fix'");
  }
  if (c.smoothing_window == 0) fail("smoothing_window must be >= 1");
  if (c.psnr_reference != "ground-truth" && c.psnr_reference != "static") {
    fail("psnr_reference must be 'ground-truth' or 'static'");
  }
}

inline ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig base = {}) {
  try {
    from_json(j, base);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const DomainError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  validate(base);
  return base;
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("'" + path + "': " + e.what());
  }
}

/// Applies "a.b.c=value" to a JSON document. The value is parsed as JSON
/// when possible and kept as a string otherwise.
inline void apply_override(nlohmann::json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq), raw = assignment.substr(eq + 1);
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::exception&) {
    value = raw;
  }
  nlohmann::json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (dot == std::string::npos) {
      (*node)[part] = value;
      break;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

// ---------------------------------------------------------------------------
// Plan file: the parameters that regenerate a SequencePlan.

inline nlohmann::json plan_to_json(const SequencePlan& p) {
  return {{"side", p.side}, {"n", p.n}, {"num_pairs", p.num_pairs}, {"num_sets", p.num_sets}, {"ordering", p.ordering}};
}

inline SequencePlan plan_from_json(const nlohmann::json& j) {
  try {
    const auto side = j.at("side").get<std::size_t>();
    const auto n = j.at("n").get<std::size_t>();
    const auto pairs = j.at("num_pairs").get<std::size_t>();
    const auto ordering = j.value("ordering", std::string("cake-cut"));
    auto plan = make_plan(side, n, pairs, ordering);
    if (j.contains("num_sets") && j.at("num_sets").get<std::size_t>() != plan.num_sets) {
      throw ProtocolError("plan file num_sets disagrees with its parameters");
    }
    return plan;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("plan file: ") + e.what());
  }
}

/// "set_index,x,y" rows into a timed preset path.
inline void load_waypoints_csv(const std::string& path, Trajectory& t) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open waypoint file '" + path + "'");
  std::string line;
  if (!std::getline(is, line) || line.rfind("set_index,x,y", 0) != 0) {
    throw ConfigError("waypoint CSV '" + path + "' needs header set_index,x,y");
  }
  t.waypoints.clear();
  t.times.clear();
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string a, b, c;
    if (!std::getline(ls, a, ',') || !std::getline(ls, b, ',') || !std::getline(ls, c)) {
      throw ConfigError("waypoint CSV: malformed line '" + line + "'");
    }
    try {
      t.times.push_back(std::stod(a));
      t.waypoints.push_back({std::stod(b), std::stod(c)});
    } catch (const std::logic_error&) {
      throw ConfigError("waypoint CSV: malformed line '" + line + "'");
    }
    if (t.times.size() > 1 && t.times.back() < t.times[t.times.size() - 2]) {
      throw ConfigError("waypoint CSV: set_index must be non-decreasing");
    }
  }
  if (t.waypoints.empty()) throw ConfigError("waypoint CSV '" + path + "' has no rows");
  t.model = TrajectoryModel::PresetPath;
}

}  // namespace mcspi
