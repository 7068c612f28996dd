#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "mcspi/harness.hpp"

using namespace mcspi;
namespace fs = std::filesystem;

namespace {

ImageD random_image(std::size_t c, std::size_t r, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ImageD img(c, r);
  for (auto& v : img) v = u(rng);
  return img;
}

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("mcspi_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Metrics, MseExamples) {
  const auto a = random_image(8, 8, 1);
  EXPECT_EQ(mse(a, a), 0.0);
  EXPECT_EQ(mse(ImageD(4, 4, 0.0), ImageD(4, 4, 1.0)), 1.0);
  const auto b = random_image(8, 8, 2);
  double oracle = 0.0;
  for (std::size_t r = 0; r < 8; ++r)
    for (std::size_t c = 0; c < 8; ++c) oracle += (a(c, r) - b(c, r)) * (a(c, r) - b(c, r));
  oracle /= 64.0;
  EXPECT_NEAR(mse(a, b), oracle, 1e-12);
  EXPECT_EQ(mse(a, b), mse(b, a));
  EXPECT_THROW(mse(a, ImageD(4, 8)), DomainError);
}

TEST(Metrics, Psnr) {
  EXPECT_NEAR(psnr_from_mse(0.01, 1.0), 20.0, 1e-12);
  EXPECT_TRUE(std::isinf(psnr_from_mse(0.0)));
  const auto a = random_image(8, 8, 3);
  EXPECT_TRUE(std::isinf(psnr(a, a)));
  EXPECT_THROW(psnr_from_mse(0.1, 0.0), DomainError);
  EXPECT_NEAR(psnr_from_mse(0.01, 255.0), 10.0 * std::log10(255.0 * 255.0 / 0.01), 1e-12);
}

TEST(Metrics, NormalizationSafety) {
  const auto a = random_image(16, 16, 4);
  ImageD scaled = a;
  for (auto& v : scaled) v = 3.0 * v + 7.0;
  const auto [m, p] = normalized_mse_psnr(scaled, a);
  EXPECT_LT(m, 1e-28);
  EXPECT_GT(p, 200.0);
  EXPECT_TRUE(std::isinf(psnr(display_normalize(a), display_normalize(a))));
}

TEST(Metrics, Correlation) {
  const auto a = random_image(8, 8, 5);
  ImageD neg = a;
  for (auto& v : neg) v = -v;
  EXPECT_NEAR(pearson_correlation(a, a), 1.0, 1e-12);
  EXPECT_NEAR(pearson_correlation(a, neg), -1.0, 1e-12);
}

TEST(Metrics, FitScale) {
  const auto a = random_image(8, 8, 6);
  ImageD twice = a;
  for (auto& v : twice) v *= 2.5;
  const auto fit = fit_scale(twice, a);
  EXPECT_NEAR(fit.scale, 2.5, 1e-12);
  EXPECT_LE(fit.max_relative_deviation, 1e-12);
}

TEST(ImageIo, SpiimgRoundTrip) {
  auto img = random_image(5, 3, 7);
  img[0] = -1e300;
  img[1] = 5e-324;
  std::stringstream ss;
  write_spiimg(ss, img);
  EXPECT_EQ(ss.str().substr(0, 14), "SPIIMG v1 5 3\n");
  EXPECT_EQ(ss.str().size(), 14u + 15 * 8);
  EXPECT_EQ(read_spiimg(ss), img);
}

TEST(ImageIo, PgmRoundTrip) {
  ImageD img(3, 2, std::vector<double>{0.0, 0.5, 1.0, 0.25, 2.0, -1.0});
  std::stringstream wide;
  write_pgm(wide, img);
  const auto back = read_pgm(wide);
  EXPECT_NEAR(back[1], 0.5, 1.0 / 65535);
  EXPECT_EQ(back[4], 1.0);
  EXPECT_EQ(back[5], 0.0);
  std::stringstream narrow;
  write_pgm(narrow, img, 255);
  EXPECT_EQ(narrow.str().substr(0, 11), "P5\n3 2\n255\n");
  EXPECT_NEAR(read_pgm(narrow)[3], 0.25, 1.0 / 255);
  std::stringstream comment(std::string("P5\n# hi\n2 1\n255\n\xff\x00", 18));
  const auto c = read_pgm(comment);
  EXPECT_EQ(c[0], 1.0);
  std::stringstream ascii("P2\n2 1\n255\n1 2\n");
  EXPECT_THROW(read_pgm(ascii), ConfigError);
}

TEST(Config, JsonRoundTrip) {
  for (const auto* name : {"static", "sim-path", "sim-random", "pendulum"}) {
    auto c = preset_config(name);
    c.trajectory.bounds = DisplacementBounds{-1, 2, -3, 4};
    c.noise = {NoiseKind::AdditiveGaussian, 0.25, 99};
    const nlohmann::json j = c;
    const auto back = config_from_json(nlohmann::json::parse(j.dump()));
    EXPECT_EQ(nlohmann::json(back), j) << name;
    EXPECT_EQ(back.trajectory.waypoints, c.trajectory.waypoints);
    EXPECT_EQ(back.trajectory.bounds, c.trajectory.bounds);
    EXPECT_EQ(back.snapshots, c.snapshots);
  }
}

TEST(Config, Validation) {
  EXPECT_THROW(config_from_json({{"field_size", 100}}), ConfigError);
  EXPECT_THROW(config_from_json({{"n", 3}}), ConfigError);
  EXPECT_THROW(config_from_json({{"bogus", 1}}), ConfigError);
  EXPECT_THROW(config_from_json({{"trajectory", {{"model", "orbit"}}}}), ConfigError);
  EXPECT_THROW(config_from_json({{"noise", {{"sigma", -1}}}}), ConfigError);
  EXPECT_THROW(config_from_json({{"field_size", "big"}}), ConfigError);
  EXPECT_THROW(config_from_json({{"object", {{"size", 512}}}}), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json::array()), ConfigError);
  EXPECT_THROW(preset_config("video"), ConfigError);
  EXPECT_NO_THROW(config_from_json({{"n", 6}, {"num_pairs", 30}}));
}

TEST(Config, Overrides) {
  nlohmann::json j = preset_config("static");
  apply_override(j, "n=4");
  apply_override(j, "trajectory.model=random-walk");
  apply_override(j, "object.source=builtin:square");
  apply_override(j, "snapshots=[10,20]");
  const auto c = config_from_json(j);
  EXPECT_EQ(c.n, 4u);
  EXPECT_EQ(c.trajectory.model, TrajectoryModel::RandomWalk);
  EXPECT_EQ(c.object.source, "builtin:square");
  EXPECT_EQ(c.snapshots, (std::vector<std::uint64_t>{10, 20}));
  EXPECT_THROW(apply_override(j, "novalue"), ConfigError);
}

TEST(Config, EffectivePairs) {
  ExperimentConfig c;
  c.field_size = 16;
  c.basis_passes = 3;
  EXPECT_EQ(c.effective_num_pairs(), 768u);
  c.num_pairs = 10;
  EXPECT_EQ(c.effective_num_pairs(), 10u);
}

TEST(Config, PlanFile) {
  const auto plan = make_plan(16, 4, 100, "natural");
  const auto back = plan_from_json(plan_to_json(plan));
  EXPECT_EQ(back.entries, plan.entries);
  auto j = plan_to_json(plan);
  j["num_sets"] = 3;
  EXPECT_THROW(plan_from_json(j), ProtocolError);
  EXPECT_THROW(plan_from_json({{"side", 16}}), ConfigError);
}

TEST(Config, WaypointCsv) {
  const auto dir = scratch_dir("waypoints");
  {
    std::ofstream os(dir / "path.csv");
    os << "set_index,x,y\n0,0,0\n10,5,-5\n20,5,5\n";
  }
  Trajectory t;
  load_waypoints_csv((dir / "path.csv").string(), t);
  EXPECT_EQ(t.model, TrajectoryModel::PresetPath);
  EXPECT_EQ(displacement_at(t, 5), (Displacement{2.5, -2.5}));
  EXPECT_EQ(displacement_at(t, 15), (Displacement{5, 0}));
  {
    std::ofstream os(dir / "bad.csv");
    os << "set_index,x,y\n10,0,0\n5,1,1\n";
  }
  EXPECT_THROW(load_waypoints_csv((dir / "bad.csv").string(), t), ConfigError);
  EXPECT_THROW(load_waypoints_csv((dir / "missing.csv").string(), t), ConfigError);
}

TEST(Harness, ObjectFromPgm) {
  const auto dir = scratch_dir("object");
  ImageD img(10, 6, 0.0);
  img(3, 2) = 1.0;
  save_pgm((dir / "obj.pgm").string(), img, 255);
  const auto obj = load_object({(dir / "obj.pgm").string(), 0});
  EXPECT_EQ(obj.width(), 10u);
  EXPECT_EQ(obj.reflectance()(3, 2), 1.0);
  EXPECT_THROW(load_object({(dir / "nope.pgm").string(), 0}), ConfigError);
}

TEST(Harness, StagePrefix) {
  ExperimentConfig c = preset_config("static");
  c.object = {"builtin:plane", 8};
  c.trajectory.model = TrajectoryModel::PresetPath;
  c.trajectory.waypoints = {{500, 500}};
  c.num_pairs = 64;
  c.field_size = 16;
  c.snapshots.clear();
  // every set is empty: tracking yields only gaps but the run still completes
  const auto r = run_experiment(c);
  EXPECT_EQ(r.track.summary.fixes, 0u);
  EXPECT_EQ(r.track.summary.gaps, 64u);

  c.object = {"builtin:cat", 8};
  try {
    run_experiment(c);
    FAIL() << "expected DomainError";
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("scene stage"), std::string::npos);
  }
}

TEST(Harness, StaticPresetIsExact) {
  const auto r = run_preset("static", {}, false);
  EXPECT_TRUE(std::isinf(r.compensated.psnr) || r.compensated.psnr > 250.0) << r.compensated.psnr;
  EXPECT_GE(r.compensated.correlation, 0.999);
  EXPECT_LE(fit_scale(r.compensated.recon.image, r.ground_truth).max_relative_deviation, 1e-9);
  EXPECT_EQ(r.compensated.series.size(), 3u);
}

TEST(Harness, ArtifactsAndDeterminism) {
  const auto dir = scratch_dir("artifacts");
  ::setenv(kOutputDirEnv, dir.string().c_str(), 1);
  const std::vector<std::string> small{"field_size=32", "object.size=16", "basis_passes=1", "snapshots=[256,1024]",
                                       "write_stream_csv=true"};
  run_preset("sim-random", small);
  const auto first = dir / "sim-random";
  for (const char* f : {"config.json", "provenance.json", "plan.json", "stream.bin", "stream.csv", "truth.csv",
                        "track.csv", "track_summary.json", "ground_truth.spiimg", "ground_truth.pgm",
                        "recon_compensated.spiimg", "recon_uncompensated.pgm", "metrics.json", "metrics_series.csv"}) {
    EXPECT_TRUE(fs::exists(first / f)) << f;
  }
  EXPECT_TRUE(fs::exists(first / "snapshots" / "compensated_0001_tau256.spiimg"));
  const auto track1 = slurp(first / "track.csv"), img1 = slurp(first / "recon_compensated.spiimg");
  const auto summary = nlohmann::json::parse(slurp(first / "track_summary.json"));
  EXPECT_TRUE(summary.contains("mean_abs_error_px"));
  EXPECT_EQ(summary["fixes"].get<std::size_t>() + summary["gaps"].get<std::size_t>(), 1024u);  // one pair per set
  const auto prov = nlohmann::json::parse(slurp(first / "provenance.json"));
  EXPECT_EQ(prov["version"], kVersion);
  EXPECT_EQ(prov["seeds"]["trajectory"], 2023);

  const auto replay = read_stream_file((first / "stream.csv").string());
  EXPECT_EQ(replay, read_stream_file((first / "stream.bin").string()));

  fs::rename(first, dir / "run1");
  run_preset("sim-random", small);
  EXPECT_EQ(slurp(first / "track.csv"), track1);
  EXPECT_EQ(slurp(first / "recon_compensated.spiimg"), img1);
  ::unsetenv(kOutputDirEnv);
}
