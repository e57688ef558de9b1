#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lwm/attacks.hpp"
#include "lwm/codec.hpp"
#include "lwm/diffusion.hpp"
#include "lwm/metrics.hpp"
#include "lwm/pgid.hpp"
#include "lwm/schedule.hpp"
#include "lwm/watermarks.hpp"

namespace lwm {

struct CodecSpec {
  double noise_std = 0.01;
  std::uint64_t seed = 12;
};

// Attacker's models. Unset seeds mean the attacker holds the provider's model or codec.
struct ProxySpec {
  std::optional<std::uint64_t> mean_seed;
  std::optional<std::uint64_t> codec_seed;
};

struct ScheduleSpec {
  std::size_t train_steps = 1000;
  double beta_start = 0.00085;
  double beta_end = 0.012;
  std::size_t T = 50;
  CleanEndpoint endpoint = CleanEndpoint::FirstGrid;
};

struct SchemeSpec {
  Scheme scheme = Scheme::GaussianShading;
  std::uint64_t key_seed = 7;
  // Gaussian Shading
  int k_bits = 256;
  int rho = 1;
  std::uint64_t n_users = 100000;
  double target_fpr = 1e-6;
  // Tree-Ring
  double tr_radius = 3.5;
  double tr_value_std = 16.0;
  double tr_fpr = 0.01;
  // T2SMark
  int t2s_bits = 32;
  int t2s_carriers = 8;
  double tts_tau = 0.674;
  // null samples for the empirical schemes
  std::size_t calibration_samples = 1000;
};

struct ExperimentConfig {
  std::uint64_t seed = 2024;
  PriorSpec model;
  CodecSpec codec;
  ProxySpec proxy;
  ScheduleSpec schedule;
  SchemeSpec scheme;
  std::vector<AttackConfig> attacks;
  std::map<std::string, PgidConfig> pgid;
  std::vector<std::string> defenses;
  std::size_t population = 100;
  std::size_t bench_images = 10;
  std::string output_dir = "results";

  void validate() const;
};

ExperimentConfig default_config();
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::string& path);

struct Pipeline {
  ExperimentConfig cfg;
  NoiseSchedule schedule;
  ScoreModel model;
  ScoreModel proxy;
  LatentCodec codec;
  LatentCodec proxy_codec;
  WatermarkKey key;
  double threshold = 0.0;
};

// Builds models, codecs and the key, then calibrates the detection threshold.
Pipeline build_pipeline(const ExperimentConfig& cfg);

struct Population {
  std::string name;  // watermarked | unwatermarked | removal | forgery | averaging | vae-forgery
  bool label = false;
  int steps = 0;
  std::vector<Image> images;
  std::vector<std::vector<double>> losses;
};

Image generate_image(const Pipeline& p, const Vec& zT);
std::vector<Population> generate_populations(const Pipeline& p);
void run_attacks(const Pipeline& p, std::vector<Population>& pops);

struct DefenseRun {
  std::vector<DetectionReport> reports;
  std::vector<Vec> latents;
  PgidStats stats;  // summed over images
};

// defense: "baseline" or a name in cfg.pgid
DefenseRun apply_defense(const Pipeline& p, const std::string& defense, const std::string& population,
                         const std::vector<Image>& images);

struct ResultRow {
  std::string scheme;
  std::string defense;
  std::string attack;
  int steps = 0;
  double det_rate = 0.0;
  std::optional<double> bit_acc;
  double auc = 0.0;
  double ms_stage1 = 0.0;
  double ms_stage2 = 0.0;
  double ms_stage3 = 0.0;

  bool operator==(const ResultRow& o) const;
};

struct ResultsTable {
  std::vector<ResultRow> rows;
  const ResultRow& find(const std::string& defense, const std::string& attack) const;
};

struct PcaRow {
  std::string group;
  double pc1 = 0.0;
  double pc2 = 0.0;
};

// Probe trained on baseline-inverted watermarked vs unwatermarked latents.
struct RegionReport {
  double probe_accuracy = 0.0;
  // group -> fraction classified as watermarked
  std::map<std::string, double> watermarked_fraction;
};

struct ExperimentOutput {
  ResultsTable table;
  std::map<std::string, std::vector<DetectionReport>> detections;  // "defense/population"
  std::vector<PcaRow> pca;
  RegionReport regions;
  double threshold = 0.0;
};

ExperimentOutput evaluate(const Pipeline& p, const std::vector<Population>& pops);
ExperimentOutput run_experiment(const ExperimentConfig& cfg);

struct SweepResult {
  std::string axis;
  std::vector<double> values;
  std::vector<ResultsTable> tables;
};

// axis: k_stop | s_skip | gamma (applied to target_profile) or attack_steps.
SweepResult run_sweep(const ExperimentConfig& cfg, const std::string& axis,
                      const std::vector<double>& values, const std::string& target_profile = "pgid-r");

struct BenchRow {
  std::string name;
  std::size_t k_stop = 0;
  std::size_t s_skip = 0;
  double gamma = 0.0;
  double ms_stage1 = 0.0;
  double ms_stage2 = 0.0;
  double ms_stage3 = 0.0;
  double ms_total = 0.0;
  std::size_t predicted_steps = 0;
  std::size_t measured_steps = 0;
};

// Per-image stage timings for a DDIM-only row and each PGID profile.
std::vector<BenchRow> bench(const ExperimentConfig& cfg);

// CSV
void write_results_csv(std::ostream& os, const ResultsTable& t);
ResultsTable parse_results_csv(std::istream& is);
void write_timing_csv(std::ostream& os, const ResultsTable& t);
void write_detection_csv(std::ostream& os, const std::vector<DetectionReport>& reports);
void write_pca_csv(std::ostream& os, const std::vector<PcaRow>& rows);
void write_sweep_csv(std::ostream& os, const SweepResult& s);
void write_bench_csv(std::ostream& os, const std::vector<BenchRow>& rows);
void write_images_csv(std::ostream& os, const std::vector<Image>& images);
std::vector<Image> read_images_csv(std::istream& is);
void write_losses_csv(std::ostream& os, const Population& pop);

nlohmann::json summary_json(const ExperimentConfig& cfg, const ExperimentOutput& out);

// Writes results.csv, timing.csv, summary.json, pca.csv and one detection CSV per
// defense/population into dir.
void write_experiment(const std::string& dir, const ExperimentConfig& cfg, const ExperimentOutput& out);

}  // namespace lwm
