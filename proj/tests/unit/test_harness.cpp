#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "lwm/harness.hpp"

using namespace lwm;

namespace {

ExperimentConfig tiny_config() {
  ExperimentConfig c = default_config();
  c.model.dim = 64;
  c.model.components = 3;
  c.schedule.T = 10;
  c.scheme.k_bits = 64;
  c.scheme.n_users = 1;
  c.scheme.target_fpr = 1e-3;
  c.population = 3;
  c.bench_images = 1;
  for (auto& a : c.attacks) a.steps = 2;
  for (auto& [name, pc] : c.pgid) {
    pc.T = 10;
    pc.k_stop = std::min<std::size_t>(pc.k_stop, 4);
    pc.s_skip = std::min(pc.s_skip, pc.k_stop);
  }
  return c;
}

std::string results_text(const ResultsTable& t) {
  std::ostringstream os;
  write_results_csv(os, t);
  return os.str();
}

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

}  // namespace

TEST(Config, JsonRoundTrip) {
  ExperimentConfig c = tiny_config();
  c.proxy.mean_seed = 99;
  c.scheme.scheme = Scheme::TreeRing;
  c.schedule.endpoint = CleanEndpoint::One;
  c.attacks[0].optimizer = Optimizer::GradientDescent;
  const auto j = config_to_json(c);
  const auto back = config_from_json(j);
  EXPECT_EQ(config_to_json(back), j);
  EXPECT_EQ(back.proxy.mean_seed, std::optional<std::uint64_t>(99));
  EXPECT_FALSE(back.proxy.codec_seed.has_value());
}

TEST(Config, MissingKeysFallBackToDefaults) {
  const auto c = config_from_json(nlohmann::json::parse(R"({"population": 7})"));
  EXPECT_EQ(c.population, 7u);
  EXPECT_EQ(config_to_json(c)["seed"], config_to_json(default_config())["seed"]);
}

TEST(Config, Validation) {
  auto c = tiny_config();
  c.population = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = tiny_config();
  c.defenses.push_back("pgid-z");
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = tiny_config();
  c.attacks.push_back(c.attacks[0]);
  EXPECT_THROW(c.validate(), std::invalid_argument);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"schedule": {"clean_endpoint": "zero"}})")),
               std::invalid_argument);
}

TEST(Experiment, SinglePairSmoke) {
  auto c = tiny_config();
  c.population = 1;
  for (auto& a : c.attacks) a.steps = 0;
  const auto out = run_experiment(c);
  EXPECT_EQ(out.table.rows.size(), c.defenses.size() * (2 + c.attacks.size()));
  for (const auto& r : out.table.rows) {
    EXPECT_TRUE(r.det_rate == 0.0 || r.det_rate == 1.0);
    EXPECT_GE(r.auc, 0.0);
    EXPECT_LE(r.auc, 1.0);
  }
  EXPECT_TRUE(out.pca.empty());
}

TEST(Experiment, ByteIdenticalReruns) {
  const auto c = tiny_config();
  const auto a = run_experiment(c), b = run_experiment(c);
  EXPECT_EQ(results_text(a.table), results_text(b.table));
  std::ostringstream pa, pb;
  write_pca_csv(pa, a.pca);
  write_pca_csv(pb, b.pca);
  EXPECT_EQ(pa.str(), pb.str());
  auto c2 = c;
  c2.seed += 1;
  EXPECT_NE(results_text(run_experiment(c2).table), results_text(a.table));
}

TEST(Experiment, TableShapeAndLookup) {
  const auto c = tiny_config();
  const auto out = run_experiment(c);
  const auto& wm = out.table.find("baseline", "watermarked");
  EXPECT_EQ(wm.scheme, "gaussian-shading");
  EXPECT_EQ(out.table.find("pgid-r", "removal").steps, 2);
  EXPECT_THROW(out.table.find("nope", "removal"), std::out_of_range);
  for (std::size_t i = 1; i < out.table.rows.size(); ++i)
    EXPECT_LE(std::tie(out.table.rows[i - 1].defense, out.table.rows[i - 1].attack),
              std::tie(out.table.rows[i].defense, out.table.rows[i].attack));
  EXPECT_EQ(out.detections.size(), out.table.rows.size());
  EXPECT_EQ(out.pca.size(), c.population * out.table.rows.size());
}

TEST(Experiment, WritesAllArtifacts) {
  const auto c = tiny_config();
  const auto out = run_experiment(c);
  const auto dir = std::filesystem::temp_directory_path() / "lwm_harness_test";
  std::filesystem::remove_all(dir);
  write_experiment(dir.string(), c, out);
  for (const char* f : {"results.csv", "timing.csv", "pca.csv", "summary.json", "detections_watermarked.csv",
                        "detections_removal_pgid-r.csv"})
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  std::ifstream det(dir / "detections_watermarked.csv");
  std::string header;
  std::getline(det, header);
  EXPECT_EQ(header, "scheme,statistic,threshold,detected,bit_accuracy,p_value");
  std::ifstream pca(dir / "pca.csv");
  std::getline(pca, header);
  EXPECT_EQ(header, "group,pc1,pc2");
  std::ifstream sj(dir / "summary.json");
  const auto j = nlohmann::json::parse(sj);
  EXPECT_EQ(j["rows"].size(), out.table.rows.size());
  EXPECT_TRUE(j.contains("regions"));
  std::filesystem::remove_all(dir);
}

TEST(Csv, ResultsRoundTrip) {
  ResultsTable t;
  t.rows.push_back({"gaussian-shading", "baseline", "removal", 50, 0.25, 0.5123456789012345, 0.75});
  t.rows.push_back({"tree-ring", "pgid-r", "averaging", 0, 1.0, std::nullopt, 0.0});
  std::stringstream ss(results_text(t));
  const auto back = parse_results_csv(ss);
  ASSERT_EQ(back.rows.size(), 2u);
  EXPECT_TRUE(back.rows[0] == t.rows[0]);
  EXPECT_TRUE(back.rows[1] == t.rows[1]);
  EXPECT_EQ(first_line(results_text(t)), "scheme,defense,attack,steps,det_rate,bit_acc,auc");
  std::stringstream bad("a,b\n");
  EXPECT_THROW(parse_results_csv(bad), std::invalid_argument);
}

TEST(Csv, ImagesRoundTrip) {
  Rng rng(1);
  std::vector<Image> xs{randn(rng, 5), randn(rng, 5)};
  std::stringstream ss;
  write_images_csv(ss, xs);
  const auto back = read_images_csv(ss);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_TRUE((back[1].array() == xs[1].array()).all());
  std::stringstream ragged("1,2\n3\n");
  EXPECT_THROW(read_images_csv(ragged), std::invalid_argument);
}

TEST(Sweep, SingleValueMatchesExperiment) {
  const auto c = tiny_config();
  const auto k = static_cast<double>(c.pgid.at("pgid-r").k_stop);
  const auto sw = run_sweep(c, "k_stop", {k});
  ASSERT_EQ(sw.tables.size(), 1u);
  EXPECT_EQ(results_text(sw.tables[0]), results_text(run_experiment(c).table));
  const auto st = run_sweep(c, "attack_steps", {2});
  EXPECT_EQ(results_text(st.tables[0]), results_text(run_experiment(c).table));
  std::ostringstream os;
  write_sweep_csv(os, sw);
  EXPECT_EQ(first_line(os.str()), "axis,value,scheme,defense,attack,steps,det_rate,bit_acc,auc");
}

TEST(Sweep, Errors) {
  const auto c = tiny_config();
  EXPECT_THROW(run_sweep(c, "k_stop", {}), std::invalid_argument);
  EXPECT_THROW(run_sweep(c, "lr", {1}), std::invalid_argument);
  EXPECT_THROW(run_sweep(c, "k_stop", {1.5}), std::invalid_argument);
  EXPECT_THROW(run_sweep(c, "gamma", {0.1}, "pgid-q"), std::invalid_argument);
  EXPECT_THROW(run_sweep(c, "k_stop", {10}), std::invalid_argument);
}

TEST(Bench, StepCountsMatchPrediction) {
  const auto c = tiny_config();
  const auto rows = bench(c);
  ASSERT_EQ(rows.size(), 1 + c.pgid.size());
  EXPECT_EQ(rows[0].name, "ddim");
  for (const auto& r : rows) {
    EXPECT_EQ(r.predicted_steps, r.measured_steps) << r.name;
    EXPECT_GE(r.ms_total, 0.0);
  }
  std::ostringstream os;
  write_bench_csv(os, rows);
  EXPECT_EQ(first_line(os.str()),
            "name,k_stop,s_skip,gamma,ms_stage1,ms_stage2,ms_stage3,ms_total,stage2_steps_predicted,"
            "stage2_steps_measured");
}
