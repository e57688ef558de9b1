#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "lwm/harness.hpp"

namespace fs = std::filesystem;
using namespace lwm;

namespace {

struct Common {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "experiment config (JSON)")->check(CLI::ExistingFile);
  app->add_option("--out", c.out, "output directory");
  app->add_option("--seed", c.seed, "override the master seed");
}

ExperimentConfig resolve(const Common& c, CLI::App* app) {
  ExperimentConfig cfg = c.config.empty() ? default_config() : load_config(c.config);
  if (app->count("--seed")) cfg.seed = c.seed;
  return cfg;
}

std::string out_dir(const Common& c, const ExperimentConfig& cfg) {
  const std::string d = c.out.empty() ? cfg.output_dir : c.out;
  fs::create_directories(d);
  return d;
}

std::ofstream open_out(const std::string& dir, const std::string& name) {
  std::ofstream f(fs::path(dir) / name);
  if (!f) throw std::runtime_error("cannot write " + (fs::path(dir) / name).string());
  return f;
}

std::vector<double> parse_values(const std::string& s) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    v.push_back(std::stod(tok));
  }
  return v;
}

void print_table(const ResultsTable& t) {
  write_results_csv(std::cout, t);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"latent watermark testbed"};
  app.require_subcommand(1);

  Common gen_c, atk_c, def_c, eval_c, sweep_c, bench_c, cal_c;

  auto* gen = app.add_subcommand("generate", "generate watermarked and unwatermarked images");
  add_common(gen, gen_c);

  auto* atk = app.add_subcommand("attack", "run the configured attacks on generated images");
  add_common(atk, atk_c);

  auto* def = app.add_subcommand("defend", "extract and detect with a defense profile");
  add_common(def, def_c);
  std::string profile = "pgid-r";
  std::string in_images;
  def->add_option("--profile", profile, "pgid-r | pgid-f | baseline")
      ->check(CLI::IsMember({"pgid-r", "pgid-f", "baseline"}));
  def->add_option("--in", in_images, "image CSV (one image per row); default: all populations")
      ->check(CLI::ExistingFile);

  auto* ev = app.add_subcommand("evaluate", "full experiment: populations, attacks, defenses, metrics");
  add_common(ev, eval_c);

  auto* sw = app.add_subcommand("sweep", "ablation sweep over one axis");
  add_common(sw, sweep_c);
  std::string axis;
  std::string values;
  std::string sweep_profile = "pgid-r";
  sw->add_option("--axis", axis, "k_stop | s_skip | gamma | attack_steps")
      ->required()
      ->check(CLI::IsMember({"k_stop", "s_skip", "gamma", "attack_steps"}));
  sw->add_option("--values", values, "comma-separated values")->required();
  sw->add_option("--profile", sweep_profile, "profile the PGID axes apply to")
      ->check(CLI::IsMember({"pgid-r", "pgid-f"}));

  auto* be = app.add_subcommand("bench", "per-stage PGID timings");
  add_common(be, bench_c);

  auto* cal = app.add_subcommand("calibrate", "calibrate the detection threshold");
  add_common(cal, cal_c);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      const auto cfg = resolve(gen_c, gen);
      const auto dir = out_dir(gen_c, cfg);
      const Pipeline p = build_pipeline(cfg);
      for (const auto& pop : generate_populations(p)) {
        auto f = open_out(dir, "images_" + pop.name + ".csv");
        write_images_csv(f, pop.images);
      }
      open_out(dir, "config.json") << config_to_json(cfg).dump(2) << '\n';
      std::cout << "wrote " << 2 * cfg.population << " images to " << dir << '\n';
    } else if (atk->parsed()) {
      const auto cfg = resolve(atk_c, atk);
      const auto dir = out_dir(atk_c, cfg);
      const Pipeline p = build_pipeline(cfg);
      auto pops = generate_populations(p);
      run_attacks(p, pops);
      for (std::size_t i = 2; i < pops.size(); ++i) {
        auto f = open_out(dir, "images_" + pops[i].name + ".csv");
        write_images_csv(f, pops[i].images);
        auto l = open_out(dir, "losses_" + pops[i].name + ".csv");
        write_losses_csv(l, pops[i]);
        std::cout << pops[i].name << ": " << pops[i].images.size() << " images\n";
      }
    } else if (def->parsed()) {
      const auto cfg = resolve(def_c, def);
      const auto dir = out_dir(def_c, cfg);
      const Pipeline p = build_pipeline(cfg);
      std::vector<Population> pops;
      if (!in_images.empty()) {
        std::ifstream f(in_images);
        Population pop;
        pop.name = fs::path(in_images).stem().string();
        pop.images = read_images_csv(f);
        pops.push_back(std::move(pop));
      } else {
        pops = generate_populations(p);
        run_attacks(p, pops);
      }
      for (const auto& pop : pops) {
        const DefenseRun run = apply_defense(p, profile, pop.name, pop.images);
        auto f = open_out(dir, "detections_" + pop.name + "_" + profile + ".csv");
        write_detection_csv(f, run.reports);
        std::size_t hits = 0;
        for (const auto& r : run.reports) hits += r.detected ? 1 : 0;
        std::cout << pop.name << " [" << profile << "]: detected " << hits << "/" << run.reports.size() << '\n';
      }
    } else if (ev->parsed()) {
      const auto cfg = resolve(eval_c, ev);
      const auto dir = out_dir(eval_c, cfg);
      const auto out = run_experiment(cfg);
      write_experiment(dir, cfg, out);
      print_table(out.table);
    } else if (sw->parsed()) {
      const auto cfg = resolve(sweep_c, sw);
      const auto dir = out_dir(sweep_c, cfg);
      const auto res = run_sweep(cfg, axis, parse_values(values), sweep_profile);
      auto f = open_out(dir, "sweep_" + axis + ".csv");
      write_sweep_csv(f, res);
      nlohmann::json j;
      j["axis"] = axis;
      j["values"] = res.values;
      j["config"] = config_to_json(cfg);
      j["tables"] = nlohmann::json::array();
      for (const auto& t : res.tables) {
        std::ostringstream os;
        write_results_csv(os, t);
        j["tables"].push_back(os.str());
      }
      open_out(dir, "sweep_" + axis + ".json") << j.dump(2) << '\n';
      write_sweep_csv(std::cout, res);
    } else if (be->parsed()) {
      const auto cfg = resolve(bench_c, be);
      const auto dir = out_dir(bench_c, cfg);
      const auto rows = bench(cfg);
      auto f = open_out(dir, "bench.csv");
      write_bench_csv(f, rows);
      write_bench_csv(std::cout, rows);
    } else if (cal->parsed()) {
      const auto cfg = resolve(cal_c, cal);
      const auto dir = out_dir(cal_c, cfg);
      const Pipeline p = build_pipeline(cfg);
      nlohmann::json j;
      j["scheme"] = scheme_name(cfg.scheme.scheme);
      j["threshold"] = p.threshold;
      if (const auto* gs = std::get_if<GaussianShadingKey>(&p.key)) {
        j["c_tau"] = gs->c_tau;
        j["tau"] = gs->tau;
        j["fpr_single"] = gs_fpr(gs->c_tau, gs->k_bits);
        j["fpr_family"] = gs_fpr_multi(gs->c_tau, gs->k_bits, gs->n_users);
      } else {
        j["calibration_samples"] = cfg.scheme.calibration_samples;
      }
      open_out(dir, "calibration.json") << j.dump(2) << '\n';
      std::cout << j.dump(2) << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
