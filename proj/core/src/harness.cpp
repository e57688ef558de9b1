#include "lwm/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace lwm {

namespace {

constexpr std::uint64_t kTagKey = 0x6b6579;
constexpr std::uint64_t kTagWatermarked = 0x776d;
constexpr std::uint64_t kTagClean = 0x636c;
constexpr std::uint64_t kTagCalibration = 0x63616c;
constexpr std::uint64_t kTagAttack = 0x61746b;
constexpr std::uint64_t kTagAveraging = 0x617667;
constexpr std::uint64_t kTagDefense = 0x646566;

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

template <class F>
void parallel_for(std::size_t n, const std::string& what, F&& f) {
  std::vector<std::exception_ptr> errors(n);
#pragma omp parallel for schedule(dynamic)
  for (long long i = 0; i < static_cast<long long>(n); ++i) {
    try {
      f(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const std::exception& e) {
      throw std::runtime_error(what + " [item " + std::to_string(i) + "]: " + e.what());
    }
  }
}

std::string num(double x) {
  if (std::isnan(x)) return "nan";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

double parse_num(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  std::size_t pos = 0;
  const double v = std::stod(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("bad number in CSV: " + s);
  return v;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::string group_name(const std::string& defense, const std::string& population) {
  return defense == "baseline" ? population : population + "/" + defense;
}

bool is_forgery(AttackKind k) { return k == AttackKind::Forgery || k == AttackKind::VaeForgery; }

nlohmann::json attack_to_json(const AttackConfig& a) {
  return {{"kind", attack_name(a.kind)},           {"steps", a.steps},
          {"learning_rate", a.learning_rate},      {"optimizer", optimizer_name(a.optimizer)},
          {"lambda_reg", a.lambda_reg},            {"avg_count", a.avg_count}};
}

AttackConfig attack_from_json(const nlohmann::json& j) {
  AttackConfig a;
  a.kind = parse_attack(j.at("kind").get<std::string>());
  if (a.kind == AttackKind::Forgery) a.steps = 100;
  if (a.kind == AttackKind::VaeForgery) a.steps = 100;
  a.steps = j.value("steps", a.steps);
  a.learning_rate = j.value("learning_rate", a.learning_rate);
  a.optimizer = parse_optimizer(j.value("optimizer", optimizer_name(a.optimizer)));
  a.lambda_reg = j.value("lambda_reg", a.lambda_reg);
  a.avg_count = j.value("avg_count", a.avg_count);
  return a;
}

}  // namespace

// ---- config ----

void ExperimentConfig::validate() const {
  if (population < 1) throw std::invalid_argument("population must be >= 1");
  if (schedule.T < 1 || schedule.T > schedule.train_steps)
    throw std::invalid_argument("schedule T must lie in [1, train_steps]");
  std::set<std::string> kinds;
  for (const auto& a : attacks) {
    a.validate();
    if (!kinds.insert(attack_name(a.kind)).second)
      throw std::invalid_argument("duplicate attack kind: " + attack_name(a.kind));
  }
  for (const auto& [name, pc] : pgid) {
    if (name == "baseline") throw std::invalid_argument("'baseline' is reserved");
    pc.validate();
  }
  for (const auto& d : defenses)
    if (d != "baseline" && !pgid.count(d)) throw std::invalid_argument("unknown defense: " + d);
}

ExperimentConfig default_config() {
  ExperimentConfig c;
  c.model.seed = 11;
  AttackConfig removal;
  removal.kind = AttackKind::Removal;
  removal.steps = 50;
  AttackConfig forgery;
  forgery.kind = AttackKind::Forgery;
  forgery.steps = 100;
  c.attacks = {removal, forgery};
  c.pgid = {{"pgid-r", pgid_r_profile()}, {"pgid-f", pgid_f_profile()}};
  c.defenses = {"baseline", "pgid-r", "pgid-f"};
  return c;
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig c = default_config();
  c.seed = j.value("seed", c.seed);
  c.population = j.value("population", c.population);
  c.bench_images = j.value("bench_images", c.bench_images);
  c.output_dir = j.value("output_dir", c.output_dir);
  if (j.contains("model")) {
    const auto& m = j["model"];
    c.model.dim = m.value("dim", c.model.dim);
    c.model.components = m.value("components", c.model.components);
    c.model.mean_scale = m.value("mean_scale", c.model.mean_scale);
    c.model.hi_variance = m.value("hi_variance", c.model.hi_variance);
    c.model.lo_variance = m.value("lo_variance", c.model.lo_variance);
    c.model.lo_fraction = m.value("lo_fraction", c.model.lo_fraction);
    c.model.rotate = m.value("rotate", c.model.rotate);
    c.model.seed = m.value("seed", c.model.seed);
  }
  if (j.contains("codec")) {
    c.codec.noise_std = j["codec"].value("noise_std", c.codec.noise_std);
    c.codec.seed = j["codec"].value("seed", c.codec.seed);
  }
  if (j.contains("proxy")) {
    const auto& p = j["proxy"];
    if (p.contains("mean_seed") && !p["mean_seed"].is_null()) c.proxy.mean_seed = p["mean_seed"].get<std::uint64_t>();
    if (p.contains("codec_seed") && !p["codec_seed"].is_null()) c.proxy.codec_seed = p["codec_seed"].get<std::uint64_t>();
  }
  if (j.contains("schedule")) {
    const auto& s = j["schedule"];
    c.schedule.train_steps = s.value("train_steps", c.schedule.train_steps);
    c.schedule.beta_start = s.value("beta_start", c.schedule.beta_start);
    c.schedule.beta_end = s.value("beta_end", c.schedule.beta_end);
    c.schedule.T = s.value("T", c.schedule.T);
    const std::string ep = s.value("clean_endpoint", std::string("first-grid"));
    if (ep == "first-grid") c.schedule.endpoint = CleanEndpoint::FirstGrid;
    else if (ep == "one") c.schedule.endpoint = CleanEndpoint::One;
    else throw std::invalid_argument("clean_endpoint must be first-grid or one");
  }
  if (j.contains("scheme")) {
    const auto& s = j["scheme"];
    SchemeSpec& w = c.scheme;
    w.scheme = parse_scheme(s.value("name", scheme_name(w.scheme)));
    w.key_seed = s.value("key_seed", w.key_seed);
    w.k_bits = s.value("k_bits", w.k_bits);
    w.rho = s.value("rho", w.rho);
    w.n_users = s.value("n_users", w.n_users);
    w.target_fpr = s.value("target_fpr", w.target_fpr);
    w.tr_radius = s.value("tr_radius", w.tr_radius);
    w.tr_value_std = s.value("tr_value_std", w.tr_value_std);
    w.tr_fpr = s.value("tr_fpr", w.tr_fpr);
    w.t2s_bits = s.value("t2s_bits", w.t2s_bits);
    w.t2s_carriers = s.value("t2s_carriers", w.t2s_carriers);
    w.tts_tau = s.value("tts_tau", w.tts_tau);
    w.calibration_samples = s.value("calibration_samples", w.calibration_samples);
  }
  if (j.contains("attacks")) {
    c.attacks.clear();
    for (const auto& a : j["attacks"]) c.attacks.push_back(attack_from_json(a));
  }
  if (j.contains("pgid")) {
    for (const auto& [name, v] : j["pgid"].items()) {
      PgidConfig pc = c.pgid.count(name) ? c.pgid[name] : PgidConfig{};
      pc.k_stop = v.value("k_stop", pc.k_stop);
      pc.s_skip = v.value("s_skip", pc.s_skip);
      pc.gamma = v.value("gamma", pc.gamma);
      pc.T = v.value("T", pc.T);
      c.pgid[name] = pc;
    }
  }
  if (j.contains("defenses")) c.defenses = j["defenses"].get<std::vector<std::string>>();
  c.validate();
  return c;
}

nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["seed"] = c.seed;
  j["population"] = c.population;
  j["bench_images"] = c.bench_images;
  j["output_dir"] = c.output_dir;
  j["model"] = {{"dim", c.model.dim},
                {"components", c.model.components},
                {"mean_scale", c.model.mean_scale},
                {"hi_variance", c.model.hi_variance},
                {"lo_variance", c.model.lo_variance},
                {"lo_fraction", c.model.lo_fraction},
                {"rotate", c.model.rotate},
                {"seed", c.model.seed}};
  j["codec"] = {{"noise_std", c.codec.noise_std}, {"seed", c.codec.seed}};
  j["proxy"] = {{"mean_seed", c.proxy.mean_seed ? nlohmann::json(*c.proxy.mean_seed) : nlohmann::json()},
                {"codec_seed", c.proxy.codec_seed ? nlohmann::json(*c.proxy.codec_seed) : nlohmann::json()}};
  j["schedule"] = {{"train_steps", c.schedule.train_steps},
                   {"beta_start", c.schedule.beta_start},
                   {"beta_end", c.schedule.beta_end},
                   {"T", c.schedule.T},
                   {"clean_endpoint", c.schedule.endpoint == CleanEndpoint::One ? "one" : "first-grid"}};
  const SchemeSpec& w = c.scheme;
  j["scheme"] = {{"name", scheme_name(w.scheme)}, {"key_seed", w.key_seed},
                 {"k_bits", w.k_bits},           {"rho", w.rho},
                 {"n_users", w.n_users},         {"target_fpr", w.target_fpr},
                 {"tr_radius", w.tr_radius},     {"tr_value_std", w.tr_value_std},
                 {"tr_fpr", w.tr_fpr},           {"t2s_bits", w.t2s_bits},
                 {"t2s_carriers", w.t2s_carriers}, {"tts_tau", w.tts_tau},
                 {"calibration_samples", w.calibration_samples}};
  j["attacks"] = nlohmann::json::array();
  for (const auto& a : c.attacks) j["attacks"].push_back(attack_to_json(a));
  j["pgid"] = nlohmann::json::object();
  for (const auto& [name, pc] : c.pgid)
    j["pgid"][name] = {{"k_stop", pc.k_stop}, {"s_skip", pc.s_skip}, {"gamma", pc.gamma}, {"T", pc.T}};
  j["defenses"] = c.defenses;
  return j;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  return config_from_json(nlohmann::json::parse(in));
}

// ---- pipeline ----

Image generate_image(const Pipeline& p, const Vec& zT) {
  return decode(p.codec, denoise_full(p.model, zT, p.schedule));
}

Pipeline build_pipeline(const ExperimentConfig& cfg) {
  cfg.validate();
  Pipeline p;
  p.cfg = cfg;
  const auto& s = cfg.schedule;
  p.schedule = subsample(linear_schedule(s.train_steps, s.beta_start, s.beta_end, s.endpoint), s.T);
  p.model = make_model(cfg.model);
  p.proxy = cfg.proxy.mean_seed ? resample_means(p.model, cfg.model.mean_scale, *cfg.proxy.mean_seed) : p.model;
  p.codec = make_codec(static_cast<Eigen::Index>(cfg.model.dim), cfg.codec.seed, cfg.codec.noise_std);
  p.proxy_codec = cfg.proxy.codec_seed
                      ? make_codec(static_cast<Eigen::Index>(cfg.model.dim), *cfg.proxy.codec_seed, cfg.codec.noise_std)
                      : p.codec;

  const int d = static_cast<int>(cfg.model.dim);
  const SchemeSpec& w = cfg.scheme;
  const std::uint64_t ks = derive_seed(w.key_seed, kTagKey);
  switch (w.scheme) {
    case Scheme::TreeRing: p.key = make_tree_ring_key(d, w.tr_radius, w.tr_value_std, ks); break;
    case Scheme::GaussianShading:
      p.key = make_gaussian_shading_key(d, w.k_bits, w.rho, w.n_users, w.target_fpr, ks);
      break;
    case Scheme::T2SMark: p.key = make_t2smark_key(d, w.t2s_bits, w.t2s_carriers, w.tts_tau, ks); break;
  }

  if (w.scheme == Scheme::GaussianShading) {
    p.threshold = std::get<GaussianShadingKey>(p.key).tau;
    return p;
  }
  // Null statistics from inverted unwatermarked generations.
  const std::size_t M = w.calibration_samples;
  std::vector<Vec> null_latents(M);
  parallel_for(M, "calibration", [&](std::size_t i) {
    Rng rng(derive_seed(cfg.seed, kTagCalibration, i));
    const Image x = generate_image(p, randn(rng, d));
    null_latents[i] = invert_last(p.model, encode(p.codec, x, rng), p.schedule);
  });
  const double fpr = w.scheme == Scheme::TreeRing ? w.tr_fpr : w.target_fpr;
  p.threshold = calibrate_threshold(p.key, [&](std::size_t i) { return null_latents[i]; }, M, fpr);
  return p;
}

std::vector<Population> generate_populations(const Pipeline& p) {
  const std::size_t n = p.cfg.population;
  const int d = static_cast<int>(p.cfg.model.dim);
  Population wm{"watermarked", true, 0, std::vector<Image>(n), {}};
  Population cl{"unwatermarked", false, 0, std::vector<Image>(n), {}};
  parallel_for(n, "generate watermarked", [&](std::size_t i) {
    Rng rng(derive_seed(p.cfg.seed, kTagWatermarked, i));
    wm.images[i] = generate_image(p, sample_watermarked_noise(p.key, d, rng));
  });
  parallel_for(n, "generate unwatermarked", [&](std::size_t i) {
    Rng rng(derive_seed(p.cfg.seed, kTagClean, i));
    cl.images[i] = generate_image(p, randn(rng, d));
  });
  return {std::move(wm), std::move(cl)};
}

void run_attacks(const Pipeline& p, std::vector<Population>& pops) {
  if (pops.size() < 2) throw std::invalid_argument("run_attacks needs the base populations");
  const std::vector<Image>& wm = pops[0].images;
  const std::vector<Image>& cl = pops[1].images;
  const std::size_t n = wm.size();
  const int d = static_cast<int>(p.cfg.model.dim);
  std::vector<Population> attacked;
  for (const AttackConfig& a : p.cfg.attacks) {
    Population pop;
    pop.name = attack_name(a.kind);
    pop.label = !is_forgery(a.kind);
    pop.steps = a.kind == AttackKind::Averaging ? 0 : a.steps;
    pop.images.resize(n);
    pop.losses.resize(n);
    const std::uint64_t base = derive_seed(p.cfg.seed, kTagAttack, fnv1a(pop.name));
    const std::string what = "attack " + pop.name;

    if (a.kind == AttackKind::Averaging) {
      const auto N = static_cast<std::size_t>(a.avg_count);
      std::vector<Image> aw(N), ac(N);
      parallel_for(N, what, [&](std::size_t j) {
        Rng rw(derive_seed(p.cfg.seed, kTagAveraging, 2 * j));
        Rng rc(derive_seed(p.cfg.seed, kTagAveraging, 2 * j + 1));
        aw[j] = generate_image(p, sample_watermarked_noise(p.key, d, rw));
        ac[j] = generate_image(p, randn(rc, d));
      });
      parallel_for(n, what, [&](std::size_t i) { pop.images[i] = averaging_attack(aw, ac, wm[i]); });
    } else {
      parallel_for(n, what, [&](std::size_t i) {
        Rng rng(derive_seed(base, i));
        AttackResult r;
        switch (a.kind) {
          case AttackKind::Removal:
            r = removal_attack(a, p.proxy, p.proxy_codec, p.schedule, wm[i], rng);
            break;
          case AttackKind::Forgery:
            r = forgery_attack(a, p.proxy, p.proxy_codec, p.schedule, cl[i], wm[i], rng);
            break;
          case AttackKind::VaeForgery:
            r = vae_forgery_attack(a, p.proxy_codec, cl[i], wm[i]);
            break;
          case AttackKind::Averaging: break;
        }
        pop.images[i] = std::move(r.image);
        pop.losses[i] = std::move(r.losses);
      });
    }
    attacked.push_back(std::move(pop));
  }
  for (auto& pop : attacked) pops.push_back(std::move(pop));
}

DefenseRun apply_defense(const Pipeline& p, const std::string& defense, const std::string& population,
                         const std::vector<Image>& images) {
  const std::size_t n = images.size();
  const bool baseline = defense == "baseline";
  PgidConfig pc;
  if (!baseline) {
    auto it = p.cfg.pgid.find(defense);
    if (it == p.cfg.pgid.end()) throw std::invalid_argument("unknown defense: " + defense);
    pc = it->second;
  }
  DefenseRun run;
  run.reports.resize(n);
  run.latents.resize(n);
  std::vector<PgidStats> stats(n);
  const std::uint64_t base = derive_seed(p.cfg.seed, kTagDefense, fnv1a(population));
  parallel_for(n, "defense " + defense + " on " + population, [&](std::size_t i) {
    // same encoder noise for every defense of a given image
    Rng rng(derive_seed(base, i));
    if (baseline) {
      const auto t0 = Clock::now();
      run.latents[i] = invert_last(p.model, encode(p.codec, images[i], rng), p.schedule);
      stats[i].ms_stage1 = ms_since(t0);
    } else {
      run.latents[i] = pgid_extract(pc, p.model, p.codec, images[i], p.schedule, rng, &stats[i]);
    }
    run.reports[i] = detect(p.key, run.latents[i]);
  });
  for (const auto& s : stats) {
    run.stats.ms_stage1 += s.ms_stage1;
    run.stats.ms_stage2 += s.ms_stage2;
    run.stats.ms_stage3 += s.ms_stage3;
    run.stats.stage2.inversions += s.stage2.inversions;
    run.stats.stage2.denoisings += s.stage2.denoisings;
  }
  return run;
}

// ---- evaluation ----

bool ResultRow::operator==(const ResultRow& o) const {
  return scheme == o.scheme && defense == o.defense && attack == o.attack && steps == o.steps &&
         det_rate == o.det_rate && bit_acc == o.bit_acc && auc == o.auc;
}

const ResultRow& ResultsTable::find(const std::string& defense, const std::string& attack) const {
  for (const auto& r : rows)
    if (r.defense == defense && r.attack == attack) return r;
  throw std::out_of_range("no result row for " + defense + "/" + attack);
}

ExperimentOutput evaluate(const Pipeline& p, const std::vector<Population>& pops) {
  ExperimentOutput out;
  out.threshold = p.threshold;
  const std::string scheme = scheme_name(p.cfg.scheme.scheme);

  std::map<std::string, DefenseRun> runs;
  for (const auto& def : p.cfg.defenses)
    for (const auto& pop : pops) runs[group_name(def, pop.name)] = apply_defense(p, def, pop.name, pop.images);

  auto scores = [&](const std::string& group) {
    std::vector<double> s;
    for (const auto& r : runs.at(group).reports) s.push_back(r.score());
    return s;
  };

  for (const auto& def : p.cfg.defenses) {
    for (const auto& pop : pops) {
      const std::string g = group_name(def, pop.name);
      const DefenseRun& run = runs.at(g);
      ResultRow row;
      row.scheme = scheme;
      row.defense = def;
      row.attack = pop.name;
      row.steps = pop.steps;
      const double n = static_cast<double>(run.reports.size());
      std::size_t hits = 0;
      double bits = 0.0;
      bool has_bits = false;
      for (const auto& r : run.reports) {
        hits += r.detected ? 1 : 0;
        if (r.bit_accuracy) {
          bits += *r.bit_accuracy;
          has_bits = true;
        }
      }
      row.det_rate = static_cast<double>(hits) / n;
      if (has_bits) row.bit_acc = bits / n;
      const std::string wm_g = group_name(def, "watermarked");
      const std::string cl_g = group_name(def, "unwatermarked");
      if (pop.name == "watermarked" || pop.name == "unwatermarked")
        row.auc = auc(scores(wm_g), scores(cl_g));
      else if (pop.label)
        row.auc = auc(scores(g), scores(cl_g));
      else
        row.auc = auc(scores(wm_g), scores(g));
      row.ms_stage1 = run.stats.ms_stage1 / n;
      row.ms_stage2 = run.stats.ms_stage2 / n;
      row.ms_stage3 = run.stats.ms_stage3 / n;
      out.table.rows.push_back(row);
      out.detections[g] = run.reports;
    }
  }
  std::sort(out.table.rows.begin(), out.table.rows.end(), [](const ResultRow& a, const ResultRow& b) {
    return std::tie(a.defense, a.attack) < std::tie(b.defense, b.attack);
  });

  // Regions: PCA and probe fitted on baseline inversions of the two base populations.
  if (runs.count("watermarked") && runs.count("unwatermarked") && pops[0].images.size() >= 2) {
    std::vector<Vec> fit = runs.at("watermarked").latents;
    const auto n_wm = static_cast<long>(fit.size());
    const auto& cl = runs.at("unwatermarked").latents;
    fit.insert(fit.end(), cl.begin(), cl.end());
    const Pca2 pca = pca2(fit);
    std::vector<int> labels(fit.size(), 0);
    std::fill(labels.begin(), labels.begin() + n_wm, 1);
    const LinearProbe probe = fit_linear_probe(pca.points, labels);
    out.regions.probe_accuracy = probe_accuracy(probe, pca.points, labels);
    for (const auto& [g, run] : runs) {
      std::size_t wmside = 0;
      for (const auto& z : run.latents) {
        const Eigen::Vector2d q = pca_project(pca, z);
        out.pca.push_back(PcaRow{g, q(0), q(1)});
        wmside += probe.predict(q) == 1 ? 1 : 0;
      }
      out.regions.watermarked_fraction[g] =
          static_cast<double>(wmside) / static_cast<double>(run.latents.size());
    }
  }
  return out;
}

ExperimentOutput run_experiment(const ExperimentConfig& cfg) {
  const Pipeline p = build_pipeline(cfg);
  std::vector<Population> pops = generate_populations(p);
  run_attacks(p, pops);
  return evaluate(p, pops);
}

SweepResult run_sweep(const ExperimentConfig& cfg, const std::string& axis,
                      const std::vector<double>& values, const std::string& target_profile) {
  if (values.empty()) throw std::invalid_argument("sweep needs at least one value");
  const bool pgid_axis = axis == "k_stop" || axis == "s_skip" || axis == "gamma";
  if (!pgid_axis && axis != "attack_steps") throw std::invalid_argument("unknown sweep axis: " + axis);
  if (pgid_axis && !cfg.pgid.count(target_profile))
    throw std::invalid_argument("unknown sweep profile: " + target_profile);
  auto as_count = [&](double v) {
    if (v < 0.0 || v != std::floor(v)) throw std::invalid_argument(axis + " values must be nonnegative integers");
    return static_cast<std::size_t>(v);
  };

  SweepResult res;
  res.axis = axis;
  res.values = values;
  if (pgid_axis) {
    // attacks do not depend on PGID settings, so populations are shared
    Pipeline p = build_pipeline(cfg);
    std::vector<Population> pops = generate_populations(p);
    run_attacks(p, pops);
    for (double v : values) {
      PgidConfig& pc = p.cfg.pgid[target_profile];
      pc = cfg.pgid.at(target_profile);
      if (axis == "k_stop") pc.k_stop = as_count(v);
      if (axis == "s_skip") pc.s_skip = as_count(v);
      if (axis == "gamma") pc.gamma = v;
      p.cfg.validate();
      res.tables.push_back(evaluate(p, pops).table);
    }
  } else {
    for (double v : values) {
      ExperimentConfig c = cfg;
      for (auto& a : c.attacks)
        if (a.kind != AttackKind::Averaging) a.steps = static_cast<int>(as_count(v));
      res.tables.push_back(run_experiment(c).table);
    }
  }
  return res;
}

std::vector<BenchRow> bench(const ExperimentConfig& cfg) {
  ExperimentConfig c = cfg;
  c.validate();
  Pipeline p;
  p.cfg = c;
  const auto& s = c.schedule;
  p.schedule = subsample(linear_schedule(s.train_steps, s.beta_start, s.beta_end, s.endpoint), s.T);
  p.model = make_model(c.model);
  p.codec = make_codec(static_cast<Eigen::Index>(c.model.dim), c.codec.seed, c.codec.noise_std);
  const std::size_t n = std::max<std::size_t>(1, c.bench_images);
  const int d = static_cast<int>(c.model.dim);
  std::vector<Image> images(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(c.seed, kTagClean, i));
    images[i] = generate_image(p, randn(rng, d));
  }
  const double dn = static_cast<double>(n);
  std::vector<BenchRow> rows;
  {
    BenchRow r;
    r.name = "ddim";
    for (std::size_t i = 0; i < n; ++i) {
      Rng rng(derive_seed(c.seed, kTagDefense, i));
      const auto t0 = Clock::now();
      (void)invert_last(p.model, encode(p.codec, images[i], rng), p.schedule);
      r.ms_stage1 += ms_since(t0);
    }
    r.ms_stage1 /= dn;
    r.ms_total = r.ms_stage1;
    rows.push_back(r);
  }
  for (const auto& [name, pc] : c.pgid) {
    BenchRow r;
    r.name = name;
    r.k_stop = pc.k_stop;
    r.s_skip = pc.s_skip;
    r.gamma = pc.gamma;
    const StepCounter pred = pgid_predicted_steps(pc);
    r.predicted_steps = pred.inversions + pred.denoisings;
    PgidStats st;
    for (std::size_t i = 0; i < n; ++i) {
      Rng rng(derive_seed(c.seed, kTagDefense, i));
      (void)pgid_extract(pc, p.model, p.codec, images[i], p.schedule, rng, &st);
    }
    r.ms_stage1 = st.ms_stage1 / dn;
    r.ms_stage2 = st.ms_stage2 / dn;
    r.ms_stage3 = st.ms_stage3 / dn;
    r.ms_total = r.ms_stage1 + r.ms_stage2 + r.ms_stage3;
    r.measured_steps = (st.stage2.inversions + st.stage2.denoisings) / n;
    rows.push_back(r);
  }
  return rows;
}

// ---- CSV / JSON ----

void write_results_csv(std::ostream& os, const ResultsTable& t) {
  os << "scheme,defense,attack,steps,det_rate,bit_acc,auc\n";
  for (const auto& r : t.rows) {
    os << csv_field(r.scheme) << ',' << csv_field(r.defense) << ',' << csv_field(r.attack) << ','
       << r.steps << ',' << num(r.det_rate) << ',' << (r.bit_acc ? num(*r.bit_acc) : "") << ','
       << num(r.auc) << '\n';
  }
}

ResultsTable parse_results_csv(std::istream& is) {
  ResultsTable t;
  std::string line;
  if (!std::getline(is, line) || line != "scheme,defense,attack,steps,det_rate,bit_acc,auc")
    throw std::invalid_argument("results CSV header mismatch");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 7) throw std::invalid_argument("results CSV row has wrong arity");
    ResultRow r;
    r.scheme = f[0];
    r.defense = f[1];
    r.attack = f[2];
    r.steps = std::stoi(f[3]);
    r.det_rate = parse_num(f[4]);
    if (!f[5].empty()) r.bit_acc = parse_num(f[5]);
    r.auc = parse_num(f[6]);
    t.rows.push_back(r);
  }
  return t;
}

void write_timing_csv(std::ostream& os, const ResultsTable& t) {
  os << "scheme,defense,attack,ms_stage1,ms_stage2,ms_stage3,ms_total\n";
  for (const auto& r : t.rows)
    os << csv_field(r.scheme) << ',' << csv_field(r.defense) << ',' << csv_field(r.attack) << ','
       << num(r.ms_stage1) << ',' << num(r.ms_stage2) << ',' << num(r.ms_stage3) << ','
       << num(r.ms_stage1 + r.ms_stage2 + r.ms_stage3) << '\n';
}

void write_detection_csv(std::ostream& os, const std::vector<DetectionReport>& reports) {
  os << "scheme,statistic,threshold,detected,bit_accuracy,p_value\n";
  for (const auto& r : reports)
    os << scheme_name(r.scheme) << ',' << num(r.statistic) << ',' << num(r.threshold) << ','
       << (r.detected ? 1 : 0) << ',' << (r.bit_accuracy ? num(*r.bit_accuracy) : "") << ','
       << (r.p_value ? num(*r.p_value) : "") << '\n';
}

void write_pca_csv(std::ostream& os, const std::vector<PcaRow>& rows) {
  os << "group,pc1,pc2\n";
  for (const auto& r : rows) os << csv_field(r.group) << ',' << num(r.pc1) << ',' << num(r.pc2) << '\n';
}

void write_sweep_csv(std::ostream& os, const SweepResult& s) {
  os << "axis,value,scheme,defense,attack,steps,det_rate,bit_acc,auc\n";
  for (std::size_t i = 0; i < s.tables.size(); ++i)
    for (const auto& r : s.tables[i].rows)
      os << s.axis << ',' << num(s.values[i]) << ',' << csv_field(r.scheme) << ',' << csv_field(r.defense)
         << ',' << csv_field(r.attack) << ',' << r.steps << ',' << num(r.det_rate) << ','
         << (r.bit_acc ? num(*r.bit_acc) : "") << ',' << num(r.auc) << '\n';
}

void write_bench_csv(std::ostream& os, const std::vector<BenchRow>& rows) {
  os << "name,k_stop,s_skip,gamma,ms_stage1,ms_stage2,ms_stage3,ms_total,stage2_steps_predicted,"
        "stage2_steps_measured\n";
  for (const auto& r : rows)
    os << r.name << ',' << r.k_stop << ',' << r.s_skip << ',' << num(r.gamma) << ',' << num(r.ms_stage1)
       << ',' << num(r.ms_stage2) << ',' << num(r.ms_stage3) << ',' << num(r.ms_total) << ','
       << r.predicted_steps << ',' << r.measured_steps << '\n';
}

void write_images_csv(std::ostream& os, const std::vector<Image>& images) {
  for (const auto& x : images) {
    for (Eigen::Index j = 0; j < x.size(); ++j) os << (j ? "," : "") << num(x[j]);
    os << '\n';
  }
}

std::vector<Image> read_images_csv(std::istream& is) {
  std::vector<Image> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    Image x(static_cast<Eigen::Index>(f.size()));
    for (std::size_t j = 0; j < f.size(); ++j) x[static_cast<Eigen::Index>(j)] = parse_num(f[j]);
    if (!out.empty() && x.size() != out.front().size())
      throw std::invalid_argument("image CSV rows differ in length");
    out.push_back(std::move(x));
  }
  return out;
}

void write_losses_csv(std::ostream& os, const Population& pop) {
  os << "image,iteration,loss\n";
  for (std::size_t i = 0; i < pop.losses.size(); ++i)
    for (std::size_t t = 0; t < pop.losses[i].size(); ++t) os << i << ',' << t << ',' << num(pop.losses[i][t]) << '\n';
}

nlohmann::json summary_json(const ExperimentConfig& cfg, const ExperimentOutput& out) {
  nlohmann::json j;
  j["config"] = config_to_json(cfg);
  j["threshold"] = out.threshold;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : out.table.rows) {
    j["rows"].push_back({{"scheme", r.scheme},
                         {"defense", r.defense},
                         {"attack", r.attack},
                         {"steps", r.steps},
                         {"det_rate", r.det_rate},
                         {"bit_acc", r.bit_acc ? nlohmann::json(*r.bit_acc) : nlohmann::json()},
                         {"auc", r.auc},
                         {"wall_ms", {{"stage1", r.ms_stage1}, {"stage2", r.ms_stage2}, {"stage3", r.ms_stage3}}}});
  }
  j["regions"] = {{"probe_accuracy", out.regions.probe_accuracy},
                  {"watermarked_fraction", out.regions.watermarked_fraction}};
  return j;
}

void write_experiment(const std::string& dir, const ExperimentConfig& cfg, const ExperimentOutput& out) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto open = [&](const std::string& name) {
    std::ofstream f(fs::path(dir) / name);
    if (!f) throw std::runtime_error("cannot write " + (fs::path(dir) / name).string());
    return f;
  };
  {
    auto f = open("results.csv");
    write_results_csv(f, out.table);
  }
  {
    auto f = open("timing.csv");
    write_timing_csv(f, out.table);
  }
  {
    auto f = open("pca.csv");
    write_pca_csv(f, out.pca);
  }
  {
    auto f = open("summary.json");
    f << summary_json(cfg, out).dump(2) << '\n';
  }
  for (const auto& [g, reports] : out.detections) {
    std::string name = g;
    std::replace(name.begin(), name.end(), '/', '_');
    auto f = open("detections_" + name + ".csv");
    write_detection_csv(f, reports);
  }
}

}  // namespace lwm
