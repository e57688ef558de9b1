#include "lwm/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "lwm/random.hpp"

namespace lwm {

Vec ScoreModel::weights() const { return log_weights.array().exp().matrix(); }

Mat ScoreModel::ambient_means() const {
  if (!basis) return means;
  return means * basis->transpose();
}

void ScoreModel::validate() const {
  if (means.rows() < 1) throw std::invalid_argument("score model needs K >= 1");
  if (means.cols() != variances.size()) throw std::invalid_argument("means/variances dimension mismatch");
  if (log_weights.size() != means.rows()) throw std::invalid_argument("weights/means count mismatch");
  if (!means.allFinite()) throw std::invalid_argument("non-finite mixture mean");
  if ((variances.array() <= 0.0).any()) throw std::invalid_argument("variances must be positive");
  if (std::abs(weights().sum() - 1.0) > 1e-12) throw std::invalid_argument("weights must sum to 1");
  if (basis && (basis->rows() != variances.size() || basis->cols() != variances.size()))
    throw std::invalid_argument("basis dimension mismatch");
}

ScoreModel make_isotropic_model(const Mat& means, const Vec& weights, double variance) {
  if ((weights.array() <= 0.0).any()) throw std::invalid_argument("weights must be positive");
  ScoreModel m;
  m.means = means;
  m.log_weights = (weights / weights.sum()).array().log().matrix();
  m.variances = Vec::Constant(means.cols(), variance);
  m.validate();
  return m;
}

ScoreModel make_model(const PriorSpec& spec) {
  if (spec.dim == 0 || spec.components == 0) throw std::invalid_argument("empty prior spec");
  if (!(spec.lo_fraction >= 0.0 && spec.lo_fraction <= 1.0))
    throw std::invalid_argument("lo_fraction outside [0,1]");
  const auto d = static_cast<Eigen::Index>(spec.dim);
  const auto K = static_cast<Eigen::Index>(spec.components);
  Rng rng(derive_seed(spec.seed, 0x6d6f64656cULL));

  ScoreModel m;
  m.means.resize(K, d);
  for (Eigen::Index k = 0; k < K; ++k) {
    Vec v = randn(rng, d);
    m.means.row(k) = spec.mean_scale * v.transpose() / v.norm();
  }
  m.log_weights = Vec::Constant(K, -std::log(static_cast<double>(K)));

  m.variances = Vec::Constant(d, spec.hi_variance);
  const auto n_lo = static_cast<Eigen::Index>(std::llround(spec.lo_fraction * static_cast<double>(d)));
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(d));
  for (Eigen::Index i = 0; i < d; ++i) idx[static_cast<std::size_t>(i)] = i;
  std::shuffle(idx.begin(), idx.end(), rng);
  for (Eigen::Index i = 0; i < n_lo; ++i) m.variances[idx[static_cast<std::size_t>(i)]] = spec.lo_variance;

  if (spec.rotate) m.basis = std::make_shared<const Mat>(random_orthogonal(rng, d));
  m.validate();
  return m;
}

ScoreModel resample_means(const ScoreModel& model, double mean_scale, std::uint64_t seed) {
  model.validate();
  Rng rng(derive_seed(seed, 0x70726f7879ULL));
  ScoreModel m = model;
  for (Eigen::Index k = 0; k < m.means.rows(); ++k) {
    Vec v = randn(rng, m.means.cols());
    m.means.row(k) = mean_scale * v.transpose() / v.norm();
  }
  return m;
}

namespace {

struct LevelTerms {
  std::shared_ptr<const Mat> logit_map;  // K x d
  Vec logit_offset;                      // K
  std::shared_ptr<const Mat> means_t;    // d x K
  Vec c_y;                               // d
  Vec c_m;                               // d
};

LevelTerms level_terms(const ScoreModel& model, double abar) {
  const double sa = std::sqrt(abar);
  const double sn = std::sqrt(1.0 - abar);
  const Vec vt = (abar * model.variances.array() + (1.0 - abar)).matrix();
  const Vec inv = vt.cwiseInverse();
  LevelTerms lt;
  lt.logit_map = std::make_shared<const Mat>(sa * model.means * inv.asDiagonal());
  lt.logit_offset = model.log_weights -
                    0.5 * abar * (model.means.array().square().matrix() * inv);
  lt.means_t = std::make_shared<const Mat>(model.means.transpose());
  lt.c_y = sn * inv;
  lt.c_m = -sn * sa * inv;
  return lt;
}

void check_level(const NoiseSchedule& s, std::size_t level) {
  if (level > s.T())
    throw std::out_of_range("level " + std::to_string(level) + " outside inference grid of T=" +
                            std::to_string(s.T()));
}

}  // namespace

Vec posterior_weights(const ScoreModel& model, const Vec& z, double abar) {
  const LevelTerms lt = level_terms(model, abar);
  const Vec y = model.basis ? Vec(model.basis->transpose() * z) : z;
  Vec logits = (*lt.logit_map) * y + lt.logit_offset;
  const double m = logits.maxCoeff();
  Vec w = (logits.array() - m).exp().matrix();
  return w / w.sum();
}

tg::Var predict_eps(const ScoreModel& model, tg::Var z, double abar) {
  if (z.size() != static_cast<Eigen::Index>(model.dim()))
    throw std::invalid_argument("latent dimension does not match the score model");
  const LevelTerms lt = level_terms(model, abar);
  tg::Var y = model.basis ? tg::affine(model.basis, z, true) : z;
  tg::Var w = tg::softmax(tg::affine(lt.logit_map, y, false, &lt.logit_offset));
  tg::Var mbar = tg::affine(lt.means_t, w);
  tg::Var ey = tg::diag_lincomb(lt.c_y, y, lt.c_m, mbar);
  return model.basis ? tg::affine(model.basis, ey) : ey;
}

Vec predict_eps(const ScoreModel& model, const Vec& z, std::size_t level,
                const NoiseSchedule& schedule) {
  check_level(schedule, level);
  tg::Tape tape;
  return predict_eps(model, tape.input(z), schedule.abar(level)).value();
}

tg::Var ddim_transfer(const ScoreModel& model, tg::Var z, double abar_from, double abar_to,
                      double abar_eval) {
  tg::Var e = predict_eps(model, z, abar_eval);
  const double r = std::sqrt(abar_to) / std::sqrt(abar_from);
  const double ce = std::sqrt(1.0 - abar_to) - std::sqrt(1.0 - abar_from) * r;
  return tg::lincomb(r, z, ce, e);
}

tg::Var denoise_step(const ScoreModel& model, tg::Var z, std::size_t t,
                     const NoiseSchedule& schedule, StepCounter* counter) {
  if (t == 0) throw std::out_of_range("denoise_step from the clean endpoint");
  check_level(schedule, t);
  if (counter) ++counter->denoisings;
  return ddim_transfer(model, z, schedule.abar(t), schedule.abar(t - 1), schedule.abar(t));
}

Vec denoise_step(const ScoreModel& model, const Vec& z, std::size_t t,
                 const NoiseSchedule& schedule, StepCounter* counter) {
  tg::Tape tape;
  return denoise_step(model, tape.input(z), t, schedule, counter).value();
}

tg::Var inverse_step(const ScoreModel& model, tg::Var z, std::size_t t,
                     const NoiseSchedule& schedule, StepCounter* counter) {
  if (t >= schedule.T()) throw std::out_of_range("inverse_step from the last level");
  if (counter) ++counter->inversions;
  return ddim_transfer(model, z, schedule.abar(t), schedule.abar(t + 1), schedule.abar(t));
}

Vec inverse_step(const ScoreModel& model, const Vec& z, std::size_t t,
                 const NoiseSchedule& schedule, StepCounter* counter) {
  tg::Tape tape;
  return inverse_step(model, tape.input(z), t, schedule, counter).value();
}

Trajectory invert_full(const ScoreModel& model, const Vec& z0, const NoiseSchedule& schedule,
                       StepCounter* counter) {
  Trajectory traj;
  traj.reserve(schedule.T() + 1);
  traj.push_back(z0);
  tg::Tape tape;
  tg::Var z = tape.input(z0);
  for (std::size_t t = 0; t < schedule.T(); ++t) {
    z = inverse_step(model, z, t, schedule, counter);
    traj.push_back(z.value());
  }
  return traj;
}

tg::Var invert_full(const ScoreModel& model, tg::Var z0, const NoiseSchedule& schedule) {
  tg::Var z = z0;
  for (std::size_t t = 0; t < schedule.T(); ++t) z = inverse_step(model, z, t, schedule);
  return z;
}

Vec invert_last(const ScoreModel& model, const Vec& z0, const NoiseSchedule& schedule) {
  tg::Tape tape;
  return invert_full(model, tape.input(z0), schedule).value();
}

Vec denoise_full(const ScoreModel& model, const Vec& zT, const NoiseSchedule& schedule,
                 StepCounter* counter) {
  tg::Tape tape;
  tg::Var z = tape.input(zT);
  for (std::size_t t = schedule.T(); t >= 1; --t) z = denoise_step(model, z, t, schedule, counter);
  return z.value();
}

}  // namespace lwm
