#include "lwm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace lwm {

double auc(const std::vector<double>& positives, const std::vector<double>& negatives) {
  if (positives.empty() || negatives.empty())
    throw std::invalid_argument("auc needs both positive and negative samples");
  struct Item {
    double s;
    bool pos;
  };
  std::vector<Item> items;
  items.reserve(positives.size() + negatives.size());
  for (double s : positives) items.push_back({s, true});
  for (double s : negatives) items.push_back({s, false});
  for (const auto& it : items)
    if (!std::isfinite(it.s)) throw std::invalid_argument("auc score is not finite");
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.s < b.s; });

  // midranks, 1-based
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < items.size()) {
    std::size_t j = i;
    while (j < items.size() && items[j].s == items[i].s) ++j;
    const double mid = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t q = i; q < j; ++q)
      if (items[q].pos) rank_sum += mid;
    i = j;
  }
  const double np = static_cast<double>(positives.size());
  const double nn = static_cast<double>(negatives.size());
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

double auc(const std::vector<ScoreSample>& samples) {
  std::vector<double> pos, neg;
  for (const auto& s : samples) (s.label ? pos : neg).push_back(s.score);
  return auc(pos, neg);
}

double tpr_at_threshold(const std::vector<ScoreSample>& samples, double threshold, Direction dir) {
  std::size_t n = 0, hit = 0;
  for (const auto& s : samples) {
    if (!s.label) continue;
    ++n;
    if (dir == Direction::Above ? s.score > threshold : s.score < threshold) ++hit;
  }
  return n == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(n);
}

Pca2 pca2(const std::vector<Vec>& latents) {
  if (latents.size() < 3) throw std::invalid_argument("pca2 needs at least 3 latents");
  const Eigen::Index d = latents.front().size();
  const Eigen::Index n = static_cast<Eigen::Index>(latents.size());
  if (d < 2) throw std::invalid_argument("pca2 needs dimension >= 2");
  Mat X(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (latents[i].size() != d) throw std::invalid_argument("pca2 latents differ in size");
    X.row(i) = latents[i].transpose();
  }
  Pca2 out;
  out.mean = X.colwise().mean().transpose();
  X.rowwise() -= out.mean.transpose();
  const Mat C = (X.transpose() * X) / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Mat> es(C);
  if (es.info() != Eigen::Success) throw std::runtime_error("pca2 eigendecomposition failed");
  const Vec& ev = es.eigenvalues();  // ascending
  const double top = ev(d - 1);
  if (!(top > 0.0)) throw std::invalid_argument("pca2 input has no variance");

  out.components.resize(d, 2);
  for (int c = 0; c < 2; ++c) {
    Vec u = es.eigenvectors().col(d - 1 - c);
    for (Eigen::Index j = 0; j < d; ++j) {
      if (std::abs(u(j)) > 1e-12) {
        if (u(j) < 0.0) u = -u;
        break;
      }
    }
    out.components.col(c) = u;
    out.explained(c) = std::max(0.0, ev(d - 1 - c));
  }
  out.total_variance = C.trace();
  out.points.reserve(latents.size());
  for (Eigen::Index i = 0; i < n; ++i)
    out.points.push_back(out.components.transpose() * X.row(i).transpose());
  return out;
}

Eigen::Vector2d pca_project(const Pca2& pca, const Vec& z) {
  return pca.components.transpose() * (z - pca.mean);
}

LinearProbe fit_linear_probe(const std::vector<Eigen::Vector2d>& points,
                             const std::vector<int>& labels) {
  if (points.size() != labels.size()) throw std::invalid_argument("probe: size mismatch");
  Eigen::Vector2d m[2] = {Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero()};
  double n[2] = {0.0, 0.0};
  for (std::size_t i = 0; i < points.size(); ++i) {
    const int c = labels[i] ? 1 : 0;
    m[c] += points[i];
    n[c] += 1.0;
  }
  if (n[0] == 0.0 || n[1] == 0.0) throw std::invalid_argument("probe needs both classes");
  m[0] /= n[0];
  m[1] /= n[1];
  Eigen::Matrix2d S = Eigen::Matrix2d::Zero();
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Eigen::Vector2d r = points[i] - m[labels[i] ? 1 : 0];
    S += r * r.transpose();
  }
  S /= static_cast<double>(points.size());
  // small ridge keeps degenerate clouds solvable
  S += 1e-9 * (S.trace() + 1.0) * Eigen::Matrix2d::Identity();
  LinearProbe p;
  p.w = S.ldlt().solve(m[1] - m[0]);
  p.b = -p.w.dot(0.5 * (m[0] + m[1]));
  return p;
}

double probe_accuracy(const LinearProbe& probe, const std::vector<Eigen::Vector2d>& points,
                      const std::vector<int>& labels) {
  if (points.empty()) return 0.0;
  std::size_t ok = 0;
  for (std::size_t i = 0; i < points.size(); ++i)
    if (probe.predict(points[i]) == (labels[i] ? 1 : 0)) ++ok;
  return static_cast<double>(ok) / static_cast<double>(points.size());
}

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

}  // namespace lwm
