#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lwm/tensorgrad.hpp"

namespace lwm {

struct ScoreSample {
  bool label = false;  // true = watermark-bearing
  double score = 0.0;  // larger = more watermark-like
  std::string group;
};

// Mann-Whitney AUC, ties count 1/2. Throws unless both labels are present.
double auc(const std::vector<ScoreSample>& samples);
double auc(const std::vector<double>& positives, const std::vector<double>& negatives);

enum class Direction { Above, Below };

// Fraction of positives strictly on the detect side of the threshold.
double tpr_at_threshold(const std::vector<ScoreSample>& samples, double threshold, Direction dir);

struct Pca2 {
  Vec mean;
  Mat components;         // d x 2, descending eigenvalue
  Eigen::Vector2d explained;
  double total_variance = 0.0;
  std::vector<Eigen::Vector2d> points;
};

// Top-2 principal directions of the sample covariance; first nonzero loading
// of each direction is positive. Needs >= 3 latents and nonconstant data.
Pca2 pca2(const std::vector<Vec>& latents);
Eigen::Vector2d pca_project(const Pca2& pca, const Vec& z);

// Fisher discriminant on 2-D points: label 1 when w.p + b > 0.
struct LinearProbe {
  Eigen::Vector2d w = Eigen::Vector2d::Zero();
  double b = 0.0;
  int predict(const Eigen::Vector2d& p) const { return w.dot(p) + b > 0.0 ? 1 : 0; }
};

LinearProbe fit_linear_probe(const std::vector<Eigen::Vector2d>& points, const std::vector<int>& labels);
double probe_accuracy(const LinearProbe& probe, const std::vector<Eigen::Vector2d>& points,
                      const std::vector<int>& labels);

double mean_of(const std::vector<double>& xs);

}  // namespace lwm
