#pragma once

#include "bmd/matrix.hpp"

#include <vector>

namespace bmd {

struct PrCurve {
  /// Ascending score thresholds; a score >= threshold counts as positive.
  std::vector<double> thresholds;
  std::vector<double> precision;
  std::vector<double> recall;
};

double rmse(const Vec &x, const Vec &y);
double cosine_sim(const Vec &x, const Vec &y);
double pearson_sim(const Vec &x, const Vec &y);
/// Ranks starting at 1; tied values share their average rank.
Vec average_ranks(const Vec &x);
/// Spearman correlation with average ranks for ties.
double rank_ic(const Vec &alpha, const Vec &returns);
/// Thresholds below the largest one that reaches full recall are dropped.
PrCurve pr_curve(const Vec &scores, const std::vector<bool> &labels);

} // namespace bmd
