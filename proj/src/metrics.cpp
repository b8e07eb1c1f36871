#include "bmd/metrics.hpp"

#include "bmd/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace bmd {

namespace {

void same_size(const Vec &x, const Vec &y) {
  if (x.size() != y.size())
    throw DimensionError("vectors differ in length");
  if (x.size() == 0)
    throw DimensionError("vectors are empty");
}

} // namespace

double rmse(const Vec &x, const Vec &y) {
  same_size(x, y);
  return std::sqrt((x - y).squaredNorm() / static_cast<double>(x.size()));
}

double cosine_sim(const Vec &x, const Vec &y) {
  same_size(x, y);
  double nx = x.norm(), ny = y.norm();
  if (nx == 0.0 || ny == 0.0)
    throw DegenerateError("cosine similarity undefined for a zero vector");
  return std::clamp(x.dot(y) / (nx * ny), -1.0, 1.0);
}

double pearson_sim(const Vec &x, const Vec &y) {
  same_size(x, y);
  Vec cx = x.array() - x.mean();
  Vec cy = y.array() - y.mean();
  double nx = cx.norm(), ny = cy.norm();
  if (nx == 0.0 || ny == 0.0)
    throw DegenerateError("Pearson similarity undefined for a constant vector");
  return std::clamp(cx.dot(cy) / (nx * ny), -1.0, 1.0);
}

Vec average_ranks(const Vec &x) {
  std::vector<Index> idx(static_cast<std::size_t>(x.size()));
  std::iota(idx.begin(), idx.end(), Index{0});
  std::stable_sort(idx.begin(), idx.end(), [&](Index a, Index b) { return x(a) < x(b); });
  Vec r(x.size());
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x(idx[j + 1]) == x(idx[i]))
      ++j;
    double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t)
      r(idx[t]) = avg;
    i = j + 1;
  }
  return r;
}

double rank_ic(const Vec &alpha, const Vec &returns) {
  same_size(alpha, returns);
  return pearson_sim(average_ranks(alpha), average_ranks(returns));
}

PrCurve pr_curve(const Vec &scores, const std::vector<bool> &labels) {
  if (static_cast<Index>(labels.size()) != scores.size() || labels.empty())
    throw DimensionError("scores and labels differ in length");
  std::size_t pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), true));
  if (pos == 0 || pos == labels.size())
    throw DegenerateError("precision-recall undefined when all labels are equal");
  std::vector<double> th(scores.data(), scores.data() + scores.size());
  std::sort(th.begin(), th.end());
  th.erase(std::unique(th.begin(), th.end()), th.end());
  PrCurve c;
  std::size_t first_full = 0;
  for (std::size_t t = 0; t < th.size(); ++t) {
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (scores(static_cast<Index>(i)) >= th[t])
        (labels[i] ? tp : fp) += 1;
    c.thresholds.push_back(th[t]);
    c.precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
    c.recall.push_back(static_cast<double>(tp) / static_cast<double>(pos));
    if (tp == pos)
      first_full = t;
  }
  auto cut = static_cast<std::ptrdiff_t>(first_full);
  c.thresholds.erase(c.thresholds.begin(), c.thresholds.begin() + cut);
  c.precision.erase(c.precision.begin(), c.precision.begin() + cut);
  c.recall.erase(c.recall.begin(), c.recall.begin() + cut);
  return c;
}

} // namespace bmd
