#pragma once

#include "bmd/errors.hpp"
#include "bmd/gibbs.hpp"
#include "bmd/matrix.hpp"
#include "bmd/rmf.hpp"
#include "work.hpp"

#include <cmath>

namespace bmd::detail {

inline Mat drop_col(const Mat &W, Index k) {
  Mat out(W.rows(), W.cols() - 1);
  for (Index c = 0, o = 0; c < W.cols(); ++c)
    if (c != k)
      out.col(o++) = W.col(c);
  return out;
}

// Volume-prior terms for column k that do not depend on row m.
struct VolumeCache {
  Mat Wk;  // W without column k
  Mat adj; // adjugate of Wk' Wk
  double det = 1.0;
  Vec g; // Wk' w_k
};

inline VolumeCache volume_cache(const Mat &W, Index k) {
  VolumeCache c;
  c.Wk = drop_col(W, k);
  auto [d, adj] = det_adjugate(c.Wk.transpose() * c.Wk);
  c.det = d;
  c.adj = std::move(adj);
  c.g = c.Wk.transpose() * W.col(k);
  return c;
}

inline NormalPost gvg_post(const VolumeCache &c, Index m, double wmk, const EntryStats &s, double sigma2,
                    double gamma) {
  Vec wm = c.Wk.row(m).transpose();
  double quad = c.det - wm.dot(c.adj * wm);
  Vec others = c.g - wm * wmk;
  double lin = wm.dot(c.adj * others);
  double prec = s.scc / sigma2 + gamma * quad;
  if (!(prec > 0.0) || !std::isfinite(prec))
    throw DegenerateError("volume prior gives a non-positive posterior variance; reduce gamma");
  double var = 1.0 / prec;
  return {var * (gamma * lin + s.scr / sigma2), var};
}

} // namespace bmd::detail
