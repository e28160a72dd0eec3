#pragma once

// Weighted 1-D total-variation proximal operator:
//   argmin_u 1/2 ||u - y||^2 + sum_i lam_i |u_i - u_{i+1}|,  lam_i >= 0.
//
// Solved by the taut-string construction: the running sum of the solution is
// the shortest path through a tube of half-width lam_i around the running sum
// of y, pinned at both ends. A zero weight pins the string at that knot, so
// segments never fuse across it. Output is piecewise constant; block ids are
// returned because the Jacobian of the operator is averaging within blocks,
// which the unrolled solver backward needs.

#include "evex/common.hpp"

namespace evex {

struct tv_prox_result {
  vec z;
  std::vector<int> block;  // block id per coordinate, nondecreasing
};

inline tv_prox_result tv_prox_weighted(const vec& y, const vec& lam) {
  const int L = static_cast<int>(y.size());
  if (L > 0 && lam.size() + 1 != y.size() && !(L == 1 && lam.empty()))
    throw dimension_error("tv_prox_weighted: weight length must be L-1");
  for (double l : lam)
    if (l < 0.0) throw parameter_error("tv_prox_weighted: weights must be >= 0");
  if (L == 0) return {};
  if (L == 1) return {y, {0}};

  vec S(L + 1, 0.0);
  for (int i = 0; i < L; ++i) S[i + 1] = S[i] + y[i];
  vec U(L + 1), B(L + 1);
  U[0] = B[0] = 0.0;
  U[L] = B[L] = S[L];
  for (int j = 1; j < L; ++j) {
    U[j] = S[j] + lam[j - 1];
    B[j] = S[j] - lam[j - 1];
  }

  tv_prox_result res;
  res.z.assign(L, 0.0);
  res.block.assign(L, 0);

  using pt = std::pair<int, double>;
  auto slope = [](const pt& a, const pt& b) { return (b.second - a.second) / double(b.first - a.first); };

  int ax = 0;            // anchor knot
  double av = 0.0;       // anchor value
  int next_block = 0;
  std::vector<pt> uh, lh;  // convex minorant of U, concave majorant of B, both from the anchor

  auto push_upper = [&](const pt& p) {
    uh.push_back(p);
    while (uh.size() >= 2) {
      size_t n = uh.size();
      if (n >= 3 && slope(uh[n - 3], uh[n - 2]) >= slope(uh[n - 2], uh[n - 1]))
        uh.erase(uh.begin() + (n - 2));
      else if (n == 2 && slope({ax, av}, uh[0]) >= slope(uh[0], uh[1]))
        uh.erase(uh.begin());
      else
        break;
    }
  };
  auto push_lower = [&](const pt& p) {
    lh.push_back(p);
    while (lh.size() >= 2) {
      size_t n = lh.size();
      if (n >= 3 && slope(lh[n - 3], lh[n - 2]) <= slope(lh[n - 2], lh[n - 1]))
        lh.erase(lh.begin() + (n - 2));
      else if (n == 2 && slope({ax, av}, lh[0]) <= slope(lh[0], lh[1]))
        lh.erase(lh.begin());
      else
        break;
    }
  };
  auto emit = [&](int bx, double value) {
    for (int t = ax; t < bx; ++t) {
      res.z[t] = value;
      res.block[t] = next_block;
    }
    ++next_block;
  };

  for (int j = 1; j <= L; ++j) {
    push_upper({j, U[j]});
    push_lower({j, B[j]});
    // While the feasible slope fan from the anchor is empty the string must
    // touch whichever bound comes first; fix the segment and restart there.
    while (!uh.empty() && !lh.empty()) {
      double su = slope({ax, av}, uh.front());
      double sl = slope({ax, av}, lh.front());
      if (su >= sl) break;
      if (uh.front().first < lh.front().first) {
        pt b = uh.front();
        uh.erase(uh.begin());
        emit(b.first, su);
        ax = b.first;
        av = b.second;
        // the lower hull is stale relative to the new anchor
        lh.clear();
        for (int x = ax + 1; x <= j; ++x) push_lower({x, B[x]});
      } else {
        pt b = lh.front();
        lh.erase(lh.begin());
        emit(b.first, sl);
        ax = b.first;
        av = b.second;
        uh.clear();
        for (int x = ax + 1; x <= j; ++x) push_upper({x, U[x]});
      }
    }
  }
  if (ax < L) emit(L, (S[L] - av) / double(L - ax));
  return res;
}

}  // namespace evex
