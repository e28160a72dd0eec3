#pragma once

// Chain factor graph over sentence-selection variables mu in [0,1]^L.
// score(mu; s, r) = sum_i s_i mu_i + sum_i r_i mu_i mu_{i+1}
// subject to an optional cardinality budget sum mu <= K. Pair weights are
// nonnegative (they reward contiguous selections); document boundaries are
// encoded by zeroing the pair weight on the crossing edge.

#include <algorithm>
#include <limits>

#include "evex/common.hpp"

namespace evex {

struct importance_scores {
  vec unary;  // s, length L
  vec pair;   // r, length L-1, all entries >= 0
};

enum class mask_mode { relaxed, hard };

struct selection_mask {
  vec values;  // mu in [0,1]^L; hard mode means every entry is 0 or 1
  mask_mode mode = mask_mode::relaxed;
};

struct factor_graph_spec {
  int length = 0;
  int budget_k = 0;     // 0 <= K <= L
  bool use_pair = true;
};

inline void check_scores(const importance_scores& sc) {
  if (sc.pair.size() + 1 != sc.unary.size() && !(sc.unary.size() <= 1 && sc.pair.empty()))
    throw dimension_error("importance_scores: pair length must be L-1");
  for (double r : sc.pair)
    if (r < 0.0) throw parameter_error("importance_scores: pair weights must be >= 0");
}

inline void check_spec(const importance_scores& sc, const factor_graph_spec& spec) {
  check_scores(sc);
  if (spec.length != static_cast<int>(sc.unary.size()))
    throw dimension_error("factor_graph_spec: length mismatch");
  if (spec.budget_k < 0 || spec.budget_k > spec.length)
    throw parameter_error("factor_graph_spec: budget must satisfy 0 <= K <= L");
}

inline double score_assignment(const vec& mu, const importance_scores& sc, bool use_pair = true) {
  check_scores(sc);
  if (mu.size() != sc.unary.size()) throw dimension_error("score_assignment: mask length mismatch");
  double total = 0.0;
  for (size_t i = 0; i < mu.size(); ++i) total += sc.unary[i] * mu[i];
  if (use_pair)
    for (size_t i = 0; i + 1 < mu.size(); ++i) total += sc.pair[i] * mu[i] * mu[i + 1];
  return total;
}

struct map_result {
  selection_mask mask;
  double score = 0.0;
};

// Exhaustive MAP. Ties resolve to the lexicographically smallest mask, i.e.
// the comparison is decided at the earliest position where two optima differ.
inline map_result map_brute_force(const importance_scores& sc, const factor_graph_spec& spec) {
  check_spec(sc, spec);
  const int L = spec.length;
  if (L > 24) throw size_error("map_brute_force: L > 24");
  vec best;
  double best_score = -std::numeric_limits<double>::infinity();
  vec mu(L, 0.0);
  for (uint64_t m = 0; m < (1ull << L); ++m) {
    int count = 0;
    for (int i = 0; i < L; ++i) {
      mu[i] = (m >> i) & 1 ? 1.0 : 0.0;
      count += (m >> i) & 1;
    }
    if (count > spec.budget_k) continue;
    double s = score_assignment(mu, sc, spec.use_pair);
    if (s > best_score ||
        (s == best_score && std::lexicographical_compare(mu.begin(), mu.end(), best.begin(), best.end()))) {
      best_score = s;
      best = mu;
    }
  }
  return {selection_mask{best, mask_mode::hard}, best_score};
}

// Exact MAP by dynamic programming over (position, budget used, previous bit).
// O(L*K) states. Reconstruction prefers mu_i = 0 on ties, which reproduces
// the brute-force lexicographic tie-break.
inline map_result map_exact_dp(const importance_scores& sc, const factor_graph_spec& spec) {
  check_spec(sc, spec);
  const int L = spec.length;
  const int K = spec.budget_k;
  if (L == 0) return {selection_mask{{}, mask_mode::hard}, 0.0};

  // V[i][k][b]: best suffix score from position i with k budget left and
  // previous bit b; edge (i-1,i) contributes r_{i-1} when both bits are set.
  std::vector<vec> V(static_cast<size_t>(L) + 1, vec(2 * (K + 1), 0.0));
  auto at = [&](int i, int k, int b) -> double& { return V[i][2 * k + b]; };
  for (int i = L - 1; i >= 0; --i) {
    for (int k = 0; k <= K; ++k) {
      for (int b = 0; b < 2; ++b) {
        double skip = at(i + 1, k, 0);
        double take = -std::numeric_limits<double>::infinity();
        if (k >= 1) {
          double edge = (b == 1 && i > 0 && spec.use_pair) ? sc.pair[i - 1] : 0.0;
          take = sc.unary[i] + edge + at(i + 1, k - 1, 1);
        }
        at(i, k, b) = std::max(skip, take);
      }
    }
  }

  vec mu(L, 0.0);
  int k = K, b = 0;
  for (int i = 0; i < L; ++i) {
    double skip = at(i + 1, k, 0);
    // ties choose 0: lexicographically smallest optimum
    if (skip >= at(i, k, b)) {
      mu[i] = 0.0;
      b = 0;
    } else {
      mu[i] = 1.0;
      --k;
      b = 1;
    }
  }
  return {selection_mask{mu, mask_mode::hard}, score_assignment(mu, sc, spec.use_pair)};
}

// Euclidean projection onto {mu in [0,1]^L : sum mu <= k}. If clipping to the
// box already satisfies the budget that is the answer; otherwise the optimum
// is clip(v - tau) with tau > 0 found by bisection on the monotone function
// g(tau) = sum clip(v - tau) - k.
inline vec budget_projection(const vec& v, double k, double tau_tol = 1e-10, double* tau_out = nullptr) {
  if (k < 0.0) throw parameter_error("budget_projection: k must be >= 0");
  vec w(v.size());
  double total = 0.0;
  for (size_t i = 0; i < v.size(); ++i) {
    w[i] = clip01(v[i]);
    total += w[i];
  }
  if (total <= k) {
    if (tau_out) *tau_out = 0.0;
    return w;
  }
  double lo = 0.0, hi = 0.0;
  for (double x : v) hi = std::max(hi, x);
  auto mass = [&](double tau) {
    double s = 0.0;
    for (double x : v) s += clip01(x - tau);
    return s;
  };
  for (int it = 0; it < 200 && hi - lo > tau_tol; ++it) {
    double mid = 0.5 * (lo + hi);
    if (mass(mid) > k)
      lo = mid;
    else
      hi = mid;
  }
  double tau = hi;  // g(hi) <= k holds by the bisection invariant
  if (tau_out) *tau_out = tau;
  for (size_t i = 0; i < v.size(); ++i) w[i] = clip01(v[i] - tau);
  return w;
}

}  // namespace evex
