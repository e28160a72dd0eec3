#pragma once

// Differentiable selection relaxations: sparsemax, fusedmax, gumbel-sigmoid,
// hard Kumaraswamy, and the score-function (REINFORCE) estimator, plus the
// finite-difference checker the gradcheck suites are built on.

#include <algorithm>
#include <functional>
#include <numeric>

#include "evex/tv.hpp"

namespace evex {

// Euclidean projection onto the probability simplex (Held et al. / sparsemax).
inline vec sparsemax(const vec& z) {
  if (z.empty()) throw size_error("sparsemax: empty input");
  vec u = z;
  std::sort(u.begin(), u.end(), std::greater<double>());
  double csum = 0.0, tau = 0.0;
  int support = 0;
  for (size_t j = 0; j < u.size(); ++j) {
    csum += u[j];
    double t = (csum - 1.0) / double(j + 1);
    if (u[j] - t > 0.0) {
      support = static_cast<int>(j + 1);
      tau = t;
    }
  }
  vec p(z.size());
  for (size_t i = 0; i < z.size(); ++i) p[i] = std::max(z[i] - tau, 0.0);
  (void)support;
  return p;
}

// J^T u for sparsemax at output p: support coordinates get u_i - mean_S(u).
inline vec sparsemax_backward(const vec& p, const vec& upstream) {
  if (p.size() != upstream.size()) throw dimension_error("sparsemax_backward: length mismatch");
  double sum = 0.0;
  int n = 0;
  for (size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) {
      sum += upstream[i];
      ++n;
    }
  double mean = n > 0 ? sum / n : 0.0;
  vec g(p.size(), 0.0);
  for (size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) g[i] = upstream[i] - mean;
  return g;
}

struct fusedmax_cache {
  std::vector<int> block;  // TV prox fusion pattern
  vec p;                   // output
};

// fusedmax = sparsemax composed with the uniform-weight TV prox.
inline vec fusedmax(const vec& z, double lambda_tv, fusedmax_cache* cache = nullptr) {
  if (lambda_tv < 0.0) throw parameter_error("fusedmax: lambda must be >= 0");
  vec lam(z.size() > 1 ? z.size() - 1 : 0, lambda_tv);
  tv_prox_result tv = tv_prox_weighted(z, lam);
  vec p = sparsemax(tv.z);
  if (cache) {
    cache->block = std::move(tv.block);
    cache->p = p;
  }
  return p;
}

inline vec fusedmax_backward(const fusedmax_cache& cache, const vec& upstream) {
  vec g = sparsemax_backward(cache.p, upstream);
  // block averaging from the TV prox
  vec out(g.size(), 0.0);
  size_t i = 0;
  while (i < g.size()) {
    size_t j = i;
    double s = 0.0;
    while (j < g.size() && cache.block[j] == cache.block[i]) s += g[j++];
    double m = s / double(j - i);
    for (size_t k = i; k < j; ++k) out[k] = m;
    i = j;
  }
  return out;
}

// Concrete relaxation of a Bernoulli gate: sigmoid((logit + g)/temperature)
// with logistic noise g.
inline double gumbel_sigmoid_sample(double logit, double temperature, rng_stream& rng) {
  if (temperature <= 0.0) throw parameter_error("gumbel_sigmoid_sample: temperature must be > 0");
  return sigmoid((logit + rng.logistic()) / temperature);
}

// Kumaraswamy stretched to (lo, hi) and clipped to [0,1]; a point mass sits
// on each end of the unit interval.
struct hardkuma_params {
  double a = 1.0;
  double b = 1.0;
  double lo = -0.1;
  double hi = 1.1;
};

inline void check_hardkuma(const hardkuma_params& p) {
  if (p.a <= 0.0 || p.b <= 0.0) throw parameter_error("hardkuma: a and b must be > 0");
  if (!(p.lo < 0.0 && p.hi > 1.0)) throw parameter_error("hardkuma: need lo < 0 < 1 < hi");
}

inline double kuma_cdf(double x, double a, double b) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  return 1.0 - std::pow(1.0 - std::pow(x, a), b);
}

struct hardkuma_draw {
  double z = 0.0;      // clipped sample
  double dz_da = 0.0;  // pathwise derivatives, zero when the clip is active
  double dz_db = 0.0;
};

inline hardkuma_draw hardkuma_sample(const hardkuma_params& p, double u) {
  check_hardkuma(p);
  if (u <= 0.0) u = 1e-12;
  if (u >= 1.0) u = 1.0 - 1e-12;
  double w = 1.0 - std::pow(1.0 - u, 1.0 / p.b);
  w = std::min(std::max(w, 1e-300), 1.0);
  double k = std::pow(w, 1.0 / p.a);
  double t = p.lo + (p.hi - p.lo) * k;
  hardkuma_draw d;
  d.z = clip01(t);
  if (t > 0.0 && t < 1.0) {
    double dk_da = -k * std::log(w) / (p.a * p.a);
    double dw_db = std::pow(1.0 - u, 1.0 / p.b) * std::log(1.0 - u) / (p.b * p.b);
    double dk_db = (1.0 / p.a) * std::pow(w, 1.0 / p.a - 1.0) * dw_db;
    d.dz_da = (p.hi - p.lo) * dk_da;
    d.dz_db = (p.hi - p.lo) * dk_db;
  }
  return d;
}

inline double hardkuma_sample(const hardkuma_params& p, rng_stream& rng) {
  return hardkuma_sample(p, rng.uniform_open()).z;
}

// E[number of nonzero gates] for one gate: 1 - P(z = 0).
inline double hardkuma_expected_l0(const hardkuma_params& p) {
  check_hardkuma(p);
  return 1.0 - kuma_cdf((0.0 - p.lo) / (p.hi - p.lo), p.a, p.b);
}

inline double hardkuma_p_zero(const hardkuma_params& p) {
  check_hardkuma(p);
  return kuma_cdf((0.0 - p.lo) / (p.hi - p.lo), p.a, p.b);
}

inline double hardkuma_expected_l0_grad_a(const hardkuma_params& p) {
  check_hardkuma(p);
  double t = (0.0 - p.lo) / (p.hi - p.lo);
  double ta = std::pow(t, p.a);
  return -p.b * std::pow(1.0 - ta, p.b - 1.0) * ta * std::log(t);
}

inline double hardkuma_p_one(const hardkuma_params& p) {
  check_hardkuma(p);
  return 1.0 - kuma_cdf((1.0 - p.lo) / (p.hi - p.lo), p.a, p.b);
}

// Score-function estimator for Bernoulli gates; returns the reward-ascent
// direction (reward - baseline - l0_weight * sum mu) * d log p(mask) / d logit.
inline vec reinforce_gradient(const vec& logits, const vec& mask, double reward, double baseline,
                              double l0_weight = 0.0) {
  if (logits.size() != mask.size()) throw dimension_error("reinforce_gradient: length mismatch");
  double total = std::accumulate(mask.begin(), mask.end(), 0.0);
  double adv = reward - baseline - l0_weight * total;
  vec g(logits.size());
  for (size_t i = 0; i < logits.size(); ++i) g[i] = adv * (mask[i] - sigmoid(logits[i]));
  return g;
}

// Central-difference gradient check. Per-coordinate relative error uses
// max(1, |analytic|) in the denominator; returns the worst coordinate.
inline double finite_difference_check(const std::function<double(const vec&)>& f, const vec& x,
                                      const vec& analytic, double h = 1e-5) {
  if (x.size() != analytic.size()) throw dimension_error("finite_difference_check: length mismatch");
  double worst = 0.0;
  vec xp = x;
  for (size_t i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + h;
    double fp = f(xp);
    xp[i] = x[i] - h;
    double fm = f(xp);
    xp[i] = x[i];
    double fd = (fp - fm) / (2.0 * h);
    double err = std::fabs(fd - analytic[i]) / std::max(1.0, std::fabs(analytic[i]));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace evex
