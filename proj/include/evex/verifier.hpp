#pragma once

// Verdict heads. Both consume a claim vector, per-sentence vectors, and a
// selection mask, and emit a distribution over verdict labels.
//
// The feedforward head pools masked sentences into one evidence vector. The
// graph head builds one node per selected sentence, scores nodes with a
// learned readout, and pools with softmax attention; nodes are processed in
// a canonical order so any input permutation yields bitwise equal output.

#include "evex/model.hpp"

namespace evex {

inline vec softmax(const vec& z) {
  if (z.empty()) throw size_error("softmax: empty input");
  double top = *std::max_element(z.begin(), z.end());
  vec p(z.size());
  double total = 0.0;
  for (size_t i = 0; i < z.size(); ++i) {
    p[i] = std::exp(z[i] - top);
    total += p[i];
  }
  for (double& x : p) x /= total;
  return p;
}

constexpr double nll_eps = 1e-12;

inline double nll_loss(const vec& probs, int gold) {
  if (gold < 0 || gold >= static_cast<int>(probs.size())) throw parameter_error("nll_loss: label out of range");
  return -std::log(probs[gold] + nll_eps);
}

inline vec nll_grad_logits(const vec& probs, int gold) {
  if (gold < 0 || gold >= static_cast<int>(probs.size()))
    throw parameter_error("nll_grad_logits: label out of range");
  const double c = probs[gold] / (probs[gold] + nll_eps);
  vec d(probs.size());
  for (size_t j = 0; j < probs.size(); ++j) d[j] = c * (probs[j] - (static_cast<int>(j) == gold ? 1.0 : 0.0));
  return d;
}

struct verify_grads {
  vec claim;
  std::vector<vec> sents;
  vec mu;
};

namespace detail {

inline void check_verify_inputs(const model_params& m, const vec& claim, const std::vector<vec>& sents,
                                const vec& mu) {
  const int d = m.cfg.dim;
  if (static_cast<int>(claim.size()) != d) throw dimension_error("verify: claim dimension mismatch");
  if (sents.size() != mu.size()) throw dimension_error("verify: one mask entry per sentence required");
  for (const auto& s : sents)
    if (static_cast<int>(s.size()) != d) throw dimension_error("verify: sentence dimension mismatch");
}

}  // namespace detail

// ---- feedforward head ----

struct mlp_cache {
  vec claim, mu;
  std::vector<vec> sents;
  double denom = 1.0;
  bool denom_active = false;  // mask mass exceeded 1, so the divisor moves with it
  vec evidence, input, hidden, probs;
};

inline vec mlp_verify(model_params& m, const vec& claim, const std::vector<vec>& sents, const vec& mu,
                      mlp_cache* cache = nullptr) {
  detail::check_verify_inputs(m, claim, sents, mu);
  const int d = m.cfg.dim;
  vec pooled(d, 0.0);
  double mass = 0.0;
  for (size_t i = 0; i < sents.size(); ++i) {
    mass += mu[i];
    for (int j = 0; j < d; ++j) pooled[j] += mu[i] * sents[i][j];
  }
  const double denom = std::max(1.0, mass);
  vec evidence(d);
  for (int j = 0; j < d; ++j) evidence[j] = pooled[j] / denom;

  vec input(2 * d);
  std::copy(claim.begin(), claim.end(), input.begin());
  std::copy(evidence.begin(), evidence.end(), input.begin() + d);

  vec hidden;
  matvec(m.w1, input, hidden);
  for (size_t i = 0; i < hidden.size(); ++i) hidden[i] = std::tanh(hidden[i] + m.b1.v[i]);
  vec logits;
  matvec(m.w2, hidden, logits);
  for (size_t i = 0; i < logits.size(); ++i) logits[i] += m.b2.v[i];
  vec probs = softmax(logits);

  if (cache) {
    cache->claim = claim;
    cache->mu = mu;
    cache->sents = sents;
    cache->denom = denom;
    cache->denom_active = mass > 1.0;
    cache->evidence = evidence;
    cache->input = input;
    cache->hidden = hidden;
    cache->probs = probs;
  }
  return probs;
}

inline verify_grads mlp_backward(model_params& m, const mlp_cache& c, const vec& d_logits) {
  const int d = m.cfg.dim;
  outer_acc(m.w2, d_logits, c.hidden);
  for (size_t i = 0; i < d_logits.size(); ++i) m.b2.g[i] += d_logits[i];
  vec d_hidden;
  matvec_t(m.w2, d_logits, d_hidden);
  for (size_t i = 0; i < d_hidden.size(); ++i) d_hidden[i] *= 1.0 - c.hidden[i] * c.hidden[i];
  outer_acc(m.w1, d_hidden, c.input);
  for (size_t i = 0; i < d_hidden.size(); ++i) m.b1.g[i] += d_hidden[i];
  vec d_input;
  matvec_t(m.w1, d_hidden, d_input);

  verify_grads out;
  out.claim.assign(d_input.begin(), d_input.begin() + d);
  vec d_evidence(d_input.begin() + d, d_input.end());

  const size_t n = c.sents.size();
  out.sents.assign(n, vec(d, 0.0));
  out.mu.assign(n, 0.0);
  double denom_term = 0.0;
  if (c.denom_active) {
    for (int j = 0; j < d; ++j) denom_term -= c.evidence[j] * d_evidence[j];
    denom_term /= c.denom;
  }
  for (size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int j = 0; j < d; ++j) {
      acc += c.sents[i][j] * d_evidence[j];
      out.sents[i][j] = c.mu[i] / c.denom * d_evidence[j];
    }
    out.mu[i] = acc / c.denom + denom_term;
  }
  return out;
}

// ---- graph head ----

struct graph_cache {
  vec claim, mu;
  std::vector<vec> sents;
  std::vector<int> nodes;  // selected sentence indices in canonical order; empty means fallback node
  std::vector<vec> node_in, hidden;
  vec scores, alpha, pooled, probs;
};

inline vec graph_verify(model_params& m, const vec& claim, const std::vector<vec>& sents, const vec& mu,
                        graph_cache* cache = nullptr) {
  detail::check_verify_inputs(m, claim, sents, mu);
  const int d = m.cfg.dim;

  std::vector<int> nodes;
  for (size_t i = 0; i < mu.size(); ++i)
    if (mu[i] > 0.0) nodes.push_back(static_cast<int>(i));

  std::vector<vec> node_in;
  if (nodes.empty()) {
    vec fallback(2 * d, 0.0);
    std::copy(claim.begin(), claim.end(), fallback.begin());
    node_in.push_back(std::move(fallback));
  } else {
    for (int i : nodes) {
      vec in(2 * d);
      std::copy(claim.begin(), claim.end(), in.begin());
      for (int j = 0; j < d; ++j) in[d + j] = mu[i] * sents[i][j];
      node_in.push_back(std::move(in));
    }
  }

  const size_t n = node_in.size();
  std::vector<vec> hidden(n);
  vec scores(n);
  for (size_t p = 0; p < n; ++p) {
    matvec(m.vw1, node_in[p], hidden[p]);
    for (size_t i = 0; i < hidden[p].size(); ++i) hidden[p][i] = std::tanh(hidden[p][i] + m.vb1.v[i]);
    scores[p] = dot(m.vq.v, hidden[p]);
  }

  // canonical node order: readout score, then node input values
  std::vector<int> order(n);
  for (size_t p = 0; p < n; ++p) order[p] = static_cast<int>(p);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (scores[a] != scores[b]) return scores[a] < scores[b];
    return node_in[a] < node_in[b];
  });
  auto permute_nodes = [&](auto& v) {
    std::remove_reference_t<decltype(v)> out;
    out.reserve(n);
    for (int p : order) out.push_back(std::move(v[p]));
    v = std::move(out);
  };
  permute_nodes(node_in);
  permute_nodes(hidden);
  {
    vec s(n);
    for (size_t p = 0; p < n; ++p) s[p] = scores[order[p]];
    scores = std::move(s);
  }
  if (!nodes.empty()) {
    std::vector<int> reord(n);
    for (size_t p = 0; p < n; ++p) reord[p] = nodes[order[p]];
    nodes = std::move(reord);
  }

  vec alpha = softmax(scores);
  vec pooled(m.cfg.hidden, 0.0);
  for (size_t p = 0; p < n; ++p)
    for (int i = 0; i < m.cfg.hidden; ++i) pooled[i] += alpha[p] * hidden[p][i];

  vec logits;
  matvec(m.vw2, pooled, logits);
  for (size_t i = 0; i < logits.size(); ++i) logits[i] += m.vb2.v[i];
  vec probs = softmax(logits);

  if (cache) {
    cache->claim = claim;
    cache->mu = mu;
    cache->sents = sents;
    cache->nodes = nodes;
    cache->node_in = node_in;
    cache->hidden = hidden;
    cache->scores = scores;
    cache->alpha = alpha;
    cache->pooled = pooled;
    cache->probs = probs;
  }
  return probs;
}

inline verify_grads graph_backward(model_params& m, const graph_cache& c, const vec& d_logits) {
  const int d = m.cfg.dim;
  const size_t n = c.node_in.size();
  outer_acc(m.vw2, d_logits, c.pooled);
  for (size_t i = 0; i < d_logits.size(); ++i) m.vb2.g[i] += d_logits[i];
  vec d_pooled;
  matvec_t(m.vw2, d_logits, d_pooled);

  vec d_alpha(n, 0.0);
  std::vector<vec> d_hidden(n, vec(m.cfg.hidden, 0.0));
  for (size_t p = 0; p < n; ++p) {
    double acc = 0.0;
    for (int i = 0; i < m.cfg.hidden; ++i) {
      acc += c.hidden[p][i] * d_pooled[i];
      d_hidden[p][i] = c.alpha[p] * d_pooled[i];
    }
    d_alpha[p] = acc;
  }
  double mix = 0.0;
  for (size_t p = 0; p < n; ++p) mix += c.alpha[p] * d_alpha[p];
  vec d_scores(n);
  for (size_t p = 0; p < n; ++p) d_scores[p] = c.alpha[p] * (d_alpha[p] - mix);

  verify_grads out;
  out.claim.assign(d, 0.0);
  out.sents.assign(c.sents.size(), vec(d, 0.0));
  out.mu.assign(c.mu.size(), 0.0);

  for (size_t p = 0; p < n; ++p) {
    for (int i = 0; i < m.cfg.hidden; ++i) {
      m.vq.g[i] += d_scores[p] * c.hidden[p][i];
      d_hidden[p][i] += d_scores[p] * m.vq.v[i];
      d_hidden[p][i] *= 1.0 - c.hidden[p][i] * c.hidden[p][i];
    }
    outer_acc(m.vw1, d_hidden[p], c.node_in[p]);
    for (int i = 0; i < m.cfg.hidden; ++i) m.vb1.g[i] += d_hidden[p][i];
    vec d_in;
    matvec_t(m.vw1, d_hidden[p], d_in);
    for (int j = 0; j < d; ++j) out.claim[j] += d_in[j];
    if (!c.nodes.empty()) {
      const int s = c.nodes[p];
      double acc = 0.0;
      for (int j = 0; j < d; ++j) {
        acc += c.sents[s][j] * d_in[d + j];
        out.sents[s][j] += c.mu[s] * d_in[d + j];
      }
      out.mu[s] = acc;
    }
  }
  return out;
}

}  // namespace evex
