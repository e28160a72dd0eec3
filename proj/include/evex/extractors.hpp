#pragma once

// Non-learned and shallow extraction baselines. Each returns a hard sentence
// selection that the pipeline feeds through the verifier unchanged.

#include <array>

#include "evex/pipeline.hpp"

namespace evex {

struct extraction_result {
  std::vector<int> selected;  // ascending global indices
  vec mask;                   // 0/1 per sentence
};

namespace detail {

inline extraction_result from_selected(std::vector<int> selected, int total) {
  std::sort(selected.begin(), selected.end());
  extraction_result out;
  out.mask.assign(total, 0.0);
  for (int i : selected) out.mask[i] = 1.0;
  out.selected = std::move(selected);
  return out;
}

// indices of the k largest scores, ties to the earlier sentence
inline std::vector<int> top_k(const vec& scores, const std::vector<int>& candidates, int k) {
  std::vector<int> order = candidates;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return scores[a] > scores[b]; });
  if (static_cast<int>(order.size()) > k) order.resize(k);
  return order;
}

}  // namespace detail

// Fixed window of `window` sentences around each document's snippet anchor.
inline extraction_result extract_rule(const claim_instance& inst, int window = 2) {
  if (window < 1) throw parameter_error("extract_rule: window must be positive");
  std::vector<int> selected;
  int offset = 0;
  for (size_t d = 0; d < inst.documents.size(); ++d) {
    const int len = static_cast<int>(inst.documents[d].size());
    const int w = std::min(window, len);
    int start = inst.snippet_anchor[d] - window / 2;
    start = std::max(0, std::min(start, len - w));
    for (int i = 0; i < w; ++i) selected.push_back(offset + start + i);
    offset += len;
  }
  return detail::from_selected(std::move(selected), offset);
}

// Top-k sentences by lexical overlap with the claim, restricted to sentences
// that pass the word-count filter.
inline extraction_result extract_surface(const claim_instance& inst, const tfidf_index& index, int k = 5) {
  if (k < 0) throw parameter_error("extract_surface: negative k");
  vec scores;
  std::vector<int> candidates;
  int g = 0;
  for (const auto& doc : inst.documents)
    for (const auto& sent : doc) {
      scores.push_back(index.score(inst.claim, sent));
      if (tokenize(sent).size() > 5) candidates.push_back(g);
      ++g;
    }
  return detail::from_selected(detail::top_k(scores, candidates, k), g);
}

// Top-k sentences by embedding similarity to the mean claim vector.
inline extraction_result extract_semantic(const encoded_instance& enc, int k = 5) {
  if (k < 0) throw parameter_error("extract_semantic: negative k");
  const int L = enc.total();
  vec mean(enc.claim_embs.empty() ? 0 : enc.claim_embs[0].size(), 0.0);
  for (const auto& ce : enc.claim_embs)
    for (size_t j = 0; j < mean.size(); ++j) mean[j] += ce[j] / enc.claim_embs.size();
  double n = norm2(mean);
  if (n > 0)
    for (double& x : mean) x /= n;
  vec scores(L, 0.0);
  std::vector<int> candidates(L);
  for (int i = 0; i < L; ++i) {
    scores[i] = dot(enc.sent_embs[i], mean);
    candidates[i] = i;
  }
  return detail::from_selected(detail::top_k(scores, candidates, k), L);
}

// Per-sentence features for the learned ranker: normalized lexical rank, raw
// lexical score, normalized embedding rank, raw embedding score.
inline std::vector<std::array<double, 4>> hybrid_features(const claim_instance& inst,
                                                          const encoded_instance& enc,
                                                          const tfidf_index& index) {
  const int L = enc.total();
  vec lex(L, 0.0);
  int g = 0;
  for (const auto& doc : inst.documents)
    for (const auto& sent : doc) lex[g++] = index.score(inst.claim, sent);
  if (g != L) throw dimension_error("hybrid_features: encoding does not match instance");

  vec mean(enc.claim_embs[0].size(), 0.0);
  for (const auto& ce : enc.claim_embs)
    for (size_t j = 0; j < mean.size(); ++j) mean[j] += ce[j] / enc.claim_embs.size();
  double n = norm2(mean);
  if (n > 0)
    for (double& x : mean) x /= n;
  vec sem(L, 0.0);
  for (int i = 0; i < L; ++i) sem[i] = dot(enc.sent_embs[i], mean);

  auto rank_norm = [L](const vec& scores) {
    std::vector<int> order(L);
    for (int i = 0; i < L; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return scores[a] > scores[b]; });
    vec r(L, 0.0);
    for (int pos = 0; pos < L; ++pos) r[order[pos]] = 1.0 - static_cast<double>(pos) / std::max(1, L - 1);
    return r;
  };
  vec lex_rank = rank_norm(lex), sem_rank = rank_norm(sem);

  std::vector<std::array<double, 4>> f(L);
  for (int i = 0; i < L; ++i) f[i] = {lex_rank[i], lex[i], sem_rank[i], sem[i]};
  return f;
}

struct hybrid_ranker {
  std::array<double, 4> weights{0.0, 0.0, 0.0, 0.0};
  bool trained = false;
};

inline extraction_result extract_hybrid(const claim_instance& inst, const encoded_instance& enc,
                                        const tfidf_index& index, const hybrid_ranker& ranker, int k = 5) {
  if (!ranker.trained) throw state_error("extract_hybrid: ranker has not been trained");
  if (k < 0) throw parameter_error("extract_hybrid: negative k");
  auto f = hybrid_features(inst, enc, index);
  const int L = enc.total();
  vec scores(L, 0.0);
  std::vector<int> candidates(L);
  for (int i = 0; i < L; ++i) {
    for (int j = 0; j < 4; ++j) scores[i] += ranker.weights[j] * f[i][j];
    candidates[i] = i;
  }
  return detail::from_selected(detail::top_k(scores, candidates, k), L);
}

struct baseline_config {
  int top_k = 5;
  int rule_window = 2;
};

inline extraction_result run_baseline(extractor_kind kind, const claim_instance& inst,
                                      const encoded_instance& enc, const tfidf_index& index,
                                      const hybrid_ranker& ranker, const baseline_config& cfg = {}) {
  switch (kind) {
    case extractor_kind::rule: return extract_rule(inst, cfg.rule_window);
    case extractor_kind::surface: return extract_surface(inst, index, cfg.top_k);
    case extractor_kind::semantic: return extract_semantic(enc, cfg.top_k);
    case extractor_kind::hybrid: return extract_hybrid(inst, enc, index, ranker, cfg.top_k);
    default: throw parameter_error("run_baseline: not a baseline extractor");
  }
}

}  // namespace evex
