#pragma once

// Deterministic text encoding: sentence splitting, seeded signed-bucket
// feature hashing (tokens plus character trigrams), tf-idf scoring, and the
// claim-by-document importance matrix.

#include <cctype>
#include <unordered_map>

#include "evex/common.hpp"

namespace evex {

// Splits on '.', '!' or '?' when followed by whitespace or end of string.
// Terminators stay attached to their sentence; a text without terminators is
// a single sentence.
inline std::vector<std::string> split_sentences(const std::string& text) {
  std::vector<std::string> out;
  size_t start = 0;
  auto flush = [&](size_t end) {
    size_t a = start, b = end;
    while (a < b && std::isspace(static_cast<unsigned char>(text[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(text[b - 1]))) --b;
    if (b > a) out.push_back(text.substr(a, b - a));
    start = end;
  };
  for (size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if ((c == '.' || c == '!' || c == '?') &&
        (i + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 1]))))
      flush(i + 1);
  }
  flush(text.size());
  return out;
}

inline std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> toks;
  std::string cur;
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!cur.empty()) toks.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  if (!cur.empty()) toks.push_back(std::move(cur));
  return toks;
}

// Signed feature hashing of tokens and their character trigrams, then L2
// normalization. Empty text maps to the zero vector.
inline vec hashed_embedding(const std::string& text, int dim = 64, uint64_t seed = 0) {
  if (dim < 8) throw parameter_error("hashed_embedding: dim must be >= 8");
  vec e(dim, 0.0);
  auto add = [&](const std::string& feat, uint64_t salt) {
    uint64_t h = fnv1a(feat, seed ^ salt);
    int idx = static_cast<int>(h % static_cast<uint64_t>(dim));
    double sign = (h >> 33) & 1 ? 1.0 : -1.0;
    e[idx] += sign;
  };
  for (const auto& tok : tokenize(text)) {
    add(tok, 0x746f6bull);
    if (tok.size() >= 3)
      for (size_t i = 0; i + 3 <= tok.size(); ++i) add(tok.substr(i, 3), 0x747269ull);
  }
  double n = norm2(e);
  if (n > 0.0)
    for (auto& v : e) v /= n;
  return e;
}

enum class aggregation { max, mean };

struct importance_result {
  std::vector<vec> matrix;  // claim sentences x document sentences
  vec scores;               // aggregated per document sentence
  std::vector<int> argmax;  // winning claim row under max aggregation, else -1
};

inline importance_result importance_matrix(const std::vector<vec>& claim_embs,
                                           const std::vector<vec>& doc_embs,
                                           aggregation agg = aggregation::max) {
  if (claim_embs.empty()) throw size_error("importance_matrix: no claim sentences");
  const size_t dim = claim_embs[0].size();
  for (const auto& c : claim_embs)
    if (c.size() != dim) throw dimension_error("importance_matrix: ragged claim embeddings");
  for (const auto& d : doc_embs)
    if (d.size() != dim) throw dimension_error("importance_matrix: embedding width mismatch");

  importance_result res;
  res.matrix.assign(claim_embs.size(), vec(doc_embs.size(), 0.0));
  res.scores.assign(doc_embs.size(), 0.0);
  res.argmax.assign(doc_embs.size(), -1);
  for (size_t j = 0; j < doc_embs.size(); ++j) {
    double best = -std::numeric_limits<double>::infinity();
    double sum = 0.0;
    int arg = -1;
    for (size_t i = 0; i < claim_embs.size(); ++i) {
      double d = dot(claim_embs[i], doc_embs[j]);
      res.matrix[i][j] = d;
      sum += d;
      if (d > best) {
        best = d;
        arg = static_cast<int>(i);
      }
    }
    if (agg == aggregation::max) {
      res.scores[j] = best;
      res.argmax[j] = arg;
    } else {
      res.scores[j] = sum / double(claim_embs.size());
    }
  }
  return res;
}

// tf-idf with idf(t) = ln((1+N)/(1+df)) + 1, raw term counts, cosine on L2
// normalized vectors. Vocabulary ids are dense in first-seen order.
class tfidf_index {
 public:
  void fit(const std::vector<std::string>& corpus) {
    if (corpus.empty()) throw size_error("tfidf_index: empty corpus");
    vocab_.clear();
    vec df;
    for (const auto& doc : corpus) {
      std::vector<int> seen;
      for (const auto& tok : tokenize(doc)) {
        auto [it, inserted] = vocab_.try_emplace(tok, static_cast<int>(vocab_.size()));
        if (inserted) df.push_back(0.0);
        int id = it->second;
        bool counted = false;
        for (int s : seen)
          if (s == id) {
            counted = true;
            break;
          }
        if (!counted) {
          df[id] += 1.0;
          seen.push_back(id);
        }
      }
    }
    const double n = static_cast<double>(corpus.size());
    idf_.resize(df.size());
    for (size_t i = 0; i < df.size(); ++i) idf_[i] = std::log((1.0 + n) / (1.0 + df[i])) + 1.0;
    fitted_ = true;
  }

  bool fitted() const { return fitted_; }
  size_t vocab_size() const { return vocab_.size(); }

  double idf(const std::string& token) const {
    require_fitted();
    auto it = vocab_.find(token);
    return it == vocab_.end() ? 0.0 : idf_[it->second];
  }

  // sorted sparse L2-normalized tf-idf vector; unknown tokens are dropped
  std::vector<std::pair<int, double>> vector(const std::string& text) const {
    require_fitted();
    std::unordered_map<int, double> tf;
    for (const auto& tok : tokenize(text)) {
      auto it = vocab_.find(tok);
      if (it != vocab_.end()) tf[it->second] += 1.0;
    }
    std::vector<std::pair<int, double>> v(tf.begin(), tf.end());
    for (auto& [id, w] : v) w *= idf_[id];
    std::sort(v.begin(), v.end());
    double norm = 0.0;
    for (const auto& [id, w] : v) norm += w * w;
    norm = std::sqrt(norm);
    if (norm > 0.0)
      for (auto& [id, w] : v) w /= norm;
    return v;
  }

  double score(const std::string& a, const std::string& b) const {
    auto va = vector(a), vb = vector(b);
    size_t i = 0, j = 0;
    double s = 0.0;
    while (i < va.size() && j < vb.size()) {
      if (va[i].first < vb[j].first)
        ++i;
      else if (va[i].first > vb[j].first)
        ++j;
      else
        s += va[i++].second * vb[j++].second;
    }
    return s;
  }

 private:
  void require_fitted() const {
    if (!fitted_) throw state_error("tfidf_index: not fitted");
  }
  std::unordered_map<std::string, int> vocab_;
  vec idf_;
  bool fitted_ = false;
};

}  // namespace evex
