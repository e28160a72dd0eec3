#pragma once

// Training: Adam over the model tensors, a plateau learning-rate scheduler,
// the joint extractor/verifier loop, the pairwise ranker fit, evaluation,
// and the selection-budget sweep.

#include <chrono>
#include <cmath>

#include "evex/extractors.hpp"
#include "evex/metrics.hpp"

namespace evex {

struct adam_optimizer {
  double lr = 1e-3;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  int t = 0;
  std::vector<vec> m1, m2;

  void step(const std::vector<tensor*>& params) {
    if (m1.empty()) {
      for (tensor* p : params) {
        m1.emplace_back(p->size(), 0.0);
        m2.emplace_back(p->size(), 0.0);
      }
    }
    if (m1.size() != params.size()) throw state_error("adam: parameter set changed between steps");
    ++t;
    const double c1 = 1.0 - std::pow(beta1, t);
    const double c2 = 1.0 - std::pow(beta2, t);
    for (size_t k = 0; k < params.size(); ++k) {
      tensor& p = *params[k];
      if (static_cast<int>(m1[k].size()) != p.size()) throw state_error("adam: tensor size changed");
      for (int i = 0; i < p.size(); ++i) {
        const double g = p.g[i];
        m1[k][i] = beta1 * m1[k][i] + (1.0 - beta1) * g;
        m2[k][i] = beta2 * m2[k][i] + (1.0 - beta2) * g * g;
        p.v[i] -= lr * (m1[k][i] / c1) / (std::sqrt(m2[k][i] / c2) + eps);
      }
    }
  }

  void step(model_params& m) {
    std::vector<tensor*> params;
    for (auto& [name, t_] : m.named()) params.push_back(t_);
    step(params);
  }
};

// Halves the rate after `patience` epochs without dev improvement, then
// starts a fresh observation window.
struct plateau_scheduler {
  double factor = 0.5;
  int patience = 2;
  double best = std::numeric_limits<double>::infinity();
  int stall = 0;

  double observe(double dev_loss, double lr) {
    if (dev_loss < best - 1e-12) {
      best = dev_loss;
      stall = 0;
      return lr;
    }
    if (++stall >= patience) {
      stall = 0;
      return lr * factor;
    }
    return lr;
  }
};

struct eval_result {
  double macro = 0.0;
  double evidence_p = 0.0, evidence_r = 0.0, evidence_f1 = 0.0;
  double mean_selected = 0.0;
  double mean_runs = 0.0;
  double mean_nll = 0.0;
};

inline eval_result evaluate_model(model_params& m, const std::vector<encoded_instance>& data,
                                  const forward_options& base) {
  if (data.empty()) throw size_error("evaluate_model: empty evaluation set");
  forward_options opt = base;
  opt.stochastic = false;
  eval_result out;
  std::vector<int> predicted, gold;
  int with_gold = 0;
  for (const auto& enc : data) {
    auto res = model_forward(m, enc, opt);
    int argmax = 0;
    for (size_t j = 1; j < res.probs.size(); ++j)
      if (res.probs[j] > res.probs[argmax]) argmax = static_cast<int>(j);
    predicted.push_back(argmax);
    gold.push_back(enc.label);
    out.mean_nll += res.nll;
    out.mean_selected += res.selected.size();
    out.mean_runs += contiguity_runs(res.selected, enc.doc_offsets);
    if (enc.has_gold) {
      auto prf = evidence_prf(res.selected, enc.gold);
      out.evidence_p += prf.precision;
      out.evidence_r += prf.recall;
      out.evidence_f1 += prf.f1;
      ++with_gold;
    }
  }
  const double n = static_cast<double>(data.size());
  out.macro = macro_f1(predicted, gold, m.cfg.classes);
  out.mean_nll /= n;
  out.mean_selected /= n;
  out.mean_runs /= n;
  if (with_gold > 0) {
    out.evidence_p /= with_gold;
    out.evidence_r /= with_gold;
    out.evidence_f1 /= with_gold;
  }
  return out;
}

struct epoch_stats {
  int epoch = 0;
  double train_loss = 0.0;
  double dev_loss = 0.0;
  double dev_macro_f1 = 0.0;
  double dev_evidence_f1 = 0.0;
  double mean_selected = 0.0;
};

struct train_report {
  std::vector<epoch_stats> epochs;
  double final_lr = 0.0;
  double wall_seconds = 0.0;  // timing stays out of the serialized report
};

inline std::string report_csv(const train_report& r) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& e : r.epochs)
    rows.push_back({std::to_string(e.epoch), csv_num(e.train_loss), csv_num(e.dev_loss),
                    csv_num(e.dev_macro_f1), csv_num(e.dev_evidence_f1), csv_num(e.mean_selected)});
  return csv_table({"epoch", "train_loss", "dev_loss", "dev_macro_f1", "dev_evidence_f1", "mean_selected"},
                   rows);
}

struct train_config {
  forward_options forward;
  int epochs = 5;
  double lr = 1e-3;
  uint64_t seed = 1;
  double baseline_momentum = 0.95;  // reward baseline for the score-function extractor
};

inline void prepare_baseline_masks(extractor_kind kind, const std::vector<claim_instance>& corpus,
                                   std::vector<encoded_instance>& encs, const tfidf_index& index,
                                   const hybrid_ranker& ranker, const baseline_config& bcfg = {}) {
  if (!is_baseline_kind(kind)) return;
  if (corpus.size() != encs.size()) throw dimension_error("prepare_baseline_masks: corpus/encoding mismatch");
  for (size_t i = 0; i < corpus.size(); ++i)
    encs[i].fixed_mask = run_baseline(kind, corpus[i], encs[i], index, ranker, bcfg).mask;
}

// One pass of stochastic training: shuffle, forward with the configured
// extractor, backprop the label loss, Adam update, then score the dev split
// and let the scheduler react. A non-finite loss aborts immediately.
inline train_report joint_train(model_params& m, const std::vector<encoded_instance>& train,
                                const std::vector<encoded_instance>& dev, const train_config& cfg) {
  if (train.empty()) throw size_error("joint_train: empty training set");
  if (cfg.epochs < 1) throw config_error("joint_train: need at least one epoch");
  if (cfg.lr <= 0.0) throw config_error("joint_train: learning rate must be positive");

  const auto t0 = std::chrono::steady_clock::now();
  adam_optimizer adam;
  adam.lr = cfg.lr;
  plateau_scheduler sched;
  double baseline_ema = 0.0;
  const bool stochastic = is_stochastic_kind(cfg.forward.kind);

  train_report report;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<int> order(train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    rng_stream shuffle_rng = rng_stream::derive(cfg.seed, 0x73687566ull, static_cast<uint64_t>(epoch));
    shuffle_rng.shuffle(order);

    double total_loss = 0.0;
    forward_cache cache;
    for (int idx : order) {
      rng_stream noise =
          rng_stream::derive(cfg.seed, static_cast<uint64_t>(epoch), static_cast<uint64_t>(idx), 0x6e6f69ull);
      forward_options opt = cfg.forward;
      opt.stochastic = stochastic;
      auto res = model_forward(m, train[idx], opt, stochastic ? &noise : nullptr, &cache);
      if (!std::isfinite(res.loss)) throw convergence_error("joint_train: non-finite loss", res.loss);
      total_loss += res.loss;
      m.zero_grad();
      model_backward(m, train[idx], opt, cache, baseline_ema);
      if (cfg.forward.kind == extractor_kind::reinforce)
        baseline_ema = cfg.baseline_momentum * baseline_ema + (1.0 - cfg.baseline_momentum) * (-res.nll);
      adam.step(m);
    }

    epoch_stats stats;
    stats.epoch = epoch;
    stats.train_loss = total_loss / train.size();
    if (!dev.empty()) {
      auto ev = evaluate_model(m, dev, cfg.forward);
      stats.dev_loss = ev.mean_nll;
      stats.dev_macro_f1 = ev.macro;
      stats.dev_evidence_f1 = ev.evidence_f1;
      stats.mean_selected = ev.mean_selected;
      adam.lr = sched.observe(ev.mean_nll, adam.lr);
    }
    report.epochs.push_back(stats);
  }
  report.final_lr = adam.lr;
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

// Pairwise hinge fit of the four-feature ranker: planted evidence must
// outscore sampled non-evidence by a margin.
struct ranker_train_config {
  int epochs = 10;
  double lr = 0.1;
  int pairs_per_instance = 8;
  uint64_t seed = 1;
};

inline hybrid_ranker train_hybrid_ranker(const std::vector<claim_instance>& corpus,
                                         const std::vector<encoded_instance>& encs, const tfidf_index& index,
                                         const ranker_train_config& cfg = {}) {
  if (corpus.size() != encs.size()) throw dimension_error("train_hybrid_ranker: corpus/encoding mismatch");
  hybrid_ranker ranker;
  std::array<double, 4>& w = ranker.weights;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng_stream rng = rng_stream::derive(cfg.seed, 0x72616e6bull, static_cast<uint64_t>(epoch));
    for (size_t i = 0; i < corpus.size(); ++i) {
      if (!corpus[i].has_gold || corpus[i].gold_evidence.empty()) continue;
      auto f = hybrid_features(corpus[i], encs[i], index);
      std::set<int> gold(corpus[i].gold_evidence.begin(), corpus[i].gold_evidence.end());
      std::vector<int> neg;
      for (int s = 0; s < static_cast<int>(f.size()); ++s)
        if (!gold.count(s)) neg.push_back(s);
      if (neg.empty()) continue;
      for (int p = 0; p < cfg.pairs_per_instance; ++p) {
        int pos = corpus[i].gold_evidence[rng.uniform_int(0, static_cast<int>(gold.size()) - 1)];
        int bad = neg[rng.uniform_int(0, static_cast<int>(neg.size()) - 1)];
        double margin = 0.0;
        for (int j = 0; j < 4; ++j) margin += w[j] * (f[pos][j] - f[bad][j]);
        if (margin < 1.0)
          for (int j = 0; j < 4; ++j) w[j] += cfg.lr * (f[pos][j] - f[bad][j]);
      }
    }
  }
  ranker.trained = true;
  return ranker;
}

// Fraction of (evidence, non-evidence) pairs the ranker orders correctly.
inline double ranker_pairwise_accuracy(const hybrid_ranker& ranker, const std::vector<claim_instance>& corpus,
                                       const std::vector<encoded_instance>& encs, const tfidf_index& index) {
  if (!ranker.trained) throw state_error("ranker_pairwise_accuracy: ranker has not been trained");
  long correct = 0, total = 0;
  for (size_t i = 0; i < corpus.size(); ++i) {
    if (!corpus[i].has_gold || corpus[i].gold_evidence.empty()) continue;
    auto f = hybrid_features(corpus[i], encs[i], index);
    std::set<int> gold(corpus[i].gold_evidence.begin(), corpus[i].gold_evidence.end());
    auto score = [&](int s) {
      double v = 0.0;
      for (int j = 0; j < 4; ++j) v += ranker.weights[j] * f[s][j];
      return v;
    };
    for (int pos : corpus[i].gold_evidence)
      for (int s = 0; s < static_cast<int>(f.size()); ++s) {
        if (gold.count(s)) continue;
        ++total;
        if (score(pos) > score(s)) ++correct;
      }
  }
  return total > 0 ? static_cast<double>(correct) / total : 0.0;
}

struct sweep_row {
  int budget = 0;
  double macro_f1 = 0.0;
  double evidence_f1 = 0.0;
  double mean_selected = 0.0;
};

inline std::vector<sweep_row> budget_sweep(model_params& m, const std::vector<encoded_instance>& data,
                                           const forward_options& base, const std::vector<int>& budgets) {
  std::vector<sweep_row> rows;
  for (int k : budgets) {
    forward_options opt = base;
    opt.budget = k;
    auto ev = evaluate_model(m, data, opt);
    rows.push_back({k, ev.macro, ev.evidence_f1, ev.mean_selected});
  }
  return rows;
}

inline std::string sweep_csv(const std::vector<sweep_row>& rows) {
  std::vector<std::vector<std::string>> out;
  for (const auto& r : rows)
    out.push_back({std::to_string(r.budget), csv_num(r.macro_f1), csv_num(r.evidence_f1),
                   csv_num(r.mean_selected)});
  return csv_table({"budget", "macro_f1", "evidence_f1", "mean_selected"}, out);
}

}  // namespace evex
