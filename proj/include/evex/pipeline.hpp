#pragma once

// The shared prediction path: encode an instance, project embeddings, score
// sentences against the claim, turn scores into a selection mask with the
// configured extractor, verify, and take the label loss. model_backward
// reverses the whole chain and accumulates parameter gradients, so training
// and extraction run through one implementation.
//
// Baseline kinds (rule, surface, semantic, hybrid) feed a precomputed mask
// through the same path, and only the verifier receives gradients for them.

#include "evex/corpus.hpp"
#include "evex/relaxations.hpp"
#include "evex/scale.hpp"
#include "evex/text.hpp"
#include "evex/verifier.hpp"

namespace evex {

enum class extractor_kind { rule, surface, semantic, hybrid, attention, reinforce, gumbel, hardkuma, fusedmax, scale };

inline const char* kind_name(extractor_kind k) {
  switch (k) {
    case extractor_kind::rule: return "rule";
    case extractor_kind::surface: return "surface";
    case extractor_kind::semantic: return "semantic";
    case extractor_kind::hybrid: return "hybrid";
    case extractor_kind::attention: return "attention";
    case extractor_kind::reinforce: return "reinforce";
    case extractor_kind::gumbel: return "gumbel";
    case extractor_kind::hardkuma: return "hardkuma";
    case extractor_kind::fusedmax: return "fusedmax";
    case extractor_kind::scale: return "scale";
  }
  throw parameter_error("kind_name: unknown extractor");
}

inline extractor_kind kind_from_name(const std::string& name) {
  static const extractor_kind all[] = {extractor_kind::rule,      extractor_kind::surface,
                                       extractor_kind::semantic,  extractor_kind::hybrid,
                                       extractor_kind::attention, extractor_kind::reinforce,
                                       extractor_kind::gumbel,    extractor_kind::hardkuma,
                                       extractor_kind::fusedmax,  extractor_kind::scale};
  for (extractor_kind k : all)
    if (name == kind_name(k)) return k;
  throw config_error("unknown extractor kind: " + name);
}

inline bool is_baseline_kind(extractor_kind k) {
  return static_cast<int>(k) <= static_cast<int>(extractor_kind::hybrid);
}

inline bool is_stochastic_kind(extractor_kind k) {
  return k == extractor_kind::reinforce || k == extractor_kind::gumbel || k == extractor_kind::hardkuma;
}

struct encoded_instance {
  std::string id;
  int label = 0;
  bool has_gold = false;
  std::vector<int> gold;
  std::vector<vec> claim_embs;       // one per claim sentence, unit norm
  std::vector<vec> sent_embs;        // global sentence order across documents
  std::vector<int> doc_offsets, doc_lens;
  std::vector<int> anchors;
  std::vector<char> eligible;        // sentence passes the word-count filter
  vec fixed_mask;                    // set for baseline kinds before the forward pass

  int total() const { return static_cast<int>(sent_embs.size()); }
  int doc_of(int i) const {
    int d = 0;
    for (size_t k = 0; k < doc_offsets.size(); ++k)
      if (doc_offsets[k] <= i) d = static_cast<int>(k);
    return d;
  }
};

inline encoded_instance encode_instance(const claim_instance& inst, int dim = 64, uint64_t emb_seed = 0) {
  encoded_instance enc;
  enc.id = inst.id;
  enc.label = inst.label;
  enc.has_gold = inst.has_gold;
  enc.gold = inst.gold_evidence;
  for (const auto& s : split_sentences(inst.claim)) enc.claim_embs.push_back(hashed_embedding(s, dim, emb_seed));
  if (enc.claim_embs.empty()) enc.claim_embs.push_back(hashed_embedding(inst.claim, dim, emb_seed));
  enc.anchors = inst.snippet_anchor;
  for (const auto& doc : inst.documents) {
    enc.doc_offsets.push_back(enc.total());
    enc.doc_lens.push_back(static_cast<int>(doc.size()));
    for (const auto& s : doc) {
      enc.sent_embs.push_back(hashed_embedding(s, dim, emb_seed));
      enc.eligible.push_back(tokenize(s).size() > 5 ? 1 : 0);
    }
  }
  return enc;
}

inline std::vector<encoded_instance> encode_corpus(const std::vector<claim_instance>& corpus, int dim = 64,
                                                   uint64_t emb_seed = 0) {
  std::vector<encoded_instance> out;
  out.reserve(corpus.size());
  for (const auto& inst : corpus) out.push_back(encode_instance(inst, dim, emb_seed));
  return out;
}

struct forward_options {
  extractor_kind kind = extractor_kind::scale;
  int budget = 8;               // shared selection budget for the budgeted solver
  double temperature = 0.5;     // gumbel relaxation
  double l0_weight = 0.0;       // sparsity pressure for reinforce and hardkuma
  bool stochastic = false;      // sample gate noise (training) or stay deterministic (eval)
  bool graph_verifier = false;
  bool freeze_pair = false;     // keep the learned pair weight fixed
  double hard_support_eps = 1e-9;
  solver_config solver = [] {
    solver_config s;
    s.throw_on_nonconverged = false;  // mid-training score drift may need more steps; keep the iterate
    return s;
  }();
};

struct forward_cache {
  std::vector<vec> pc, px;      // projected claim and sentence vectors
  vec claim_vec;
  vec raw, cal;                 // match scores before and after calibration
  std::vector<int> arg;         // claim sentence attaining each max
  vec mu;
  scale_tape tape;
  std::vector<fusedmax_cache> fmx;
  vec hk_a, hk_dzda, hk_dadcal;
  mlp_cache mlp;
  graph_cache graph;
  vec probs;
  double nll = 0.0;
};

struct forward_result {
  vec probs;
  double nll = 0.0;
  double loss = 0.0;            // nll plus any differentiable sparsity penalty
  vec mu;
  std::vector<int> selected;    // hard selection, ascending global indices
  double solver_residual = 0.0;
};

inline forward_result model_forward(model_params& m, const encoded_instance& enc, const forward_options& opt,
                                    rng_stream* rng = nullptr, forward_cache* cache = nullptr) {
  if (opt.stochastic && is_stochastic_kind(opt.kind) && !rng)
    throw parameter_error("model_forward: stochastic extractor needs a noise stream");
  if (opt.budget < 0) throw config_error("model_forward: negative budget");
  const int d = m.cfg.dim;
  const int L = enc.total();

  forward_cache local;
  forward_cache& c = cache ? *cache : local;
  c = forward_cache{};

  c.pc.resize(enc.claim_embs.size());
  for (size_t j = 0; j < enc.claim_embs.size(); ++j) matvec(m.proj, enc.claim_embs[j], c.pc[j]);
  c.px.resize(L);
  for (int i = 0; i < L; ++i) matvec(m.proj, enc.sent_embs[i], c.px[i]);

  c.claim_vec.assign(d, 0.0);
  for (const auto& pc : c.pc)
    for (int j = 0; j < d; ++j) c.claim_vec[j] += pc[j] / c.pc.size();

  if (L > 0) {
    auto imp = importance_matrix(c.pc, c.px, aggregation::max);
    c.raw = imp.scores;
    c.arg = imp.argmax;
  }
  c.cal.resize(L);
  for (int i = 0; i < L; ++i) c.cal[i] = m.calib.v[0] * c.raw[i] + m.calib.v[1];

  forward_result res;
  c.mu.assign(L, 0.0);
  double penalty = 0.0;

  switch (opt.kind) {
    case extractor_kind::rule:
    case extractor_kind::surface:
    case extractor_kind::semantic:
    case extractor_kind::hybrid: {
      if (static_cast<int>(enc.fixed_mask.size()) != L)
        throw state_error("model_forward: baseline mask not prepared for this instance");
      c.mu = enc.fixed_mask;
      for (int i = 0; i < L; ++i)
        if (c.mu[i] > 0.0) res.selected.push_back(i);
      break;
    }
    case extractor_kind::attention: {
      for (size_t dd = 0; dd < enc.doc_offsets.size(); ++dd) {
        const int off = enc.doc_offsets[dd], len = enc.doc_lens[dd];
        if (len == 0) continue;
        vec p = softmax(vec(c.cal.begin() + off, c.cal.begin() + off + len));
        for (int i = 0; i < len; ++i) {
          c.mu[off + i] = p[i];
          if (p[i] >= 1.0 / len) res.selected.push_back(off + i);
        }
      }
      break;
    }
    case extractor_kind::reinforce: {
      for (int i = 0; i < L; ++i) {
        double p = sigmoid(c.cal[i]);
        c.mu[i] = opt.stochastic ? (rng->bernoulli(p) ? 1.0 : 0.0) : (p >= 0.5 ? 1.0 : 0.0);
        if (c.mu[i] >= 0.5) res.selected.push_back(i);
      }
      break;
    }
    case extractor_kind::gumbel: {
      if (opt.temperature <= 0.0) throw parameter_error("model_forward: temperature must be positive");
      for (int i = 0; i < L; ++i) {
        c.mu[i] = opt.stochastic ? gumbel_sigmoid_sample(c.cal[i], opt.temperature, *rng)
                                 : sigmoid(c.cal[i] / opt.temperature);
        if (c.mu[i] >= 0.5) res.selected.push_back(i);
      }
      break;
    }
    case extractor_kind::hardkuma: {
      c.hk_a.resize(L);
      c.hk_dzda.resize(L);
      c.hk_dadcal.resize(L);
      for (int i = 0; i < L; ++i) {
        double s = std::min(10.0, std::max(-10.0, c.cal[i]));
        c.hk_a[i] = std::exp(s);
        c.hk_dadcal[i] = (c.cal[i] > -10.0 && c.cal[i] < 10.0) ? c.hk_a[i] : 0.0;
        hardkuma_params hp;
        hp.a = c.hk_a[i];
        auto draw = hardkuma_sample(hp, opt.stochastic ? rng->uniform_open() : 0.5);
        c.mu[i] = draw.z;
        c.hk_dzda[i] = draw.dz_da;
        penalty += opt.l0_weight * hardkuma_expected_l0(hp);
        if (c.mu[i] >= 0.5) res.selected.push_back(i);
      }
      break;
    }
    case extractor_kind::fusedmax: {
      c.fmx.resize(enc.doc_offsets.size());
      for (size_t dd = 0; dd < enc.doc_offsets.size(); ++dd) {
        const int off = enc.doc_offsets[dd], len = enc.doc_lens[dd];
        if (len == 0) continue;
        vec p = fusedmax(vec(c.cal.begin() + off, c.cal.begin() + off + len), m.pair_weight(), &c.fmx[dd]);
        for (int i = 0; i < len; ++i) {
          c.mu[off + i] = std::min(1.0, len * p[i]);
          if (c.mu[off + i] > opt.hard_support_eps) res.selected.push_back(off + i);
        }
      }
      break;
    }
    case extractor_kind::scale: {
      if (L > 0) {
        importance_scores sc;
        sc.unary = c.cal;
        sc.pair.assign(std::max(0, L - 1), 0.0);
        for (int e = 0; e + 1 < L; ++e)
          if (enc.doc_of(e) == enc.doc_of(e + 1)) sc.pair[e] = m.pair_weight();
        auto sol = scale_forward(sc, std::min(opt.budget, L), opt.solver, &c.tape);
        c.mu = sol.mask.values;
        res.solver_residual = sol.residual;
        for (int i = 0; i < L; ++i)
          if (c.mu[i] > opt.hard_support_eps) res.selected.push_back(i);
      }
      break;
    }
  }

  vec probs = opt.graph_verifier ? graph_verify(m, c.claim_vec, c.px, c.mu, &c.graph)
                                 : mlp_verify(m, c.claim_vec, c.px, c.mu, &c.mlp);
  c.probs = probs;
  c.nll = nll_loss(probs, enc.label);

  res.probs = std::move(probs);
  res.nll = c.nll;
  res.loss = c.nll + penalty;
  res.mu = c.mu;
  return res;
}

// Accumulates gradients of the forward loss into the model's grad slots.
// For reinforce the mask is discrete, so the extractor part uses the
// score-function estimator with the supplied reward baseline.
inline void model_backward(model_params& m, const encoded_instance& enc, const forward_options& opt,
                           forward_cache& c, double reinforce_baseline = 0.0) {
  const int d = m.cfg.dim;
  const int L = enc.total();

  vec d_logits = nll_grad_logits(c.probs, enc.label);
  verify_grads vg = opt.graph_verifier ? graph_backward(m, c.graph, d_logits) : mlp_backward(m, c.mlp, d_logits);

  if (is_baseline_kind(opt.kind)) return;  // extraction is fixed; only the verifier trains

  vec d_cal(L, 0.0);
  switch (opt.kind) {
    case extractor_kind::attention: {
      for (size_t dd = 0; dd < enc.doc_offsets.size(); ++dd) {
        const int off = enc.doc_offsets[dd], len = enc.doc_lens[dd];
        double mix = 0.0;
        for (int i = 0; i < len; ++i) mix += c.mu[off + i] * vg.mu[off + i];
        for (int i = 0; i < len; ++i) d_cal[off + i] = c.mu[off + i] * (vg.mu[off + i] - mix);
      }
      break;
    }
    case extractor_kind::reinforce: {
      vec ascent = reinforce_gradient(c.cal, c.mu, -c.nll, reinforce_baseline, opt.l0_weight);
      for (int i = 0; i < L; ++i) d_cal[i] = -ascent[i];
      break;
    }
    case extractor_kind::gumbel: {
      for (int i = 0; i < L; ++i)
        d_cal[i] = vg.mu[i] * c.mu[i] * (1.0 - c.mu[i]) / opt.temperature;
      break;
    }
    case extractor_kind::hardkuma: {
      for (int i = 0; i < L; ++i) {
        hardkuma_params hp;
        hp.a = c.hk_a[i];
        double d_a = vg.mu[i] * c.hk_dzda[i] + opt.l0_weight * hardkuma_expected_l0_grad_a(hp);
        d_cal[i] = d_a * c.hk_dadcal[i];
      }
      break;
    }
    case extractor_kind::fusedmax: {
      for (size_t dd = 0; dd < enc.doc_offsets.size(); ++dd) {
        const int off = enc.doc_offsets[dd], len = enc.doc_lens[dd];
        if (len == 0) continue;
        vec dp(len, 0.0);
        for (int i = 0; i < len; ++i)
          dp[i] = (len * c.fmx[dd].p[i] < 1.0) ? len * vg.mu[off + i] : 0.0;
        vec dz = fusedmax_backward(c.fmx[dd], dp);
        for (int i = 0; i < len; ++i) d_cal[off + i] = dz[i];
      }
      break;
    }
    case extractor_kind::scale: {
      if (L > 0) {
        auto sg = scale_backward(c.tape, vg.mu);
        d_cal = sg.unary;
        if (!opt.freeze_pair) {
          double acc = 0.0;
          for (int e = 0; e + 1 < L; ++e)
            if (enc.doc_of(e) == enc.doc_of(e + 1)) acc += sg.pair[e];
          m.pair_raw.g[0] += acc * m.pair_weight_draw();
        }
      }
      break;
    }
    default: break;
  }

  vec d_raw(L, 0.0);
  for (int i = 0; i < L; ++i) {
    m.calib.g[0] += d_cal[i] * c.raw[i];
    m.calib.g[1] += d_cal[i];
    d_raw[i] = m.calib.v[0] * d_cal[i];
  }

  std::vector<vec> d_pc(c.pc.size(), vec(d, 0.0));
  for (int i = 0; i < L; ++i) {
    const int j = c.arg[i];
    for (int t = 0; t < d; ++t) {
      d_pc[j][t] += d_raw[i] * c.px[i][t];
      vg.sents[i][t] += d_raw[i] * c.pc[j][t];
    }
  }
  for (size_t j = 0; j < d_pc.size(); ++j)
    for (int t = 0; t < d; ++t) d_pc[j][t] += vg.claim[t] / c.pc.size();

  for (int i = 0; i < L; ++i) outer_acc(m.proj, vg.sents[i], enc.sent_embs[i]);
  for (size_t j = 0; j < d_pc.size(); ++j) outer_acc(m.proj, d_pc[j], enc.claim_embs[j]);
}

}  // namespace evex
