// Command line front end: corpus generation, training, evaluation, budget
// sweeps, and a built-in gradient self-check.
//
// Exit codes: 0 success, 1 negative-control defect caught, 2 usage or
// configuration problem, 3 numeric failure.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "evex/train.hpp"

using namespace evex;

namespace {

// relative paths resolve under EVEX_DATA_DIR when it is set
std::string resolve_path(const std::string& p) {
  if (p.empty() || std::filesystem::path(p).is_absolute()) return p;
  const char* base = std::getenv("EVEX_DATA_DIR");
  if (!base || !*base) return p;
  return (std::filesystem::path(base) / p).string();
}

std::string meta_get(const model_metadata& meta, const std::string& key, const std::string& fallback) {
  for (const auto& [k, v] : meta)
    if (k == key) return v;
  return fallback;
}

struct cli_settings {
  std::string data, dev, out, model, report;
  std::string extractor = "scale";
  std::string budgets = "0,2,4,8,16";
  int instances = 1000;
  int docs = 3;
  int sentences = 30;
  int epochs = 5;
  int budget = 8;
  int top_k = 5;
  int rule_window = 2;
  int dim = 64;
  int hidden = 200;
  uint64_t seed = 1;
  double lr = 1e-3;
  double temperature = 0.5;
  double l0 = 0.0;
  bool no_gold = false;
  bool graph_verifier = false;
  bool freeze_pair = false;
  bool inject_bug = false;
};

int cmd_generate(const cli_settings& s) {
  generator_config cfg;
  cfg.instances = s.instances;
  cfg.seed = s.seed;
  cfg.docs_per_claim = s.docs;
  cfg.sentences_per_doc = s.sentences;
  cfg.with_gold = !s.no_gold;
  auto corpus = generate_corpus(cfg);
  std::string path = resolve_path(s.out);
  save_corpus(path, corpus);
  std::cout << "wrote " << corpus.size() << " instances to " << path << "\n";
  return 0;
}

forward_options options_from(const cli_settings& s) {
  forward_options opt;
  opt.kind = kind_from_name(s.extractor);
  opt.budget = s.budget;
  opt.temperature = s.temperature;
  opt.l0_weight = s.l0;
  opt.graph_verifier = s.graph_verifier;
  opt.freeze_pair = s.freeze_pair;
  return opt;
}

forward_options options_from_meta(const model_metadata& meta) {
  forward_options opt;
  opt.kind = kind_from_name(meta_get(meta, "extractor", "scale"));
  opt.budget = std::stoi(meta_get(meta, "budget", "8"));
  opt.temperature = std::stod(meta_get(meta, "temperature", "0.5"));
  opt.l0_weight = std::stod(meta_get(meta, "l0_weight", "0"));
  opt.graph_verifier = meta_get(meta, "graph_verifier", "0") == "1";
  return opt;
}

tfidf_index fit_index(const std::vector<claim_instance>& corpus) {
  std::vector<std::string> sents;
  for (const auto& inst : corpus)
    for (const auto& doc : inst.documents)
      for (const auto& sent : doc) sents.push_back(sent);
  tfidf_index index;
  index.fit(sents);
  return index;
}

int cmd_train(const cli_settings& s) {
  auto corpus = load_corpus(resolve_path(s.data));
  auto encs = encode_corpus(corpus, s.dim);
  std::vector<claim_instance> dev_corpus;
  std::vector<encoded_instance> dev_encs;
  if (!s.dev.empty()) {
    dev_corpus = load_corpus(resolve_path(s.dev));
    dev_encs = encode_corpus(dev_corpus, s.dim);
  }

  train_config cfg;
  cfg.forward = options_from(s);
  cfg.epochs = s.epochs;
  cfg.lr = s.lr;
  cfg.seed = s.seed;

  tfidf_index index;
  hybrid_ranker ranker;
  baseline_config bcfg;
  bcfg.top_k = s.top_k;
  bcfg.rule_window = s.rule_window;
  if (is_baseline_kind(cfg.forward.kind)) {
    index = fit_index(corpus);
    if (cfg.forward.kind == extractor_kind::hybrid) {
      ranker_train_config rcfg;
      rcfg.seed = s.seed;
      ranker = train_hybrid_ranker(corpus, encs, index, rcfg);
    }
    prepare_baseline_masks(cfg.forward.kind, corpus, encs, index, ranker, bcfg);
    if (!dev_encs.empty()) prepare_baseline_masks(cfg.forward.kind, dev_corpus, dev_encs, index, ranker, bcfg);
  }

  model_config mcfg;
  mcfg.dim = s.dim;
  mcfg.hidden = s.hidden;
  mcfg.classes = n_labels;
  mcfg.seed = s.seed;
  auto m = make_model(mcfg);

  auto report = joint_train(m, encs, dev_encs, cfg);
  for (const auto& e : report.epochs) {
    std::cout << "epoch " << e.epoch << " train_loss " << e.train_loss;
    if (!dev_encs.empty())
      std::cout << " dev_loss " << e.dev_loss << " dev_macro_f1 " << e.dev_macro_f1 << " dev_evidence_f1 "
                << e.dev_evidence_f1 << " mean_selected " << e.mean_selected;
    std::cout << "\n";
  }
  std::cout << "trained " << s.extractor << " for " << s.epochs << " epochs in " << report.wall_seconds
            << "s (final lr " << report.final_lr << ")\n";

  model_metadata meta{{"extractor", s.extractor},
                      {"budget", std::to_string(s.budget)},
                      {"temperature", csv_num(s.temperature)},
                      {"l0_weight", csv_num(s.l0)},
                      {"graph_verifier", s.graph_verifier ? "1" : "0"},
                      {"top_k", std::to_string(s.top_k)},
                      {"rule_window", std::to_string(s.rule_window)},
                      {"seed", std::to_string(s.seed)}};
  if (ranker.trained) {
    meta.emplace_back("ranker_trained", "1");
    for (int j = 0; j < 4; ++j) meta.emplace_back("ranker_w" + std::to_string(j), csv_num(ranker.weights[j]));
  }
  std::string model_path = resolve_path(s.out);
  save_model(model_path, m, meta);
  std::cout << "saved checkpoint to " << model_path << "\n";
  if (!s.report.empty()) {
    std::string report_path = resolve_path(s.report);
    atomic_write_file(report_path, report_csv(report));
    std::cout << "saved training report to " << report_path << "\n";
  }
  return 0;
}

struct loaded_model {
  model_params m;
  model_metadata meta;
  forward_options opt;
  std::vector<claim_instance> corpus;
  std::vector<encoded_instance> encs;
};

loaded_model load_for_eval(const cli_settings& s) {
  model_metadata meta;
  auto m = load_model(resolve_path(s.model), &meta);
  auto opt = options_from_meta(meta);
  auto corpus = load_corpus(resolve_path(s.data));
  auto encs = encode_corpus(corpus, m.cfg.dim);
  if (is_baseline_kind(opt.kind)) {
    // document-frequency statistics come from the evaluation documents; no labels or gold involved
    auto index = fit_index(corpus);
    hybrid_ranker ranker;
    if (meta_get(meta, "ranker_trained", "0") == "1") {
      ranker.trained = true;
      for (int j = 0; j < 4; ++j) ranker.weights[j] = std::stod(meta_get(meta, "ranker_w" + std::to_string(j), "0"));
    }
    baseline_config bcfg;
    bcfg.top_k = std::stoi(meta_get(meta, "top_k", "5"));
    bcfg.rule_window = std::stoi(meta_get(meta, "rule_window", "2"));
    prepare_baseline_masks(opt.kind, corpus, encs, index, ranker, bcfg);
  }
  return {std::move(m), std::move(meta), opt, std::move(corpus), std::move(encs)};
}

int cmd_evaluate(const cli_settings& s) {
  auto lm = load_for_eval(s);
  auto ev = evaluate_model(lm.m, lm.encs, lm.opt);
  std::cout << "instances " << lm.encs.size() << "\n"
            << "macro_f1 " << ev.macro << "\n"
            << "evidence_precision " << ev.evidence_p << "\n"
            << "evidence_recall " << ev.evidence_r << "\n"
            << "evidence_f1 " << ev.evidence_f1 << "\n"
            << "mean_selected " << ev.mean_selected << "\n"
            << "mean_runs " << ev.mean_runs << "\n"
            << "mean_nll " << ev.mean_nll << "\n";
  if (!s.out.empty()) {
    std::string csv = csv_table(
        {"macro_f1", "evidence_precision", "evidence_recall", "evidence_f1", "mean_selected", "mean_runs",
         "mean_nll"},
        {{csv_num(ev.macro), csv_num(ev.evidence_p), csv_num(ev.evidence_r), csv_num(ev.evidence_f1),
          csv_num(ev.mean_selected), csv_num(ev.mean_runs), csv_num(ev.mean_nll)}});
    std::string path = resolve_path(s.out);
    atomic_write_file(path, csv);
    std::cout << "saved metrics to " << path << "\n";
  }
  return 0;
}

int cmd_sweep(const cli_settings& s) {
  auto lm = load_for_eval(s);
  std::vector<int> budgets;
  std::string token;
  for (char c : s.budgets + ",") {
    if (c == ',') {
      if (!token.empty()) budgets.push_back(std::stoi(token));
      token.clear();
    } else {
      token += c;
    }
  }
  if (budgets.empty()) throw config_error("sweep: no budgets given");
  auto rows = budget_sweep(lm.m, lm.encs, lm.opt, budgets);
  for (const auto& r : rows)
    std::cout << "budget " << r.budget << " macro_f1 " << r.macro_f1 << " evidence_f1 " << r.evidence_f1
              << " mean_selected " << r.mean_selected << "\n";
  std::string path = resolve_path(s.out);
  atomic_write_file(path, sweep_csv(rows));
  std::cout << "saved sweep to " << path << "\n";
  return 0;
}

// built-in gradient self-check; --inject-bug sabotages one gradient on
// purpose and must be caught
int cmd_gradcheck(const cli_settings& s) {
  const double tol = 1e-4, h = 1e-5;
  double worst = 0.0;
  bool bug_caught = false;

  // solver backward against central differences on packed (unary, pair)
  {
    rng_stream rng(s.seed);
    int used = 0;
    for (int inst = 0; inst < 12; ++inst) {
      const int L = 3 + inst % 5;
      importance_scores sc;
      sc.unary.resize(L);
      sc.pair.assign(L - 1, 0.0);
      for (double& x : sc.unary) x = rng.uniform(-1, 1);
      for (double& x : sc.pair) x = rng.uniform(0, 0.8);
      const int k = 1 + inst % L;
      vec upstream(L);
      for (double& x : upstream) x = rng.uniform(-1, 1);
      solver_config scfg;
      scfg.iterations = 400;
      scfg.throw_on_nonconverged = false;

      scale_tape tape;
      auto sol = scale_forward(sc, k, scfg, &tape);
      if (sol.residual > 1e-7) continue;
      auto grads = scale_backward(tape, upstream);
      if (s.inject_bug && inst == 0) grads.unary[0] += 0.05;

      auto support = [&](const importance_scores& probe) {
        auto r = scale_forward(probe, k, scfg);
        std::vector<int> on;
        for (int i = 0; i < L; ++i)
          if (r.mask.values[i] > 1e-9) on.push_back(i);
        return on;
      };
      auto value = [&](const importance_scores& probe) {
        return dot(upstream, scale_forward(probe, k, scfg).mask.values);
      };
      bool counted = false;
      for (int i = 0; i < L + L - 1; ++i) {
        importance_scores up = sc, dn = sc;
        double an;
        if (i < L) {
          up.unary[i] += h;
          dn.unary[i] -= h;
          an = grads.unary[i];
        } else {
          up.pair[i - L] += h;
          dn.pair[i - L] -= h;
          an = grads.pair[i - L];
        }
        if (support(up) != support(dn)) continue;  // probe crossed a support boundary
        double fd = (value(up) - value(dn)) / (2 * h);
        double err = std::abs(fd - an) / std::max(1.0, std::abs(an));
        if (s.inject_bug && err > tol) bug_caught = true;
        else worst = std::max(worst, err);
        counted = true;
      }
      if (counted) ++used;
    }
    std::cout << "solver backward: max relative error " << worst << " over " << used << " instances\n";
  }

  // verifier heads and the full model path
  {
    double section_worst = 0.0;
    rng_stream rng(s.seed + 1);
    generator_config gcfg;
    gcfg.instances = 2;
    gcfg.seed = s.seed;
    gcfg.docs_per_claim = 2;
    gcfg.sentences_per_doc = 6;
    auto corpus = generate_corpus(gcfg);
    auto encs = encode_corpus(corpus, 16);

    model_config mcfg;
    mcfg.dim = 16;
    mcfg.hidden = 24;
    mcfg.classes = n_labels;
    mcfg.seed = s.seed;

    for (auto kind : {extractor_kind::attention, extractor_kind::gumbel, extractor_kind::hardkuma,
                      extractor_kind::fusedmax, extractor_kind::scale}) {
      for (int gv = 0; gv < 2; ++gv) {
        auto m = make_model(mcfg);
        for (double& x : m.proj.v) x += 0.03 * rng.normal();
        forward_options opt;
        opt.kind = kind;
        opt.budget = 4;
        opt.l0_weight = 0.01;
        opt.graph_verifier = gv == 1;

        forward_cache cache;
        model_forward(m, encs[0], opt, nullptr, &cache);
        m.zero_grad();
        model_backward(m, encs[0], opt, cache);

        for (auto& [name, t] : m.named()) {
          bool graph_tensor = name[0] == 'v';
          if (graph_tensor != opt.graph_verifier) continue;
          if (std::string(name) == "pair_raw" && kind != extractor_kind::scale) continue;
          for (int p = 0; p < 2; ++p) {
            int i = rng.uniform_int(0, t->size() - 1);
            double keep = t->v[i];
            t->v[i] = keep + h;
            auto up = model_forward(m, encs[0], opt);
            t->v[i] = keep - h;
            auto dn = model_forward(m, encs[0], opt);
            t->v[i] = keep;
            if (up.selected != dn.selected) continue;
            double fd = (up.loss - dn.loss) / (2 * h);
            double err = std::abs(fd - t->g[i]) / std::max(1.0, std::abs(t->g[i]));
            section_worst = std::max(section_worst, err);
          }
        }
      }
    }
    worst = std::max(worst, section_worst);
    std::cout << "model backward: max relative error " << section_worst
              << " across extractors and verifiers\n";
  }

  if (s.inject_bug) {
    if (bug_caught) {
      std::cout << "negative control: injected gradient defect was caught\n";
      return 1;
    }
    std::cerr << "negative control failed: injected defect slipped through\n";
    return 3;
  }
  if (worst > tol) {
    std::cerr << "gradient check failed: worst relative error " << worst << " exceeds " << tol << "\n";
    return 3;
  }
  std::cout << "all gradient checks within " << tol << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"latent evidence extraction and claim verification"};
  app.require_subcommand(1);
  cli_settings s;

  auto* gen = app.add_subcommand("generate", "write a synthetic claim corpus");
  gen->add_option("--out", s.out, "output dataset path")->required();
  gen->add_option("--instances", s.instances, "number of claims");
  gen->add_option("--seed", s.seed, "generator seed");
  gen->add_option("--docs", s.docs, "documents per claim");
  gen->add_option("--sentences", s.sentences, "sentences per document");
  gen->add_flag("--no-gold", s.no_gold, "omit gold evidence annotations");

  auto* train = app.add_subcommand("train", "train an extractor/verifier model");
  train->add_option("--data", s.data, "training dataset")->required();
  train->add_option("--dev", s.dev, "development dataset");
  train->add_option("--out", s.out, "checkpoint output path")->required();
  train->add_option("--report", s.report, "per-epoch CSV report path");
  train->add_option("--extractor", s.extractor,
                    "rule|surface|semantic|hybrid|attention|reinforce|gumbel|hardkuma|fusedmax|scale");
  train->add_option("--epochs", s.epochs, "training epochs");
  train->add_option("--lr", s.lr, "learning rate");
  train->add_option("--seed", s.seed, "training seed");
  train->add_option("--budget", s.budget, "selection budget");
  train->add_option("--dim", s.dim, "embedding dimension");
  train->add_option("--hidden", s.hidden, "verifier hidden width");
  train->add_option("--temperature", s.temperature, "gate temperature");
  train->add_option("--l0", s.l0, "sparsity penalty weight");
  train->add_option("--top-k", s.top_k, "baseline selection size");
  train->add_option("--rule-window", s.rule_window, "anchor window width");
  train->add_flag("--graph-verifier", s.graph_verifier, "use the graph verdict head");
  train->add_flag("--freeze-pair", s.freeze_pair, "keep the pair weight fixed");

  auto* eval = app.add_subcommand("evaluate", "score a checkpoint on a dataset");
  eval->add_option("--data", s.data, "evaluation dataset")->required();
  eval->add_option("--model", s.model, "checkpoint path")->required();
  eval->add_option("--out", s.out, "optional metrics CSV path");

  auto* sweep = app.add_subcommand("sweep", "evaluate across selection budgets");
  sweep->add_option("--data", s.data, "evaluation dataset")->required();
  sweep->add_option("--model", s.model, "checkpoint path")->required();
  sweep->add_option("--out", s.out, "sweep CSV path")->required();
  sweep->add_option("--budgets", s.budgets, "comma-separated budgets");

  auto* grad = app.add_subcommand("gradcheck", "run built-in gradient checks");
  grad->add_option("--seed", s.seed, "probe seed");
  grad->add_flag("--inject-bug", s.inject_bug)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand(gen)) return cmd_generate(s);
    if (app.got_subcommand(train)) return cmd_train(s);
    if (app.got_subcommand(eval)) return cmd_evaluate(s);
    if (app.got_subcommand(sweep)) return cmd_sweep(s);
    if (app.got_subcommand(grad)) return cmd_gradcheck(s);
    std::cerr << "no command given\n";
    return 2;
  } catch (const convergence_error& e) {
    std::cerr << "numeric failure: " << e.what() << " (residual " << e.residual << ")\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::logic_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
