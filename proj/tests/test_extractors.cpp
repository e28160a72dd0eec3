#include <catch2/catch_amalgamated.hpp>

#include "evex/extractors.hpp"
#include "evex/metrics.hpp"

using namespace evex;

namespace {

claim_instance long_sentence_instance() {
  claim_instance inst;
  inst.id = "x0";
  inst.label = 1;
  inst.claim = "Rivers carry sediment toward the delta every season.";
  inst.documents = {{"Rivers carry sediment toward the delta in spring.",
                     "Completely unrelated musings about distant galaxies and dust.",
                     "The delta region floods when sediment blocks the channel.",
                     "Cooking rice requires patience and a heavy covered pot.",
                     "Sediment carried by rivers settles near the delta mouth."}};
  inst.snippet_anchor = {2};
  inst.gold_evidence = {0, 2};
  return inst;
}

tfidf_index fit_on(const claim_instance& inst) {
  std::vector<std::string> sents;
  for (const auto& doc : inst.documents)
    for (const auto& s : doc) sents.push_back(s);
  tfidf_index idx;
  idx.fit(sents);
  return idx;
}

}  // namespace

TEST_CASE("anchor windows clamp to document edges") {
  claim_instance inst;
  inst.claim = "c.";
  inst.label = 0;
  inst.documents = {{"a.", "b.", "c.", "d."}, {"e.", "f."}, {"g."}};
  inst.snippet_anchor = {0, 1, 0};

  auto r = extract_rule(inst, 2);
  REQUIRE(r.selected == std::vector<int>{0, 1, 4, 5, 6});
  REQUIRE(r.mask.size() == 7);
  REQUIRE(r.mask[0] == 1.0);
  REQUIRE(r.mask[2] == 0.0);

  inst.snippet_anchor = {3, 0, 0};
  auto tail = extract_rule(inst, 3);
  REQUIRE(tail.selected == std::vector<int>{1, 2, 3, 4, 5, 6});

  auto wide = extract_rule(inst, 10);
  REQUIRE(wide.selected.size() == 7);
  REQUIRE_THROWS_AS(extract_rule(inst, 0), parameter_error);
}

TEST_CASE("lexical extraction ranks overlapping sentences first and honors the filter") {
  auto inst = long_sentence_instance();
  auto idx = fit_on(inst);
  auto top2 = extract_surface(inst, idx, 2);
  REQUIRE(top2.selected.size() == 2);
  for (int i : top2.selected) REQUIRE((i == 0 || i == 2 || i == 4));

  // short sentences never qualify, however well they match
  claim_instance shorty = inst;
  shorty.documents[0][1] = "Rivers carry sediment.";
  auto idx2 = fit_on(shorty);
  auto all = extract_surface(shorty, idx2, 10);
  for (int i : all.selected) REQUIRE(i != 1);
  REQUIRE(all.selected.size() == 4);

  REQUIRE(extract_surface(inst, idx, 0).selected.empty());
  REQUIRE_THROWS_AS(extract_surface(inst, idx, -1), parameter_error);
}

TEST_CASE("embedding extraction prefers sentences near the claim vector") {
  auto inst = long_sentence_instance();
  auto enc = encode_instance(inst, 32);
  auto top = extract_semantic(enc, 2);
  REQUIRE(top.selected.size() == 2);
  for (int i : top.selected) REQUIRE((i == 0 || i == 2 || i == 4));
  auto everything = extract_semantic(enc, 99);
  REQUIRE(everything.selected.size() == 5);
}

TEST_CASE("ranker features live on the unit interval rank scale") {
  auto inst = long_sentence_instance();
  auto enc = encode_instance(inst, 32);
  auto idx = fit_on(inst);
  auto f = hybrid_features(inst, enc, idx);
  REQUIRE(f.size() == 5);
  double best_lex = 0.0, best_sem = 0.0;
  for (const auto& row : f) {
    REQUIRE(row[0] >= 0.0);
    REQUIRE(row[0] <= 1.0);
    REQUIRE(row[2] >= 0.0);
    REQUIRE(row[2] <= 1.0);
    best_lex = std::max(best_lex, row[0]);
    best_sem = std::max(best_sem, row[2]);
  }
  REQUIRE(best_lex == 1.0);
  REQUIRE(best_sem == 1.0);
}

TEST_CASE("combined ranker with a pure lexical weight matches lexical extraction") {
  auto inst = long_sentence_instance();  // every sentence here passes the filter
  auto enc = encode_instance(inst, 32);
  auto idx = fit_on(inst);

  hybrid_ranker ranker;
  REQUIRE_THROWS_AS(extract_hybrid(inst, enc, idx, ranker, 3), state_error);

  ranker.trained = true;
  ranker.weights = {0.0, 1.0, 0.0, 0.0};
  REQUIRE(extract_hybrid(inst, enc, idx, ranker, 3).selected == extract_surface(inst, idx, 3).selected);

  ranker.weights = {0.0, 0.0, 0.0, 0.0};  // ties fall back to sentence order
  REQUIRE(extract_hybrid(inst, enc, idx, ranker, 2).selected == std::vector<int>{0, 1});
}

TEST_CASE("baseline dispatch runs the matching extractor") {
  auto inst = long_sentence_instance();
  auto enc = encode_instance(inst, 32);
  auto idx = fit_on(inst);
  hybrid_ranker ranker;
  ranker.trained = true;
  ranker.weights = {0.5, 0.5, 0.5, 0.5};
  baseline_config cfg;
  cfg.top_k = 2;
  cfg.rule_window = 2;

  REQUIRE(run_baseline(extractor_kind::rule, inst, enc, idx, ranker, cfg).selected ==
          extract_rule(inst, 2).selected);
  REQUIRE(run_baseline(extractor_kind::surface, inst, enc, idx, ranker, cfg).selected ==
          extract_surface(inst, idx, 2).selected);
  REQUIRE(run_baseline(extractor_kind::semantic, inst, enc, idx, ranker, cfg).selected ==
          extract_semantic(enc, 2).selected);
  REQUIRE(run_baseline(extractor_kind::hybrid, inst, enc, idx, ranker, cfg).selected ==
          extract_hybrid(inst, enc, idx, ranker, 2).selected);
  REQUIRE_THROWS_AS(run_baseline(extractor_kind::scale, inst, enc, idx, ranker, cfg), parameter_error);
}

TEST_CASE("lexical top five recovers most planted evidence") {
  generator_config gcfg;
  gcfg.instances = 500;
  gcfg.seed = 71;
  auto corpus = generate_corpus(gcfg);

  std::vector<std::string> sents;
  for (const auto& inst : corpus)
    for (const auto& doc : inst.documents)
      for (const auto& s : doc) sents.push_back(s);
  tfidf_index idx;
  idx.fit(sents);

  double recall = 0.0;
  for (const auto& inst : corpus) {
    auto got = extract_surface(inst, idx, 5);
    recall += evidence_prf(got.selected, inst.gold_evidence).recall;
  }
  recall /= corpus.size();
  INFO("mean top-5 recall " << recall);
  REQUIRE(recall >= 0.8);
}
