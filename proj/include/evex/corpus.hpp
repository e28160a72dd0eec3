#pragma once

// Claim instances, the synthetic corpus generator, and the versioned JSONL
// dataset format.
//
// Generated instances plant a contiguous run of 2-4 evidence sentences inside
// one document. Evidence sentences share content words with the claim and
// carry a label marker token that appears nowhere else, so the verdict is
// fully decodable from gold evidence but only group-level decodable from the
// claim itself (verdict pairs share their claim phrasing).

#include <json.hpp>

#include "evex/io.hpp"

namespace evex {

constexpr int n_labels = 7;

inline const std::vector<std::string>& label_names() {
  static const std::vector<std::string> names{"False",      "Mostly False", "Partly True", "Mostly True",
                                              "True",       "Unverifiable", "Other"};
  return names;
}

struct claim_instance {
  std::string id;
  std::string claim;
  std::vector<std::vector<std::string>> documents;  // documents -> sentences
  std::vector<int> snippet_anchor;                  // one per document
  std::vector<int> gold_evidence;                   // global sentence indices, ascending
  bool has_gold = true;                             // false serializes gold_evidence as null
  int label = 0;
  std::vector<std::pair<std::string, std::string>> metadata;

  int total_sentences() const {
    int n = 0;
    for (const auto& d : documents) n += static_cast<int>(d.size());
    return n;
  }
  // global start index of each document
  std::vector<int> doc_offsets() const {
    std::vector<int> off;
    int n = 0;
    for (const auto& d : documents) {
      off.push_back(n);
      n += static_cast<int>(d.size());
    }
    return off;
  }
};

struct generator_config {
  int instances = 100;
  uint64_t seed = 1;
  int docs_per_claim = 3;
  int sentences_per_doc = 30;
  vec label_weights = vec(n_labels, 1.0);
  bool with_gold = true;
};

namespace detail {

inline std::string synth_word(uint64_t salt, int i) {
  static const char* syl[24] = {"ka", "ri", "to", "ne", "su", "mo", "fa", "li", "du", "pe", "vo", "za",
                                "bi", "ce", "dal", "gur", "hem", "jin", "kol", "lus", "nor", "pra", "tev", "wix"};
  uint64_t h = splitmix64(salt * 0x51ed2701u + static_cast<uint64_t>(i));
  std::string w = syl[h % 24];
  w += syl[i % 24];
  w += syl[(i / 24) % 24];
  return w;
}

inline const std::vector<std::string>& content_words() {
  static const std::vector<std::string> words = [] {
    std::vector<std::string> v;
    for (int i = 0; i < 400; ++i) v.push_back(synth_word(11, i));
    return v;
  }();
  return words;
}

inline const std::vector<std::string>& filler_words() {
  static const std::vector<std::string> words = [] {
    std::vector<std::string> v;
    for (int i = 0; i < 300; ++i) v.push_back(synth_word(23, i));
    return v;
  }();
  return words;
}

// one distinctive token per verdict, present only in gold evidence
inline const std::vector<std::string>& label_markers() {
  static const std::vector<std::string> m{"kodrazil", "mivarto", "selbune", "tarvick",
                                          "ulmonda",  "pexrino", "quarzen"};
  return m;
}

// verdict pairs share claim phrasing, so the claim alone cannot separate them
inline const char* group_phrase(int label) {
  switch (label) {
    case 0:
    case 1:
      return "Reports dispute the account";
    case 2:
      return "Reports partly support the account";
    case 3:
    case 4:
      return "Reports affirm the account";
    default:
      return "Coverage of the account stays unclear";
  }
}

inline int sample_label(const vec& weights, rng_stream& rng) {
  if (static_cast<int>(weights.size()) != n_labels)
    throw config_error("generator: label distribution needs 7 weights");
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw config_error("generator: negative label weight");
    total += w;
  }
  if (total <= 0.0) throw config_error("generator: label weights sum to zero");
  double u = rng.uniform() * total;
  for (int l = 0; l < n_labels; ++l) {
    u -= weights[l];
    if (u < 0.0) return l;
  }
  return n_labels - 1;
}

}  // namespace detail

inline claim_instance generate_instance(const generator_config& cfg, int index) {
  // a derived stream per instance keeps content independent of call order
  rng_stream rng = rng_stream::derive(cfg.seed, 0x696e7374ull, static_cast<uint64_t>(index));
  const auto& content = detail::content_words();
  const auto& filler = detail::filler_words();

  claim_instance inst;
  char idbuf[32];
  std::snprintf(idbuf, sizeof idbuf, "i%06d", index);
  inst.id = idbuf;
  inst.label = detail::sample_label(cfg.label_weights, rng);

  // topic words shared between claim and planted evidence
  std::vector<std::string> topic;
  while (topic.size() < 5) {
    const std::string& w = content[rng.uniform_int(0, static_cast<int>(content.size()) - 1)];
    bool dup = false;
    for (const auto& t : topic) dup = dup || t == w;
    if (!dup) topic.push_back(w);
  }

  inst.claim = "The claim ties " + topic[0] + " " + topic[1] + " " + topic[2] + " to " + topic[3] + " " +
               topic[4] + ". " + detail::group_phrase(inst.label) + ".";

  static const char* langs[4] = {"en", "fr", "de", "es"};
  static const char* origins[3] = {"wire", "blog", "ledger"};
  inst.metadata.emplace_back("language", langs[rng.uniform_int(0, 3)]);
  inst.metadata.emplace_back("origin", origins[rng.uniform_int(0, 2)]);

  auto pick_filler = [&]() -> const std::string& {
    return filler[rng.uniform_int(0, static_cast<int>(filler.size()) - 1)];
  };
  auto pick_content = [&]() -> const std::string& {
    return content[rng.uniform_int(0, static_cast<int>(content.size()) - 1)];
  };
  auto distractor = [&]() {
    if (rng.uniform() < 0.15) return "Short note about " + pick_filler() + ".";
    std::string s = "Background on " + pick_content() + " " + pick_filler() + " mentions " + pick_filler() +
                    " " + pick_filler();
    if (rng.uniform() < 0.2) s += " " + topic[rng.uniform_int(0, 4)];
    return s + ".";
  };

  const int gold_doc = rng.uniform_int(0, cfg.docs_per_claim - 1);
  const int run_len = rng.uniform_int(2, 4);
  int run_start = -1;

  for (int d = 0; d < cfg.docs_per_claim; ++d) {
    int n_sent = std::max(run_len + 2, cfg.sentences_per_doc + rng.uniform_int(-3, 3));
    std::vector<std::string> sents;
    for (int s = 0; s < n_sent; ++s) sents.push_back(distractor());
    if (d == gold_doc) {
      run_start = rng.uniform_int(0, n_sent - run_len);
      for (int s = 0; s < run_len; ++s) {
        int a = rng.uniform_int(0, 4), b = rng.uniform_int(0, 4), c = rng.uniform_int(0, 4);
        sents[run_start + s] = "Checks of " + topic[a] + " " + topic[b] + " and " + topic[c] + " " +
                               detail::label_markers()[inst.label] + " note " + pick_filler() + " " +
                               pick_filler() + ".";
      }
      inst.snippet_anchor.push_back(run_start + run_len / 2);
    } else {
      inst.snippet_anchor.push_back(rng.uniform_int(0, n_sent - 1));
    }
    inst.documents.push_back(std::move(sents));
  }

  if (cfg.with_gold) {
    int offset = 0;
    for (int d = 0; d < gold_doc; ++d) offset += static_cast<int>(inst.documents[d].size());
    for (int s = 0; s < run_len; ++s) inst.gold_evidence.push_back(offset + run_start + s);
  } else {
    inst.has_gold = false;
  }
  return inst;
}

inline std::vector<claim_instance> generate_corpus(const generator_config& cfg) {
  if (cfg.instances < 0) throw config_error("generator: negative instance count");
  if (cfg.docs_per_claim < 1) throw config_error("generator: need at least one document");
  if (cfg.sentences_per_doc < 6) throw config_error("generator: need at least 6 sentences per document");
  std::vector<claim_instance> out;
  out.reserve(cfg.instances);
  for (int i = 0; i < cfg.instances; ++i) out.push_back(generate_instance(cfg, i));
  return out;
}

// ---- JSONL (first line is the "#v1" version comment) ----

inline nlohmann::ordered_json instance_to_json(const claim_instance& inst) {
  nlohmann::ordered_json j;
  j["id"] = inst.id;
  j["claim"] = inst.claim;
  j["documents"] = inst.documents;
  j["snippet_anchor"] = inst.snippet_anchor;
  if (inst.has_gold)
    j["gold_evidence"] = inst.gold_evidence;
  else
    j["gold_evidence"] = nullptr;
  j["label"] = inst.label;
  nlohmann::ordered_json meta = nlohmann::ordered_json::object();
  for (const auto& [k, v] : inst.metadata) meta[k] = v;
  j["metadata"] = meta;
  return j;
}

inline claim_instance instance_from_json(const nlohmann::json& j) {
  claim_instance inst;
  try {
    inst.id = j.at("id").get<std::string>();
    inst.claim = j.at("claim").get<std::string>();
    inst.documents = j.at("documents").get<std::vector<std::vector<std::string>>>();
    inst.snippet_anchor = j.at("snippet_anchor").get<std::vector<int>>();
    if (j.at("gold_evidence").is_null()) {
      inst.has_gold = false;
    } else {
      inst.gold_evidence = j.at("gold_evidence").get<std::vector<int>>();
    }
    inst.label = j.at("label").get<int>();
    for (const auto& [k, v] : j.at("metadata").items())
      inst.metadata.emplace_back(k, v.get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("instance parse: ") + e.what());
  }
  if (inst.label < 0 || inst.label >= n_labels) throw config_error("instance parse: label out of range");
  if (inst.snippet_anchor.size() != inst.documents.size())
    throw config_error("instance parse: one anchor per document required");
  const int total = inst.total_sentences();
  for (size_t d = 0; d < inst.documents.size(); ++d)
    if (inst.snippet_anchor[d] < 0 || inst.snippet_anchor[d] >= static_cast<int>(inst.documents[d].size()))
      throw config_error("instance parse: anchor outside document");
  for (int g : inst.gold_evidence)
    if (g < 0 || g >= total) throw config_error("instance parse: gold index outside corpus");
  return inst;
}

inline std::string serialize_corpus(const std::vector<claim_instance>& corpus) {
  std::string out = "#v1 claim-instance jsonl\n";
  for (const auto& inst : corpus) out += instance_to_json(inst).dump() + "\n";
  return out;
}

inline std::vector<claim_instance> parse_corpus(const std::string& text) {
  std::vector<claim_instance> out;
  size_t pos = 0;
  bool saw_version = false;
  int lineno = 0;
  while (pos < text.size()) {
    size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (lineno == 1 && line.rfind("#v1", 0) == 0) saw_version = true;
      continue;
    }
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw config_error("dataset line " + std::to_string(lineno) + ": invalid JSON");
    out.push_back(instance_from_json(j));
  }
  if (!saw_version) throw config_error("dataset: missing #v1 version line");
  return out;
}

inline void save_corpus(const std::string& path, const std::vector<claim_instance>& corpus) {
  atomic_write_file(path, serialize_corpus(corpus));
}

inline std::vector<claim_instance> load_corpus(const std::string& path) {
  return parse_corpus(read_file(path));
}

}  // namespace evex
