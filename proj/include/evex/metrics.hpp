#pragma once

// Evaluation metrics for evidence selection and verdict prediction, plus the
// tiny versioned CSV writer used by training reports and sweeps.

#include <algorithm>
#include <set>
#include <sstream>

#include "evex/common.hpp"

namespace evex {

struct prf_scores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Set overlap between predicted and gold sentence indices. Empty against
// empty counts as a perfect match; an empty gold set makes recall vacuously 1
// while every prediction counts against precision.
inline prf_scores evidence_prf(const std::vector<int>& predicted, const std::vector<int>& gold) {
  std::set<int> p(predicted.begin(), predicted.end());
  std::set<int> g(gold.begin(), gold.end());
  prf_scores out;
  if (p.empty() && g.empty()) {
    out.precision = out.recall = out.f1 = 1.0;
    return out;
  }
  int hit = 0;
  for (int i : p) hit += g.count(i) ? 1 : 0;
  out.precision = p.empty() ? 0.0 : static_cast<double>(hit) / p.size();
  out.recall = g.empty() ? 1.0 : static_cast<double>(hit) / g.size();
  double denom = out.precision + out.recall;
  out.f1 = denom > 0.0 ? 2.0 * out.precision * out.recall / denom : 0.0;
  return out;
}

// Macro F1 over a fixed label set: every class contributes, absent ones as 0.
inline double macro_f1(const std::vector<int>& predicted, const std::vector<int>& gold, int num_classes) {
  if (predicted.size() != gold.size()) throw dimension_error("macro_f1: prediction/gold length mismatch");
  if (num_classes < 1) throw parameter_error("macro_f1: need at least one class");
  std::vector<int> tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0);
  for (size_t i = 0; i < gold.size(); ++i) {
    int p = predicted[i], g = gold[i];
    if (p < 0 || p >= num_classes || g < 0 || g >= num_classes)
      throw parameter_error("macro_f1: label out of range");
    if (p == g)
      ++tp[p];
    else {
      ++fp[p];
      ++fn[g];
    }
  }
  double total = 0.0;
  for (int c = 0; c < num_classes; ++c) {
    double denom = 2.0 * tp[c] + fp[c] + fn[c];
    total += denom > 0.0 ? 2.0 * tp[c] / denom : 0.0;
  }
  return total / num_classes;
}

// Number of maximal contiguous index runs, never counting across document
// boundaries. `doc_offsets` holds the global start index of each document.
inline int contiguity_runs(const std::vector<int>& selected, const std::vector<int>& doc_offsets) {
  if (selected.empty()) return 0;
  std::vector<int> idx(selected.begin(), selected.end());
  std::sort(idx.begin(), idx.end());
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  auto doc_of = [&](int i) {
    int d = 0;
    for (size_t k = 0; k < doc_offsets.size(); ++k)
      if (doc_offsets[k] <= i) d = static_cast<int>(k);
    return d;
  };
  int runs = 1;
  for (size_t k = 1; k < idx.size(); ++k)
    if (idx[k] != idx[k - 1] + 1 || doc_of(idx[k]) != doc_of(idx[k - 1])) ++runs;
  return runs;
}

// CSV with a "#v1" comment line, then the header, then one row per record.
inline std::string csv_table(const std::vector<std::string>& header,
                             const std::vector<std::vector<std::string>>& rows) {
  std::ostringstream out;
  out << "#v1 csv\n";
  for (size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << "\n";
  for (const auto& row : rows) {
    if (row.size() != header.size()) throw dimension_error("csv_table: row width mismatch");
    for (size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << "\n";
  }
  return out.str();
}

inline std::string csv_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace evex
