#include "dpkit/eval.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "dpkit/util.hpp"

namespace dpkit::eval {

namespace {

template <typename P, typename G>
void check_ids(const std::vector<P>& preds, const std::vector<G>& gold) {
  if (preds.size() != gold.size())
    throw IdMismatch("prediction/gold size mismatch: " + std::to_string(preds.size()) +
                     " vs " + std::to_string(gold.size()));
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i].id != gold[i].id)
      throw IdMismatch("id mismatch at row " + std::to_string(i) + ": '" + preds[i].id +
                       "' vs '" + gold[i].id + "'");
  }
}

}  // namespace

Confusion score_binary(const std::vector<BinaryPred>& preds,
                       const std::vector<BinaryGold>& gold) {
  check_ids(preds, gold);
  Confusion c;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    // Unparseable counts as the wrong class for the gold at hand.
    bool pred_yes = preds[i].value ? *preds[i].value : !gold[i].yes;
    if (gold[i].yes) {
      pred_yes ? ++c.tp : ++c.fn;
    } else {
      pred_yes ? ++c.fp : ++c.tn;
    }
  }
  return c;
}

double f1_from_pr(double precision, double recall) {
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

Prf prf1(const Confusion& c) {
  Prf out;
  if (c.tp + c.fp > 0) out.precision = 100.0 * double(c.tp) / double(c.tp + c.fp);
  if (c.tp + c.fn > 0) out.recall = 100.0 * double(c.tp) / double(c.tp + c.fn);
  out.f1 = f1_from_pr(out.precision, out.recall);
  return out;
}

double accuracy(const std::vector<ValuePred>& preds, const std::vector<ValueGold>& gold) {
  check_ids(preds, gold);
  if (gold.empty()) throw EmptySet("cannot compute accuracy over zero items");
  long correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (!preds[i].value) continue;
    if (util::fold_for_compare(*preds[i].value) == util::fold_for_compare(gold[i].value))
      ++correct;
  }
  return 100.0 * double(correct) / double(gold.size());
}

Prf micro_prf(const std::vector<ValuePred>& preds, const std::vector<ValueGold>& gold) {
  check_ids(preds, gold);
  if (gold.empty()) throw EmptySet("cannot compute micro F1 over zero items");
  long predicted = 0, correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (!preds[i].value) continue;  // abstention
    ++predicted;
    if (util::fold_for_compare(*preds[i].value) == util::fold_for_compare(gold[i].value))
      ++correct;
  }
  Prf out;
  if (predicted > 0) out.precision = 100.0 * double(correct) / double(predicted);
  out.recall = 100.0 * double(correct) / double(gold.size());
  out.f1 = f1_from_pr(out.precision, out.recall);
  return out;
}

double micro_f1(const std::vector<ValuePred>& preds, const std::vector<ValueGold>& gold) {
  return micro_prf(preds, gold).f1;
}

Prf ave_prf1(const std::vector<ValuePred>& preds, const std::vector<ValueGold>& gold) {
  check_ids(preds, gold);
  if (gold.empty()) throw EmptySet("cannot compute extraction metrics over zero items");
  auto is_na = [](const std::string& s) { return util::fold_for_compare(s) == "n/a"; };
  long pred_extracted = 0, gold_extractable = 0, correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    bool gold_has = !is_na(gold[i].value);
    if (gold_has) ++gold_extractable;
    if (!preds[i].value || is_na(*preds[i].value)) continue;
    ++pred_extracted;
    if (gold_has &&
        util::fold_for_compare(*preds[i].value) == util::fold_for_compare(gold[i].value))
      ++correct;
  }
  Prf out;
  if (pred_extracted > 0) out.precision = 100.0 * double(correct) / double(pred_extracted);
  if (gold_extractable > 0) out.recall = 100.0 * double(correct) / double(gold_extractable);
  out.f1 = f1_from_pr(out.precision, out.recall);
  return out;
}

double DatasetMetrics::headline() const {
  if (f1) return *f1;
  if (micro_f1) return *micro_f1;
  if (accuracy) return *accuracy;
  return 0.0;
}

void MetricReport::finalize() {
  average = 0.0;
  unparseable = 0;
  if (per_dataset.empty()) return;
  for (const auto& [name, m] : per_dataset) {
    average += m.headline();
    unparseable += m.unparseable;
  }
  average /= double(per_dataset.size());
}

CompareTable compare_report(const std::vector<std::pair<std::string, MetricReport>>& reports) {
  if (reports.empty()) throw EmptySet("no reports to compare");
  CompareTable table;
  std::set<std::string> keys;
  for (const auto& [name, m] : reports[0].second.per_dataset) keys.insert(name);
  for (const auto& [sys, rep] : reports) {
    table.systems.push_back(sys);
    std::set<std::string> got;
    for (const auto& [name, m] : rep.per_dataset) got.insert(name);
    if (got != keys) {
      std::string detail;
      for (const auto& k : keys)
        if (!got.count(k)) detail += " missing:" + k;
      for (const auto& k : got)
        if (!keys.count(k)) detail += " extra:" + k;
      throw KeyMismatch("dataset keys differ for system '" + sys + "':" + detail);
    }
  }
  table.datasets.assign(keys.begin(), keys.end());
  table.values.resize(table.datasets.size());
  table.winner.resize(table.datasets.size());
  table.averages.assign(table.systems.size(), 0.0);
  for (std::size_t d = 0; d < table.datasets.size(); ++d) {
    auto& row = table.values[d];
    for (const auto& [sys, rep] : reports)
      row.push_back(rep.per_dataset.at(table.datasets[d]).headline());
    table.winner[d] = std::size_t(std::max_element(row.begin(), row.end()) - row.begin());
    for (std::size_t s = 0; s < row.size(); ++s) table.averages[s] += row[s];
  }
  for (auto& a : table.averages) a /= double(table.datasets.size());
  return table;
}

std::string render_compare(const CompareTable& table) {
  std::string out = "dataset";
  for (const auto& s : table.systems) out += "\t" + s;
  out += "\n";
  for (std::size_t d = 0; d < table.datasets.size(); ++d) {
    out += table.datasets[d];
    for (std::size_t s = 0; s < table.systems.size(); ++s) {
      out += "\t" + util::fmt2(table.values[d][s]);
      if (s == table.winner[d]) out += "*";
    }
    out += "\n";
  }
  out += "Average";
  for (double a : table.averages) out += "\t" + util::fmt2(a);
  out += "\n";
  return out;
}

double winning_rate(long wins, long total) {
  if (total <= 0) throw EmptySet("winning rate needs a non-empty comparison set");
  return util::trunc2(100.0 * double(wins) / double(total));
}

}  // namespace dpkit::eval
