#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dpkit/core.hpp"

namespace dpkit::eval {

struct IdMismatch : Error {
  using Error::Error;
};
struct KeyMismatch : Error {
  using Error::Error;
};
struct EmptySet : Error {
  using Error::Error;
};

// All metric values live on the 0..100 scale and are rendered with two
// decimals in reports.

struct Confusion {
  long tp = 0, fp = 0, fn = 0, tn = 0;
  long total() const { return tp + fp + fn + tn; }
};

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// A prediction aligned to gold by id. nullopt = unparseable/abstained.
template <typename T>
struct Pred {
  std::string id;
  std::optional<T> value;
};
using BinaryPred = Pred<bool>;
using ValuePred = Pred<std::string>;

struct BinaryGold {
  std::string id;
  bool yes = false;
};
struct ValueGold {
  std::string id;
  std::string value;
};

// Positive class is Yes. Unparseable predictions score as the wrong class:
// fn when gold is Yes, fp when gold is No. Ids must match pairwise in order
// (IdMismatch otherwise).
Confusion score_binary(const std::vector<BinaryPred>& preds,
                       const std::vector<BinaryGold>& gold);

Prf prf1(const Confusion& c);
// F1 from already-scaled precision/recall; the identity prf1 uses.
double f1_from_pr(double precision, double recall);

// Exact-match accuracy after casefolding and whitespace collapsing;
// unparseable predictions are wrong. Throws EmptySet on zero items.
double accuracy(const std::vector<ValuePred>& preds, const std::vector<ValueGold>& gold);

// Micro-averaged F1 over categories where abstentions (nullopt) shrink the
// predicted count: P = correct/predicted, R = correct/total.
double micro_f1(const std::vector<ValuePred>& preds, const std::vector<ValueGold>& gold);
Prf micro_prf(const std::vector<ValuePred>& preds, const std::vector<ValueGold>& gold);

// Extraction P/R/F1 where "N/A" marks not-extractable: P over non-N/A
// predictions, R over non-N/A golds, matching by folded exact compare.
Prf ave_prf1(const std::vector<ValuePred>& preds, const std::vector<ValueGold>& gold);

struct DatasetMetrics {
  std::optional<double> accuracy;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
  std::optional<double> micro_f1;
  long unparseable = 0;

  // The headline number Table-5-style comparisons use.
  double headline() const;
};

struct MetricReport {
  std::map<std::string, DatasetMetrics> per_dataset;
  double average = 0.0;  // unweighted mean of headlines
  long unparseable = 0;

  void finalize();  // recompute average/unparseable from per_dataset
};

struct CompareTable {
  std::vector<std::string> systems;
  std::vector<std::string> datasets;            // sorted
  std::vector<std::vector<double>> values;      // [dataset][system]
  std::vector<std::size_t> winner;              // per dataset, index into systems
  std::vector<double> averages;                 // per system, unweighted
};

// Aligns several reports into one table. Throws KeyMismatch unless all
// reports cover exactly the same datasets.
CompareTable compare_report(const std::vector<std::pair<std::string, MetricReport>>& reports);
std::string render_compare(const CompareTable& table);

// wins/total on the 100 scale, truncated (not rounded) to two decimals.
double winning_rate(long wins, long total);

}  // namespace dpkit::eval
