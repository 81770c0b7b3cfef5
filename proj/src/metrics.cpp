#include <algorithm>
#include <cmath>

#include "hsd/errors.hpp"
#include "hsd/evaluation.hpp"
#include "hsd/random.hpp"

namespace hsd {

ConfusionMatrix ConfusionMatrix::from_rows(
    const std::array<std::array<std::uint64_t, 3>, 3>& rows) {
  ConfusionMatrix cm;
  for (Eigen::Index t = 0; t < 3; ++t) {
    for (Eigen::Index p = 0; p < 3; ++p) {
      cm.counts_(t, p) = rows[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
    }
  }
  return cm;
}

std::uint64_t ConfusionMatrix::row_sum(ClassLabel truth) const {
  return counts_.row(static_cast<Eigen::Index>(index_of(truth))).sum();
}

std::uint64_t ConfusionMatrix::column_sum(ClassLabel predicted) const {
  return counts_.col(static_cast<Eigen::Index>(index_of(predicted))).sum();
}

bool MetricsReport::degenerate() const {
  return std::any_of(per_class.begin(), per_class.end(), [](const ClassMetrics& m) {
    return m.precision_undefined || m.recall_undefined;
  });
}

MetricsReport per_class_metrics(const ConfusionMatrix& cm) {
  const auto total = cm.total();
  if (total == 0) throw ValidationError("confusion matrix is empty");
  MetricsReport r;
  for (auto c : kAllLabels) {
    auto& m = r.per_class[index_of(c)];
    const auto hit = static_cast<double>(cm(c, c));
    const auto col = cm.column_sum(c);
    const auto row = cm.row_sum(c);
    r.support[index_of(c)] = row;
    if (col == 0) {
      m.precision_undefined = true;
    } else {
      m.precision = hit / static_cast<double>(col);
    }
    if (row == 0) {
      m.recall_undefined = true;
    } else {
      m.recall = hit / static_cast<double>(row);
    }
    const double denom = m.precision + m.recall;
    m.f = denom > 0.0 ? 2.0 * m.precision * m.recall / denom : 0.0;
  }
  for (auto c : kAllLabels) {
    const auto w = static_cast<double>(r.support[index_of(c)]) / static_cast<double>(total);
    r.precision += w * r[c].precision;
    r.recall += w * r[c].recall;
    r.weighted_f += w * r[c].f;
  }
  return r;
}

double weighted_f(const ClassValues& f, const ClassValues& supports) {
  double sum = 0.0, acc = 0.0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (!(supports[c] >= 0.0)) throw std::invalid_argument("class supports must be non-negative");
    sum += supports[c];
    acc += f[c] * supports[c];
  }
  if (!(sum > 0.0)) throw std::invalid_argument("class supports must not all be zero");
  return acc / sum;
}

double weighted_f(const MetricsReport& report, const ClassValues& supports) {
  ClassValues f{};
  for (std::size_t c = 0; c < kNumClasses; ++c) f[c] = report.per_class[c].f;
  return weighted_f(f, supports);
}

std::pair<double, double> mean_std(std::span<const double> values) {
  if (values.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return {mean, std::sqrt(var / static_cast<double>(values.size()))};
}

std::vector<Fold> kfold_split(std::size_t n, std::size_t k, std::uint64_t seed,
                              std::span<const ClassLabel> labels) {
  if (k < 2) throw ConfigError("k-fold split needs k >= 2");
  if (k > n) {
    throw ConfigError("cannot split " + std::to_string(n) + " tweets into " + std::to_string(k) +
                      " folds");
  }
  if (!labels.empty() && labels.size() != n) {
    throw std::invalid_argument("kfold_split: label count differs from n");
  }
  Rng rng(seed, "folds");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);
  if (!labels.empty()) {
    // Class-major after the shuffle, so dealing round-robin spreads each class.
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return index_of(labels[a]) < index_of(labels[b]);
    });
  }
  std::vector<std::size_t> fold_of(n);
  for (std::size_t pos = 0; pos < n; ++pos) fold_of[order[pos]] = pos % k;

  std::vector<Fold> folds(k);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t f = 0; f < k; ++f) {
      (fold_of[i] == f ? folds[f].test : folds[f].train).push_back(i);
    }
  }
  return folds;
}

std::vector<Fold> kfold_split(const Corpus& corpus, std::size_t k, std::uint64_t seed,
                              bool stratified) {
  if (!stratified) return kfold_split(corpus.size(), k, seed);
  std::vector<ClassLabel> labels;
  labels.reserve(corpus.size());
  for (const auto& t : corpus.tweets()) labels.push_back(t.label());
  return kfold_split(corpus.size(), k, seed, labels);
}

}  // namespace hsd
