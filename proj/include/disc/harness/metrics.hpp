#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace disc::harness {

struct EpochMetrics {
  std::size_t epoch = 0;
  double lr = 0.0;
  double object_loss = 0.0; ///< means over the examples that carry each term
  double pose_loss = 0.0;
  double tie_loss = 0.0;
  double total_loss = 0.0;
  double train_accuracy = 0.0; ///< running, training-mode predictions
  std::optional<double> test_top1;
  std::optional<double> test_top5;
  double wall_seconds = 0.0;
};

/// Per-epoch CSV. Wall time goes to a separate timing file so that the metric
/// log of a seeded run is reproducible byte for byte.
class MetricLog {
public:
  static constexpr const char *kHeader =
      "epoch,lr,object_loss,pose_loss,tie_loss,total_loss,train_accuracy,test_top1,test_top5";

  void append(const EpochMetrics &row) { rows_.push_back(row); }
  const std::vector<EpochMetrics> &rows() const noexcept { return rows_; }
  std::size_t size() const noexcept { return rows_.size(); }

  std::string to_csv() const;
  std::string timing_csv() const;
  void write(const std::filesystem::path &csv, const std::filesystem::path &timing) const;

private:
  std::vector<EpochMetrics> rows_;
};

struct EvalResult {
  std::size_t count = 0;
  double top1 = 0.0;
  double top5 = 0.0;
  /// confusion[true][predicted]
  std::vector<std::vector<std::size_t>> confusion;
};

/// Position of the true class when classes are ordered by descending logit,
/// ties broken by lower class index first.
std::size_t true_class_rank(const float *logits, std::size_t num_classes, std::size_t label);

/// Scores row-major logits (count x num_classes).
EvalResult score_logits(const std::vector<float> &logits, const std::vector<std::size_t> &labels,
                        std::size_t num_classes);

} // namespace disc::harness
