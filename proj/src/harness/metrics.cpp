#include "disc/harness/metrics.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "disc/errors.hpp"

namespace disc::harness {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string opt(const std::optional<double> &v) { return v ? num(*v) : std::string(); }

void write_file(const std::filesystem::path &path, const std::string &text) {
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text))
    throw IoError("cannot write " + path.string());
}

} // namespace

std::string MetricLog::to_csv() const {
  std::string out = std::string(kHeader) + "\n";
  for (const auto &r : rows_)
    out += std::to_string(r.epoch) + "," + num(r.lr) + "," + num(r.object_loss) + "," + num(r.pose_loss) + "," +
           num(r.tie_loss) + "," + num(r.total_loss) + "," + num(r.train_accuracy) + "," + opt(r.test_top1) + "," +
           opt(r.test_top5) + "\n";
  return out;
}

std::string MetricLog::timing_csv() const {
  std::string out = "epoch,wall_seconds\n";
  for (const auto &r : rows_)
    out += std::to_string(r.epoch) + "," + num(r.wall_seconds) + "\n";
  return out;
}

void MetricLog::write(const std::filesystem::path &csv, const std::filesystem::path &timing) const {
  write_file(csv, to_csv());
  write_file(timing, timing_csv());
}

std::size_t true_class_rank(const float *logits, std::size_t num_classes, std::size_t label) {
  const float t = logits[label];
  std::size_t rank = 0;
  for (std::size_t c = 0; c < num_classes; ++c)
    if (logits[c] > t || (logits[c] == t && c < label))
      ++rank;
  return rank;
}

EvalResult score_logits(const std::vector<float> &logits, const std::vector<std::size_t> &labels,
                        std::size_t num_classes) {
  if (num_classes == 0 || logits.size() != labels.size() * num_classes)
    throw std::invalid_argument("score_logits: " + std::to_string(logits.size()) + " logits for " +
                                std::to_string(labels.size()) + " labels and " + std::to_string(num_classes) +
                                " classes");
  EvalResult r;
  r.count = labels.size();
  r.confusion.assign(num_classes, std::vector<std::size_t>(num_classes, 0));
  std::size_t hit1 = 0, hit5 = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes)
      throw std::invalid_argument("label " + std::to_string(labels[i]) + " out of range");
    const float *row = logits.data() + i * num_classes;
    const auto rank = true_class_rank(row, num_classes, labels[i]);
    hit1 += rank < 1 ? 1 : 0;
    hit5 += rank < 5 ? 1 : 0;
    std::size_t pred = 0;
    for (std::size_t c = 1; c < num_classes; ++c)
      if (row[c] > row[pred])
        pred = c;
    ++r.confusion[labels[i]][pred];
  }
  if (r.count > 0) {
    r.top1 = static_cast<double>(hit1) / static_cast<double>(r.count);
    r.top5 = static_cast<double>(hit5) / static_cast<double>(r.count);
  }
  return r;
}

} // namespace disc::harness
