#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scripta/mlp.hpp"

namespace scripta {

/// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
  std::vector<std::string> class_list;
  std::vector<std::uint64_t> counts;

  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::vector<std::string> classes);

  std::size_t n_classes() const { return class_list.size(); }
  std::uint64_t& at(std::size_t truth, std::size_t predicted) { return counts[truth * n_classes() + predicted]; }
  std::uint64_t at(std::size_t truth, std::size_t predicted) const { return counts[truth * n_classes() + predicted]; }
  std::uint64_t row_sum(std::size_t truth) const;
  std::uint64_t total() const;
  std::uint64_t trace() const;

  bool operator==(const ConfusionMatrix&) const = default;
};

ConfusionMatrix confusion(std::span<const std::uint32_t> truth, std::span<const std::uint32_t> predicted,
                          std::vector<std::string> class_list);

struct EvalReport {
  /// Diagonal / row sum; nullopt for classes without samples.
  std::vector<std::optional<double>> per_class;
  /// Unweighted mean of the defined per-class accuracies.
  double average = 0.0;
  /// trace / total.
  double overall = 0.0;
  ConfusionMatrix matrix;
  /// Per-fold reports when this report pools several folds.
  std::vector<EvalReport> folds;

  std::vector<std::size_t> empty_classes() const;
};

EvalReport summarize(const ConfusionMatrix& cm);

/// Sums the fold matrices and summarises the pooled counts.
EvalReport aggregate_folds(std::span<const EvalReport> reports);

/// Writes confusion.csv, metrics.csv and confusion.svg into `dir` (created if missing).
void render_report(const EvalReport& report, const std::filesystem::path& dir);

/// Writes history.csv (epoch and the three validation errors), loss.csv and history.svg into `dir`.
void render_history(const TrainingHistory& history, const std::filesystem::path& dir);

std::string confusion_csv(const ConfusionMatrix& cm);
std::string metrics_csv(const EvalReport& report);
std::string confusion_svg(const ConfusionMatrix& cm, const std::string& title = "Confusion matrix");
std::string history_csv(const TrainingHistory& history);
std::string loss_csv(const TrainingHistory& history);
std::string history_svg(const TrainingHistory& history);

ConfusionMatrix parse_confusion_csv(const std::string& text);
ConfusionMatrix read_confusion_csv(const std::filesystem::path& path);
/// Reads history.csv and, when present next to it, loss.csv.
TrainingHistory read_history(const std::filesystem::path& history_csv_path);

/// Fixed-notation formatting independent of the C locale.
std::string format_fixed(double value, int precision);

void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace scripta
