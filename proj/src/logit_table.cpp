#include "logn/logit_table.hpp"

#include <cmath>
#include <string>

#include "logn/errors.hpp"

namespace logn {

LogitView::LogitView(int num_classes, std::optional<int> bg_index,
                     std::span<const std::int32_t> labels,
                     std::span<const double> values)
    : num_classes_(num_classes),
      bg_index_(bg_index),
      labels_(labels),
      values_(values) {
  if (num_classes <= 0) throw DimensionError("num_classes must be positive");
  if (values.size() != labels.size() * static_cast<std::size_t>(num_classes)) {
    throw DimensionError("logit buffer size " + std::to_string(values.size()) +
                         " does not match " + std::to_string(labels.size()) +
                         " records of width " + std::to_string(num_classes));
  }
}

LogitView LogitView::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > size()) throw DimensionError("slice out of range");
  const auto width = static_cast<std::size_t>(num_classes_);
  return LogitView(num_classes_, bg_index_, labels_.subspan(begin, end - begin),
                   values_.subspan(begin * width, (end - begin) * width));
}

LogitTable::LogitTable(int num_classes, std::optional<int> bg_index)
    : num_classes_(num_classes), bg_index_(bg_index) {
  if (num_classes <= 0) throw DimensionError("num_classes must be positive");
  if (bg_index && (*bg_index < 0 || *bg_index >= num_classes)) {
    throw DimensionError("bg_index " + std::to_string(*bg_index) +
                         " outside [0, " + std::to_string(num_classes) + ")");
  }
}

LogitTable LogitTable::from_records(const std::vector<LogitRecord>& records,
                                    std::optional<int> bg_index) {
  if (records.empty()) throw DimensionError("no records");
  LogitTable table(static_cast<int>(records.front().logits.size()), bg_index);
  table.reserve(records.size());
  for (const auto& r : records) table.push_back(r.label, r.logits);
  return table;
}

void LogitTable::reserve(std::size_t rows) {
  labels_.reserve(rows);
  values_.reserve(rows * static_cast<std::size_t>(num_classes_));
}

void LogitTable::push_back(std::int32_t label, std::span<const double> logits) {
  if (logits.size() != static_cast<std::size_t>(num_classes_)) {
    throw DimensionError("record " + std::to_string(labels_.size()) + " has " +
                         std::to_string(logits.size()) + " logits, expected " +
                         std::to_string(num_classes_));
  }
  labels_.push_back(label);
  values_.insert(values_.end(), logits.begin(), logits.end());
}

std::span<double> LogitTable::mutable_row(std::size_t i) {
  const auto width = static_cast<std::size_t>(num_classes_);
  return std::span<double>(values_).subspan(i * width, width);
}

LogitRecord LogitTable::record(std::size_t i) const {
  auto r = row(i);
  return {labels_[i], std::vector<double>(r.begin(), r.end())};
}

LogitView LogitTable::view() const {
  return LogitView(num_classes_, bg_index_, labels_, values_);
}

void validate_records(const LogitView& view, std::size_t offset) {
  const int width = view.num_classes();
  for (std::size_t i = 0; i < view.size(); ++i) {
    const auto label = view.label(i);
    if (label < 0 || label >= width) {
      throw DimensionError("record " + std::to_string(i + offset) +
                           ": label " + std::to_string(label) +
                           " outside [0, " + std::to_string(width) + ")");
    }
    for (double v : view.row(i)) {
      if (!std::isfinite(v)) {
        throw NonFiniteError(i + offset, "record " + std::to_string(i + offset) +
                                             " has a non-finite logit");
      }
    }
  }
}

std::vector<int> foreground_slots(int num_classes, std::optional<int> bg_index) {
  std::vector<int> slots;
  slots.reserve(static_cast<std::size_t>(num_classes));
  for (int c = 0; c < num_classes; ++c) {
    if (!bg_index || c != *bg_index) slots.push_back(c);
  }
  return slots;
}

}  // namespace logn
