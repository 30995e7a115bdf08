#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace logn {

// One sample's logit vector and its ground-truth class.
struct LogitRecord {
  std::int32_t label = 0;
  std::vector<double> logits;
};

// Non-owning row-major view over a block of records.
class LogitView {
 public:
  LogitView() = default;
  LogitView(int num_classes, std::optional<int> bg_index,
            std::span<const std::int32_t> labels,
            std::span<const double> values);

  int num_classes() const { return num_classes_; }
  std::optional<int> bg_index() const { return bg_index_; }
  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }

  std::int32_t label(std::size_t i) const { return labels_[i]; }
  std::span<const double> row(std::size_t i) const {
    return values_.subspan(i * static_cast<std::size_t>(num_classes_),
                           static_cast<std::size_t>(num_classes_));
  }
  std::span<const std::int32_t> labels() const { return labels_; }
  std::span<const double> values() const { return values_; }

  // Records [begin, end).
  LogitView slice(std::size_t begin, std::size_t end) const;

 private:
  int num_classes_ = 0;
  std::optional<int> bg_index_;
  std::span<const std::int32_t> labels_;
  std::span<const double> values_;
};

// Owning table of records sharing one class count.
class LogitTable {
 public:
  LogitTable() = default;
  explicit LogitTable(int num_classes, std::optional<int> bg_index = std::nullopt);

  static LogitTable from_records(const std::vector<LogitRecord>& records,
                                 std::optional<int> bg_index = std::nullopt);

  void reserve(std::size_t rows);
  // Throws DimensionError when logits.size() != num_classes().
  void push_back(std::int32_t label, std::span<const double> logits);

  int num_classes() const { return num_classes_; }
  std::optional<int> bg_index() const { return bg_index_; }
  void set_bg_index(std::optional<int> bg) { bg_index_ = bg; }
  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }

  std::int32_t label(std::size_t i) const { return labels_[i]; }
  std::span<const double> row(std::size_t i) const { return view().row(i); }
  std::span<double> mutable_row(std::size_t i);

  std::vector<std::int32_t>& labels() { return labels_; }
  const std::vector<std::int32_t>& labels() const { return labels_; }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  LogitRecord record(std::size_t i) const;
  LogitView view() const;
  operator LogitView() const { return view(); }  // NOLINT

 private:
  int num_classes_ = 0;
  std::optional<int> bg_index_;
  std::vector<std::int32_t> labels_;
  std::vector<double> values_;
};

// Checks the record invariants: labels index into the logit vector and every
// entry is finite. `offset` is added to reported record indices.
void validate_records(const LogitView& view, std::size_t offset = 0);

// Slot indices of the foreground classes, in increasing order.
std::vector<int> foreground_slots(int num_classes, std::optional<int> bg_index);

}  // namespace logn
