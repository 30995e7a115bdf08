#pragma once

// File formats: the binary logit container (magic "LGTN"), NDJSON dumps, and
// JSON documents for statistics, calibration parameters, models, datasets and
// evaluation reports. Every writer goes through a temp file and a rename.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "logn/calibrate.hpp"
#include "logn/logit_table.hpp"
#include "logn/metrics.hpp"
#include "logn/stats.hpp"
#include "logn/synth.hpp"
#include "logn/trainer.hpp"

namespace logn {

using json = nlohmann::json;

inline constexpr char kDumpMagic[4] = {'L', 'G', 'T', 'N'};
inline constexpr std::uint32_t kDumpVersion = 1;
inline constexpr int kStatsVersion = 1;

// Little-endian container header: magic, version, num_classes, bg_index
// (-1 = none), record_count. Records follow as int32 label + float32 values.
struct DumpHeader {
  std::uint32_t version = kDumpVersion;
  std::uint32_t num_classes = 0;
  std::int32_t bg_index = -1;
  std::uint64_t record_count = 0;

  static constexpr std::size_t kSize = 4 + 4 + 4 + 4 + 8;
  std::uint64_t record_bytes() const { return 4 + 4ULL * num_classes; }
};

enum class DumpFormat { binary, ndjson };

DumpFormat parse_dump_format(const std::string& text);
// By extension: ".ndjson"/".jsonl" are text, anything else binary.
DumpFormat format_for_path(const std::filesystem::path& path);

void atomic_write(const std::filesystem::path& path, const std::string& bytes);
std::string read_file(const std::filesystem::path& path);

std::string encode_dump_binary(const LogitView& records);
LogitTable decode_dump_binary(const std::string& bytes);
DumpHeader decode_dump_header(const std::string& bytes);

std::string encode_dump_ndjson(const LogitView& records);
// NDJSON carries no header; the background index is supplied by the caller.
LogitTable decode_dump_ndjson(const std::string& text, std::optional<int> bg_index);

void write_dump(const std::filesystem::path& path, const LogitView& records,
                std::optional<DumpFormat> format = std::nullopt);
// Binary files carry their own bg_index; `ndjson_bg_index` applies to text.
LogitTable read_dump(const std::filesystem::path& path,
                     std::optional<int> ndjson_bg_index = 0);

json stats_to_json(const RunningStats& stats);
RunningStats stats_from_json(const json& j);

// Statistics document extended with beta, beta_mode, sigma_exponent and the
// adjusted mean/variance that are applied at test time.
json params_to_json(const RunningStats& stats, const CalibrationParams& params);
CalibrationParams params_from_json(const json& j);

json model_to_json(const Model& model);
Model model_from_json(const json& j);

json synth_spec_to_json(const SynthSpec& spec);
SynthSpec synth_spec_from_json(const json& j);

// Features go to `<stem>.lgtn` (num_classes field = feature width) and the
// metadata to `<stem>.json`.
void write_dataset(const std::filesystem::path& stem, const Dataset& dataset);
Dataset read_dataset(const std::filesystem::path& stem);

json label_distribution_to_json(const LabelDistribution& dist);
LabelDistribution label_distribution_from_json(const json& j);

json eval_report_to_json(const EvalReport& report);
std::string eval_report_table(const EvalReport& report);
std::string eval_report_csv(const EvalReport& report);

std::string train_log_csv(const TrainResult& result);

// JSON with a fixed key order so identical inputs give identical bytes.
std::string dump_json(const json& j);

}  // namespace logn
