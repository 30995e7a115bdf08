#include "logn/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "logn/errors.hpp"

namespace logn {
namespace fs = std::filesystem;

namespace {

template <typename T>
void put_le(std::string& out, T value) {
  using U = std::make_unsigned_t<T>;
  auto bits = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>(bits & 0xFFu));
    bits = static_cast<U>(bits >> 8);
  }
}

template <typename T>
T get_le(const std::string& in, std::size_t offset) {
  using U = std::make_unsigned_t<T>;
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bits |= static_cast<U>(static_cast<U>(static_cast<unsigned char>(in[offset + i])) << (8 * i));
  }
  return static_cast<T>(bits);
}

void put_f32(std::string& out, double value) {
  put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(value)));
}

double get_f32(const std::string& in, std::size_t offset) {
  return static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(in, offset)));
}

std::string encode_container(std::int32_t bg_index, std::uint32_t width,
                             std::span<const std::int32_t> labels,
                             std::span<const double> values) {
  DumpHeader h;
  h.num_classes = width;
  h.bg_index = bg_index;
  h.record_count = labels.size();
  std::string out;
  out.reserve(DumpHeader::kSize + h.record_count * h.record_bytes());
  out.append(kDumpMagic, 4);
  put_le<std::uint32_t>(out, h.version);
  put_le<std::uint32_t>(out, h.num_classes);
  put_le<std::int32_t>(out, h.bg_index);
  put_le<std::uint64_t>(out, h.record_count);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    put_le<std::int32_t>(out, labels[i]);
    for (std::size_t c = 0; c < width; ++c) put_f32(out, values[i * width + c]);
  }
  return out;
}

struct Container {
  DumpHeader header;
  std::vector<std::int32_t> labels;
  std::vector<double> values;
};

Container decode_container(const std::string& bytes) {
  Container c;
  c.header = decode_dump_header(bytes);
  const auto& h = c.header;
  const std::size_t width = h.num_classes;
  c.labels.resize(h.record_count);
  c.values.resize(h.record_count * width);
  std::size_t at = DumpHeader::kSize;
  for (std::size_t i = 0; i < h.record_count; ++i) {
    c.labels[i] = get_le<std::int32_t>(bytes, at);
    at += 4;
    for (std::size_t k = 0; k < width; ++k, at += 4) {
      c.values[i * width + k] = get_f32(bytes, at);
    }
  }
  return c;
}

std::optional<int> bg_from_header(std::int32_t bg) {
  if (bg < 0) return std::nullopt;
  return bg;
}

json optional_int(std::optional<int> v) { return v ? json(*v) : json(nullptr); }

std::optional<int> optional_int(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<int>();
}

json optional_double(std::optional<double> v) { return v ? json(*v) : json(nullptr); }

// NaN entries become null.
json nullable_array(const std::vector<double>& v) {
  json out = json::array();
  for (double x : v) out.push_back(std::isnan(x) ? json(nullptr) : json(x));
  return out;
}

template <typename F>
auto with_context(const std::string& what, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw FormatError(what + ": " + e.what());
  }
}

}  // namespace

DumpFormat parse_dump_format(const std::string& text) {
  if (text == "binary" || text == "bin") return DumpFormat::binary;
  if (text == "ndjson" || text == "text") return DumpFormat::ndjson;
  throw DomainError("unknown dump format '" + text + "'");
}

DumpFormat format_for_path(const fs::path& path) {
  const auto ext = path.extension().string();
  return ext == ".ndjson" || ext == ".jsonl" ? DumpFormat::ndjson : DumpFormat::binary;
}

void atomic_write(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string encode_dump_binary(const LogitView& records) {
  validate_records(records);
  return encode_container(records.bg_index().value_or(-1),
                          static_cast<std::uint32_t>(records.num_classes()),
                          records.labels(), records.values());
}

DumpHeader decode_dump_header(const std::string& bytes) {
  if (bytes.size() < DumpHeader::kSize) throw FormatError("truncated dump header");
  if (std::memcmp(bytes.data(), kDumpMagic, 4) != 0) {
    throw FormatError("bad magic; not an LGTN container");
  }
  DumpHeader h;
  h.version = get_le<std::uint32_t>(bytes, 4);
  if (h.version != kDumpVersion) {
    throw FormatError("unsupported dump version " + std::to_string(h.version));
  }
  h.num_classes = get_le<std::uint32_t>(bytes, 8);
  h.bg_index = get_le<std::int32_t>(bytes, 12);
  h.record_count = get_le<std::uint64_t>(bytes, 16);
  if (h.num_classes == 0) throw FormatError("dump declares zero classes");
  const auto payload = bytes.size() - DumpHeader::kSize;
  if (payload / h.record_bytes() < h.record_count ||
      payload != h.record_count * h.record_bytes()) {
    throw FormatError("payload of " + std::to_string(payload) + " bytes does not hold " +
                      std::to_string(h.record_count) + " records of width " +
                      std::to_string(h.num_classes));
  }
  return h;
}

LogitTable decode_dump_binary(const std::string& bytes) {
  Container c = decode_container(bytes);
  const auto bg = bg_from_header(c.header.bg_index);
  if (bg && *bg >= static_cast<int>(c.header.num_classes)) {
    throw FormatError("bg_index outside the class range");
  }
  LogitTable table(static_cast<int>(c.header.num_classes), bg);
  table.labels() = std::move(c.labels);
  table.values() = std::move(c.values);
  validate_records(table);
  return table;
}

std::string encode_dump_ndjson(const LogitView& records) {
  validate_records(records);
  std::string out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto row = records.row(i);
    json j = {{"label", records.label(i)},
              {"logits", std::vector<double>(row.begin(), row.end())}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

LogitTable decode_dump_ndjson(const std::string& text, std::optional<int> bg_index) {
  std::istringstream in(text);
  std::string line;
  std::optional<LogitTable> table;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "ndjson line " + std::to_string(line_no);
    const auto [label, logits] = with_context(where, [&] {
      const json j = json::parse(line);
      return std::pair{j.at("label").get<std::int32_t>(),
                       j.at("logits").get<std::vector<double>>()};
    });
    if (!table) table.emplace(static_cast<int>(logits.size()), bg_index);
    table->push_back(label, logits);
  }
  if (!table) throw FormatError("empty ndjson dump");
  validate_records(*table);
  return std::move(*table);
}

void write_dump(const fs::path& path, const LogitView& records,
                std::optional<DumpFormat> format) {
  const auto f = format.value_or(format_for_path(path));
  atomic_write(path, f == DumpFormat::binary ? encode_dump_binary(records)
                                             : encode_dump_ndjson(records));
}

LogitTable read_dump(const fs::path& path, std::optional<int> ndjson_bg_index) {
  const std::string bytes = read_file(path);
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), kDumpMagic, 4) == 0) {
    return decode_dump_binary(bytes);
  }
  return decode_dump_ndjson(bytes, ndjson_bg_index);
}

json stats_to_json(const RunningStats& s) {
  return {{"version", kStatsVersion},
          {"num_classes", s.num_classes()},
          {"bg_index", optional_int(s.bg_index)},
          {"momentum", s.momentum},
          {"eps", s.eps},
          {"count", s.count},
          {"mean", s.mean},
          {"var", s.var}};
}

RunningStats stats_from_json(const json& j) {
  return with_context("statistics file", [&] {
    if (j.at("version").get<int>() != kStatsVersion) {
      throw FormatError("unsupported statistics version");
    }
    RunningStats s;
    s.bg_index = optional_int(j.at("bg_index"));
    s.momentum = j.at("momentum").get<double>();
    s.eps = j.at("eps").get<double>();
    s.count = j.at("count").get<std::uint64_t>();
    s.mean = j.at("mean").get<std::vector<double>>();
    s.var = j.at("var").get<std::vector<double>>();
    const auto n = j.at("num_classes").get<int>();
    if (static_cast<std::size_t>(n) != s.mean.size() || s.mean.size() != s.var.size()) {
      throw FormatError("statistics vectors do not match num_classes");
    }
    s.initialized = s.count > 0;
    return s;
  });
}

json params_to_json(const RunningStats& stats, const CalibrationParams& p) {
  json j = stats_to_json(stats);
  j["beta"] = p.beta;
  j["beta_mode"] = p.mode.to_string();
  j["sigma_exponent"] = p.sigma_exponent;
  j["eps"] = p.eps;
  j["adj_mean"] = p.adj_mean;
  j["adj_var"] = p.var;
  return j;
}

CalibrationParams params_from_json(const json& j) {
  return with_context("calibration file", [&] {
    CalibrationParams p;
    p.adj_mean = j.at("adj_mean").get<std::vector<double>>();
    p.var = j.at("adj_var").get<std::vector<double>>();
    p.beta = j.at("beta").get<double>();
    p.eps = j.at("eps").get<double>();
    p.sigma_exponent = j.at("sigma_exponent").get<double>();
    p.bg_index = optional_int(j.at("bg_index"));
    p.mode = BetaMode::parse(j.at("beta_mode").get<std::string>());
    if (p.adj_mean.size() != p.var.size()) {
      throw FormatError("adj_mean and adj_var differ in length");
    }
    return p;
  });
}

json model_to_json(const Model& m) {
  return {{"input_dim", m.input_dim},     {"hidden_units", m.hidden_units},
          {"num_outputs", m.num_outputs}, {"hidden_weight", m.hidden_weight},
          {"hidden_bias", m.hidden_bias}, {"weight", m.weight},
          {"bias", m.bias}};
}

Model model_from_json(const json& j) {
  return with_context("model file", [&] {
    Model m = Model::zeros(j.at("input_dim").get<int>(), j.at("hidden_units").get<int>(),
                           j.at("num_outputs").get<int>());
    auto load = [&](const char* key, std::vector<double>& dst) {
      auto v = j.at(key).get<std::vector<double>>();
      if (v.size() != dst.size()) throw FormatError(std::string("model block ") + key + " has wrong size");
      dst = std::move(v);
    };
    load("hidden_weight", m.hidden_weight);
    load("hidden_bias", m.hidden_bias);
    load("weight", m.weight);
    load("bias", m.bias);
    return m;
  });
}

json synth_spec_to_json(const SynthSpec& s) {
  return {{"num_classes", s.num_classes},
          {"feature_dim", s.feature_dim},
          {"max_count", s.max_count},
          {"imbalance_ratio", s.imbalance_ratio},
          {"class_sep", s.class_sep},
          {"noise_sigma", s.noise_sigma},
          {"bg_multiplier", s.bg_multiplier},
          {"seed", s.seed}};
}

SynthSpec synth_spec_from_json(const json& j) {
  return with_context("synthetic spec", [&] {
    SynthSpec s;
    s.num_classes = j.value("num_classes", s.num_classes);
    s.feature_dim = j.value("feature_dim", s.feature_dim);
    s.max_count = j.value("max_count", s.max_count);
    s.imbalance_ratio = j.value("imbalance_ratio", s.imbalance_ratio);
    s.class_sep = j.value("class_sep", s.class_sep);
    s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
    s.bg_multiplier = j.value("bg_multiplier", s.bg_multiplier);
    s.seed = j.value("seed", s.seed);
    return s;
  });
}

void write_dataset(const fs::path& stem, const Dataset& ds) {
  fs::path data = stem, meta = stem;
  data += ".lgtn";
  meta += ".json";
  atomic_write(data, encode_container(ds.bg_index.value_or(-1),
                                      static_cast<std::uint32_t>(ds.feature_dim),
                                      ds.labels, ds.features));
  json j = {{"rows", ds.rows},
            {"feature_dim", ds.feature_dim},
            {"num_classes", ds.num_classes},
            {"bg_index", optional_int(ds.bg_index)},
            {"spec", synth_spec_to_json(ds.spec)}};
  atomic_write(meta, dump_json(j));
}

Dataset read_dataset(const fs::path& stem) {
  fs::path data = stem, meta = stem;
  data += ".lgtn";
  meta += ".json";
  const json j = with_context("dataset metadata", [&] { return json::parse(read_file(meta)); });
  Container c = decode_container(read_file(data));
  Dataset ds;
  with_context("dataset metadata", [&] {
    ds.rows = j.at("rows").get<std::size_t>();
    ds.feature_dim = j.at("feature_dim").get<int>();
    ds.num_classes = j.at("num_classes").get<int>();
    ds.bg_index = optional_int(j.at("bg_index"));
    ds.spec = synth_spec_from_json(j.at("spec"));
    return 0;
  });
  if (c.header.record_count != ds.rows ||
      c.header.num_classes != static_cast<std::uint32_t>(ds.feature_dim)) {
    throw FormatError("dataset container does not match its metadata");
  }
  for (auto l : c.labels) {
    if (l < 0 || l >= ds.num_classes) throw FormatError("dataset label out of range");
  }
  ds.labels = std::move(c.labels);
  ds.features = std::move(c.values);
  return ds;
}

json label_distribution_to_json(const LabelDistribution& d) {
  json groups = json::array();
  for (auto g : d.group_of) groups.push_back(group_name(g));
  return {{"counts", d.counts},
          {"groups", groups},
          {"thresholds", {d.thresholds.low, d.thresholds.high}}};
}

LabelDistribution label_distribution_from_json(const json& j) {
  return with_context("label distribution", [&] {
    const auto t = j.at("thresholds").get<std::vector<std::int64_t>>();
    if (t.size() != 2) throw FormatError("thresholds must have two entries");
    return label_distribution_from_counts(j.at("counts").get<std::vector<std::int64_t>>(),
                                          {t[0], t[1]});
  });
}

json eval_report_to_json(const EvalReport& r) {
  json groups;
  for (auto g : {Group::rare, Group::common, Group::frequent}) {
    groups[group_name(g)] = optional_double(r.group_accuracy(g));
  }
  return {{"overall_top1", r.overall_top1},
          {"per_group", groups},
          {"balanced_accuracy", r.balanced_accuracy},
          {"per_class_recall", nullable_array(r.per_class_recall)},
          {"per_class_ap", nullable_array(r.per_class_ap)},
          {"mean_ap", optional_double(r.mean_ap)},
          {"correlation_mean", optional_double(r.correlation_mean)},
          {"correlation_var", optional_double(r.correlation_var)}};
}

namespace {

std::string fmt_opt(std::optional<double> v) {
  if (!v) return "n/a";
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(4) << *v;
  return ss.str();
}

}  // namespace

std::string eval_report_table(const EvalReport& r) {
  std::ostringstream ss;
  auto line = [&](const std::string& k, const std::string& v) {
    ss << std::left << std::setw(20) << k << std::right << std::setw(10) << v << '\n';
  };
  // Accuracy rows only make sense when the report scored classification.
  if (!r.per_class_recall.empty()) {
    line("overall_top1", fmt_opt(r.overall_top1));
    line("balanced_accuracy", fmt_opt(r.balanced_accuracy));
    line("rare", fmt_opt(r.group_accuracy(Group::rare)));
    line("common", fmt_opt(r.group_accuracy(Group::common)));
    line("frequent", fmt_opt(r.group_accuracy(Group::frequent)));
  }
  if (r.mean_ap) line("mean_ap", fmt_opt(r.mean_ap));
  line("correlation_mean", fmt_opt(r.correlation_mean));
  line("correlation_var", fmt_opt(r.correlation_var));
  return ss.str();
}

std::string eval_report_csv(const EvalReport& r) {
  std::ostringstream ss;
  ss << std::setprecision(17) << "class,recall,ap\n";
  const std::size_t n = std::max(r.per_class_recall.size(), r.per_class_ap.size());
  for (std::size_t c = 0; c < n; ++c) {
    ss << c << ',';
    if (c < r.per_class_recall.size() && !std::isnan(r.per_class_recall[c])) {
      ss << r.per_class_recall[c];
    }
    ss << ',';
    if (c < r.per_class_ap.size() && !std::isnan(r.per_class_ap[c])) ss << r.per_class_ap[c];
    ss << '\n';
  }
  return ss.str();
}

std::string train_log_csv(const TrainResult& result) {
  std::ostringstream ss;
  ss << std::setprecision(17) << "epoch,loss\n";
  ss << 0 << ',' << result.initial_loss << '\n';
  for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) {
    ss << e + 1 << ',' << result.epoch_loss[e] << '\n';
  }
  return ss.str();
}

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

}  // namespace logn
