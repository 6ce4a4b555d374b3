#include "vitask/data/feature_table.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace vitask::data {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    fields.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return fields;
}

[[noreturn]] void fail(const std::filesystem::path& path, std::size_t line, const std::string& what) {
  throw std::runtime_error(path.string() + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("cannot format number");
  return std::string(buf, end);
}

double parse_double(std::string_view text) {
  double v = 0.0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || end != text.data() + text.size() || !std::isfinite(v)) {
    throw std::invalid_argument("not a finite number: '" + std::string(text) + "'");
  }
  return v;
}

std::vector<ClassificationSample> load_feature_table(const std::filesystem::path& path,
                                                     const std::vector<DatasetInfo>& known_datasets) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open feature table " + path.string());
  std::string line;
  if (!std::getline(in, line)) fail(path, 1, "missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split_csv_line(line);
  if (header.size() < 4 || header[0] != "sample_id" || header[1] != "dataset_id" || header[2] != "label") {
    fail(path, 1, "header must be sample_id,dataset_id,label,f0,...");
  }
  const std::size_t dims = header.size() - 3;
  for (std::size_t d = 0; d < dims; ++d) {
    if (header[3 + d] != "f" + std::to_string(d)) fail(path, 1, "expected column f" + std::to_string(d));
  }

  std::vector<ClassificationSample> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      fail(path, line_no,
           "expected " + std::to_string(dims) + " features, found " +
               std::to_string(fields.size() < 3 ? 0 : fields.size() - 3));
    }
    ClassificationSample s;
    s.sample_id = fields[0];
    s.dataset_id = fields[1];
    if (s.sample_id.empty()) fail(path, line_no, "empty sample_id");
    std::size_t label = 0;
    auto [end, ec] = std::from_chars(fields[2].data(), fields[2].data() + fields[2].size(), label);
    if (fields[2].empty() || ec != std::errc() || end != fields[2].data() + fields[2].size()) {
      fail(path, line_no, "invalid label '" + fields[2] + "'");
    }
    s.label = label;
    if (!known_datasets.empty()) {
      const DatasetInfo* info = nullptr;
      for (const DatasetInfo& d : known_datasets) {
        if (d.dataset_id == s.dataset_id) info = &d;
      }
      if (!info) fail(path, line_no, "unknown dataset_id '" + s.dataset_id + "'");
      if (label >= info->class_names.size()) fail(path, line_no, "label " + fields[2] + " out of range");
    }
    s.features.resize(dims);
    for (std::size_t d = 0; d < dims; ++d) {
      try {
        s.features[d] = parse_double(fields[3 + d]);
      } catch (const std::invalid_argument& e) {
        fail(path, line_no, "column f" + std::to_string(d) + ": " + e.what());
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

void save_feature_table(const std::filesystem::path& path, const std::vector<ClassificationSample>& samples) {
  if (samples.empty()) throw std::invalid_argument("no samples to write");
  const std::size_t dims = samples.front().features.size();
  std::ostringstream out;
  out << "sample_id,dataset_id,label";
  for (std::size_t d = 0; d < dims; ++d) out << ",f" << d;
  out << '\n';
  for (const ClassificationSample& s : samples) {
    if (s.features.size() != dims) throw std::invalid_argument("ragged features in sample " + s.sample_id);
    out << s.sample_id << ',' << s.dataset_id << ',' << s.label;
    for (double v : s.features) out << ',' << format_double(v);
    out << '\n';
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write feature table " + path.string());
  f << out.str();
  if (!f) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace vitask::data
