#include "vitask/evaluation/report.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "vitask/data/feature_table.hpp"

namespace vitask::evaluation {

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

std::string num(double v) { return data::format_double(v); }

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

void emit_report(const MetricsReport& r, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "method,seed,ep_used,accuracy,macro_f1,reject_rate\n";
  out << r.method << ',' << r.seed << ',' << (r.ep_used ? 1 : 0) << ',' << num(r.accuracy) << ',' << num(r.macro_f1)
      << ',' << num(r.reject_rate) << '\n';
  out << "class,precision,recall,f1\n";
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    const ClassMetrics& m = r.per_class[c];
    out << c << ',' << num(m.precision) << ',' << num(m.recall) << ',' << num(m.f1) << '\n';
  }
  write_text(path, out.str());
}

MetricsReport read_metrics_csv(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  if (lines.size() < 3 || lines[0] != "method,seed,ep_used,accuracy,macro_f1,reject_rate" ||
      lines[2] != "class,precision,recall,f1") {
    throw std::runtime_error(path.string() + ": not a metrics CSV");
  }
  const auto head = split(lines[1]);
  if (head.size() != 6) throw std::runtime_error(path.string() + ":2: expected 6 fields");
  MetricsReport r;
  r.method = head[0];
  r.seed = std::stoull(head[1]);
  r.ep_used = head[2] == "1";
  r.accuracy = data::parse_double(head[3]);
  r.macro_f1 = data::parse_double(head[4]);
  r.reject_rate = data::parse_double(head[5]);
  for (std::size_t i = 3; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = split(lines[i]);
    if (f.size() != 4) throw std::runtime_error(path.string() + ":" + std::to_string(i + 1) + ": expected 4 fields");
    ClassMetrics m;
    m.precision = data::parse_double(f[1]);
    m.recall = data::parse_double(f[2]);
    m.f1 = data::parse_double(f[3]);
    r.per_class.push_back(m);
  }
  return r;
}

std::vector<RankingRow> read_ranking_csv(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  if (lines.empty() || lines[0] != "pair_id,pos_prob,neg_prob,strict_win") {
    throw std::runtime_error(path.string() + ": not a ranking CSV");
  }
  std::vector<RankingRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = split(lines[i]);
    if (f.size() != 4) throw std::runtime_error(path.string() + ":" + std::to_string(i + 1) + ": expected 4 fields");
    rows.push_back({std::stoull(f[0]), data::parse_double(f[1]), data::parse_double(f[2]), f[3] == "1"});
  }
  return rows;
}

std::string histogram_svg(const RankingReport& r, const std::string& title) {
  constexpr double kWidth = 640, kHeight = 360, kLeft = 50, kRight = 20, kTop = 40, kBottom = 40;
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  double peak = 0.0;
  for (double d : r.pos_hist.density) peak = std::max(peak, d);
  for (double d : r.neg_hist.density) peak = std::max(peak, d);
  if (peak <= 0.0) peak = 1.0;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
      << escape_xml(title) << "</text>\n";
  auto bars = [&](const Histogram& h, const char* cls, const char* color) {
    const double bw = plot_w / static_cast<double>(h.density.size());
    for (std::size_t b = 0; b < h.density.size(); ++b) {
      const double height = plot_h * h.density[b] / peak;
      svg << "<rect class=\"" << cls << "\" x=\"" << num(kLeft + bw * static_cast<double>(b)) << "\" y=\""
          << num(kTop + plot_h - height) << "\" width=\"" << num(bw) << "\" height=\"" << num(height) << "\" fill=\""
          << color << "\" fill-opacity=\"0.5\"/>\n";
    }
  };
  bars(r.neg_hist, "neg", "#d62728");
  bars(r.pos_hist, "pos", "#1f77b4");
  svg << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + plot_h << "\" x2=\"" << kLeft + plot_w << "\" y2=\"" << kTop + plot_h
      << "\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << kLeft << "\" y=\"" << kHeight - 12 << "\" font-family=\"sans-serif\" font-size=\"11\">0</text>\n";
  svg << "<text x=\"" << kLeft + plot_w << "\" y=\"" << kHeight - 12
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">1</text>\n";
  svg << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kHeight - 12
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">mean token probability (blue: matched image, red: "
         "mismatched image)</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

void emit_report(const RankingReport& r, const std::filesystem::path& path, ReportFormat format, const std::string& title) {
  if (format == ReportFormat::svg_histogram) {
    write_text(path, histogram_svg(r, title));
    return;
  }
  if (r.pos_probs.size() != r.neg_probs.size()) throw std::invalid_argument("ranking report: ragged probabilities");
  std::ostringstream out;
  out << "pair_id,pos_prob,neg_prob,strict_win\n";
  for (std::size_t i = 0; i < r.pos_probs.size(); ++i) {
    out << i << ',' << num(r.pos_probs[i]) << ',' << num(r.neg_probs[i]) << ',' << (r.pos_probs[i] > r.neg_probs[i] ? 1 : 0)
        << '\n';
  }
  write_text(path, out.str());
}

}  // namespace vitask::evaluation
