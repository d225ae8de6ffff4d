#pragma once

// PSNR, acceptance/excellence ratios against baseline score tables, the
// Calinski-Harabasz index, and report assembly.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gir/datasetgen.hpp"
#include "gir/image.hpp"
#include "gir/image_io.hpp"
#include "gir/parallel.hpp"

namespace gir {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// 10 log10(1 / MSE) over all RGB samples with MAX = 1; +inf when equal.
inline double psnr(const ImageF32& a, const ImageF32& b) {
  if (!a.same_shape(b)) fail(ErrorCode::DimensionMismatch, "psnr: image dimensions differ");
  const auto da = a.data(), db = b.data();
  double sum = 0.0;
  for (std::size_t i = 0; i < da.size(); ++i) {
    const double d = static_cast<double>(da[i]) - static_cast<double>(db[i]);
    sum += d * d;
  }
  if (sum == 0.0) return kInfinity;
  return -10.0 * std::log10(sum / static_cast<double>(da.size()));
}

struct ScoreTable {
  std::map<std::string, double> rows;
  std::string label;

  std::size_t size() const noexcept { return rows.size(); }
  double at(const std::string& task_id) const {
    const auto it = rows.find(task_id);
    if (it == rows.end()) fail(ErrorCode::TaskSetMismatch, "no score for task \"" + task_id + "\"");
    return it->second;
  }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  for (auto& f : out) {
    const auto b = f.find_first_not_of(" \t");
    const auto e = f.find_last_not_of(" \t");
    f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
  }
  return out;
}

inline double parse_score(const std::string& s, const std::string& where) {
  if (s == "inf" || s == "+inf" || s == "Inf" || s == "+Inf") return kInfinity;
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v)) {
    fail(ErrorCode::ParseError, where + ": non-numeric score \"" + s + "\"");
  }
  return v;
}

}  // namespace detail

/// Parses `task_id,score` CSV text. Multi-column files select a column by
/// header name; an empty `column` picks the sole score column.
inline ScoreTable parse_score_table(const std::string& text, const std::string& column = "",
                                    const std::string& source = "score table") {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  std::vector<std::string> header;
  while (header.empty() && std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (!line.empty()) header = detail::split_csv_line(line);
  }
  if (header.size() < 2 || header[0] != "task_id") fail(ErrorCode::ParseError, source + ": header must start with task_id");
  std::size_t col = 1;
  if (!column.empty()) {
    const auto it = std::find(header.begin() + 1, header.end(), column);
    if (it == header.end()) fail(ErrorCode::ParseError, source + ": no column \"" + column + "\"");
    col = static_cast<std::size_t>(it - header.begin());
  } else if (header.size() != 2) {
    fail(ErrorCode::ParseError, source + ": several score columns; choose one with file.csv#column");
  }
  ScoreTable t;
  t.label = column.empty() ? header[1] : column;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    const std::string where = source + " line " + std::to_string(lineno);
    if (f.size() != header.size()) {
      fail(ErrorCode::ParseError, where + ": expected " + std::to_string(header.size()) + " fields, found " + std::to_string(f.size()));
    }
    if (f[0].empty()) fail(ErrorCode::ParseError, where + ": empty task_id");
    if (!t.rows.emplace(f[0], detail::parse_score(f[col], where)).second) {
      fail(ErrorCode::ParseError, where + ": duplicate task_id \"" + f[0] + "\"");
    }
  }
  return t;
}

inline ScoreTable load_score_table(const std::filesystem::path& path, const std::string& column = "") {
  return parse_score_table(read_text_file(path), column, path.string());
}

/// Accepts `file.csv` or `file.csv#column`.
inline ScoreTable load_score_table_spec(const std::string& spec) {
  const auto hash = spec.rfind('#');
  if (hash == std::string::npos) return load_score_table(spec);
  return load_score_table(spec.substr(0, hash), spec.substr(hash + 1));
}

namespace detail {

inline void check_same_tasks(const ScoreTable& a, const ScoreTable& b) {
  for (const auto& [id, _] : a.rows)
    if (!b.rows.count(id)) fail(ErrorCode::TaskSetMismatch, "task \"" + id + "\" missing from " + b.label);
  for (const auto& [id, _] : b.rows)
    if (!a.rows.count(id)) fail(ErrorCode::TaskSetMismatch, "task \"" + id + "\" missing from " + a.label);
  if (a.rows.empty()) fail(ErrorCode::TaskSetMismatch, "empty score tables");
}

inline double meet_ratio(const ScoreTable& model, const ScoreTable& baseline) {
  check_same_tasks(model, baseline);
  std::size_t met = 0;
  for (const auto& [id, score] : model.rows)
    if (score >= baseline.rows.at(id)) ++met;
  return static_cast<double>(met) / static_cast<double>(model.rows.size());
}

}  // namespace detail

/// Fraction of tasks where the model scores at least the acceptance line.
inline double acceptance_ratio(const ScoreTable& model, const ScoreTable& acceptance) {
  return detail::meet_ratio(model, acceptance);
}

/// Fraction of tasks where the model scores at least the excellence line.
inline double excellence_ratio(const ScoreTable& model, const ScoreTable& excellence) {
  return detail::meet_ratio(model, excellence);
}

/// Mean of the finite scores; +inf if every score is infinite.
inline double average_score(const ScoreTable& t) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& [_, s] : t.rows)
    if (std::isfinite(s)) sum += s, ++n;
  return n ? sum / static_cast<double>(n) : kInfinity;
}

inline double calinski_harabasz(const std::vector<std::vector<double>>& x, const std::vector<int>& labels) {
  const std::size_t n = x.size();
  if (labels.size() != n) fail(ErrorCode::LengthMismatch, "labels and features differ in length");
  if (n == 0) fail(ErrorCode::InvalidParam, "no points");
  const std::size_t dim = x.front().size();
  for (const auto& v : x)
    if (v.size() != dim) fail(ErrorCode::LengthMismatch, "feature vectors differ in length");
  std::map<int, std::vector<std::size_t>> clusters;
  for (std::size_t i = 0; i < n; ++i) clusters[labels[i]].push_back(i);
  const std::size_t k = clusters.size();
  if (k < 2) fail(ErrorCode::InvalidParam, "CHI needs at least 2 clusters");
  if (n <= k) fail(ErrorCode::InvalidParam, "CHI needs more points than clusters");
  std::vector<double> mu(dim, 0.0);
  for (const auto& v : x)
    for (std::size_t d = 0; d < dim; ++d) mu[d] += v[d];
  for (auto& m : mu) m /= static_cast<double>(n);
  double between = 0.0, within = 0.0;
  for (const auto& [_, members] : clusters) {
    std::vector<double> c(dim, 0.0);
    for (auto i : members)
      for (std::size_t d = 0; d < dim; ++d) c[d] += x[i][d];
    for (auto& v : c) v /= static_cast<double>(members.size());
    for (std::size_t d = 0; d < dim; ++d) between += static_cast<double>(members.size()) * (c[d] - mu[d]) * (c[d] - mu[d]);
    for (auto i : members)
      for (std::size_t d = 0; d < dim; ++d) within += (x[i][d] - c[d]) * (x[i][d] - c[d]);
  }
  if (within == 0.0) return kInfinity;
  return (between / static_cast<double>(k - 1)) / (within / static_cast<double>(n - k));
}

// ---------------------------------------------------------------------------
// Reports

struct TaskResult {
  double model = 0.0;
  double acceptance = 0.0;
  double excellence = 0.0;
  bool meets_acceptance = false;
  bool meets_excellence = false;
  int infinite_images = 0;  // images with zero error, excluded from the mean
};

struct MetricReport {
  std::map<std::string, TaskResult> per_task;
  double ar = 0.0;
  double er = 0.0;
  double avg_psnr = 0.0;
  int task_count = 0;
};

inline MetricReport build_report(const ScoreTable& model, const ScoreTable& acceptance, const ScoreTable& excellence) {
  detail::check_same_tasks(model, acceptance);
  detail::check_same_tasks(model, excellence);
  MetricReport r;
  for (const auto& [id, s] : model.rows) {
    TaskResult t;
    t.model = s;
    t.acceptance = acceptance.rows.at(id);
    t.excellence = excellence.rows.at(id);
    t.meets_acceptance = s >= t.acceptance;
    t.meets_excellence = s >= t.excellence;
    r.per_task.emplace(id, t);
  }
  r.ar = acceptance_ratio(model, acceptance);
  r.er = excellence_ratio(model, excellence);
  r.avg_psnr = average_score(model);
  r.task_count = static_cast<int>(model.size());
  return r;
}

namespace detail {

inline std::string fmt(double v, int digits) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

/// Numeric task ids sort numerically, others lexicographically after them.
inline bool task_id_less(const std::string& a, const std::string& b) {
  const bool na = !a.empty() && std::all_of(a.begin(), a.end(), [](unsigned char ch) { return std::isdigit(ch) != 0; });
  const bool nb = !b.empty() && std::all_of(b.begin(), b.end(), [](unsigned char ch) { return std::isdigit(ch) != 0; });
  if (na && nb) return a.size() != b.size() ? a.size() < b.size() : a < b;
  if (na != nb) return na;
  return a < b;
}

}  // namespace detail

/// Writes `<path>` (per-task CSV) and `<path>.txt` (summary), each atomically.
inline void write_report(const MetricReport& r, const std::filesystem::path& path) {
  std::vector<std::string> ids;
  for (const auto& [id, _] : r.per_task) ids.push_back(id);
  std::sort(ids.begin(), ids.end(), detail::task_id_less);
  std::string csv = "task_id,model,acceptance,excellence,meets_acceptance,meets_excellence\n";
  std::string txt = "metric: PSNR (dB), RGB, MAX=1, full image; comparisons inclusive (>=)\n";
  txt += "tasks " + std::to_string(r.task_count) + "\n";
  txt += "AR " + detail::fmt(r.ar, 4) + "\n";
  txt += "ER " + detail::fmt(r.er, 4) + "\n";
  txt += "avg_psnr " + detail::fmt(r.avg_psnr, 4) + "\n\n";
  txt += "task  model      AR-line    ER-line    AR ER\n";
  for (const auto& id : ids) {
    const auto& t = r.per_task.at(id);
    csv += id + "," + detail::fmt(t.model, 6) + "," + detail::fmt(t.acceptance, 6) + "," + detail::fmt(t.excellence, 6) +
           "," + (t.meets_acceptance ? "1" : "0") + "," + (t.meets_excellence ? "1" : "0") + "\n";
    char line[160];
    std::snprintf(line, sizeof line, "%-5s %-10s %-10s %-10s %s  %s%s\n", id.c_str(), detail::fmt(t.model, 4).c_str(),
                  detail::fmt(t.acceptance, 4).c_str(), detail::fmt(t.excellence, 4).c_str(),
                  t.meets_acceptance ? "+" : "-", t.meets_excellence ? "+" : "-",
                  t.infinite_images ? "  (zero-error images excluded)" : "");
    txt += line;
  }
  std::filesystem::path txt_path = path;
  txt_path += ".txt";
  write_text_atomic(txt_path, txt);
  write_text_atomic(path, csv);
}

/// Scores restored images `outputs_dir/<task_id>/<gt_id>.png` against GT.
/// Per-task score is the mean finite PSNR over the task's images. Every
/// missing output is listed before anything is computed.
inline MetricReport evaluate_model(const std::filesystem::path& outputs_dir, const std::filesystem::path& gt_dir,
                                   const Manifest& manifest, const ScoreTable& acceptance,
                                   const ScoreTable& excellence, int threads = 0) {
  namespace fs = std::filesystem;
  std::vector<std::string> missing;
  for (const auto& e : manifest.entries)
    if (!fs::exists(outputs_dir / e.lq_path)) missing.push_back((outputs_dir / e.lq_path).string());
  if (!missing.empty()) {
    std::string msg = std::to_string(missing.size()) + " restored image(s) missing:";
    for (const auto& m : missing) msg += "\n  " + m;
    fail(ErrorCode::MissingOutput, msg);
  }
  std::map<std::string, ImageF32> gts;
  for (const auto& g : manifest.gt_images) gts.emplace(g.id, load_image(gt_dir / g.path));

  std::vector<double> scores(manifest.entries.size());
  parallel_for(manifest.entries.size(), threads, [&](std::size_t i) {
    const auto& e = manifest.entries[i];
    const auto gt = gts.find(e.gt_id);
    if (gt == gts.end()) fail(ErrorCode::ParseError, "manifest entry references unknown GT \"" + e.gt_id + "\"");
    const auto out = load_image(outputs_dir / e.lq_path);
    if (!out.same_shape(gt->second)) {
      fail(ErrorCode::DimensionMismatch, (outputs_dir / e.lq_path).string() + ": dimensions differ from GT");
    }
    scores[i] = psnr(out, gt->second);
  });

  std::map<std::string, std::pair<double, int>> finite;  // sum, count
  std::map<std::string, int> infinite;
  for (const auto& t : manifest.tasks) finite[t.task_id] = {0.0, 0}, infinite[t.task_id] = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto& id = manifest.entries[i].task_id;
    if (std::isfinite(scores[i])) {
      finite[id].first += scores[i];
      ++finite[id].second;
    } else {
      ++infinite[id];
    }
  }
  ScoreTable model;
  model.label = "model";
  for (const auto& [id, sc] : finite) model.rows[id] = sc.second ? sc.first / sc.second : kInfinity;
  auto report = build_report(model, acceptance, excellence);
  for (auto& [id, t] : report.per_task) t.infinite_images = infinite[id];
  return report;
}

}  // namespace gir
