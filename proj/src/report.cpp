#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "mira/error.hpp"
#include "mira/evaluator.hpp"

namespace mira {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

json pair_json(const PairScore& s) {
  return {{"ref_id", s.ref_id}, {"tgt_id", s.tgt_id}, {"metric", s.metric}, {"value", s.value},
          {"higher_is_similar", s.higher_is_similar}};
}

PairScore pair_from(const json& j) {
  return {j.at("ref_id").get<std::string>(), j.at("tgt_id").get<std::string>(), j.at("metric").get<std::string>(),
          j.at("value").get<double>(), j.at("higher_is_similar").get<bool>()};
}

json summary_json(const SummaryStats& s) { return {{"mean", s.mean}, {"std", s.std}, {"n", s.n}}; }

SummaryStats summary_from(const json& j) {
  return {j.at("mean").get<double>(), j.at("std").get<double>(), j.at("n").get<std::size_t>()};
}

json kw_json(const KWResult& r) {
  return {{"h", r.h}, {"df", r.df}, {"p_value", r.p_value}, {"tie_correction", r.tie_correction}};
}

KWResult kw_from(const json& j) {
  return {j.at("h").get<double>(), j.at("df").get<int>(), j.at("p_value").get<double>(),
          j.at("tie_correction").get<double>()};
}

json stats_json(const SensitivityReport& s) {
  json metrics = json::array();
  for (const auto& m : s.metrics) {
    json trend = json::array();
    for (const auto& p : m.trend) trend.push_back({{"group", p.group}, {"degree", p.degree}, {"summary", summary_json(p.summary)}});
    json tests = json::array();
    for (const auto& t : m.baseline_vs_degree) tests.push_back({{"degree", t.degree}, {"kruskal_wallis", kw_json(t.result)}});
    json pairwise = json::array();
    for (const auto& p : m.pairwise) {
      pairwise.push_back({{"group_a", p.group_a}, {"group_b", p.group_b}, {"z", p.z}, {"p_raw", p.p_raw},
                          {"p_adjusted", p.p_adjusted}});
    }
    metrics.push_back({{"metric", m.metric},
                       {"higher_is_similar", m.higher_is_similar},
                       {"trend", trend},
                       {"kruskal_wallis", kw_json(m.omnibus)},
                       {"baseline_vs_degree", tests},
                       {"dunn_holm", pairwise}});
  }
  json fad = json::array();
  for (const auto& p : s.fad) fad.push_back({{"degree", p.degree}, {"value", p.value}});
  return {{"degrees", s.degrees},
          {"significance", s.significance},
          {"metrics", metrics},
          {"fad", {{"model", s.fad_model}, {"experimental", true}, {"trend", fad}}}};
}

SensitivityReport stats_from(const json& j) {
  SensitivityReport s;
  s.degrees = j.at("degrees").get<std::vector<double>>();
  s.significance = j.at("significance").get<double>();
  for (const auto& m : j.at("metrics")) {
    MetricSensitivity ms;
    ms.metric = m.at("metric").get<std::string>();
    ms.higher_is_similar = m.at("higher_is_similar").get<bool>();
    for (const auto& p : m.at("trend")) {
      ms.trend.push_back({p.at("group").get<std::string>(), p.at("degree").get<double>(), summary_from(p.at("summary"))});
    }
    ms.omnibus = kw_from(m.at("kruskal_wallis"));
    for (const auto& t : m.at("baseline_vs_degree")) {
      ms.baseline_vs_degree.push_back({t.at("degree").get<double>(), kw_from(t.at("kruskal_wallis"))});
    }
    for (const auto& p : m.at("dunn_holm")) {
      ms.pairwise.push_back({p.at("group_a").get<std::string>(), p.at("group_b").get<std::string>(),
                             p.at("z").get<double>(), p.at("p_raw").get<double>(), p.at("p_adjusted").get<double>()});
    }
    s.metrics.push_back(std::move(ms));
  }
  const json& fad = j.at("fad");
  s.fad_model = fad.at("model").get<std::string>();
  for (const auto& p : fad.at("trend")) s.fad.push_back({p.at("degree").get<double>(), p.at("value").get<double>()});
  return s;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::string xml_escape(const std::string& s) {
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

struct SeriesPoint {
  std::string label;
  double x;  // replication degree in percent, or category index
  double mean;
  double std;
};

std::string trend_svg(const std::string& title, const std::string& y_label, const std::vector<SeriesPoint>& points) {
  constexpr double W = 640, H = 400, L = 80, R = 20, T = 40, B = 60;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& p : points) {
    lo = std::min(lo, p.mean - p.std);
    hi = std::max(hi, p.mean + p.std);
  }
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  const auto n = points.size();
  double x_lo = 0.0;
  double x_hi = 0.0;
  for (const auto& p : points) x_hi = std::max(x_hi, p.x);
  if (!(x_hi > x_lo)) x_hi = x_lo + 1.0;
  auto x = [&](std::size_t i) { return L + 10 + (W - L - R - 20) * (points[i].x - x_lo) / (x_hi - x_lo); };
  auto y = [&](double v) { return T + (H - T - B) * (hi - v) / (hi - lo); };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << xml_escape(title) << "</text>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = lo + (hi - lo) * t / 4.0;
    s << "<text x=\"" << L - 6 << "\" y=\"" << fmt("%.2f", y(v) + 4) << "\" text-anchor=\"end\">" << fmt("%.4g", v) << "</text>\n";
  }
  s << "<text transform=\"translate(18," << (T + H - B) / 2 << ") rotate(-90)\" text-anchor=\"middle\">" << xml_escape(y_label) << "</text>\n";
  std::string line;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = points[i];
    const std::string xs = fmt("%.2f", x(i));
    s << "<line x1=\"" << xs << "\" y1=\"" << fmt("%.2f", y(p.mean - p.std)) << "\" x2=\"" << xs << "\" y2=\""
      << fmt("%.2f", y(p.mean + p.std)) << "\" stroke=\"#888\"/>\n";
    s << "<circle cx=\"" << xs << "\" cy=\"" << fmt("%.2f", y(p.mean)) << "\" r=\"4\" fill=\"#1f5fa8\"/>\n";
    s << "<text x=\"" << xs << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">" << xml_escape(p.label) << "</text>\n";
    line += (i ? " " : "") + xs + "," + fmt("%.2f", y(p.mean));
  }
  if (n > 1) s << "<polyline points=\"" << line << "\" fill=\"none\" stroke=\"#1f5fa8\" stroke-width=\"2\"/>\n";
  s << "</svg>\n";
  return s.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::string arrow(bool higher_is_similar) { return higher_is_similar ? "(higher = more similar)" : "(lower = more similar)"; }

}  // namespace

std::set<ReportFormat> parse_formats(std::string_view list) {
  std::set<ReportFormat> out;
  std::size_t pos = 0;
  while (pos <= list.size()) {
    const std::size_t comma = std::min(list.find(',', pos), list.size());
    const std::string_view item = list.substr(pos, comma - pos);
    if (item == "csv") out.insert(ReportFormat::kCsv);
    else if (item == "json") out.insert(ReportFormat::kJson);
    else if (item == "svg") out.insert(ReportFormat::kSvg);
    else throw ConfigError("unknown report format '" + std::string(item) + "'");
    pos = comma + 1;
  }
  return out;
}

json to_json(const EvaluationReport& report) {
  json per_pair = json::array();
  for (const auto& s : report.per_pair) per_pair.push_back(pair_json(s));
  json control = json::array();
  for (const auto& s : report.control_pairs) control.push_back(pair_json(s));
  json errors = json::array();
  for (const auto& e : report.errors) {
    errors.push_back({{"ref_id", e.ref_id}, {"tgt_id", e.tgt_id}, {"metric", e.metric}, {"message", e.message}});
  }
  json global = json::array();
  for (const auto& g : report.global) {
    json entry{{"metric", g.metric}, {"comparison", g.comparison}, {"model", g.model}, {"experimental", g.experimental}};
    if (g.value) entry["value"] = *g.value;
    else entry["summary"] = summary_json(g.summary);
    global.push_back(std::move(entry));
  }
  json flags = json::array();
  for (const auto& f : report.flags) {
    json entry = pair_json(f.pair);
    entry["threshold"] = f.threshold;
    flags.push_back(std::move(entry));
  }
  json doc{{"provenance", report.provenance},
           {"global", global},
           {"per_pair", per_pair},
           {"control_pairs", control},
           {"errors", errors},
           {"flags", flags},
           {"warnings", report.warnings}};
  doc["stats"] = report.stats ? stats_json(*report.stats) : json(nullptr);
  return doc;
}

EvaluationReport report_from_json(const json& doc) {
  try {
    EvaluationReport r;
    r.provenance = doc.at("provenance");
    for (const auto& g : doc.at("global")) {
      GlobalEntry e;
      e.metric = g.at("metric").get<std::string>();
      e.comparison = g.at("comparison").get<std::string>();
      e.model = g.at("model").get<std::string>();
      e.experimental = g.at("experimental").get<bool>();
      if (g.contains("value")) e.value = g.at("value").get<double>();
      else e.summary = summary_from(g.at("summary"));
      r.global.push_back(std::move(e));
    }
    for (const auto& s : doc.at("per_pair")) r.per_pair.push_back(pair_from(s));
    for (const auto& s : doc.at("control_pairs")) r.control_pairs.push_back(pair_from(s));
    for (const auto& e : doc.at("errors")) {
      r.errors.push_back({e.at("ref_id").get<std::string>(), e.at("tgt_id").get<std::string>(),
                          e.at("metric").get<std::string>(), e.at("message").get<std::string>()});
    }
    for (const auto& f : doc.at("flags")) r.flags.push_back({pair_from(f), f.at("threshold").get<double>()});
    r.warnings = doc.at("warnings").get<std::vector<std::string>>();
    if (!doc.at("stats").is_null()) r.stats = stats_from(doc.at("stats"));
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("report: ") + e.what());
  }
}

EvaluationReport read_report(const fs::path& json_file) {
  std::ifstream in(json_file);
  if (!in) throw IoError("cannot open " + json_file.string());
  try {
    return report_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw FormatError(json_file.string() + ": " + e.what());
  }
}

std::vector<fs::path> write_report(const EvaluationReport& report, const fs::path& out_dir,
                                   const std::set<ReportFormat>& formats) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  std::vector<fs::path> written;

  if (formats.count(ReportFormat::kCsv)) {
    std::set<std::tuple<std::string, std::string, std::string>> flagged;
    for (const auto& f : report.flags) flagged.insert({f.pair.metric, f.pair.ref_id, f.pair.tgt_id});
    std::string text = "metric,ref_id,tgt_id,value,flagged\n";
    for (const auto& s : report.per_pair) {
      text += csv_field(s.metric) + ',' + csv_field(s.ref_id) + ',' + csv_field(s.tgt_id) + ',' + fmt("%.17g", s.value) +
              ',' + (flagged.count({s.metric, s.ref_id, s.tgt_id}) ? "true" : "false") + '\n';
    }
    written.push_back(out_dir / "pairs.csv");
    write_text(written.back(), text);
  }

  if (formats.count(ReportFormat::kJson)) {
    written.push_back(out_dir / "report.json");
    write_text(written.back(), to_json(report).dump(2) + "\n");
  }

  if (formats.count(ReportFormat::kSvg)) {
    if (report.stats) {
      for (const auto& m : report.stats->metrics) {
        std::vector<SeriesPoint> pts;
        for (const auto& p : m.trend) pts.push_back({p.group, p.degree * 100.0, p.summary.mean, p.summary.std});
        const std::string model = [&] {
          for (const auto& g : report.global) if (g.metric == m.metric) return g.model;
          return std::string();
        }();
        const std::string title = m.metric + (model.empty() ? "" : " [" + model + "]") + " vs replication degree";
        written.push_back(out_dir / ("trend_" + m.metric + ".svg"));
        write_text(written.back(), trend_svg(title, m.metric + " " + arrow(m.higher_is_similar), pts));
      }
      if (!report.stats->fad.empty()) {
        std::vector<SeriesPoint> pts;
        for (const auto& p : report.stats->fad) {
          pts.push_back({p.degree == 0.0 ? "baseline" : fmt("%g%%", p.degree * 100.0), p.degree * 100.0, p.value, 0.0});
        }
        written.push_back(out_dir / "trend_fad.svg");
        write_text(written.back(), trend_svg("fad [" + report.stats->fad_model + "] vs replication degree (experimental)",
                                             "fad " + arrow(false), pts));
      }
    } else {
      std::vector<std::string> metrics;
      for (const auto& g : report.global) {
        if (std::find(metrics.begin(), metrics.end(), g.metric) == metrics.end()) metrics.push_back(g.metric);
      }
      for (const auto& metric : metrics) {
        std::vector<SeriesPoint> pts;
        std::string model;
        for (const auto& g : report.global) {
          if (g.metric != metric) continue;
          model = g.model;
          pts.push_back({g.comparison, static_cast<double>(pts.size()), g.value ? *g.value : g.summary.mean,
                         g.value ? 0.0 : g.summary.std});
        }
        const bool higher = metric_info(metric).higher_is_similar;
        const std::string title = metric + (model.empty() ? "" : " [" + model + "]") + " by comparison set";
        written.push_back(out_dir / ("trend_" + metric + ".svg"));
        write_text(written.back(), trend_svg(title, metric + " " + arrow(higher), pts));
      }
    }
  }
  return written;
}

}  // namespace mira
