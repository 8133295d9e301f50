// SPDX-License-Identifier: Apache-2.0
#include "fsd/report.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include "fsd/error.hpp"
#include "json_codec.hpp"

namespace fsd {

double round_sig6(double v) {
  if (!std::isfinite(v)) return v;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return std::strtod(buf, nullptr);
}

std::string format_sig6(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

void summarize_worst_case(EvalReport& report) {
  using Key = std::tuple<std::string, std::string, std::string, std::string>;
  std::map<Key, std::size_t> slot;
  report.worst_case.clear();
  for (const auto& row : report.rows) {
    const Key key{row.defense, row.attack, row.task, row.metric};
    auto it = slot.find(key);
    if (it == slot.end()) {
      it = slot.emplace(key, report.worst_case.size()).first;
      WorstCaseRow w;
      w.defense = row.defense;
      w.attack = row.attack;
      w.task = row.task;
      w.metric = row.metric;
      w.informed_worst = row.value;
      w.worst_ste = row.ste;
      report.worst_case.push_back(std::move(w));
    }
    auto& w = report.worst_case[it->second];
    if (!row.ste_k && !w.oblivious) w.oblivious = row.value;
    if (row.value < w.informed_worst) {
      w.informed_worst = row.value;
      w.worst_ste = row.ste;
    }
  }
  for (auto& w : report.worst_case) {
    if (w.oblivious) w.degradation = round_sig6(*w.oblivious - w.informed_worst);
  }
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

using detail::json;

json number_or_string(double v) {
  if (std::isfinite(v)) return v;
  return format_sig6(v);
}

double number_from(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return INFINITY;
    if (s == "-inf") return -INFINITY;
    if (s == "nan") return NAN;
  }
  throw DomainError("report JSON: expected a number");
}

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace

std::string report_to_csv(const EvalReport& report) {
  std::ostringstream out;
  out << kCsvHeader << '\n';
  for (const auto& r : report.rows) {
    out << csv_field(r.defense) << ',' << csv_field(r.attack) << ','
        << (r.ste_k ? std::to_string(*r.ste_k) : std::string("none")) << ','
        << (r.ste_pq ? format_sig6(*r.ste_pq) : std::string("none")) << ',' << csv_field(r.task)
        << ',' << csv_field(r.metric) << ',' << format_sig6(r.value) << ',' << r.n << ','
        << format_sig6(r.psnr_mean) << ',' << r.seed << '\n';
  }
  return out.str();
}

std::string report_to_json(const EvalReport& report) {
  json j;
  json prov;
  prov["config_hash"] = report.provenance.config_hash;
  prov["model_hash"] = report.provenance.model_hash;
  prov["seed"] = report.provenance.seed;
  prov["tool_version"] = report.provenance.tool_version;
  prov["notes"] = report.provenance.notes;
  j["provenance"] = std::move(prov);

  json rows = json::array();
  for (const auto& r : report.rows) {
    json o;
    o["defense"] = r.defense;
    o["attack"] = r.attack;
    o["ste"] = r.ste;
    o["ste_k"] = optional_json(r.ste_k);
    o["ste_pq"] = optional_json(r.ste_pq);
    o["task"] = r.task;
    o["metric"] = r.metric;
    o["value"] = number_or_string(r.value);
    o["n"] = r.n;
    o["psnr_mean"] = number_or_string(r.psnr_mean);
    o["seed"] = r.seed;
    o["wall_time_s"] = r.wall_time_s;
    rows.push_back(std::move(o));
  }
  j["rows"] = std::move(rows);

  json worst = json::array();
  for (const auto& w : report.worst_case) {
    json o;
    o["defense"] = w.defense;
    o["attack"] = w.attack;
    o["task"] = w.task;
    o["metric"] = w.metric;
    o["oblivious"] = optional_json(w.oblivious);
    o["informed_worst"] = w.informed_worst;
    o["worst_ste"] = w.worst_ste;
    o["degradation"] = optional_json(w.degradation);
    worst.push_back(std::move(o));
  }
  j["worst_case"] = std::move(worst);

  json fails = json::array();
  for (const auto& f : report.failures) {
    fails.push_back({{"defense", f.defense}, {"attack", f.attack}, {"ste", f.ste}, {"task", f.task},
                     {"message", f.message}});
  }
  j["failures"] = std::move(fails);
  j["complete"] = report.complete();
  return j.dump(2) + "\n";
}

EvalReport parse_report_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DomainError(std::string("report JSON: ") + e.what());
  }
  EvalReport report;
  try {
    const auto& prov = j.at("provenance");
    report.provenance.config_hash = prov.at("config_hash").get<std::string>();
    report.provenance.model_hash = prov.at("model_hash").get<std::string>();
    report.provenance.seed = prov.at("seed").get<std::uint64_t>();
    report.provenance.tool_version = prov.at("tool_version").get<std::string>();
    report.provenance.notes = prov.value("notes", std::vector<std::string>{});

    for (const auto& o : j.at("rows")) {
      ReportRow r;
      r.defense = o.at("defense").get<std::string>();
      r.attack = o.at("attack").get<std::string>();
      r.ste = o.at("ste").get<std::string>();
      if (!o.at("ste_k").is_null()) r.ste_k = o["ste_k"].get<int>();
      if (!o.at("ste_pq").is_null()) r.ste_pq = o["ste_pq"].get<double>();
      r.task = o.at("task").get<std::string>();
      r.metric = o.at("metric").get<std::string>();
      r.value = number_from(o.at("value"));
      r.n = o.at("n").get<std::int64_t>();
      r.psnr_mean = number_from(o.at("psnr_mean"));
      r.seed = o.at("seed").get<std::uint64_t>();
      r.wall_time_s = o.value("wall_time_s", 0.0);
      report.rows.push_back(std::move(r));
    }
    for (const auto& o : j.value("worst_case", json::array())) {
      WorstCaseRow w;
      w.defense = o.at("defense").get<std::string>();
      w.attack = o.at("attack").get<std::string>();
      w.task = o.at("task").get<std::string>();
      w.metric = o.at("metric").get<std::string>();
      if (!o.at("oblivious").is_null()) w.oblivious = o["oblivious"].get<double>();
      w.informed_worst = o.at("informed_worst").get<double>();
      w.worst_ste = o.at("worst_ste").get<std::string>();
      if (!o.at("degradation").is_null()) w.degradation = o["degradation"].get<double>();
      report.worst_case.push_back(std::move(w));
    }
    for (const auto& o : j.value("failures", json::array())) {
      report.failures.push_back({o.at("defense").get<std::string>(), o.at("attack").get<std::string>(),
                                 o.at("ste").get<std::string>(), o.at("task").get<std::string>(),
                                 o.at("message").get<std::string>()});
    }
  } catch (const json::exception& e) {
    throw DomainError(std::string("report JSON: ") + e.what());
  }
  return report;
}

void emit_report(const EvalReport& report, ReportFormat format, const std::filesystem::path& path) {
  const std::string text = format == ReportFormat::csv ? report_to_csv(report) : report_to_json(report);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("write failure on '" + path.string() + "'");
}

}  // namespace fsd
