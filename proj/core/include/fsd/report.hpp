// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fsd {

/// One (defense, attack, ste, task) cell.
struct ReportRow {
  std::string defense;
  std::string attack;
  std::string ste;              // ste grid entry id
  std::optional<int> ste_k;     // empty for an oblivious (STE disabled) entry
  std::optional<double> ste_pq;
  std::string task;
  std::string metric;
  double value = 0.0;
  std::int64_t n = 0;
  double psnr_mean = 0.0;  // may be +inf when no attack iterations ran
  std::uint64_t seed = 0;
  double wall_time_s = 0.0;  // JSON only; never part of the CSV

  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

/// Oblivious vs worst-case informed comparison for one (defense, attack, task).
/// The worst case minimises the metric over every ste entry of the grid.
struct WorstCaseRow {
  std::string defense;
  std::string attack;
  std::string task;
  std::string metric;
  std::optional<double> oblivious;
  double informed_worst = 0.0;
  std::string worst_ste;
  std::optional<double> degradation;  // oblivious - informed_worst

  friend bool operator==(const WorstCaseRow&, const WorstCaseRow&) = default;
};

struct CellFailure {
  std::string defense;
  std::string attack;
  std::string ste;
  std::string task;
  std::string message;

  friend bool operator==(const CellFailure&, const CellFailure&) = default;
};

struct Provenance {
  std::string config_hash;
  std::string model_hash;
  std::uint64_t seed = 0;
  std::string tool_version;
  std::vector<std::string> notes;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct EvalReport {
  std::vector<ReportRow> rows;
  std::vector<WorstCaseRow> worst_case;
  std::vector<CellFailure> failures;
  Provenance provenance;

  bool complete() const noexcept { return failures.empty(); }
  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

inline constexpr std::string_view kCsvHeader =
    "defense,attack,ste_k,ste_pq,task,metric,value,n,psnr_mean,seed";

/// Rounds to 6 significant digits, the precision every report number is
/// serialized with. Infinities pass through.
double round_sig6(double v);

/// "%.6g", with "inf" for infinities.
std::string format_sig6(double v);

/// Recomputes worst_case from rows.
void summarize_worst_case(EvalReport& report);

std::string report_to_csv(const EvalReport& report);
std::string report_to_json(const EvalReport& report);
EvalReport parse_report_json(std::string_view text);

enum class ReportFormat { csv, json };
void emit_report(const EvalReport& report, ReportFormat format, const std::filesystem::path& path);

}  // namespace fsd
