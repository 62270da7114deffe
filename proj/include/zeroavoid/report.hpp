#pragma once

// Report rows shared by the estimators and the experiment runner, with the
// CSV encoding used for every emitted table.

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "zeroavoid/error.hpp"

namespace zeroavoid {

enum class Provenance { paper, trivial, derived };
enum class Verdict { pass, fail, inconclusive };

constexpr std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::paper: return "paper";
    case Provenance::trivial: return "trivial";
    case Provenance::derived: return "derived";
  }
  return "unknown";
}

constexpr std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "true";
    case Verdict::fail: return "false";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "unknown";
}

inline constexpr std::array<std::string_view, 3> kProvenanceAllowlist{"paper", "trivial", "derived"};

inline bool provenance_allowed(std::string_view tag) {
  for (auto a : kProvenanceAllowlist) {
    if (a == tag) return true;
  }
  return false;
}

inline Verdict verdict(bool ok) { return ok ? Verdict::pass : Verdict::fail; }

/// Below this effective sample size a weighted estimate proves nothing.
inline constexpr double kMinEss = 100.0;

struct ReportRow {
  std::string experiment;
  std::string model;
  double gamma = 0.0;
  std::string param;
  double estimate = 0.0;
  double std_error = 0.0;
  std::optional<double> target;  // empty for trend rows
  Provenance provenance = Provenance::derived;
  Verdict pass = Verdict::pass;
};

namespace csv {

/// Decimal with 17 significant digits; non-finite values spelled out.
inline std::string number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

/// Shortest decimal that reads back to the same double, for labels and config values.
inline std::string shortest(double v) {
  if (!std::isfinite(v)) return number(v);
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// RFC-4180 field: quoted when it holds a comma, quote or line break.
inline std::string field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline constexpr std::string_view kHeader = "experiment,model,gamma,param,estimate,stderr,target,target_provenance,pass";

inline std::string row(const ReportRow& r) {
  require(provenance_allowed(to_string(r.provenance)), ErrorCode::experiment_failure, "provenance outside allowlist");
  std::string out;
  out += field(r.experiment) + ',' + field(r.model) + ',' + number(r.gamma) + ',' + field(r.param) + ',';
  out += number(r.estimate) + ',' + number(r.std_error) + ',';
  out += (r.target ? number(*r.target) : std::string("trend")) + ',';
  out += std::string(to_string(r.provenance)) + ',' + std::string(to_string(r.pass));
  return out;
}

inline void write(std::ostream& out, const std::vector<ReportRow>& rows) {
  out << kHeader << "\r\n";
  for (const auto& r : rows) out << row(r) << "\r\n";
}

}  // namespace csv

}  // namespace zeroavoid
