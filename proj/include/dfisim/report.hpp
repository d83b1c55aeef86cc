#pragma once

// Report rendering. Field order is fixed so that output is byte-stable and
// can be compared against golden files.

#include <iomanip>
#include <sstream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "dfisim/error.hpp"
#include "dfisim/pipeline.hpp"
#include "dfisim/violation.hpp"

namespace dfisim {

enum class ReportFormat { Json, Table };

inline ReportFormat parse_report_format(std::string_view s) {
  if (s == "json")
    return ReportFormat::Json;
  if (s == "table")
    return ReportFormat::Table;
  throw ConfigError("unknown report format '" + std::string(s) + "'");
}

inline nlohmann::ordered_json report_json(const Report& r) {
  using nlohmann::ordered_json;
  ordered_json vs = ordered_json::array();
  for (const auto& v : r.violations)
    vs.push_back({{"kind", kind_name(v.kind)},
                  {"load_id", v.load_id.value},
                  {"found_id", v.found_id.value},
                  {"addr", v.addr},
                  {"packet_index", v.packet_index}});
  const auto& m = r.metrics;
  ordered_json pruned = ordered_json::object();
  for (std::size_t i = 0; i < m.pruned.size(); ++i)
    pruned[std::string(1, static_cast<char>('A' + i))] = m.pruned[i];
  ordered_json metrics = {{"packets_generated", m.packets_generated},
                          {"pruned", pruned},
                          {"records_emitted", m.records_emitted},
                          {"wire_bytes", m.wire_bytes},
                          {"baseline_bytes", m.baseline_bytes},
                          {"compression_ratio", m.compression_ratio},
                          {"producer_stalls", m.producer_stalls},
                          {"max_latency_packets", m.max_latency_packets}};
  return {{"violations", vs}, {"metrics", metrics}};
}

inline std::string report_table(const Report& r) {
  std::ostringstream os;
  const auto& m = r.metrics;
  auto row = [&](std::string_view k, const auto& v) {
    os << std::left << std::setw(22) << k << v << '\n';
  };
  row("violations", r.violations.size());
  for (const auto& v : r.violations)
    os << "  " << format_violation(v) << '\n';
  row("packets_generated", m.packets_generated);
  for (std::size_t i = 0; i < m.pruned.size(); ++i)
    row("pruned_" + std::string(1, static_cast<char>('A' + i)), m.pruned[i]);
  row("records_emitted", m.records_emitted);
  row("wire_bytes", m.wire_bytes);
  row("baseline_bytes", m.baseline_bytes);
  std::ostringstream ratio;
  ratio << std::fixed << std::setprecision(4) << m.compression_ratio;
  row("compression_ratio", ratio.str());
  row("producer_stalls", m.producer_stalls);
  row("max_latency_packets", m.max_latency_packets);
  return os.str();
}

inline std::string emit_report(const Report& r, ReportFormat format) {
  if (format == ReportFormat::Json)
    return report_json(r).dump(2) + "\n";
  return report_table(r);
}

} // namespace dfisim
