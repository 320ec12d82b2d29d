#include <nlohmann/json.hpp>

#include <charconv>
#include <fstream>

#include "retroclass/error.hpp"
#include "retroclass/harness.hpp"

namespace retroclass {

namespace {

using ojson = nlohmann::ordered_json;

constexpr const char* kCsvHeader =
    "dataset,index_mode,k,tau_tt,tau_it,alpha,beta,use_temperature_tt,"
    "use_temperature_it,renormalize_output,n_queries";

std::string shortest(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return {buf, res.ptr};
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

ojson config_json(const EnrichmentConfig& c) {
  return ojson::parse(to_json(c));
}

ojson report_json(const EvalReport& r, bool include_timings) {
  ojson j;
  j["dataset"] = r.dataset;
  j["index_mode"] = r.index_mode;
  j["config"] = config_json(r.config);
  j["n_queries"] = r.n_queries;
  ojson acc = ojson::object();
  for (const auto& [m, v] : r.acc_at) acc[std::to_string(m)] = v;
  j["acc_at"] = std::move(acc);
  j["per_class_acc"] = r.per_class_acc;
  j["per_class_count"] = r.per_class_count;
  if (include_timings) {
    ojson t = ojson::object();
    for (const auto& [stage, ms] : r.wall_time_ms) t[stage] = ms;
    j["wall_time_ms"] = std::move(t);
  }
  return j;
}

EvalReport report_from(const nlohmann::json& j) {
  EvalReport r;
  r.dataset = j.at("dataset").get<std::string>();
  r.index_mode = j.at("index_mode").get<std::string>();
  r.config = parse_enrichment_config(j.at("config").dump());
  r.n_queries = j.at("n_queries").get<std::size_t>();
  for (const auto& [m, v] : j.at("acc_at").items()) r.acc_at[std::stoi(m)] = v.get<double>();
  r.per_class_acc = j.at("per_class_acc").get<std::vector<double>>();
  r.per_class_count = j.at("per_class_count").get<std::vector<std::size_t>>();
  if (j.contains("wall_time_ms")) {
    r.wall_time_ms = j.at("wall_time_ms").get<std::map<std::string, double>>();
  }
  return r;
}

}  // namespace

ReportFormat parse_report_format(std::string_view name) {
  if (name == "json") return ReportFormat::kJson;
  if (name == "csv") return ReportFormat::kCsv;
  throw Error(ErrorCode::kInvalidConfig,
              "unknown report format '" + std::string(name) + "' (json|csv)");
}

std::string reports_to_json(std::span<const EvalReport> reports, bool include_timings) {
  ojson j;
  j["schema"] = kReportSchema;
  ojson list = ojson::array();
  for (const auto& r : reports) list.push_back(report_json(r, include_timings));
  j["reports"] = std::move(list);
  return j.dump(2) + "\n";
}

std::vector<EvalReport> reports_from_json(std::string_view json) {
  try {
    const auto j = nlohmann::json::parse(json);
    if (j.at("schema").get<std::string>() != kReportSchema) {
      throw Error(ErrorCode::kInvalidConfig,
                  "unsupported report schema '" + j.at("schema").get<std::string>() + "'");
    }
    std::vector<EvalReport> out;
    for (const auto& r : j.at("reports")) out.push_back(report_from(r));
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("report: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw Error(ErrorCode::kInvalidConfig, "report: acc_at keys must be integers");
  }
}

std::string reports_to_csv(std::span<const EvalReport> reports) {
  // Accuracy columns are the union of every report's m values.
  std::map<int, bool> ms;
  for (const auto& r : reports) {
    for (const auto& [m, v] : r.acc_at) ms[m] = true;
  }
  std::string out = kCsvHeader;
  for (const auto& [m, _] : ms) out += ",acc_at_" + std::to_string(m);
  out += '\n';

  const auto flag = [](bool b) { return b ? "true" : "false"; };
  for (const auto& r : reports) {
    const auto& c = r.config;
    out += csv_field(r.dataset) + ',' + csv_field(r.index_mode) + ',' +
           std::to_string(c.k) + ',' + shortest(c.tau_tt) + ',' + shortest(c.tau_it) +
           ',' + shortest(c.alpha) + ',' + shortest(c.beta) + ',' +
           flag(c.use_temperature_tt) + ',' + flag(c.use_temperature_it) + ',' +
           flag(c.renormalize_output) + ',' + std::to_string(r.n_queries);
    for (const auto& [m, _] : ms) {
      const auto it = r.acc_at.find(m);
      out += ',';
      if (it != r.acc_at.end()) out += shortest(it->second);
    }
    out += '\n';
  }
  return out;
}

void emit_report(std::span<const EvalReport> reports, ReportFormat format,
                 const std::filesystem::path& path) {
  if (reports.empty()) throw Error(ErrorCode::kInvalidConfig, "no reports to emit");
  const std::string text =
      format == ReportFormat::kJson ? reports_to_json(reports) : reports_to_csv(reports);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write '" + path.string() + "'");
  out << text;
  out.flush();
  if (!out) throw Error(ErrorCode::kIoError, "write failed for '" + path.string() + "'");
}

}  // namespace retroclass
