#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "pa/complexity.hpp"

namespace pa::complexity {

using nlohmann::ordered_json;

ReportFormat parse_format(std::string_view name) {
  if (name == "json") return ReportFormat::Json;
  if (name == "csv") return ReportFormat::Csv;
  if (name == "text" || name == "table") return ReportFormat::Text;
  throw std::invalid_argument("unknown report format '" + std::string(name) + "'; known: json, csv, text");
}

namespace {

ordered_json to_json(const ComplexityReport& r) {
  ordered_json j;
  j["architecture"] = r.architecture;
  j["scheme"] = to_string(r.spec.scheme);
  j["M"] = r.spec.weight_bases;
  j["N"] = r.spec.activation_bases;
  j["first_last_real"] = r.spec.first_last_real;
  j["downsample_binarized"] = r.spec.binarizes_downsample();
  j["memory_bits"] = r.memory_bits;
  j["flops"] = r.flops;
  j["comparisons"] = r.comparisons;
  j["full_precision_memory_bits"] = r.full_precision_memory_bits;
  j["full_precision_flops"] = r.full_precision_flops;
  j["memory_saving"] = r.memory_saving;
  j["speedup"] = r.speedup;
  ordered_json layers = ordered_json::array();
  for (const auto& l : r.layers) {
    ordered_json e;
    e["name"] = l.name;
    e["binarized"] = l.binarized;
    e["memory_bits"] = l.memory_bits;
    e["flops"] = l.flops;
    e["real_multiplications"] = l.real_multiplications;
    e["comparisons"] = l.comparisons;
    e["bitwise_operations"] = l.bitwise_operations;
    layers.push_back(std::move(e));
  }
  j["layers"] = std::move(layers);
  return j;
}

void csv_rows(std::ostringstream& out, const ComplexityReport& r) {
  out << std::setprecision(17);
  for (const auto& l : r.layers) {
    out << r.architecture << ',' << to_string(r.spec.scheme) << ',' << l.name << ','
        << (l.binarized ? 1 : 0) << ',' << l.memory_bits << ',' << l.flops << ','
        << l.real_multiplications << ',' << l.comparisons << ',' << l.bitwise_operations << '\n';
  }
  out << r.architecture << ',' << to_string(r.spec.scheme) << ",TOTAL,," << r.memory_bits << ','
      << r.flops << ",," << r.comparisons << ",\n";
}

std::string scheme_label(const ComplexityReport& r) {
  std::string label = to_string(r.spec.scheme);
  if (r.spec.scheme == Scheme::MultiBinaryPA || r.spec.scheme == Scheme::MultiBinaryABC) {
    label += " M=" + std::to_string(r.spec.weight_bases) + " N=" + std::to_string(r.spec.activation_bases);
  }
  return label;
}

void text_summary_row(std::ostringstream& out, const ComplexityReport& r) {
  out << std::left << std::setw(10) << r.architecture << std::setw(22) << scheme_label(r) << std::right
      << std::fixed << std::setprecision(2) << std::setw(12) << r.memory_bits / 1e6 << std::scientific
      << std::setprecision(3) << std::setw(13) << r.flops << std::fixed << std::setprecision(2)
      << std::setw(9) << r.memory_saving << std::setw(9) << r.speedup << '\n';
}

void text_summary_header(std::ostringstream& out) {
  out << std::left << std::setw(10) << "arch" << std::setw(22) << "scheme" << std::right << std::setw(12)
      << "Mbit" << std::setw(13) << "Flops" << std::setw(9) << "saving" << std::setw(9) << "speedup" << '\n';
}

}  // namespace

std::string emit_report(const ComplexityReport& report, ReportFormat format) {
  std::ostringstream out;
  switch (format) {
    case ReportFormat::Json:
      out << to_json(report).dump(2) << '\n';
      break;
    case ReportFormat::Csv:
      out << kCsvHeader << '\n';
      csv_rows(out, report);
      break;
    case ReportFormat::Text:
      out << std::left << std::setw(28) << "layer" << std::setw(5) << "bin" << std::right << std::setw(14)
          << "memory_bits" << std::setw(14) << "flops" << '\n';
      for (const auto& l : report.layers) {
        out << std::left << std::setw(28) << l.name << std::setw(5) << (l.binarized ? "yes" : "no")
            << std::right << std::scientific << std::setprecision(4) << std::setw(14) << l.memory_bits
            << std::setw(14) << l.flops << '\n';
      }
      out << '\n';
      text_summary_header(out);
      text_summary_row(out, report);
      break;
  }
  return out.str();
}

std::string emit_comparison(const std::vector<ComplexityReport>& reports, ReportFormat format) {
  std::ostringstream out;
  switch (format) {
    case ReportFormat::Json: {
      ordered_json arr = ordered_json::array();
      for (const auto& r : reports) arr.push_back(to_json(r));
      out << arr.dump(2) << '\n';
      break;
    }
    case ReportFormat::Csv:
      out << kCsvHeader << '\n';
      for (const auto& r : reports) csv_rows(out, r);
      break;
    case ReportFormat::Text:
      text_summary_header(out);
      for (const auto& r : reports) text_summary_row(out, r);
      break;
  }
  return out.str();
}

ComplexityReport parse_json_report(const std::string& text) {
  const auto j = ordered_json::parse(text);
  ComplexityReport r;
  r.architecture = j.at("architecture").get<std::string>();
  r.spec.scheme = parse_scheme(j.at("scheme").get<std::string>());
  r.spec.weight_bases = j.at("M").get<std::size_t>();
  r.spec.activation_bases = j.at("N").get<std::size_t>();
  r.spec.first_last_real = j.at("first_last_real").get<bool>();
  r.spec.downsample_binarized = j.at("downsample_binarized").get<bool>();
  r.memory_bits = j.at("memory_bits").get<double>();
  r.flops = j.at("flops").get<double>();
  r.comparisons = j.at("comparisons").get<double>();
  r.full_precision_memory_bits = j.at("full_precision_memory_bits").get<double>();
  r.full_precision_flops = j.at("full_precision_flops").get<double>();
  r.memory_saving = j.at("memory_saving").get<double>();
  r.speedup = j.at("speedup").get<double>();
  for (const auto& e : j.at("layers")) {
    LayerCost l;
    l.name = e.at("name").get<std::string>();
    l.binarized = e.at("binarized").get<bool>();
    l.memory_bits = e.at("memory_bits").get<double>();
    l.flops = e.at("flops").get<double>();
    l.real_multiplications = e.at("real_multiplications").get<double>();
    l.comparisons = e.at("comparisons").get<double>();
    l.bitwise_operations = e.at("bitwise_operations").get<double>();
    r.layers.push_back(std::move(l));
  }
  return r;
}

}  // namespace pa::complexity
