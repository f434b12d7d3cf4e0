#include "lmstyle/metrics.h"

#include <cmath>
#include <filesystem>

#include <json.hpp>

#include "lmstyle/errors.h"

namespace lmstyle {

std::string metric_to_json(const MetricRecord& r) {
  nlohmann::ordered_json j;
  j["run_id"] = r.run_id;
  j["epoch"] = r.epoch;
  j["step"] = r.step;
  j["split"] = r.split;
  j["name"] = r.name;
  j["value"] = r.value;
  return j.dump();
}

MetricRecord metric_from_json(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ContractViolation(std::string("bad metrics line: ") + e.what());
  }
  MetricRecord r;
  r.run_id = j.at("run_id").get<std::string>();
  r.epoch = j.at("epoch").get<int>();
  r.step = j.at("step").get<int64_t>();
  r.split = j.at("split").get<std::string>();
  r.name = j.at("name").get<std::string>();
  // Non-finite values are written as null.
  r.value = j.at("value").is_null() ? std::nan("") : j.at("value").get<double>();
  return r;
}

MetricsWriter::MetricsWriter(const std::string& path, std::string run_id, bool append) : run_id_(std::move(run_id)) {
  if (path.empty()) return;
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  out_.open(path, append ? std::ios::app : std::ios::trunc);
  LMS_REQUIRE(out_.good(), "cannot open metrics file " + path);
}

void MetricsWriter::write(int epoch, int64_t step, const std::string& split, const std::string& name, double value) {
  MetricRecord r{run_id_, epoch, step, split, name, value};
  if (out_.is_open()) {
    out_ << metric_to_json(r) << '\n';
    out_.flush();
  }
  records_.push_back(std::move(r));
}

std::vector<MetricRecord> read_metrics(const std::string& path) {
  std::ifstream in(path);
  LMS_REQUIRE(in.good(), "cannot open metrics file " + path);
  std::vector<MetricRecord> out;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(metric_from_json(line));
  return out;
}

void truncate_metrics(const std::string& path, int epoch_limit) {
  if (!std::filesystem::exists(path)) return;
  std::vector<std::string> kept;
  {
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      if (metric_from_json(line).epoch < epoch_limit) kept.push_back(line);
    }
  }
  std::ofstream out(path, std::ios::trunc);
  for (const std::string& l : kept) out << l << '\n';
}

}  // namespace lmstyle
