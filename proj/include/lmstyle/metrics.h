#ifndef LMSTYLE_METRICS_H_
#define LMSTYLE_METRICS_H_

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace lmstyle {

struct MetricRecord {
  std::string run_id;
  int epoch = 0;
  int64_t step = 0;
  std::string split;
  std::string name;
  double value = 0.0;
};

std::string metric_to_json(const MetricRecord& r);
MetricRecord metric_from_json(const std::string& line);

// Appends JSON-lines records. An empty path discards records but still
// keeps them in memory.
class MetricsWriter {
 public:
  MetricsWriter() = default;
  MetricsWriter(const std::string& path, std::string run_id, bool append);

  void write(int epoch, int64_t step, const std::string& split, const std::string& name, double value);
  const std::vector<MetricRecord>& records() const { return records_; }
  const std::string& run_id() const { return run_id_; }

 private:
  std::ofstream out_;
  std::string run_id_ = "run";
  std::vector<MetricRecord> records_;
};

std::vector<MetricRecord> read_metrics(const std::string& path);

// Rewrites path keeping only records with epoch < epoch_limit.
void truncate_metrics(const std::string& path, int epoch_limit);

}  // namespace lmstyle

#endif  // LMSTYLE_METRICS_H_
