#include "visaw/metrics.hpp"

#include <ctime>

#include <json.hpp>

#include "visaw/errors.hpp"

namespace visaw {

MetricsWriter::MetricsWriter(const std::string& path, const std::string& stage,
                             unsigned long long seed)
    : out_(path, std::ios::trunc), stage_(stage), seed_(seed) {
  if (!out_) fail(ErrorKind::Io, "metrics: cannot write " + path);
}

void MetricsWriter::record(const std::string& metric, double value, long long epoch) {
  nlohmann::json row;
  row["stage"] = stage_;
  row["epoch"] = epoch;
  row["metric"] = metric;
  row["value"] = value;
  row["seed"] = seed_;
  row["ts"] = static_cast<long long>(std::time(nullptr));
  out_ << row.dump() << '\n';
  out_.flush();
}

}  // namespace visaw
