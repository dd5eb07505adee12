#pragma once

#include <fstream>
#include <string>

namespace visaw {

// Appends one JSON object per recorded metric. The file is truncated when
// the writer opens it, so each stage run starts a fresh log. `ts` is wall
// clock and is the only field that varies between identical runs.
class MetricsWriter {
 public:
  MetricsWriter(const std::string& path, const std::string& stage, unsigned long long seed);

  // epoch -1 marks a one-shot metric with no training epoch attached.
  void record(const std::string& metric, double value, long long epoch = -1);

 private:
  std::ofstream out_;
  std::string stage_;
  unsigned long long seed_;
};

}  // namespace visaw
