#pragma once

#include <cstdint>
#include <fstream>
#include <string>

namespace amosl {

struct MetricsRecord {
    std::string run_id;
    std::size_t fold = 0;
    std::size_t epoch = 0;
    std::string split;  // "train" | "test"
    double l0 = 0.0;
    double ot_distance = 0.0;
    double reg = 0.0;
    double lambda = 0.0;
    double accuracy = 0.0;
    std::int64_t wall_ms = 0;
};

/// One JSON object per line (ndjson); field order is fixed so identical runs
/// produce byte-identical streams.
std::string to_json_line(const MetricsRecord& rec);

class MetricsWriter {
public:
    MetricsWriter() = default;  // disabled writer: write() is a no-op
    explicit MetricsWriter(const std::string& path);

    void write(const MetricsRecord& rec);
    bool enabled() const { return out_.is_open(); }

private:
    std::ofstream out_;
};

/// Deterministic run id: FNV-1a hash of the canonical config text, hex-coded.
std::string run_id_for(const std::string& canonical_config);

}  // namespace amosl
