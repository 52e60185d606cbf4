#include "amosl/metrics.hpp"

#include <json.hpp>

#include "amosl/errors.hpp"

namespace amosl {

std::string to_json_line(const MetricsRecord& rec) {
    nlohmann::ordered_json j;
    j["run_id"] = rec.run_id;
    j["fold"] = rec.fold;
    j["epoch"] = rec.epoch;
    j["split"] = rec.split;
    j["l0"] = rec.l0;
    j["ot_distance"] = rec.ot_distance;
    j["reg"] = rec.reg;
    j["lambda"] = rec.lambda;
    j["accuracy"] = rec.accuracy;
    j["wall_ms"] = rec.wall_ms;
    return j.dump();
}

MetricsWriter::MetricsWriter(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw DataError("cannot write metrics file " + path);
}

void MetricsWriter::write(const MetricsRecord& rec) {
    if (!out_.is_open()) return;
    out_ << to_json_line(rec) << "\n";
    if (!out_) throw DataError("metrics write failed");
}

std::string run_id_for(const std::string& canonical_config) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (const unsigned char c : canonical_config) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[h & 0xF];
        h >>= 4;
    }
    return out;
}

}  // namespace amosl
