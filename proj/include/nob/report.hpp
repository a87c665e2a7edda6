#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace nob::report {

struct MetricsRecord {
    std::string model;
    std::string dataset;
    double rel_l2_pct = 0.0;
    double mae = 0.0;
    double sec_per_epoch = 0.0;
    std::int64_t params = 0;
};

// Markdown table with errors to two decimals; the best (lowest) value in
// each numeric column is bold.
std::string emit_md(const std::vector<MetricsRecord>& records);

// RFC-4180 CSV with a header row.
std::string emit_csv(const std::vector<MetricsRecord>& records);
std::vector<MetricsRecord> parse_csv(const std::string& text);

}  // namespace nob::report
