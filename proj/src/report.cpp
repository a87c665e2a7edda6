#include "nob/report.hpp"

#include <algorithm>
#include <charconv>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <limits>

#include "nob/errors.hpp"

namespace nob::report {

namespace {

std::string fixed2(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string full(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

}  // namespace

std::string emit_md(const std::vector<MetricsRecord>& records) {
    if (records.empty()) throw ConfigError("emit_md: no records");
    auto best = [&](auto getter) {
        double lo = std::numeric_limits<double>::infinity();
        for (const auto& r : records) lo = std::min(lo, static_cast<double>(getter(r)));
        return lo;
    };
    const double best_rel = best([](const MetricsRecord& r) { return r.rel_l2_pct; });
    const double best_mae = best([](const MetricsRecord& r) { return r.mae; });
    const double best_sec = best([](const MetricsRecord& r) { return r.sec_per_epoch; });
    const double best_par = best([](const MetricsRecord& r) { return r.params; });
    std::string out = "| Model | Dataset | RelL2% | MAE | s/epoch | Params |\n";
    out += "| --- | --- | --- | --- | --- | --- |\n";
    auto cell = [](const std::string& text, bool bold) {
        return bold ? "**" + text + "**" : text;
    };
    for (const auto& r : records) {
        out += "| " + r.model + " | " + r.dataset + " | ";
        out += cell(fixed2(r.rel_l2_pct), r.rel_l2_pct == best_rel) + " | ";
        out += cell(fixed2(r.mae), r.mae == best_mae) + " | ";
        out += cell(fixed2(r.sec_per_epoch), r.sec_per_epoch == best_sec) + " | ";
        out += cell(std::to_string(r.params), static_cast<double>(r.params) == best_par) + " |\n";
    }
    return out;
}

std::string emit_csv(const std::vector<MetricsRecord>& records) {
    if (records.empty()) throw ConfigError("emit_csv: no records");
    std::string out = "model,dataset,rel_l2_pct,mae,sec_per_epoch,params\r\n";
    for (const auto& r : records) {
        out += csv_field(r.model) + ',' + csv_field(r.dataset) + ',';
        out += full(r.rel_l2_pct) + ',' + full(r.mae) + ',' + full(r.sec_per_epoch) + ',';
        out += std::to_string(r.params) + "\r\n";
    }
    return out;
}

std::vector<MetricsRecord> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false, had_any = false;
    std::size_t i = 0;
    const std::size_t n = text.size();
    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
        had_any = true;
    };
    auto end_row = [&] {
        if (had_any || !row.empty()) {
            end_field();
            rows.push_back(std::move(row));
            row.clear();
            had_any = false;
        }
    };
    while (i < n) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < n && text[i + 1] == '"') {
                    field += '"';
                    i += 2;
                } else {
                    quoted = false;
                    ++i;
                }
            } else {
                field += c;
                ++i;
            }
        } else if (c == '"' && field.empty()) {
            quoted = true;
            had_any = true;
            ++i;
        } else if (c == ',') {
            end_field();
            ++i;
        } else if (c == '\r' && i + 1 < n && text[i + 1] == '\n') {
            end_row();
            i += 2;
        } else if (c == '\n') {
            end_row();
            ++i;
        } else {
            field += c;
            had_any = true;
            ++i;
        }
    }
    if (quoted) throw FormatError("csv: unterminated quoted field", static_cast<long long>(n));
    end_row();
    if (rows.empty()) throw FormatError("csv: empty input");
    std::vector<MetricsRecord> records;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() != 6)
            throw FormatError("csv: row " + std::to_string(r) + " has " + std::to_string(rows[r].size()) +
                              " fields, expected 6");
        MetricsRecord m;
        m.model = rows[r][0];
        m.dataset = rows[r][1];
        try {
            m.rel_l2_pct = std::stod(rows[r][2]);
            m.mae = std::stod(rows[r][3]);
            m.sec_per_epoch = std::stod(rows[r][4]);
            m.params = std::stoll(rows[r][5]);
        } catch (const std::exception&) {
            throw FormatError("csv: row " + std::to_string(r) + " has a malformed numeric field");
        }
        records.push_back(std::move(m));
    }
    return records;
}

}  // namespace nob::report
