#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "subjtag/corpus.hpp"

namespace subjtag {

struct KGrid {
    std::vector<int> ks = {5, 10, 15, 20, 25, 30};

    void validate() const;  // strictly ascending positives
};

struct PrfTriple {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Standard @k metrics over the first min(k, |predicted|) predictions:
/// precision = hits / k (the denominator is k even when fewer predictions
/// exist), recall = hits / |gold| (0 when gold is empty), f1 = harmonic mean
/// or 0 when p + r == 0. Duplicate predictions are rejected.
PrfTriple prf_at_k(const std::vector<std::string>& gold,
                   const std::vector<std::string>& predicted, int k);

struct MetricRow {
    std::string stratum;    // "en/Article" or "overall"
    int k = 0;
    std::string averaging;  // "macro" | "micro"
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t n_records = 0;
    std::size_t n_with_gold = 0;  // recall/f1 macro means average over these
};

struct SubjectCountRow {
    std::string stratum;
    std::size_t n_records = 0;
    double min = 0, q1 = 0, median = 0, q3 = 0, max = 0, mean = 0;
};

struct MetricReport {
    std::string version;
    std::vector<int> k_grid;
    std::string precision_denominator = "k";
    std::string quartile_method = "median-of-halves";
    std::vector<std::string> averaging_modes = {"macro", "micro"};
    std::vector<MetricRow> rows;  // macro rows then micro rows, stratum then k
    std::vector<SubjectCountRow> subject_counts;
};

/// Macro- and micro-averaged P/R/F1 per stratum and overall, per k. Records
/// without a prediction are scored as empty predictions; empty-gold records
/// are excluded from recall/f1 macro means (but counted). Prediction ids
/// must name known records.
MetricReport evaluate(const RecordCollection& gold_records,
                      const std::map<std::string, std::vector<std::string>>& predictions,
                      const KGrid& grid);

/// Gold-subject count distribution per stratum plus overall; quartiles use
/// the median-of-halves convention (halves exclude the median for odd n).
std::vector<SubjectCountRow> subject_count_stats(const RecordCollection& records);

enum class ReportFormat { Json, Csv, Markdown };

void emit_report(const MetricReport& report, const std::filesystem::path& path,
                 ReportFormat format);
MetricReport read_report_json(const std::filesystem::path& path);

}  // namespace subjtag
