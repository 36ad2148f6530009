#include "subjtag/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <unordered_set>

#include <json.hpp>

#include "subjtag/errors.hpp"
#include "subjtag/util.hpp"
#include "subjtag/version.hpp"

namespace subjtag {

using ordered_json = nlohmann::ordered_json;

void KGrid::validate() const {
    if (ks.empty()) fail(ErrorKind::Config, "k_grid: must not be empty");
    int prev = 0;
    for (int k : ks) {
        if (k <= prev) fail(ErrorKind::Config, "k_grid: values must be strictly ascending positives");
        prev = k;
    }
}

PrfTriple prf_at_k(const std::vector<std::string>& gold,
                   const std::vector<std::string>& predicted, int k) {
    if (k < 1) fail(ErrorKind::Config, "prf_at_k: k must be >= 1");
    {
        std::unordered_set<std::string> seen;
        for (const std::string& p : predicted) {
            if (!seen.insert(p).second) fail(ErrorKind::Parse, "duplicate prediction id: \"" + p + "\"");
        }
    }
    std::unordered_set<std::string> gold_set(gold.begin(), gold.end());
    std::size_t top = std::min(predicted.size(), static_cast<std::size_t>(k));
    std::size_t hits = 0;
    for (std::size_t i = 0; i < top; ++i) {
        if (gold_set.contains(predicted[i])) ++hits;
    }

    PrfTriple t;
    t.precision = static_cast<double>(hits) / static_cast<double>(k);
    t.recall = gold_set.empty() ? 0.0
                                : static_cast<double>(hits) / static_cast<double>(gold_set.size());
    double pr = t.precision + t.recall;
    t.f1 = pr > 0.0 ? 2.0 * t.precision * t.recall / pr : 0.0;
    return t;
}

namespace {

struct Accumulator {
    double precision_sum = 0.0;
    double recall_sum = 0.0;
    double f1_sum = 0.0;
    std::size_t hits = 0;       // micro numerator
    std::size_t gold_total = 0; // micro recall denominator
    std::size_t n_records = 0;
    std::size_t n_with_gold = 0;

    void add(const PrfTriple& t, std::size_t record_hits, std::size_t gold_size) {
        precision_sum += t.precision;
        ++n_records;
        if (gold_size > 0) {
            recall_sum += t.recall;
            f1_sum += t.f1;
            ++n_with_gold;
        }
        hits += record_hits;
        gold_total += gold_size;
    }

    MetricRow macro_row(const std::string& stratum, int k) const {
        MetricRow row{stratum, k, "macro", 0, 0, 0, n_records, n_with_gold};
        if (n_records > 0) row.precision = precision_sum / static_cast<double>(n_records);
        if (n_with_gold > 0) {
            row.recall = recall_sum / static_cast<double>(n_with_gold);
            row.f1 = f1_sum / static_cast<double>(n_with_gold);
        }
        return row;
    }

    MetricRow micro_row(const std::string& stratum, int k) const {
        MetricRow row{stratum, k, "micro", 0, 0, 0, n_records, n_with_gold};
        if (n_records > 0) {
            row.precision = static_cast<double>(hits) /
                            (static_cast<double>(n_records) * static_cast<double>(k));
        }
        if (gold_total > 0) row.recall = static_cast<double>(hits) / static_cast<double>(gold_total);
        double pr = row.precision + row.recall;
        row.f1 = pr > 0.0 ? 2.0 * row.precision * row.recall / pr : 0.0;
        return row;
    }
};

std::size_t count_hits(const std::vector<std::string>& gold,
                       const std::vector<std::string>& predicted, int k) {
    std::unordered_set<std::string> gold_set(gold.begin(), gold.end());
    std::size_t top = std::min(predicted.size(), static_cast<std::size_t>(k));
    std::size_t hits = 0;
    for (std::size_t i = 0; i < top; ++i) {
        if (gold_set.contains(predicted[i])) ++hits;
    }
    return hits;
}

double quantile_median(const std::vector<std::size_t>& sorted, std::size_t begin, std::size_t end) {
    std::size_t n = end - begin;
    std::size_t mid = begin + n / 2;
    if (n % 2 == 1) return static_cast<double>(sorted[mid]);
    return (static_cast<double>(sorted[mid - 1]) + static_cast<double>(sorted[mid])) / 2.0;
}

SubjectCountRow count_row(const std::string& stratum, std::vector<std::size_t> counts) {
    std::sort(counts.begin(), counts.end());
    SubjectCountRow row;
    row.stratum = stratum;
    row.n_records = counts.size();
    row.min = static_cast<double>(counts.front());
    row.max = static_cast<double>(counts.back());
    row.median = quantile_median(counts, 0, counts.size());
    std::size_t half = counts.size() / 2;
    if (half == 0) {
        // Singleton: both hinges collapse onto the median.
        row.q1 = row.q3 = row.median;
    } else {
        row.q1 = quantile_median(counts, 0, half);
        row.q3 = quantile_median(counts, counts.size() - half, counts.size());
    }
    double sum = 0.0;
    for (std::size_t c : counts) sum += static_cast<double>(c);
    row.mean = sum / static_cast<double>(counts.size());
    return row;
}

}  // namespace

MetricReport evaluate(const RecordCollection& gold_records,
                      const std::map<std::string, std::vector<std::string>>& predictions,
                      const KGrid& grid) {
    grid.validate();
    for (const auto& [record_id, subjects] : predictions) {
        if (gold_records.find(record_id) == nullptr) {
            fail(ErrorKind::Parse, "prediction for unknown record_id: \"" + record_id + "\"");
        }
        (void)subjects;
    }

    static const std::vector<std::string> kEmpty;
    auto predicted_for = [&predictions](const Record& r) -> const std::vector<std::string>& {
        auto it = predictions.find(r.id);
        return it == predictions.end() ? kEmpty : it->second;
    };

    auto strata = stratify(gold_records);

    MetricReport report;
    report.version = kVersion;
    report.k_grid = grid.ks;

    std::vector<std::pair<std::string, const std::vector<const Record*>*>> groups;
    for (const auto& [stratum, members] : strata) groups.emplace_back(stratum.label(), &members);

    std::vector<const Record*> all;
    all.reserve(gold_records.size());
    for (const Record& r : gold_records.records()) all.push_back(&r);
    groups.emplace_back("overall", &all);

    std::vector<MetricRow> macro_rows;
    std::vector<MetricRow> micro_rows;
    for (const auto& [label, members] : groups) {
        for (int k : grid.ks) {
            Accumulator acc;
            for (const Record* r : *members) {
                const auto& predicted = predicted_for(*r);
                PrfTriple t = prf_at_k(r->gold_subjects, predicted, k);
                acc.add(t, count_hits(r->gold_subjects, predicted, k), r->gold_subjects.size());
            }
            macro_rows.push_back(acc.macro_row(label, k));
            micro_rows.push_back(acc.micro_row(label, k));
        }
    }
    report.rows = std::move(macro_rows);
    report.rows.insert(report.rows.end(), micro_rows.begin(), micro_rows.end());
    report.subject_counts = subject_count_stats(gold_records);
    return report;
}

std::vector<SubjectCountRow> subject_count_stats(const RecordCollection& records) {
    std::vector<SubjectCountRow> rows;
    auto strata = stratify(records);
    for (const auto& [stratum, members] : strata) {
        std::vector<std::size_t> counts;
        counts.reserve(members.size());
        for (const Record* r : members) counts.push_back(r->gold_subjects.size());
        rows.push_back(count_row(stratum.label(), std::move(counts)));
    }
    if (records.size() > 0) {
        std::vector<std::size_t> counts;
        counts.reserve(records.size());
        for (const Record& r : records.records()) counts.push_back(r.gold_subjects.size());
        rows.push_back(count_row("overall", std::move(counts)));
    }
    return rows;
}

namespace {

std::string fixed4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

ordered_json row_to_json(const MetricRow& row) {
    ordered_json j;
    j["stratum"] = row.stratum;
    j["k"] = row.k;
    j["averaging"] = row.averaging;
    j["precision"] = row.precision;
    j["recall"] = row.recall;
    j["f1"] = row.f1;
    j["n_records"] = row.n_records;
    j["n_with_gold"] = row.n_with_gold;
    return j;
}

ordered_json count_row_to_json(const SubjectCountRow& row) {
    ordered_json j;
    j["stratum"] = row.stratum;
    j["n_records"] = row.n_records;
    j["min"] = row.min;
    j["q1"] = row.q1;
    j["median"] = row.median;
    j["q3"] = row.q3;
    j["max"] = row.max;
    j["mean"] = row.mean;
    return j;
}

std::string report_json_text(const MetricReport& report) {
    ordered_json meta;
    meta["artifact_version"] = report.version;
    meta["k_grid"] = report.k_grid;
    meta["precision_denominator"] = report.precision_denominator;
    meta["quartile_method"] = report.quartile_method;
    meta["averaging_modes"] = report.averaging_modes;

    ordered_json j;
    j["metadata"] = std::move(meta);
    j["rows"] = ordered_json::array();
    for (const MetricRow& row : report.rows) j["rows"].push_back(row_to_json(row));
    j["subject_counts"] = ordered_json::array();
    for (const SubjectCountRow& row : report.subject_counts) {
        j["subject_counts"].push_back(count_row_to_json(row));
    }
    return j.dump(2) + "\n";
}

// Micro rows keep the pinned six columns; the stratum label carries the flag.
std::string csv_stratum(const MetricRow& row) {
    return row.averaging == "micro" ? row.stratum + ":micro" : row.stratum;
}

std::string report_csv_text(const MetricReport& report) {
    std::string out = "stratum,k,precision,recall,f1,n_records\n";
    for (const MetricRow& row : report.rows) {
        out += csv_field(csv_stratum(row));
        out += ',';
        out += std::to_string(row.k);
        out += ',';
        out += fixed4(row.precision);
        out += ',';
        out += fixed4(row.recall);
        out += ',';
        out += fixed4(row.f1);
        out += ',';
        out += std::to_string(row.n_records);
        out += '\n';
    }
    return out;
}

std::string report_markdown_text(const MetricReport& report) {
    std::string out = "# Evaluation report\n\n";
    out += "k-grid:";
    for (int k : report.k_grid) out += " " + std::to_string(k);
    out += "  \nprecision denominator: " + report.precision_denominator;
    out += "  \nquartile method: " + report.quartile_method;
    out += "  \nversion: " + report.version + "\n";

    auto table = [&out, &report](const std::string& averaging, const std::string& title) {
        out += "\n## " + title + "\n\n";
        out += "| stratum | k | precision | recall | f1 | n_records |\n";
        out += "|---|---|---|---|---|---|\n";
        for (const MetricRow& row : report.rows) {
            if (row.averaging != averaging) continue;
            out += "| " + row.stratum + " | " + std::to_string(row.k) + " | " +
                   fixed4(row.precision) + " | " + fixed4(row.recall) + " | " + fixed4(row.f1) +
                   " | " + std::to_string(row.n_records) + " |\n";
        }
    };
    table("macro", "Macro-averaged metrics");
    table("micro", "Micro-averaged metrics");

    out += "\n## Gold subject counts\n\n";
    out += "| stratum | n_records | min | q1 | median | q3 | max | mean |\n";
    out += "|---|---|---|---|---|---|---|---|\n";
    for (const SubjectCountRow& row : report.subject_counts) {
        out += "| " + row.stratum + " | " + std::to_string(row.n_records) + " | " +
               fixed4(row.min) + " | " + fixed4(row.q1) + " | " + fixed4(row.median) + " | " +
               fixed4(row.q3) + " | " + fixed4(row.max) + " | " + fixed4(row.mean) + " |\n";
    }
    return out;
}

}  // namespace

void emit_report(const MetricReport& report, const std::filesystem::path& path,
                 ReportFormat format) {
    switch (format) {
        case ReportFormat::Json: write_file(path, report_json_text(report)); return;
        case ReportFormat::Csv: write_file(path, report_csv_text(report)); return;
        case ReportFormat::Markdown: write_file(path, report_markdown_text(report)); return;
    }
    fail(ErrorKind::Internal, "bad report format");
}

MetricReport read_report_json(const std::filesystem::path& path) {
    MetricReport report;
    try {
        ordered_json j = ordered_json::parse(read_file(path));
        const auto& meta = j.at("metadata");
        report.version = meta.at("artifact_version").get<std::string>();
        report.k_grid = meta.at("k_grid").get<std::vector<int>>();
        report.precision_denominator = meta.at("precision_denominator").get<std::string>();
        report.quartile_method = meta.at("quartile_method").get<std::string>();
        report.averaging_modes = meta.at("averaging_modes").get<std::vector<std::string>>();
        for (const auto& rj : j.at("rows")) {
            MetricRow row;
            row.stratum = rj.at("stratum").get<std::string>();
            row.k = rj.at("k").get<int>();
            row.averaging = rj.at("averaging").get<std::string>();
            row.precision = rj.at("precision").get<double>();
            row.recall = rj.at("recall").get<double>();
            row.f1 = rj.at("f1").get<double>();
            row.n_records = rj.at("n_records").get<std::size_t>();
            row.n_with_gold = rj.at("n_with_gold").get<std::size_t>();
            report.rows.push_back(std::move(row));
        }
        for (const auto& cj : j.at("subject_counts")) {
            SubjectCountRow row;
            row.stratum = cj.at("stratum").get<std::string>();
            row.n_records = cj.at("n_records").get<std::size_t>();
            row.min = cj.at("min").get<double>();
            row.q1 = cj.at("q1").get<double>();
            row.median = cj.at("median").get<double>();
            row.q3 = cj.at("q3").get<double>();
            row.max = cj.at("max").get<double>();
            row.mean = cj.at("mean").get<double>();
            report.subject_counts.push_back(std::move(row));
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Parse, path.string() + ": bad report: " + e.what());
    }
    return report;
}

}  // namespace subjtag
