#pragma once

#include <compare>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace subjtag {

enum class Language { En, De };
enum class RecordType { Article, Book, Conference, Report, Thesis };
enum class RepresentationMode { TitleOnly, Contextual, Hierarchical };

std::string to_string(Language lang);
std::string to_string(RecordType type);
std::string to_string(RepresentationMode mode);

Language parse_language(const std::string& tag);
RecordType parse_record_type(const std::string& name);
// Accepts "title", "contextual", "hierarchical".
RepresentationMode parse_mode(const std::string& name);

/// One controlled-vocabulary entry.
struct Subject {
    std::string id;
    std::string pref_label;
    std::vector<std::string> alt_labels;
    std::optional<std::string> category;
};

/// One bibliographic record.
struct Record {
    std::string id;
    std::string title;
    std::optional<std::string> abstract;
    Language language = Language::En;
    RecordType record_type = RecordType::Article;
    std::optional<std::string> parent_id;
    std::vector<std::string> gold_subjects;  // unique, input order

    bool has_gold(const std::string& subject_id) const;
};

/// Id-keyed subject vocabulary. Subjects are held sorted by id so iteration
/// order is deterministic regardless of input file order.
class Taxonomy {
public:
    Taxonomy() = default;
    Taxonomy(std::vector<Subject> subjects, std::string source_name);

    static Taxonomy parse_file(const std::filesystem::path& path);
    void write_file(const std::filesystem::path& path) const;

    const std::vector<Subject>& subjects() const { return subjects_; }
    const Subject* find(const std::string& id) const;
    std::size_t size() const { return subjects_.size(); }
    const std::string& source_name() const { return source_name_; }

private:
    std::vector<Subject> subjects_;
    std::unordered_map<std::string, std::size_t> by_id_;
    std::string source_name_;
};

/// Record list in file order with id lookup. Construction validates unique
/// ids and that parent links resolve without cycles.
class RecordCollection {
public:
    RecordCollection() = default;
    explicit RecordCollection(std::vector<Record> records);

    static RecordCollection parse_file(const std::filesystem::path& path);
    void write_file(const std::filesystem::path& path) const;

    const std::vector<Record>& records() const { return records_; }
    const Record* find(const std::string& id) const;
    std::size_t size() const { return records_.size(); }

    // Every gold subject id must resolve in the taxonomy.
    void validate_against(const Taxonomy& taxonomy) const;

private:
    std::vector<Record> records_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

/// Text form of a record under the chosen representation mode.
///   TitleOnly:    the title.
///   Contextual:   title + "\n" + abstract (title alone when absent).
///   Hierarchical: ancestor titles outermost-first joined by " > ",
///                 then the contextual text.
std::string render_text(const Record& record, RepresentationMode mode,
                        const RecordCollection& collection);

/// Text form of a subject: the preferred label.
std::string subject_text(const Subject& subject);

struct Stratum {
    Language language;
    RecordType record_type;

    std::string label() const;  // "en/Article"
    auto operator<=>(const Stratum&) const = default;
};

/// Partition of the collection by (language, record_type); key order follows
/// enum declaration order. Only non-empty buckets are present.
std::map<Stratum, std::vector<const Record*>> stratify(const RecordCollection& collection);

}  // namespace subjtag
