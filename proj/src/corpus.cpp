#include "subjtag/corpus.hpp"

#include <algorithm>
#include <unordered_set>

#include <json.hpp>

#include "subjtag/errors.hpp"
#include "subjtag/util.hpp"

namespace subjtag {

using ordered_json = nlohmann::ordered_json;

std::string to_string(Language lang) {
    switch (lang) {
        case Language::En: return "en";
        case Language::De: return "de";
    }
    fail(ErrorKind::Internal, "bad language value");
}

std::string to_string(RecordType type) {
    switch (type) {
        case RecordType::Article: return "Article";
        case RecordType::Book: return "Book";
        case RecordType::Conference: return "Conference";
        case RecordType::Report: return "Report";
        case RecordType::Thesis: return "Thesis";
    }
    fail(ErrorKind::Internal, "bad record type value");
}

std::string to_string(RepresentationMode mode) {
    switch (mode) {
        case RepresentationMode::TitleOnly: return "title";
        case RepresentationMode::Contextual: return "contextual";
        case RepresentationMode::Hierarchical: return "hierarchical";
    }
    fail(ErrorKind::Internal, "bad representation mode value");
}

Language parse_language(const std::string& tag) {
    if (tag == "en") return Language::En;
    if (tag == "de") return Language::De;
    fail(ErrorKind::Parse, "unknown language tag: \"" + tag + "\"");
}

RecordType parse_record_type(const std::string& name) {
    if (name == "Article") return RecordType::Article;
    if (name == "Book") return RecordType::Book;
    if (name == "Conference") return RecordType::Conference;
    if (name == "Report") return RecordType::Report;
    if (name == "Thesis") return RecordType::Thesis;
    fail(ErrorKind::Parse, "unknown record type: \"" + name + "\"");
}

RepresentationMode parse_mode(const std::string& name) {
    if (name == "title") return RepresentationMode::TitleOnly;
    if (name == "contextual") return RepresentationMode::Contextual;
    if (name == "hierarchical") return RepresentationMode::Hierarchical;
    fail(ErrorKind::Config, "unknown representation mode: \"" + name + "\"");
}

bool Record::has_gold(const std::string& subject_id) const {
    return std::find(gold_subjects.begin(), gold_subjects.end(), subject_id) != gold_subjects.end();
}

namespace {

ordered_json parse_json_line(const std::string& line, const std::filesystem::path& path,
                             std::size_t line_no) {
    if (trim(line).empty()) {
        fail(ErrorKind::Parse, path.string() + ":" + std::to_string(line_no) + ": empty line");
    }
    try {
        ordered_json j = ordered_json::parse(line);
        if (!j.is_object()) {
            fail(ErrorKind::Parse,
                 path.string() + ":" + std::to_string(line_no) + ": expected a JSON object");
        }
        return j;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Parse,
             path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
}

std::string require_string(const ordered_json& j, const char* key,
                           const std::filesystem::path& path, std::size_t line_no) {
    if (!j.contains(key) || !j[key].is_string()) {
        fail(ErrorKind::Parse, path.string() + ":" + std::to_string(line_no) +
                                   ": missing or non-string field \"" + key + "\"");
    }
    return j[key].get<std::string>();
}

std::optional<std::string> optional_string(const ordered_json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    if (!j[key].is_string()) return std::nullopt;
    std::string v = j[key].get<std::string>();
    if (trim(v).empty()) return std::nullopt;
    return trim(v);
}

}  // namespace

Taxonomy::Taxonomy(std::vector<Subject> subjects, std::string source_name)
    : subjects_(std::move(subjects)), source_name_(std::move(source_name)) {
    if (subjects_.empty()) fail(ErrorKind::Parse, "empty taxonomy");
    std::sort(subjects_.begin(), subjects_.end(),
              [](const Subject& a, const Subject& b) { return a.id < b.id; });
    by_id_.reserve(subjects_.size());
    for (std::size_t i = 0; i < subjects_.size(); ++i) {
        const Subject& s = subjects_[i];
        if (s.id.empty()) fail(ErrorKind::Parse, "subject with empty id");
        if (trim(s.pref_label).empty()) {
            fail(ErrorKind::Parse, "subject \"" + s.id + "\" has empty pref_label");
        }
        if (!by_id_.emplace(s.id, i).second) {
            fail(ErrorKind::Parse, "duplicate subject id: \"" + s.id + "\"");
        }
    }
}

Taxonomy Taxonomy::parse_file(const std::filesystem::path& path) {
    std::vector<std::string> lines = read_lines(path);
    std::vector<Subject> subjects;
    subjects.reserve(lines.size());
    for (std::size_t i = 0; i < lines.size(); ++i) {
        ordered_json j = parse_json_line(lines[i], path, i + 1);
        Subject s;
        s.id = trim(require_string(j, "id", path, i + 1));
        s.pref_label = trim(require_string(j, "pref_label", path, i + 1));
        if (s.id.empty() || s.pref_label.empty()) {
            fail(ErrorKind::Parse, path.string() + ":" + std::to_string(i + 1) +
                                       ": id and pref_label must be non-empty");
        }
        if (j.contains("alt_labels") && j["alt_labels"].is_array()) {
            for (const auto& alt : j["alt_labels"]) {
                if (alt.is_string()) s.alt_labels.push_back(alt.get<std::string>());
            }
        }
        s.category = optional_string(j, "category");
        subjects.push_back(std::move(s));
    }
    return Taxonomy(std::move(subjects), path.filename().string());
}

void Taxonomy::write_file(const std::filesystem::path& path) const {
    std::string out;
    for (const Subject& s : subjects_) {
        ordered_json j;
        j["id"] = s.id;
        j["pref_label"] = s.pref_label;
        j["alt_labels"] = s.alt_labels;
        j["category"] = s.category ? ordered_json(*s.category) : ordered_json(nullptr);
        out += j.dump();
        out += '\n';
    }
    subjtag::write_file(path, out);
}

const Subject* Taxonomy::find(const std::string& id) const {
    auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : &subjects_[it->second];
}

RecordCollection::RecordCollection(std::vector<Record> records) : records_(std::move(records)) {
    by_id_.reserve(records_.size());
    for (std::size_t i = 0; i < records_.size(); ++i) {
        const Record& r = records_[i];
        if (r.id.empty()) fail(ErrorKind::Parse, "record with empty id");
        if (trim(r.title).empty()) fail(ErrorKind::Parse, "record \"" + r.id + "\" has empty title");
        if (!by_id_.emplace(r.id, i).second) {
            fail(ErrorKind::Parse, "duplicate record id: \"" + r.id + "\"");
        }
    }
    // Parent links are checked after the full load so forward references work.
    for (const Record& r : records_) {
        if (!r.parent_id) continue;
        const Record* cur = &r;
        std::unordered_set<const Record*> seen;
        while (cur->parent_id) {
            auto it = by_id_.find(*cur->parent_id);
            if (it == by_id_.end()) {
                fail(ErrorKind::Parse, "record \"" + r.id + "\": dangling parent_id \"" +
                                           *cur->parent_id + "\"");
            }
            cur = &records_[it->second];
            if (!seen.insert(cur).second) {
                fail(ErrorKind::Parse, "record \"" + r.id + "\": parent chain contains a cycle");
            }
        }
    }
}

RecordCollection RecordCollection::parse_file(const std::filesystem::path& path) {
    std::vector<std::string> lines = read_lines(path);
    std::vector<Record> records;
    records.reserve(lines.size());
    for (std::size_t i = 0; i < lines.size(); ++i) {
        ordered_json j = parse_json_line(lines[i], path, i + 1);
        Record r;
        r.id = trim(require_string(j, "id", path, i + 1));
        r.title = trim(require_string(j, "title", path, i + 1));
        if (r.title.empty()) {
            fail(ErrorKind::Parse, path.string() + ":" + std::to_string(i + 1) + ": empty title");
        }
        r.abstract = optional_string(j, "abstract");
        r.language = parse_language(require_string(j, "language", path, i + 1));
        r.record_type = parse_record_type(require_string(j, "record_type", path, i + 1));
        r.parent_id = optional_string(j, "parent_id");
        if (j.contains("gold_subjects") && j["gold_subjects"].is_array()) {
            std::unordered_set<std::string> seen;
            for (const auto& g : j["gold_subjects"]) {
                if (!g.is_string()) {
                    fail(ErrorKind::Parse, path.string() + ":" + std::to_string(i + 1) +
                                               ": gold_subjects must hold strings");
                }
                std::string id = g.get<std::string>();
                if (seen.insert(id).second) r.gold_subjects.push_back(std::move(id));
            }
        }
        records.push_back(std::move(r));
    }
    return RecordCollection(std::move(records));
}

void RecordCollection::write_file(const std::filesystem::path& path) const {
    std::string out;
    for (const Record& r : records_) {
        ordered_json j;
        j["id"] = r.id;
        j["title"] = r.title;
        j["abstract"] = r.abstract ? ordered_json(*r.abstract) : ordered_json(nullptr);
        j["language"] = to_string(r.language);
        j["record_type"] = to_string(r.record_type);
        j["parent_id"] = r.parent_id ? ordered_json(*r.parent_id) : ordered_json(nullptr);
        j["gold_subjects"] = r.gold_subjects;
        out += j.dump();
        out += '\n';
    }
    subjtag::write_file(path, out);
}

const Record* RecordCollection::find(const std::string& id) const {
    auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : &records_[it->second];
}

void RecordCollection::validate_against(const Taxonomy& taxonomy) const {
    for (const Record& r : records_) {
        for (const std::string& sid : r.gold_subjects) {
            if (taxonomy.find(sid) == nullptr) {
                fail(ErrorKind::Parse,
                     "record \"" + r.id + "\": gold subject \"" + sid + "\" not in taxonomy");
            }
        }
    }
}

std::string render_text(const Record& record, RepresentationMode mode,
                        const RecordCollection& collection) {
    std::string base = trim(record.title);
    if (mode != RepresentationMode::TitleOnly && record.abstract) {
        base += '\n';
        base += trim(*record.abstract);
    }
    if (mode != RepresentationMode::Hierarchical) return base;

    // Ancestor titles, outermost first. Cycles are rejected at load; this is
    // a defensive re-check.
    std::vector<const Record*> ancestors;
    const Record* cur = &record;
    while (cur->parent_id) {
        const Record* parent = collection.find(*cur->parent_id);
        if (parent == nullptr) {
            fail(ErrorKind::Parse, "record \"" + record.id + "\": dangling parent_id \"" +
                                       *cur->parent_id + "\"");
        }
        if (std::find(ancestors.begin(), ancestors.end(), parent) != ancestors.end()) {
            fail(ErrorKind::Parse, "record \"" + record.id + "\": parent chain contains a cycle");
        }
        ancestors.push_back(parent);
        cur = parent;
    }
    std::string prefix;
    for (auto it = ancestors.rbegin(); it != ancestors.rend(); ++it) {
        prefix += trim((*it)->title);
        prefix += " > ";
    }
    return prefix + base;
}

std::string subject_text(const Subject& subject) { return subject.pref_label; }

std::string Stratum::label() const {
    return to_string(language) + "/" + to_string(record_type);
}

std::map<Stratum, std::vector<const Record*>> stratify(const RecordCollection& collection) {
    std::map<Stratum, std::vector<const Record*>> buckets;
    for (const Record& r : collection.records()) {
        buckets[Stratum{r.language, r.record_type}].push_back(&r);
    }
    return buckets;
}

}  // namespace subjtag
