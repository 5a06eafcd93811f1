#include "trialscreen/corpus.hpp"

#include <expat.h>

#include <algorithm>
#include <array>
#include <memory>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "parallel.hpp"
#include "trialscreen/errors.hpp"
#include "trialscreen/rng.hpp"
#include "trialscreen/text.hpp"

namespace trialscreen {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

bool is_separator_line(std::string_view line) {
    line = trim(line);
    return line.size() >= kSeparatorMinStars && line.find_first_not_of('*') == std::string_view::npos;
}

std::optional<std::string> leading_record_date(std::string_view segment) {
    constexpr std::string_view kPrefix = "Record date:";
    std::size_t pos = 0;
    while (pos < segment.size()) {
        const auto eol = segment.find('\n', pos);
        const auto line = segment.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
        if (!trim(line).empty()) {
            const auto t = trim(line);
            if (t.starts_with(kPrefix)) return std::string(trim(t.substr(kPrefix.size())));
            return std::nullopt;
        }
        if (eol == std::string_view::npos) break;
        pos = eol + 1;
    }
    return std::nullopt;
}

struct XmlState {
    XML_Parser parser = nullptr;
    std::vector<std::string> stack;
    std::string text;
    int text_elements = 0;
    bool in_text = false;
    bool saw_tags = false;
    std::array<std::optional<EligibilityLabel>, kCriterionCount> labels;
    std::optional<std::string> schema_error;

    void fail(std::string message) {
        if (!schema_error) schema_error = std::move(message);
        XML_StopParser(parser, XML_FALSE);
    }
};

void XMLCALL on_start(void* user, const XML_Char* name, const XML_Char** attrs) {
    auto& st = *static_cast<XmlState*>(user);
    const std::string_view element = name;
    const bool parent_is_tags = !st.stack.empty() && st.stack.back() == "TAGS";
    st.stack.emplace_back(element);

    if (element == "TEXT" && st.stack.size() == 2) {
        if (++st.text_elements > 1) return st.fail("more than one TEXT element");
        st.in_text = true;
    } else if (element == "TAGS" && st.stack.size() == 2) {
        st.saw_tags = true;
    } else if (parent_is_tags) {
        const auto id = criterion_from_string(element);
        if (!id) return st.fail("unknown criterion tag " + std::string(element));
        const char* met = nullptr;
        for (auto a = attrs; *a; a += 2) {
            if (std::string_view(a[0]) == "met") met = a[1];
        }
        if (!met) return st.fail("criterion " + std::string(element) + " has no met attribute");
        const auto label = label_from_string(met);
        if (!label) {
            return st.fail("criterion " + std::string(element) + " has unknown met value \"" + met + "\"");
        }
        auto& slot = st.labels[index_of(*id)];
        if (slot) return st.fail("duplicate criterion tag " + std::string(element));
        slot = *label;
    }
}

void XMLCALL on_end(void* user, const XML_Char*) {
    auto& st = *static_cast<XmlState*>(user);
    if (st.stack.size() == 2 && st.stack.back() == "TEXT") st.in_text = false;
    st.stack.pop_back();
}

void XMLCALL on_chars(void* user, const XML_Char* s, int len) {
    auto& st = *static_cast<XmlState*>(user);
    if (st.in_text) st.text.append(s, static_cast<std::size_t>(len));
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void validate_record(const PatientRecord& record) {
    if (record.notes.empty()) throw SchemaError("patient " + record.patient_id + " has no notes");
    for (std::size_t i = 0; i < record.notes.size(); ++i) {
        if (trim(record.notes[i].text).empty()) {
            throw SchemaError("patient " + record.patient_id + " note " + std::to_string(i) + " is empty");
        }
    }
}

std::string partition_name(Partition p) { return p == Partition::Train ? "train" : "test"; }

}  // namespace

std::vector<NoteDocument> split_notes(std::string_view text) {
    std::vector<std::pair<std::size_t, std::size_t>> segments;
    std::size_t seg_start = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto eol = text.find('\n', pos);
        const std::size_t line_end = eol == std::string_view::npos ? text.size() : eol;
        if (is_separator_line(text.substr(pos, line_end - pos))) {
            std::size_t seg_end = pos;
            // The line break that ends the last note line belongs to the separator.
            if (seg_end > seg_start && text[seg_end - 1] == '\n') --seg_end;
            segments.emplace_back(seg_start, seg_end);
            seg_start = eol == std::string_view::npos ? text.size() : eol + 1;
        }
        if (eol == std::string_view::npos) break;
        pos = eol + 1;
    }
    segments.emplace_back(seg_start, text.size());

    std::vector<NoteDocument> notes;
    for (const auto& [b, e] : segments) {
        const auto segment = text.substr(b, e - b);
        if (trim(segment).empty()) continue;
        NoteDocument note;
        note.note_index = notes.size();
        note.record_date = leading_record_date(segment);
        note.text = std::string(segment);
        notes.push_back(std::move(note));
    }
    return notes;
}

PatientRecord parse_patient_xml(std::string_view bytes, std::string patient_id) {
    XmlState st;
    std::unique_ptr<XML_ParserStruct, decltype(&XML_ParserFree)> parser(XML_ParserCreate("UTF-8"), &XML_ParserFree);
    if (!parser) throw std::bad_alloc();
    st.parser = parser.get();
    XML_SetUserData(parser.get(), &st);
    XML_SetElementHandler(parser.get(), on_start, on_end);
    XML_SetCharacterDataHandler(parser.get(), on_chars);

    const auto status = XML_Parse(parser.get(), bytes.data(), static_cast<int>(bytes.size()), XML_TRUE);
    if (st.schema_error) throw SchemaError(patient_id + ": " + *st.schema_error);
    if (status != XML_STATUS_OK) {
        const auto offset = XML_GetCurrentByteIndex(parser.get());
        throw ParseError(patient_id + ": malformed XML: " + XML_ErrorString(XML_GetErrorCode(parser.get())),
                         offset < 0 ? 0 : static_cast<std::size_t>(offset));
    }
    if (st.text_elements == 0) throw SchemaError(patient_id + ": missing TEXT element");

    PatientRecord record;
    record.patient_id = std::move(patient_id);
    record.notes = split_notes(st.text);
    if (record.notes.empty()) throw SchemaError(record.patient_id + ": TEXT holds no notes");
    if (st.saw_tags) {
        CriterionLabels labels{};
        for (auto id : kAllCriteria) {
            const auto& slot = st.labels[index_of(id)];
            if (!slot) throw SchemaError(record.patient_id + ": missing criterion tag " + std::string(to_string(id)));
            labels[index_of(id)] = *slot;
        }
        record.labels = labels;
    }
    return record;
}

std::string serialize_patient_xml(const PatientRecord& record) {
    static const std::string kSeparator(100, '*');
    std::string text;
    for (std::size_t i = 0; i < record.notes.size(); ++i) {
        if (i > 0) text += "\n" + kSeparator + "\n";
        text += record.notes[i].text;
    }
    std::string escaped;
    escaped.reserve(text.size());
    std::size_t pos = 0;
    for (auto hit = text.find("]]>"); hit != std::string::npos; hit = text.find("]]>", pos)) {
        escaped.append(text, pos, hit - pos);
        escaped += "]]]]><![CDATA[>";
        pos = hit + 3;
    }
    escaped.append(text, pos);

    std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\" ?>\n<PatientMatching>\n<TEXT><![CDATA[";
    out += escaped;
    out += "]]></TEXT>\n";
    if (record.labels) {
        out += "<TAGS>\n";
        for (auto id : kAllCriteria) {
            out += "<";
            out += to_string(id);
            out += " met=\"";
            out += to_string((*record.labels)[index_of(id)]);
            out += "\" />\n";
        }
        out += "</TAGS>\n";
    }
    out += "</PatientMatching>\n";
    return out;
}

Corpus parse_corpus_json(std::string_view json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed JSON corpus: ") + e.what(), e.byte);
    }
    if (!doc.is_object() || !doc.contains("patients") || !doc["patients"].is_array()) {
        throw SchemaError("JSON corpus must be an object with a \"patients\" array");
    }
    Corpus corpus;
    std::set<std::string> seen;
    for (const auto& p : doc["patients"]) {
        if (!p.is_object() || !p.contains("id") || !p["id"].is_string()) {
            throw SchemaError("JSON corpus: every patient needs a string \"id\"");
        }
        PatientRecord record;
        record.patient_id = p["id"].get<std::string>();
        if (!seen.insert(record.patient_id).second) throw SchemaError("duplicate patient id " + record.patient_id);
        if (!p.contains("notes") || !p["notes"].is_array()) {
            throw SchemaError("patient " + record.patient_id + ": \"notes\" must be an array");
        }
        for (const auto& n : p["notes"]) {
            if (!n.is_object() || !n.contains("text") || !n["text"].is_string()) {
                throw SchemaError("patient " + record.patient_id + ": every note needs a string \"text\"");
            }
            NoteDocument note;
            note.note_index = record.notes.size();
            if (n.contains("date") && n["date"].is_string()) note.record_date = n["date"].get<std::string>();
            note.text = n["text"].get<std::string>();
            record.notes.push_back(std::move(note));
        }
        if (p.contains("labels") && !p["labels"].is_null()) {
            const auto& l = p["labels"];
            if (!l.is_object()) throw SchemaError("patient " + record.patient_id + ": \"labels\" must be an object");
            std::array<std::optional<EligibilityLabel>, kCriterionCount> slots;
            for (const auto& [key, value] : l.items()) {
                const auto id = criterion_from_string(key);
                if (!id) throw SchemaError("patient " + record.patient_id + ": unknown criterion " + key);
                const auto label = value.is_string() ? label_from_string(value.get<std::string>()) : std::nullopt;
                if (!label) throw SchemaError("patient " + record.patient_id + ": bad label for " + key);
                slots[index_of(*id)] = *label;
            }
            CriterionLabels labels{};
            for (auto id : kAllCriteria) {
                if (!slots[index_of(id)]) {
                    throw SchemaError("patient " + record.patient_id + ": missing criterion " +
                                      std::string(to_string(id)));
                }
                labels[index_of(id)] = *slots[index_of(id)];
            }
            record.labels = labels;
        }
        if (p.contains("partition") && !p["partition"].is_null()) {
            const auto part = p["partition"].get<std::string>();
            if (part == "train") {
                record.partition = Partition::Train;
            } else if (part == "test") {
                record.partition = Partition::Test;
            } else {
                throw SchemaError("patient " + record.patient_id + ": unknown partition " + part);
            }
        }
        validate_record(record);
        corpus.push_back(std::move(record));
    }
    std::sort(corpus.begin(), corpus.end(),
              [](const PatientRecord& a, const PatientRecord& b) { return a.patient_id < b.patient_id; });
    return corpus;
}

std::string corpus_to_json(const Corpus& corpus) {
    json patients = json::array();
    for (const auto& r : corpus) {
        json p;
        p["id"] = r.patient_id;
        json notes = json::array();
        for (const auto& n : r.notes) {
            notes.push_back({{"date", n.record_date ? json(*n.record_date) : json(nullptr)}, {"text", n.text}});
        }
        p["notes"] = std::move(notes);
        if (r.labels) {
            json labels = json::object();
            for (auto id : kAllCriteria) labels[std::string(to_string(id))] = to_string((*r.labels)[index_of(id)]);
            p["labels"] = std::move(labels);
        }
        if (r.partition) p["partition"] = partition_name(*r.partition);
        patients.push_back(std::move(p));
    }
    return json{{"patients", std::move(patients)}}.dump(1) + "\n";
}

void write_corpus_xml(const Corpus& corpus, const fs::path& directory) {
    for (const auto& r : corpus) {
        fs::path dir = directory;
        if (r.partition) dir /= partition_name(*r.partition);
        fs::create_directories(dir);
        std::ofstream out(dir / (r.patient_id + ".xml"), std::ios::binary);
        out << serialize_patient_xml(r);
        if (!out) throw FormatError("cannot write " + (dir / (r.patient_id + ".xml")).string());
    }
}

Corpus load_corpus(const fs::path& source) {
    if (!fs::exists(source)) throw ValidationError("corpus path does not exist: " + source.string());
    if (fs::is_regular_file(source)) {
        if (source.extension() == ".json") return parse_corpus_json(read_file(source));
        if (source.extension() == ".xml") return {parse_patient_xml(read_file(source), source.stem().string())};
        throw FormatError("unsupported corpus file " + source.string() + " (expected .json or .xml)");
    }

    struct Item {
        fs::path path;
        std::optional<Partition> partition;
    };
    std::vector<Item> xml_files;
    std::vector<fs::path> json_files;
    auto scan = [&](const fs::path& dir, std::optional<Partition> partition) {
        for (const auto& entry : fs::directory_iterator(dir)) {
            if (!entry.is_regular_file()) continue;
            const auto ext = entry.path().extension();
            if (ext == ".xml") xml_files.push_back({entry.path(), partition});
            if (ext == ".json") json_files.push_back(entry.path());
        }
    };
    scan(source, std::nullopt);
    if (fs::is_directory(source / "train")) scan(source / "train", Partition::Train);
    if (fs::is_directory(source / "test")) scan(source / "test", Partition::Test);

    if (!xml_files.empty() && !json_files.empty()) {
        throw FormatError("corpus directory " + source.string() + " mixes .xml and .json files");
    }
    if (json_files.size() > 1) throw FormatError("corpus directory " + source.string() + " holds several .json files");
    if (json_files.size() == 1) return parse_corpus_json(read_file(json_files.front()));
    if (xml_files.empty()) throw ValidationError("empty corpus: no .xml files under " + source.string());

    std::sort(xml_files.begin(), xml_files.end(), [](const Item& a, const Item& b) { return a.path < b.path; });
    Corpus corpus(xml_files.size());
    detail::parallel_for(xml_files.size(), 0, [&](std::size_t i) {
        corpus[i] = parse_patient_xml(read_file(xml_files[i].path), xml_files[i].path.stem().string());
        corpus[i].partition = xml_files[i].partition;
    });
    std::sort(corpus.begin(), corpus.end(),
              [](const PatientRecord& a, const PatientRecord& b) { return a.patient_id < b.patient_id; });
    for (std::size_t i = 1; i < corpus.size(); ++i) {
        if (corpus[i].patient_id == corpus[i - 1].patient_id) {
            throw SchemaError("duplicate patient id " + corpus[i].patient_id);
        }
    }
    return corpus;
}

DatasetSplit make_split(const Corpus& corpus, std::uint64_t seed, double validation_fraction) {
    if (validation_fraction < 0.0 || validation_fraction > 1.0) {
        throw std::invalid_argument("validation fraction must lie in [0, 1]");
    }
    DatasetSplit split;
    std::vector<std::string> train;
    for (const auto& r : corpus) {
        if (!r.partition) {
            throw ValidationError("patient " + r.patient_id +
                                  " has no train/test partition marker; provide an explicit split file (split_file)");
        }
        (*r.partition == Partition::Train ? train : split.test).push_back(r.patient_id);
    }
    std::sort(train.begin(), train.end());
    Rng rng(seed);
    rng.shuffle(train);
    const auto n_validation =
        static_cast<std::size_t>(std::llround(static_cast<double>(train.size()) * validation_fraction));
    split.validation.assign(train.begin(), train.begin() + static_cast<std::ptrdiff_t>(n_validation));
    split.train.assign(train.begin() + static_cast<std::ptrdiff_t>(n_validation), train.end());
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.validation.begin(), split.validation.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

void check_split(const DatasetSplit& split, const Corpus& corpus) {
    std::set<std::string> ids;
    for (const auto& r : corpus) ids.insert(r.patient_id);
    std::set<std::string> seen;
    for (const auto* part : {&split.train, &split.validation, &split.test}) {
        for (const auto& id : *part) {
            if (!ids.count(id)) throw ValidationError("split names unknown patient " + id);
            if (!seen.insert(id).second) throw ValidationError("patient " + id + " appears in more than one split");
        }
    }
    if (seen.size() != ids.size()) {
        for (const auto& id : ids) {
            if (!seen.count(id)) throw ValidationError("patient " + id + " is missing from the split");
        }
    }
}

std::string split_to_json(const DatasetSplit& split) {
    return json{{"train", split.train}, {"validation", split.validation}, {"test", split.test}}.dump(2) + "\n";
}

DatasetSplit split_from_json(std::string_view json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed split file: ") + e.what(), e.byte);
    }
    DatasetSplit split;
    try {
        split.train = doc.at("train").get<std::vector<std::string>>();
        split.validation = doc.at("validation").get<std::vector<std::string>>();
        split.test = doc.at("test").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw SchemaError(std::string("split file needs train/validation/test id lists: ") + e.what());
    }
    return split;
}

std::vector<LabelCount> label_distribution(const Corpus& corpus) {
    std::vector<LabelCount> rows;
    for (auto id : kAllCriteria) rows.push_back({id});
    for (const auto& r : corpus) {
        if (!r.labels) throw ValidationError("patient " + r.patient_id + " has no labels");
        for (auto id : kAllCriteria) {
            auto& row = rows[index_of(id)];
            ((*r.labels)[index_of(id)] == EligibilityLabel::Met ? row.met : row.not_met)++;
        }
    }
    return rows;
}

std::string label_distribution_csv(const std::vector<LabelCount>& rows) {
    std::string out = "criterion,met,not_met\n";
    for (const auto& r : rows) {
        out += std::string(to_string(r.criterion)) + "," + std::to_string(r.met) + "," + std::to_string(r.not_met) + "\n";
    }
    return out;
}

std::string_view to_string(InputType type) noexcept {
    switch (type) {
        case InputType::Original: return "Original";
        case InputType::NerProblem: return "NerProblem";
        case InputType::RagTopK: return "RagTopK";
    }
    return "?";
}

TokenStats token_stats(InputType type, const std::vector<std::size_t>& per_patient_tokens) {
    if (per_patient_tokens.empty()) throw std::invalid_argument("token_stats needs at least one patient");
    TokenStats s;
    s.input_type = type;
    s.n_patients = per_patient_tokens.size();
    s.min = *std::min_element(per_patient_tokens.begin(), per_patient_tokens.end());
    s.max = *std::max_element(per_patient_tokens.begin(), per_patient_tokens.end());
    double sum = 0.0;
    for (auto t : per_patient_tokens) sum += static_cast<double>(t);
    s.mean = sum / static_cast<double>(s.n_patients);
    return s;
}

std::string concatenate_notes(const PatientRecord& record) {
    std::string out;
    for (const auto& n : record.notes) {
        if (!out.empty()) out += "\n\n";
        out += trim(n.text);
    }
    return out;
}

std::string token_stats_csv(const std::vector<TokenStats>& rows) {
    std::string out = "input_type,mean,min,max,n_patients\n";
    char buf[64];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%.2f", r.mean);
        out += std::string(to_string(r.input_type)) + "," + buf + "," + std::to_string(r.min) + "," +
               std::to_string(r.max) + "," + std::to_string(r.n_patients) + "\n";
    }
    return out;
}

}  // namespace trialscreen
