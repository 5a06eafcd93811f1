#include "trialscreen/manifest.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "trialscreen/errors.hpp"

namespace trialscreen {

using nlohmann::json;

std::string pair_key(std::string_view patient_id, CriterionId criterion) {
    return std::string(patient_id) + "/" + std::string(to_string(criterion));
}

std::string VerdictRecord::key() const { return pair_key(patient_id, criterion); }

Verdict VerdictRecord::to_verdict() const {
    Verdict v;
    v.patient_id = patient_id;
    v.criterion = criterion;
    v.predicted = predicted;
    v.met_score = met_score;
    for (const auto& [id, score] : evidence) v.evidence.push_back(id);
    v.anomaly = anomaly;
    return v;
}

std::vector<std::string> Manifest::missing_pairs() const {
    std::set<std::string> have;
    for (const auto& r : records) have.insert(r.key());
    std::vector<std::string> missing;
    for (const auto& p : header.patients) {
        for (auto id : kAllCriteria) {
            auto k = pair_key(p, id);
            if (!have.count(k)) missing.push_back(std::move(k));
        }
    }
    return missing;
}

std::string header_line(const ManifestHeader& h) {
    return json{{"type", "header"},
                {"run_id", h.run_id},
                {"strategy", h.strategy},
                {"split", h.split},
                {"config", h.config},
                {"fingerprints", h.fingerprints},
                {"patients", h.patients},
                {"label_replay", h.label_replay},
                {"decoding", h.decoding}}
        .dump();
}

std::string record_line(const VerdictRecord& r) {
    json evidence = json::array();
    for (const auto& [id, score] : r.evidence) evidence.push_back({{"chunk_id", id}, {"score", score}});
    return json{{"type", "verdict"},
                {"patient_id", r.patient_id},
                {"criterion", to_string(r.criterion)},
                {"predicted", to_string(r.predicted)},
                {"met_score", r.met_score},
                {"evidence", evidence},
                {"raw_text_hash", r.raw_text_hash},
                {"anomaly", r.anomaly ? json(*r.anomaly) : json(nullptr)},
                {"backend_failure", r.backend_failure},
                {"context_tokens", r.context_tokens},
                {"pre_limit_tokens", r.pre_limit_tokens},
                {"token_limit", r.token_limit},
                {"truncated", r.truncated}}
        .dump();
}

std::string footer_line(const ManifestFooter& f) {
    return json{{"type", "footer"},
                {"complete", f.complete},
                {"verdicts", f.verdicts},
                {"anomalies", f.anomalies},
                {"reason", f.reason}}
        .dump();
}

namespace {

VerdictRecord record_from(const json& j) {
    VerdictRecord r;
    r.patient_id = j.at("patient_id").get<std::string>();
    const auto id = criterion_from_string(j.at("criterion").get<std::string>());
    if (!id) throw FormatError("manifest record names an unknown criterion");
    r.criterion = *id;
    const auto label = label_from_string(j.at("predicted").get<std::string>());
    if (!label) throw FormatError("manifest record has an unknown label");
    r.predicted = *label;
    r.met_score = j.at("met_score").get<double>();
    for (const auto& e : j.at("evidence")) {
        r.evidence.emplace_back(e.at("chunk_id").get<std::string>(), e.at("score").get<double>());
    }
    r.raw_text_hash = j.at("raw_text_hash").get<std::string>();
    if (!j.at("anomaly").is_null()) r.anomaly = j.at("anomaly").get<std::string>();
    r.backend_failure = j.at("backend_failure").get<bool>();
    r.context_tokens = j.at("context_tokens").get<std::size_t>();
    r.pre_limit_tokens = j.at("pre_limit_tokens").get<std::size_t>();
    r.token_limit = j.at("token_limit").get<std::size_t>();
    r.truncated = j.at("truncated").get<bool>();
    return r;
}

}  // namespace

Manifest parse_manifest(std::string_view text) {
    Manifest m;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    bool have_header = false;
    while (pos < text.size()) {
        const auto eol = text.find('\n', pos);
        if (eol == std::string_view::npos) break;  // partial trailing line from an interrupted write
        const auto line = text.substr(pos, eol - pos);
        ++line_no;
        try {
            const auto j = json::parse(line);
            const auto type = j.at("type").get<std::string>();
            if (!have_header) {
                if (type != "header") throw FormatError("manifest must start with a header line");
                m.header.run_id = j.at("run_id").get<std::string>();
                m.header.strategy = j.at("strategy").get<std::string>();
                m.header.split = j.at("split").get<std::string>();
                m.header.config = j.at("config").get<std::map<std::string, std::string>>();
                m.header.fingerprints = j.at("fingerprints").get<std::map<std::string, std::string>>();
                m.header.patients = j.at("patients").get<std::vector<std::string>>();
                m.header.label_replay = j.at("label_replay").get<bool>();
                m.header.decoding = j.at("decoding").get<std::string>();
                have_header = true;
            } else if (m.footer) {
                throw FormatError("manifest has lines after its footer");
            } else if (type == "verdict") {
                m.records.push_back(record_from(j));
            } else if (type == "footer") {
                m.footer = ManifestFooter{j.at("complete").get<bool>(), j.at("verdicts").get<std::size_t>(),
                                          j.at("anomalies").get<std::size_t>(), j.at("reason").get<std::string>()};
            } else {
                throw FormatError("manifest line has unknown type " + type);
            }
        } catch (const json::exception& e) {
            throw FormatError("manifest line " + std::to_string(line_no) + " is malformed: " + e.what());
        } catch (const FormatError& e) {
            throw FormatError("manifest line " + std::to_string(line_no) + ": " + e.what());
        }
        pos = eol + 1;
        if (!m.footer) m.valid_prefix_bytes = pos;
    }
    if (!have_header) throw FormatError("manifest has no header line");
    return m;
}

Manifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot read manifest " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_manifest(ss.str());
}

}  // namespace trialscreen
