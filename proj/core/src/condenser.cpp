#include "trialscreen/condenser.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "embedded_data.hpp"
#include "http.hpp"
#include "trialscreen/errors.hpp"
#include "trialscreen/hash.hpp"

namespace trialscreen {

using nlohmann::json;

namespace {

bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }
bool is_word(unsigned char c) { return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80; }
unsigned char lower(unsigned char c) { return (c >= 'A' && c <= 'Z') ? static_cast<unsigned char>(c - 'A' + 'a') : c; }

}  // namespace

std::string_view to_string(EntityLabel label) noexcept {
    switch (label) {
        case EntityLabel::Problem: return "problem";
        case EntityLabel::Treatment: return "treatment";
        case EntityLabel::Test: return "test";
    }
    return "?";
}

std::optional<EntityLabel> entity_label_from_string(std::string_view text) noexcept {
    if (text == "problem") return EntityLabel::Problem;
    if (text == "treatment") return EntityLabel::Treatment;
    if (text == "test") return EntityLabel::Test;
    return std::nullopt;
}

EntityList resolve_overlaps(std::vector<EntitySpan> candidates) {
    std::stable_sort(candidates.begin(), candidates.end(), [](const EntitySpan& a, const EntitySpan& b) {
        if (a.span.size() != b.span.size()) return a.span.size() > b.span.size();
        return a.span.begin < b.span.begin;
    });
    EntityList out;
    std::map<std::size_t, std::size_t> taken;  // begin -> end
    for (auto& c : candidates) {
        if (c.span.size() == 0) {
            ++out.overlaps_dropped;
            continue;
        }
        auto next = taken.lower_bound(c.span.begin);
        bool clash = next != taken.end() && next->first < c.span.end;
        if (!clash && next != taken.begin()) clash = std::prev(next)->second > c.span.begin;
        if (clash) {
            ++out.overlaps_dropped;
            continue;
        }
        taken.emplace(c.span.begin, c.span.end);
        out.spans.push_back(std::move(c));
    }
    std::sort(out.spans.begin(), out.spans.end(),
              [](const EntitySpan& a, const EntitySpan& b) { return a.span.begin < b.span.begin; });
    return out;
}

std::size_t LexiconNer::child(std::size_t node, unsigned char c) const {
    for (const auto& [ch, idx] : nodes_[node].next) {
        if (ch == c) return idx;
    }
    return 0;
}

void LexiconNer::insert(std::string_view term, EntityLabel label) {
    std::string key;
    for (unsigned char c : trim(term)) {
        if (is_space(c)) {
            if (key.back() != ' ') key += ' ';
        } else {
            key += static_cast<char>(lower(c));
        }
    }
    if (key.empty()) return;
    std::size_t node = 0;
    for (unsigned char c : key) {
        std::size_t next = child(node, c);
        if (next == 0) {
            next = nodes_.size();
            nodes_[node].next.emplace_back(c, next);
            nodes_.emplace_back();
        }
        node = next;
    }
    if (nodes_[node].label < 0) ++term_count_;
    nodes_[node].label = static_cast<int>(label);
    content_hash_ = fnv1a64(key + "\t" + std::string(to_string(label)) + "\n", content_hash_);
}

LexiconNer LexiconNer::from_tsv(std::string_view tsv) {
    LexiconNer ner;
    ner.content_hash_ = kFnvOffset;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < tsv.size()) {
        auto eol = tsv.find('\n', pos);
        if (eol == std::string_view::npos) eol = tsv.size();
        const auto line = tsv.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (trim(line).empty() || trim(line).front() == '#') continue;
        const auto tab = line.find('\t');
        if (tab == std::string_view::npos) {
            throw SchemaError("lexicon line " + std::to_string(line_no) + " has no tab separator");
        }
        const auto label = entity_label_from_string(trim(line.substr(tab + 1)));
        if (!label) throw SchemaError("lexicon line " + std::to_string(line_no) + " has an unknown label");
        ner.insert(line.substr(0, tab), *label);
    }
    if (ner.term_count_ == 0) throw SchemaError("lexicon holds no terms");
    return ner;
}

LexiconNer LexiconNer::from_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot read lexicon " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_tsv(ss.str());
}

const LexiconNer& LexiconNer::builtin() {
    static const LexiconNer ner = from_tsv(data::lexicon_tsv());
    return ner;
}

std::string LexiconNer::fingerprint() const { return "lexicon:" + hex64(content_hash_); }

EntityList LexiconNer::extract(std::string_view text) const {
    std::vector<EntitySpan> candidates;
    const auto* s = reinterpret_cast<const unsigned char*>(text.data());
    const std::size_t n = text.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (is_space(s[i])) continue;
        if (i > 0 && is_word(s[i]) && is_word(s[i - 1])) continue;
        std::size_t node = 0;
        std::size_t j = i;
        std::optional<std::pair<std::size_t, int>> best;
        while (j < n) {
            std::size_t next;
            if (is_space(s[j])) {
                next = child(node, ' ');
                if (next == 0) break;
                while (j < n && is_space(s[j])) ++j;
            } else {
                next = child(node, lower(s[j]));
                if (next == 0) break;
                ++j;
            }
            node = next;
            const int label = nodes_[node].label;
            if (label >= 0 && !(j < n && is_word(s[j]) && is_word(s[j - 1]))) best = {j, label};
        }
        if (best) {
            candidates.push_back({{i, best->first}, static_cast<EntityLabel>(best->second),
                                  std::string(text.substr(i, best->first - i))});
        }
    }
    return resolve_overlaps(std::move(candidates));
}

RemoteNer::RemoteNer(std::string endpoint_url, int timeout_ms, int max_retries, int initial_backoff_ms)
    : endpoint_url_(std::move(endpoint_url)),
      timeout_ms_(timeout_ms),
      max_retries_(max_retries),
      initial_backoff_ms_(initial_backoff_ms) {
    if (endpoint_url_.empty()) throw ValidationError("remote NER needs an endpoint URL");
}

std::string RemoteNer::fingerprint() const { return "remote-ner:" + endpoint_url_; }

EntityList RemoteNer::extract(std::string_view text) const {
    const auto body = detail::post_json(detail::join_url(endpoint_url_, "/ner"), json{{"text", text}}.dump(),
                                        {timeout_ms_, max_retries_, initial_backoff_ms_});
    std::vector<EntitySpan> candidates;
    try {
        const auto reply = json::parse(body);
        for (const auto& e : reply.at("entities")) {
            const auto begin = e.at("start").get<std::size_t>();
            const auto end = e.at("end").get<std::size_t>();
            if (begin >= end || end > text.size()) throw ProtocolError("NER service returned an out-of-range span");
            const auto label = entity_label_from_string(e.at("label").get<std::string>());
            if (!label) throw ProtocolError("NER service returned an unknown entity label");
            candidates.push_back({{begin, end}, *label, std::string(text.substr(begin, end - begin))});
        }
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("malformed NER response: ") + e.what());
    }
    return resolve_overlaps(std::move(candidates));
}

void NerConfig::validate() const {
    if (token_limit != 512 && token_limit != 2048 && token_limit != 8192) {
        throw ValidationError("ner_token_limit must be 512, 2048 or 8192");
    }
    if (backend == NerBackendKind::Remote && endpoint_url.empty()) {
        throw ValidationError("remote NER needs ner_endpoint_url");
    }
}

std::shared_ptr<const NerBackend> make_ner_backend(const NerConfig& config) {
    config.validate();
    if (config.backend == NerBackendKind::Remote) {
        return std::make_shared<RemoteNer>(config.endpoint_url, config.timeout_ms, config.max_retries);
    }
    if (config.lexicon_path.empty()) {
        return std::shared_ptr<const NerBackend>(std::shared_ptr<void>{}, &LexiconNer::builtin());
    }
    return std::make_shared<LexiconNer>(LexiconNer::from_file(config.lexicon_path));
}

EntityList extract_entities(const NerBackend& backend, std::string_view note_text) {
    return backend.extract(note_text);
}

CondensedText condense(const PatientRecord& record, const NerBackend& backend, std::size_t token_limit) {
    CondensedText out;
    std::string text;
    for (const auto& note : record.notes) {
        const auto entities = backend.extract(note.text);
        std::vector<Span> problems;
        for (const auto& e : entities.spans) {
            if (e.label == EntityLabel::Problem) problems.push_back(e.span);
        }
        std::string kept;
        std::size_t p = 0;
        for (const auto& sentence : split_sentences(note.text)) {
            while (p < problems.size() && problems[p].end <= sentence.span.begin) ++p;
            if (p == problems.size() || !problems[p].overlaps(sentence.span)) continue;
            const auto body = trim(sentence.text);
            if (body.empty()) continue;
            if (!kept.empty()) kept += ' ';
            kept += body;
            ++out.kept_sentences;
        }
        if (kept.empty()) continue;
        if (!text.empty()) text += "\n\n";
        text += kept;
    }
    out.empty_summary = out.kept_sentences == 0;
    const std::size_t tokens = count_tokens(text);
    if (tokens > token_limit) {
        out.dropped_tokens = tokens - token_limit;
        text = std::string(drop_leading_tokens(text, out.dropped_tokens));
    }
    out.token_count = tokens - out.dropped_tokens;
    out.text = std::move(text);
    return out;
}

}  // namespace trialscreen
