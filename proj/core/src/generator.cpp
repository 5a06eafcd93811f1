#include "trialscreen/generator.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "embedded_data.hpp"
#include "http.hpp"
#include "parallel.hpp"
#include "trialscreen/errors.hpp"
#include "trialscreen/hash.hpp"

namespace trialscreen {

using nlohmann::json;

namespace {

double hard_score(EligibilityLabel label) { return label == EligibilityLabel::Met ? 1.0 : 0.0; }

Verdict base_verdict(const ContextBundle& bundle, CriterionId criterion) {
    Verdict v;
    v.patient_id = bundle.patient_id;
    v.criterion = criterion;
    for (const auto& e : bundle.evidence) v.evidence.push_back(e.chunk_id);
    return v;
}

}  // namespace

void GeneratorConfig::validate() const {
    if (max_new_tokens == 0) throw ValidationError("generator max_new_tokens must be at least 1");
    if (parallelism == 0) throw ValidationError("generator parallelism must be at least 1");
    if (backend == GeneratorBackend::Remote) {
        if (endpoint_url.empty()) throw ValidationError("remote generator needs generator_endpoint_url");
        if (model_id.empty()) throw ValidationError("remote generator needs generator_model_id");
        if (timeout_ms <= 0) throw ValidationError("generator timeout_ms must be positive");
        if (max_retries < 0) throw ValidationError("generator max_retries must not be negative");
    }
}

Verdict verdict_from_text(const ContextBundle& bundle, CriterionId criterion, std::string text,
                          std::optional<double> met_score) {
    Verdict v = base_verdict(bundle, criterion);
    v.raw_text = std::move(text);
    const auto label = parse_verdict(v.raw_text);
    if (!label) {
        v.predicted = kDefaultLabel;
        v.met_score = hard_score(kDefaultLabel);
        v.anomaly = "unparseable generator output";
        return v;
    }
    v.predicted = *label;
    v.met_score = hard_score(*label);
    if (met_score) {
        if (!(*met_score >= 0.0 && *met_score <= 1.0)) {
            v.anomaly = "met_score outside [0, 1]; using the hard label score";
        } else if ((*met_score >= 0.5) != (*label == EligibilityLabel::Met)) {
            v.anomaly = "met_score contradicts the generated label; using the hard label score";
        } else {
            v.met_score = *met_score;
        }
    }
    return v;
}

RemoteGenerator::RemoteGenerator(GeneratorConfig config) : config_(std::move(config)) {
    config_.backend = GeneratorBackend::Remote;
    config_.validate();
}

std::string RemoteGenerator::fingerprint() const { return "remote:" + config_.model_id; }

Verdict RemoteGenerator::classify(const std::string& prompt, const ContextBundle& bundle, CriterionId criterion) const {
    const detail::HttpOptions http{config_.timeout_ms, config_.max_retries, config_.initial_backoff_ms};
    const bool chat = config_.adapter == GenerateAdapter::ChatCompletions;
    json request;
    if (chat) {
        request = {{"model", config_.model_id},
                   {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
                   {"max_tokens", config_.max_new_tokens}};
    } else {
        request = {{"model", config_.model_id}, {"prompt", prompt}, {"max_new_tokens", config_.max_new_tokens}};
    }
    const auto url = detail::join_url(config_.endpoint_url, chat ? "/v1/chat/completions" : "/generate");
    const auto body = detail::post_json(url, request.dump(), http);

    std::string text;
    std::optional<double> score;
    try {
        const auto reply = json::parse(body);
        if (chat) {
            text = reply.at("choices").at(0).at("message").at("content").get<std::string>();
        } else {
            text = reply.at("text").get<std::string>();
            if (reply.contains("met_score") && !reply["met_score"].is_null()) {
                score = reply["met_score"].get<double>();
            }
        }
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("malformed generator response: ") + e.what());
    }
    return verdict_from_text(bundle, criterion, std::move(text), score);
}

KeywordOracleGenerator KeywordOracleGenerator::from_tsv(std::string_view tsv) {
    KeywordOracleGenerator gen;
    gen.content_hash_ = kFnvOffset;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < tsv.size()) {
        auto eol = tsv.find('\n', pos);
        if (eol == std::string_view::npos) eol = tsv.size();
        auto line = tsv.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (trim(line).empty() || trim(line).front() == '#') continue;
        const auto tab = line.find('\t');
        if (tab == std::string_view::npos) throw SchemaError("rules line " + std::to_string(line_no) + " has no tab");
        const auto id = criterion_from_string(trim(line.substr(0, tab)));
        if (!id) throw SchemaError("rules line " + std::to_string(line_no) + " names an unknown criterion");
        const std::string pattern(line.substr(tab + 1));
        try {
            gen.rules_[index_of(*id)].emplace_back(pattern,
                                                  std::regex(pattern, std::regex::ECMAScript | std::regex::icase));
        } catch (const std::regex_error& e) {
            throw SchemaError("rules line " + std::to_string(line_no) + ": bad regex: " + e.what());
        }
        gen.content_hash_ = fnv1a64(std::string(line) + "\n", gen.content_hash_);
    }
    return gen;
}

KeywordOracleGenerator KeywordOracleGenerator::from_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot read rules file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_tsv(ss.str());
}

KeywordOracleGenerator KeywordOracleGenerator::builtin() { return from_tsv(data::oracle_rules_tsv()); }

std::string KeywordOracleGenerator::fingerprint() const { return "keyword-oracle:" + hex64(content_hash_); }

std::size_t KeywordOracleGenerator::parallelism() const noexcept { return detail::default_workers(); }

Verdict KeywordOracleGenerator::classify(const std::string&, const ContextBundle& bundle, CriterionId criterion) const {
    Verdict v = base_verdict(bundle, criterion);
    v.predicted = EligibilityLabel::NotMet;
    for (const auto& [pattern, re] : rules_[index_of(criterion)]) {
        if (std::regex_search(bundle.context_text, re)) {
            v.predicted = EligibilityLabel::Met;
            v.raw_text = "met (rule: " + pattern + ")";
            break;
        }
    }
    if (v.raw_text.empty()) v.raw_text = "not met";
    v.met_score = hard_score(v.predicted);
    return v;
}

LabelReplayGenerator::LabelReplayGenerator(std::map<std::string, CriterionLabels, std::less<>> answer_key)
    : answer_key_(std::move(answer_key)) {}

LabelReplayGenerator LabelReplayGenerator::from_corpus(const Corpus& corpus) {
    std::map<std::string, CriterionLabels, std::less<>> key;
    for (const auto& r : corpus) {
        if (!r.labels) throw ValidationError("label replay needs gold labels; patient " + r.patient_id + " has none");
        key.emplace(r.patient_id, *r.labels);
    }
    return LabelReplayGenerator(std::move(key));
}

std::size_t LabelReplayGenerator::parallelism() const noexcept { return detail::default_workers(); }

Verdict LabelReplayGenerator::classify(const std::string&, const ContextBundle& bundle, CriterionId criterion) const {
    const auto it = answer_key_.find(bundle.patient_id);
    if (it == answer_key_.end()) throw ValidationError("label replay has no answer for patient " + bundle.patient_id);
    Verdict v = base_verdict(bundle, criterion);
    v.predicted = it->second[index_of(criterion)];
    v.met_score = hard_score(v.predicted);
    v.raw_text = std::string(to_string(v.predicted));
    return v;
}

std::string ConstantGenerator::fingerprint() const { return "constant:" + std::string(to_string(label_)); }

Verdict ConstantGenerator::classify(const std::string&, const ContextBundle& bundle, CriterionId criterion) const {
    Verdict v = base_verdict(bundle, criterion);
    v.predicted = label_;
    v.met_score = hard_score(label_);
    v.raw_text = std::string(to_string(label_));
    return v;
}

std::unique_ptr<Generator> make_generator(const GeneratorConfig& config, const Corpus* answer_key) {
    config.validate();
    switch (config.backend) {
        case GeneratorBackend::Remote: return std::make_unique<RemoteGenerator>(config);
        case GeneratorBackend::KeywordOracle:
            return std::make_unique<KeywordOracleGenerator>(config.rules_path.empty()
                                                                ? KeywordOracleGenerator::builtin()
                                                                : KeywordOracleGenerator::from_file(config.rules_path));
        case GeneratorBackend::LabelReplay:
            if (!answer_key) throw ValidationError("label replay needs a labeled corpus as answer key");
            return std::make_unique<LabelReplayGenerator>(LabelReplayGenerator::from_corpus(*answer_key));
        case GeneratorBackend::Constant: return std::make_unique<ConstantGenerator>(config.constant_label);
    }
    throw std::invalid_argument("unknown generator backend");
}

}  // namespace trialscreen
