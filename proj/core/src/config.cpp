#include "trialscreen/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "trialscreen/errors.hpp"
#include "trialscreen/text.hpp"

namespace trialscreen {

namespace fs = std::filesystem;

namespace {

std::uint64_t parse_u64(const std::string& key, std::string_view v) {
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
        throw ValidationError("config key " + key + ": expected a non-negative integer, got \"" + std::string(v) + "\"");
    }
    return out;
}

int parse_int(const std::string& key, std::string_view v) {
    int out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
        throw ValidationError("config key " + key + ": expected an integer, got \"" + std::string(v) + "\"");
    }
    return out;
}

double parse_double(const std::string& key, std::string_view v) {
    try {
        std::size_t used = 0;
        const double out = std::stod(std::string(v), &used);
        if (used == v.size()) return out;
    } catch (const std::exception&) {
    }
    throw ValidationError("config key " + key + ": expected a number, got \"" + std::string(v) + "\"");
}

bool parse_bool(const std::string& key, std::string_view v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ValidationError("config key " + key + ": expected true or false, got \"" + std::string(v) + "\"");
}

std::string path_text(const fs::path& p) { return p.empty() ? std::string() : p.generic_string(); }

fs::path resolve(const fs::path& base, std::string_view v) {
    if (v.empty()) return {};
    fs::path p{std::string(v)};
    if (p.is_relative() && !base.empty()) p = base / p;
    return p.lexically_normal();
}

void require_file(const fs::path& p, const std::string& key) {
    if (!p.empty() && !fs::exists(p)) throw ValidationError(key + " does not exist: " + p.string());
}

}  // namespace

PipelineConfig PipelineConfig::parse(std::string_view text, const fs::path& base_dir) {
    PipelineConfig c;
    std::optional<std::size_t> strategy_limit;
    std::optional<std::size_t> embedder_dims;

    using Setter = std::function<void(const std::string&, std::string_view)>;
    const std::map<std::string, Setter> setters = {
        {"corpus_path", [&](auto&, auto v) { c.corpus_path = resolve(base_dir, v); }},
        {"split_seed", [&](auto& k, auto v) { c.split_seed = parse_u64(k, v); }},
        {"split_file", [&](auto&, auto v) { c.split_file = resolve(base_dir, v); }},
        {"max_chunk_tokens", [&](auto& k, auto v) { c.chunk.max_chunk_tokens = parse_u64(k, v); }},
        {"overlap_tokens", [&](auto& k, auto v) { c.chunk.overlap_tokens = parse_u64(k, v); }},
        {"sentence_aligned", [&](auto& k, auto v) { c.chunk.sentence_aligned = parse_bool(k, v); }},
        {"embedder_backend",
         [&](auto& k, auto v) {
             if (v == "hashed_ngram") c.embedder.backend = EmbedderBackend::HashedNGram;
             else if (v == "remote") c.embedder.backend = EmbedderBackend::Remote;
             else throw ValidationError("config key " + k + ": expected hashed_ngram or remote");
         }},
        {"embedder_model_id", [&](auto&, auto v) { c.embedder.model_id = std::string(v); }},
        {"embedder_endpoint_url", [&](auto&, auto v) { c.embedder.endpoint_url = std::string(v); }},
        {"embedder_adapter",
         [&](auto& k, auto v) {
             if (v == "native") c.embedder.adapter = EmbedAdapter::Native;
             else if (v == "openai") c.embedder.adapter = EmbedAdapter::OpenAI;
             else throw ValidationError("config key " + k + ": expected native or openai");
         }},
        {"embedder_dims", [&](auto& k, auto v) { embedder_dims = parse_u64(k, v); }},
        {"embedder_batch_size", [&](auto& k, auto v) { c.embedder.batch_size = parse_u64(k, v); }},
        {"embedder_timeout_ms", [&](auto& k, auto v) { c.embedder.timeout_ms = parse_int(k, v); }},
        {"embedder_max_retries", [&](auto& k, auto v) { c.embedder.max_retries = parse_int(k, v); }},
        {"embedder_parallelism", [&](auto& k, auto v) { c.embedder.parallelism = parse_u64(k, v); }},
        {"ner_backend",
         [&](auto& k, auto v) {
             if (v == "lexicon") c.ner.backend = NerBackendKind::Lexicon;
             else if (v == "remote") c.ner.backend = NerBackendKind::Remote;
             else throw ValidationError("config key " + k + ": expected lexicon or remote");
         }},
        {"ner_endpoint_url", [&](auto&, auto v) { c.ner.endpoint_url = std::string(v); }},
        {"ner_lexicon_path", [&](auto&, auto v) { c.ner.lexicon_path = resolve(base_dir, v); }},
        {"ner_token_limit", [&](auto& k, auto v) { c.ner.token_limit = parse_u64(k, v); }},
        {"strategy",
         [&](auto& k, auto v) {
             const auto s = strategy_from_string(v);
             if (!s) throw ValidationError("config key " + k + ": expected ori, ner or rag");
             c.strategy.strategy = *s;
         }},
        {"strategy_token_limit", [&](auto& k, auto v) { strategy_limit = parse_u64(k, v); }},
        {"rag_k", [&](auto& k, auto v) { c.strategy.k = parse_u64(k, v); }},
        {"generator_backend",
         [&](auto& k, auto v) {
             if (v == "remote") c.generator.backend = GeneratorBackend::Remote;
             else if (v == "keyword_oracle") c.generator.backend = GeneratorBackend::KeywordOracle;
             else if (v == "label_replay") c.generator.backend = GeneratorBackend::LabelReplay;
             else if (v == "constant") c.generator.backend = GeneratorBackend::Constant;
             else throw ValidationError("config key " + k + ": expected remote, keyword_oracle, label_replay or constant");
         }},
        {"generator_endpoint_url", [&](auto&, auto v) { c.generator.endpoint_url = std::string(v); }},
        {"generator_model_id", [&](auto&, auto v) { c.generator.model_id = std::string(v); }},
        {"generator_adapter",
         [&](auto& k, auto v) {
             if (v == "native") c.generator.adapter = GenerateAdapter::Native;
             else if (v == "chat") c.generator.adapter = GenerateAdapter::ChatCompletions;
             else throw ValidationError("config key " + k + ": expected native or chat");
         }},
        {"generator_rules_path", [&](auto&, auto v) { c.generator.rules_path = resolve(base_dir, v); }},
        {"generator_constant_label",
         [&](auto& k, auto v) {
             const auto l = label_from_string(v);
             if (!l) throw ValidationError("config key " + k + ": expected \"met\" or \"not met\"");
             c.generator.constant_label = *l;
         }},
        {"generator_max_new_tokens", [&](auto& k, auto v) { c.generator.max_new_tokens = parse_u64(k, v); }},
        {"generator_parallelism", [&](auto& k, auto v) { c.generator.parallelism = parse_u64(k, v); }},
        {"generator_timeout_ms", [&](auto& k, auto v) { c.generator.timeout_ms = parse_int(k, v); }},
        {"generator_max_retries", [&](auto& k, auto v) { c.generator.max_retries = parse_int(k, v); }},
        {"output_dir", [&](auto&, auto v) { c.output_dir = resolve(base_dir, v); }},
        {"index_path", [&](auto&, auto v) { c.index_path = resolve(base_dir, v); }},
        {"failure_threshold", [&](auto& k, auto v) { c.failure_threshold = parse_double(k, v); }},
        {"workers", [&](auto& k, auto v) { c.workers = parse_u64(k, v); }},
    };

    std::set<std::string> seen;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        const auto line = trim(text.substr(pos, eol - pos));
        pos = eol + 1;
        ++line_no;
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ValidationError("config line " + std::to_string(line_no) + ": expected \"key = value\"");
        }
        const std::string key(trim(line.substr(0, eq)));
        const auto value = trim(line.substr(eq + 1));
        const auto it = setters.find(key);
        if (it == setters.end()) throw ValidationError("config line " + std::to_string(line_no) + ": unknown key " + key);
        if (!seen.insert(key).second) throw ValidationError("config line " + std::to_string(line_no) + ": duplicate key " + key);
        it->second(key, value);
    }

    const auto defaults = StrategyConfig::defaults(c.strategy.strategy);
    if (strategy_limit) {
        c.strategy.token_limit = *strategy_limit;
    } else {
        c.strategy.token_limit = c.strategy.strategy == Strategy::Ner ? c.ner.token_limit : defaults.token_limit;
    }
    if (embedder_dims) {
        c.embedder.dims = *embedder_dims;
    } else if (c.embedder.backend == EmbedderBackend::Remote) {
        c.embedder.dims = 0;  // accept whatever the service returns
    }
    return c;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot read config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.parent_path());
}

void PipelineConfig::validate() const {
    chunk.validate();
    embedder.validate();
    ner.validate();
    strategy.validate();
    generator.validate();
    if (strategy.strategy == Strategy::Ner && strategy.token_limit != ner.token_limit) {
        throw ValidationError("strategy_token_limit and ner_token_limit disagree for the ner strategy");
    }
    if (!(failure_threshold >= 0.0 && failure_threshold <= 1.0)) {
        throw ValidationError("failure_threshold must lie in [0, 1]");
    }
    if (corpus_path.empty()) throw ValidationError("corpus_path is required");
    require_file(corpus_path, "corpus_path");
    require_file(split_file, "split_file");
    require_file(ner.lexicon_path, "ner_lexicon_path");
    require_file(generator.rules_path, "generator_rules_path");
}

std::map<std::string, std::string> PipelineConfig::snapshot() const {
    auto label = [](EligibilityLabel l) { return std::string(to_string(l)); };
    const char* gen_backend = "constant";
    switch (generator.backend) {
        case GeneratorBackend::Remote: gen_backend = "remote"; break;
        case GeneratorBackend::KeywordOracle: gen_backend = "keyword_oracle"; break;
        case GeneratorBackend::LabelReplay: gen_backend = "label_replay"; break;
        case GeneratorBackend::Constant: gen_backend = "constant"; break;
    }
    return {
        {"corpus_path", path_text(corpus_path)},
        {"split_seed", std::to_string(split_seed)},
        {"split_file", path_text(split_file)},
        {"max_chunk_tokens", std::to_string(chunk.max_chunk_tokens)},
        {"overlap_tokens", std::to_string(chunk.overlap_tokens)},
        {"sentence_aligned", chunk.sentence_aligned ? "true" : "false"},
        {"embedder_backend", embedder.backend == EmbedderBackend::Remote ? "remote" : "hashed_ngram"},
        {"embedder_model_id", embedder.model_id},
        {"embedder_endpoint_url", embedder.endpoint_url},
        {"embedder_adapter", embedder.adapter == EmbedAdapter::OpenAI ? "openai" : "native"},
        {"embedder_dims", std::to_string(embedder.dims)},
        {"embedder_batch_size", std::to_string(embedder.batch_size)},
        {"embedder_timeout_ms", std::to_string(embedder.timeout_ms)},
        {"embedder_max_retries", std::to_string(embedder.max_retries)},
        {"embedder_parallelism", std::to_string(embedder.parallelism)},
        {"ner_backend", ner.backend == NerBackendKind::Remote ? "remote" : "lexicon"},
        {"ner_endpoint_url", ner.endpoint_url},
        {"ner_lexicon_path", path_text(ner.lexicon_path)},
        {"ner_token_limit", std::to_string(ner.token_limit)},
        {"strategy", std::string(to_string(strategy.strategy))},
        {"strategy_token_limit", std::to_string(strategy.token_limit)},
        {"rag_k", std::to_string(strategy.k)},
        {"generator_backend", gen_backend},
        {"generator_endpoint_url", generator.endpoint_url},
        {"generator_model_id", generator.model_id},
        {"generator_adapter", generator.adapter == GenerateAdapter::ChatCompletions ? "chat" : "native"},
        {"generator_rules_path", path_text(generator.rules_path)},
        {"generator_constant_label", label(generator.constant_label)},
        {"generator_max_new_tokens", std::to_string(generator.max_new_tokens)},
        {"generator_parallelism", std::to_string(generator.parallelism)},
        {"generator_timeout_ms", std::to_string(generator.timeout_ms)},
        {"generator_max_retries", std::to_string(generator.max_retries)},
        {"output_dir", path_text(output_dir)},
        {"index_path", path_text(index_path)},
        {"failure_threshold", [&] {
             std::ostringstream ss;
             ss.precision(17);
             ss << failure_threshold;
             return ss.str();
         }()},
        {"workers", std::to_string(workers)},
    };
}

std::string PipelineConfig::to_text() const {
    std::string out;
    for (const auto& [k, v] : snapshot()) out += k + " = " + v + "\n";
    return out;
}

fs::path PipelineConfig::resolved_index_path() const {
    return index_path.empty() ? output_dir / "index.tsix" : index_path;
}

}  // namespace trialscreen
