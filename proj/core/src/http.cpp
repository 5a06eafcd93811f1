#include "http.hpp"

#include <chrono>
#include <thread>

#include <httplib.h>

#include "trialscreen/errors.hpp"

namespace trialscreen::detail {

namespace {

struct ParsedUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

ParsedUrl split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ValidationError("endpoint URL needs a scheme: " + url);
    const auto path_begin = url.find('/', scheme_end + 3);
    if (path_begin == std::string::npos) return {url, "/"};
    return {url.substr(0, path_begin), url.substr(path_begin)};
}

bool retryable(int status) { return status == 429 || status >= 500; }

}  // namespace

std::string join_url(const std::string& base, const std::string& path) {
    if (base.empty()) return path;
    if (base.back() == '/' && !path.empty() && path.front() == '/') return base + path.substr(1);
    if (base.back() != '/' && !path.empty() && path.front() != '/') return base + "/" + path;
    return base + path;
}

std::string post_json(const std::string& url, const std::string& body, const HttpOptions& options) {
    const auto parsed = split_url(url);
    httplib::Client client(parsed.origin);
    const auto timeout = std::chrono::milliseconds(options.timeout_ms);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);

    std::string last_error;
    int last_status = 0;
    std::string last_body;
    int backoff = options.initial_backoff_ms;
    for (int attempt = 0; attempt <= options.max_retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
            backoff *= 2;
        }
        auto result = client.Post(parsed.path, body, "application/json");
        if (!result) {
            last_error = "request to " + url + " failed: " + httplib::to_string(result.error());
            last_status = 0;
            continue;
        }
        if (result->status >= 200 && result->status < 300) return result->body;
        last_status = result->status;
        last_body = result->body;
        last_error = "request to " + url + " returned HTTP " + std::to_string(result->status);
        if (!retryable(result->status)) break;
    }
    throw BackendError(last_error, last_status, last_body);
}

}  // namespace trialscreen::detail
