#pragma once

#include <string>

namespace trialscreen::detail {

struct HttpOptions {
    int timeout_ms = 30000;
    int max_retries = 3;
    int initial_backoff_ms = 200;
};

/// Appends `path` to a base URL, avoiding doubled slashes.
std::string join_url(const std::string& base, const std::string& path);

/// POSTs a JSON body and returns the 2xx response body. Connection failures,
/// 429 and 5xx responses are retried with exponential backoff; other statuses
/// fail at once. Throws BackendError when no attempt succeeds.
std::string post_json(const std::string& url, const std::string& body, const HttpOptions& options);

}  // namespace trialscreen::detail
