#pragma once

#include <string>
#include <utility>

namespace gbias::http {

struct Response {
  int status = 0;  // 0 when the request never completed
  std::string body;
  std::string transport_error;
};

// Splits "https://host:8443/v1/x" into {"https://host:8443", "/v1/x"}.
std::pair<std::string, std::string> split_url(const std::string& url);

// POSTs a JSON body. `auth_env` names an environment variable whose value is
// sent as a bearer token; an empty name or unset variable sends none.
Response post_json(const std::string& url, const std::string& body, const std::string& auth_env, int timeout_s);

// 429, 5xx and transport failures are worth retrying; other statuses are not.
bool is_retryable(const Response& r);

}  // namespace gbias::http
