#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include <fmt/format.h>

#include "revpkg/error.hpp"
#include "revpkg/ports.hpp"

namespace revpkg {

struct HttpTransport::Impl {
  HttpEndpoint endpoint;
  std::string port;
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path prefix without trailing slash
};

HttpTransport::HttpTransport(HttpEndpoint endpoint, std::string port)
    : impl_(std::make_unique<Impl>()) {
  impl_->port = std::move(port);
  std::string url = endpoint.base_url;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::kConfigError,
                fmt::format("endpoint '{}' needs a scheme", endpoint.base_url));
  }
  const auto path_start = url.find('/', scheme_end + 3);
  impl_->origin = url.substr(0, path_start);
  if (path_start != std::string::npos) {
    impl_->prefix = url.substr(path_start);
    while (!impl_->prefix.empty() && impl_->prefix.back() == '/') impl_->prefix.pop_back();
  }
  impl_->endpoint = std::move(endpoint);
}

HttpTransport::~HttpTransport() = default;

nlohmann::json HttpTransport::call(std::string_view operation,
                                   const nlohmann::json& request) {
  httplib::Client client(impl_->origin);
  const auto ms = impl_->endpoint.timeout.count();
  client.set_connection_timeout(ms / 1000, (ms % 1000) * 1000);
  client.set_read_timeout(ms / 1000, (ms % 1000) * 1000);
  client.set_write_timeout(ms / 1000, (ms % 1000) * 1000);
  if (!impl_->endpoint.api_key.empty()) {
    client.set_bearer_token_auth(impl_->endpoint.api_key);
  }

  const std::string path = fmt::format("{}/{}/{}", impl_->prefix, impl_->port, operation);
  const nlohmann::json body = {{"operation", operation}, {"request", request}};
  auto res = client.Post(path, body.dump(), "application/json");
  if (!res) {
    throw Error(ErrorCode::kProviderError,
                fmt::format("{} {}: {}", impl_->port, operation,
                            httplib::to_string(res.error())));
  }
  if (res->status < 200 || res->status >= 300) {
    throw Error(ErrorCode::kProviderError,
                fmt::format("{} {}: HTTP {}", impl_->port, operation, res->status));
  }
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::kMalformedProviderOutput,
                fmt::format("{} {}: response is not JSON", impl_->port, operation));
  }
}

}  // namespace revpkg
