#include "revpkg/audit.hpp"

#include <array>
#include <memory>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "revpkg/error.hpp"

namespace revpkg {

namespace {

thread_local AuditLog::ScopeKey current_scope{0, 0};

}  // namespace

std::string sha256_hex(std::string_view data) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(),
                                                              EVP_MD_CTX_free);
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest.data(), &len) != 1) {
    throw Error(ErrorCode::kIOError, "sha256 failed");
  }
  std::string hex;
  hex.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

AuditLog::ScopeGuard::ScopeGuard(int stage, int item) : previous_(current_scope) {
  current_scope = {stage, item};
}

AuditLog::ScopeGuard::~ScopeGuard() { current_scope = previous_; }

void AuditLog::record(std::string_view port, std::string_view operation,
                      std::string_view mode, const nlohmann::json& request,
                      const nlohmann::json& response, bool ok) {
  Entry entry{std::string(port), std::string(operation), std::string(mode),
              sha256_hex(request.dump()), sha256_hex(response.dump()), ok};
  std::lock_guard lock(mu_);
  entries_[current_scope].push_back(std::move(entry));
}

std::size_t AuditLog::size() const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (const auto& [_, v] : entries_) n += v.size();
  return n;
}

nlohmann::json AuditLog::to_json() const {
  std::lock_guard lock(mu_);
  nlohmann::json out = nlohmann::json::array();
  for (const auto& [scope, entries] : entries_) {
    for (const auto& e : entries) {
      out.push_back({{"scope", {scope.first, scope.second}},
                     {"port", e.port},
                     {"operation", e.operation},
                     {"mode", e.mode},
                     {"request_sha256", e.request_sha256},
                     {"response_sha256", e.response_sha256},
                     {"ok", e.ok}});
    }
  }
  return out;
}

}  // namespace revpkg
