#pragma once

#include <map>
#include <mutex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

namespace revpkg {

// Pipeline stages used as audit scopes, in execution order.
inline constexpr int kAuditLedger = 1;
inline constexpr int kAuditAgenda = 2;
inline constexpr int kAuditVerify = 3;
inline constexpr int kAuditReading = 4;
inline constexpr int kAuditSynthesis = 5;

std::string sha256_hex(std::string_view data);

// Digest log of provider interactions. Entries are grouped by a logical
// scope (stage, item index) so that concurrent per-question calls still
// serialize in a deterministic order.
class AuditLog {
 public:
  struct Entry {
    std::string port;
    std::string operation;
    std::string mode;
    std::string request_sha256;
    std::string response_sha256;
    bool ok = true;
  };

  using ScopeKey = std::pair<int, int>;

  // Sets the calling thread's scope for the lifetime of the guard.
  class ScopeGuard {
   public:
    ScopeGuard(int stage, int item);
    ~ScopeGuard();
    ScopeGuard(const ScopeGuard&) = delete;
    ScopeGuard& operator=(const ScopeGuard&) = delete;

   private:
    ScopeKey previous_;
  };

  void record(std::string_view port, std::string_view operation,
              std::string_view mode, const nlohmann::json& request,
              const nlohmann::json& response, bool ok = true);

  std::size_t size() const;
  nlohmann::json to_json() const;

 private:
  mutable std::mutex mu_;
  std::map<ScopeKey, std::vector<Entry>> entries_;
};

}  // namespace revpkg
