#pragma once

// End-to-end review run and run configuration.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "json.hpp"
#include "revpkg/annotations.hpp"
#include "revpkg/audit.hpp"
#include "revpkg/eval_ranking.hpp"
#include "revpkg/ports.hpp"
#include "revpkg/review_package.hpp"

namespace revpkg {

enum class PortMode { kStub, kLive };

struct PortConfig {
  PortMode mode = PortMode::kStub;
  std::string fixture;  // stub mode: fixture file
  HttpEndpoint endpoint;  // live mode
};

struct RunConfig {
  Budgets budgets;
  std::uint64_t seed = 0;
  int resamples = 1000;
  BtOptions bt;
  int max_visits = 2;
  unsigned threads = 1;
  std::optional<std::string> extra_category;
  LayoutParams layout;
  std::optional<std::string> doc_id;  // defaults to the input file name up to the first '.'
  PortConfig analyst;
  PortConfig retriever;
  PortConfig judge;
};

// Applies a JSON config object on top of `base` (see docs/formats.md).
// Relative fixture paths resolve against `base_dir`. Throws ConfigError.
RunConfig apply_config_json(RunConfig base, const nlohmann::json& config,
                            const std::filesystem::path& base_dir = {});
RunConfig load_config_file(RunConfig base, const std::string& path);

// Credentials only: REVPKG_API_KEY for every live port, overridden per port
// by REVPKG_ANALYST_API_KEY / REVPKG_RETRIEVER_API_KEY / REVPKG_JUDGE_API_KEY.
RunConfig apply_env(RunConfig base);

// Owns the transports and ports selected by a config.
class PortSet {
 public:
  PortSet(const RunConfig& config, AuditLog& log);
  ~PortSet();

  AnalystPort& analyst();
  RetrieverPort& retriever();
  JudgePort& judge();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct ReviewRun {
  AnchoredDocument doc;
  std::vector<LedgerEntry> ledger;
  std::vector<AgendaItem> agenda;
  std::vector<VerificationResult> verifications;
  std::vector<ProvisionalNote> notes;
  ReviewPackage package;
  GateResult gate;
  std::size_t reading_iterations = 0;
  nlohmann::json audit_log;
};

// Notes become annotations with sequential ids ann-001, ann-002, ...
// in note order. Throws MalformedProviderOutput when a note has no severity.
std::vector<Annotation> annotations_from_notes(
    const std::vector<ProvisionalNote>& notes,
    const std::map<std::string, Severity>& severity);

// Runs every stage up to and including the gate; does not write anything.
// Errors carry the failing stage as context.
ReviewRun run_review(const AnchoredDocument& doc, const RunConfig& config,
                     AnalystPort& analyst, RetrieverPort& retriever, AuditLog& log);

// Reads the block list, runs the pipeline with ports built from `config`,
// and writes the bundle. Throws NotReadyError without writing when the gate
// fails.
ReviewRun review_to_bundle(const std::string& doc_path, const RunConfig& config,
                           const std::filesystem::path& out_dir);

}  // namespace revpkg
