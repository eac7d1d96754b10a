#pragma once

// Stage II: agenda-driven retrieval, the matched-setting comparability gate
// and conservative novelty tags.

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "revpkg/ledger.hpp"

namespace revpkg {

class AnalystPort;
class RetrieverPort;

struct ClaimSetting {
  std::string task;
  std::string benchmark;
  std::string primary_metric;

  bool complete() const;

  friend bool operator==(const ClaimSetting&, const ClaimSetting&) = default;
};

// Case-folded, whitespace-collapsed, trimmed label.
std::string normalize_label(std::string_view label);

struct Comparator {
  std::string source_id;
  std::string title;
  ClaimSetting setting;
  std::map<std::string, std::string> secondary_meta;
  std::vector<std::string> evidence_snippets;

  friend bool operator==(const Comparator&, const Comparator&) = default;
};

enum class NoveltyTag {
  kSupported,
  kPartiallyOverlapping,
  kSubstantiallyOverlapped,
  kUnclear,
};

std::string_view to_string(NoveltyTag tag);
std::optional<NoveltyTag> parse_novelty_tag(std::string_view text);

enum class GateVerdict { kComparable, kBackground };

// What the analyst reports about a question before verification.
struct ClaimProfile {
  bool mappable = false;
  ClaimSetting setting;
};

// Per-comparator overlap judgments; mixed tags mean contradictory evidence.
using OverlapVerdicts = std::vector<NoveltyTag>;

struct VerificationResult {
  std::string question_id;
  NoveltyTag tag = NoveltyTag::kUnclear;
  std::vector<std::string> comparable_ids;
  std::vector<std::string> background_ids;
  std::string rationale_text;

  friend bool operator==(const VerificationResult&,
                         const VerificationResult&) = default;
};

struct RetrievalOutcome {
  std::vector<Comparator> comparators;
  int searches = 0;  // retriever calls made for this question
};

// One retriever call; results deduplicated by source_id (first wins).
// Throws ProviderError; empty results are fine.
RetrievalOutcome retrieve(const AgendaItem& question, RetrieverPort& retriever);

// Throws IncompleteSetting when the claim setting has an empty field.
GateVerdict comparability_gate(const ClaimSetting& claim, const Comparator& cand);

// Collapses per-comparator verdicts: empty -> nullopt, mixed -> nullopt
// (contradictory), unanimous -> that tag.
std::optional<NoveltyTag> consensus(const OverlapVerdicts& verdicts);

NoveltyTag assign_novelty_tag(bool claim_mappable, bool budget_met,
                              const std::vector<Comparator>& comparables,
                              std::optional<NoveltyTag> analyst_verdict);

VerificationResult verify(const AgendaItem& question, const AnchoredDocument& doc,
                          const RetrievalOutcome& retrieval, AnalystPort& analyst);

void to_json(nlohmann::json& j, const ClaimSetting& s);
void from_json(const nlohmann::json& j, ClaimSetting& s);
void to_json(nlohmann::json& j, const Comparator& c);
void from_json(const nlohmann::json& j, Comparator& c);
void to_json(nlohmann::json& j, const ClaimProfile& p);
void from_json(const nlohmann::json& j, ClaimProfile& p);
void to_json(nlohmann::json& j, const VerificationResult& r);
void from_json(const nlohmann::json& j, VerificationResult& r);
void to_json(nlohmann::json& j, const NoveltyTag& t);
void from_json(const nlohmann::json& j, NoveltyTag& t);

}  // namespace revpkg
