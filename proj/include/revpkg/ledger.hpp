#pragma once

// Stage I: claim-evidence-risk ledger, investigation agenda, and the
// page-wise re-reading loop that grows ledger evidence span by span.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "revpkg/doc_model.hpp"

namespace revpkg {

class AnalystPort;

enum class ClaimStatus { kSuspected, kConfirmed };

std::string_view to_string(ClaimStatus status);

struct LedgerEntry {
  std::string claim_id;
  std::string claim_text;
  std::set<Anchor> evidence;
  // Anchors exhibiting a direct internal contradiction; sticky once found.
  std::set<Anchor> contradictions;
  std::string risk_text;
  ClaimStatus status = ClaimStatus::kSuspected;

  bool contradiction_found() const { return !contradictions.empty(); }

  friend bool operator==(const LedgerEntry&, const LedgerEntry&) = default;
};

struct AgendaItem {
  std::string question_id;
  std::string question_text;
  std::set<std::string> source_claims;
  int risk_rank = 0;  // 1 = highest scientific risk
  // Extra spans the analyst flags for this question, beyond claim evidence.
  std::vector<Anchor> focus;

  friend bool operator==(const AgendaItem&, const AgendaItem&) = default;
};

// Raw Stage I output before validation and status assignment.
struct ClaimDraft {
  std::string claim_id;
  std::string claim_text;
  std::vector<Anchor> evidence;
  std::vector<Anchor> contradictions;
  std::string risk_text;
};

// Draft annotation produced while reading a span; severity is assigned in
// Stage II.
struct ProvisionalNote {
  std::string key;  // stable analyst key; re-reads with the same key dedupe
  Anchor anchor;
  std::string category;
  std::string summary;
  std::string risk_text;
  std::string repair_text;
  std::string body;
  std::optional<std::string> claim_id;

  friend bool operator==(const ProvisionalNote&, const ProvisionalNote&) = default;
};

enum class EvidenceRelation { kSupports, kContradicts };

struct EvidenceFinding {
  std::string claim_id;
  Anchor anchor;
  EvidenceRelation relation = EvidenceRelation::kSupports;
};

struct SpanFindings {
  std::vector<EvidenceFinding> evidence;
  std::vector<ProvisionalNote> notes;
};

// confirmed iff a contradiction was found, or the claim has no evidence and
// the document has been read a second time.
ClaimStatus apply_status_rule(const LedgerEntry& entry, bool contradiction_found,
                              bool second_pass_done);

// Throws ProviderError (propagated) or MalformedProviderOutput.
std::vector<LedgerEntry> build_ledger(const AnchoredDocument& doc,
                                      AnalystPort& analyst);

// Validates analyst-supplied claim drafts against the document.
std::vector<LedgerEntry> ledger_from_drafts(const AnchoredDocument& doc,
                                            const std::vector<ClaimDraft>& drafts);

// One question per suspected entry, ranked in ledger order.
std::vector<AgendaItem> one_to_one_agenda(const std::vector<LedgerEntry>& ledger);

// Asks the analyst to cluster and rank suspected entries, then validates the
// plan. Suspected claims with empty evidence that the plan leaves out are
// force-listed ahead of the analyst's items.
std::vector<AgendaItem> derive_agenda(const AnchoredDocument& doc,
                                      const std::vector<LedgerEntry>& ledger,
                                      AnalystPort& analyst);
std::vector<AgendaItem> validate_agenda(const std::vector<LedgerEntry>& ledger,
                                        std::vector<AgendaItem> plan);

// Paragraph-level spans: maximal runs of same-kind lines on a page.
std::vector<Anchor> paragraph_spans(const AnchoredDocument& doc);

class ReadCursor {
 public:
  explicit ReadCursor(const AnchoredDocument& doc, int max_visits = 2);

  const std::vector<Anchor>& spans() const { return spans_; }
  int visits(const Anchor& span) const;
  int max_visits() const { return max_visits_; }
  void mark_visited(const Anchor& span);
  bool exhausted() const;
  // A page is second-passed once each of its spans has been read twice.
  bool page_second_passed(int page) const;
  bool document_second_passed() const;
  std::size_t total_visits() const { return total_visits_; }

 private:
  std::vector<Anchor> spans_;
  std::map<Anchor, int> visits_;
  int max_visits_;
  std::size_t total_visits_ = 0;
};

// Candidate spans in the order select_span would return them.
std::vector<Anchor> pending_spans(const std::vector<LedgerEntry>& ledger,
                                  const std::vector<AgendaItem>& agenda,
                                  const ReadCursor& cursor);

// Picks the next span (fewest visits, then implicated by the best-ranked
// agenda item, then page order) and marks it visited. nullopt signals that
// reading is complete.
std::optional<Anchor> select_span(const AnchoredDocument& doc,
                                  const std::vector<LedgerEntry>& ledger,
                                  const std::vector<AgendaItem>& agenda,
                                  ReadCursor& cursor);

struct LedgerUpdate {
  std::vector<LedgerEntry> ledger;
  std::vector<ProvisionalNote> notes;
};

// Merges findings from one read span. Evidence only grows; statuses move
// only through apply_status_rule and never from confirmed back to
// suspected. Throws EvidenceOutOfSpan or MalformedProviderOutput.
LedgerUpdate update_ledger(const std::vector<LedgerEntry>& ledger,
                           const std::vector<ProvisionalNote>& notes_so_far,
                           const Anchor& span, const SpanFindings& findings,
                           bool second_pass_done);

struct ReadingResult {
  std::vector<LedgerEntry> ledger;
  std::vector<ProvisionalNote> notes;
  std::size_t iterations = 0;
};

// Drives select_span / analyst read / update_ledger until every span has
// been read max_visits times, then applies the status rule once more with
// the final second-pass state.
ReadingResult run_reading_loop(const AnchoredDocument& doc,
                               std::vector<LedgerEntry> ledger,
                               const std::vector<AgendaItem>& agenda,
                               AnalystPort& analyst, int max_visits = 2);

void to_json(nlohmann::json& j, const LedgerEntry& e);
void from_json(const nlohmann::json& j, LedgerEntry& e);
void to_json(nlohmann::json& j, const AgendaItem& a);
void from_json(const nlohmann::json& j, AgendaItem& a);
void to_json(nlohmann::json& j, const ClaimDraft& d);
void from_json(const nlohmann::json& j, ClaimDraft& d);
void to_json(nlohmann::json& j, const ProvisionalNote& n);
void from_json(const nlohmann::json& j, ProvisionalNote& n);
void to_json(nlohmann::json& j, const EvidenceFinding& f);
void from_json(const nlohmann::json& j, EvidenceFinding& f);
void to_json(nlohmann::json& j, const SpanFindings& f);
void from_json(const nlohmann::json& j, SpanFindings& f);

}  // namespace revpkg
