#include "revpkg/ledger.hpp"

#include <algorithm>
#include <limits>
#include <tuple>

#include <fmt/format.h>

#include "revpkg/error.hpp"
#include "revpkg/ports.hpp"

namespace revpkg {

namespace {

Error malformed(const std::string& what) {
  return Error(ErrorCode::kMalformedProviderOutput, what);
}

const LedgerEntry* find_entry(const std::vector<LedgerEntry>& ledger,
                              std::string_view claim_id) {
  for (const auto& e : ledger) {
    if (e.claim_id == claim_id) return &e;
  }
  return nullptr;
}

// Best (lowest) risk rank of any agenda item implicating the span.
int implication_rank(const Anchor& span, const std::vector<LedgerEntry>& ledger,
                     const std::vector<AgendaItem>& agenda) {
  int best = std::numeric_limits<int>::max();
  for (const auto& item : agenda) {
    if (item.risk_rank >= best) continue;
    bool hit = std::any_of(item.focus.begin(), item.focus.end(),
                           [&](const Anchor& a) { return span.intersects(a); });
    for (auto it = item.source_claims.begin();
         !hit && it != item.source_claims.end(); ++it) {
      const LedgerEntry* entry = find_entry(ledger, *it);
      if (entry == nullptr) continue;
      for (const auto* set : {&entry->evidence, &entry->contradictions}) {
        hit = hit || std::any_of(set->begin(), set->end(), [&](const Anchor& a) {
                return span.intersects(a);
              });
      }
    }
    if (hit) best = item.risk_rank;
  }
  return best;
}

}  // namespace

std::string_view to_string(ClaimStatus status) {
  return status == ClaimStatus::kConfirmed ? "confirmed" : "suspected";
}

ClaimStatus apply_status_rule(const LedgerEntry& entry, bool contradiction_found,
                              bool second_pass_done) {
  if (contradiction_found) return ClaimStatus::kConfirmed;
  if (entry.evidence.empty() && second_pass_done) return ClaimStatus::kConfirmed;
  return ClaimStatus::kSuspected;
}

std::vector<LedgerEntry> ledger_from_drafts(const AnchoredDocument& doc,
                                            const std::vector<ClaimDraft>& drafts) {
  std::vector<LedgerEntry> ledger;
  ledger.reserve(drafts.size());
  std::set<std::string> seen;
  for (const auto& draft : drafts) {
    if (draft.claim_id.empty()) throw malformed("claim without id");
    if (!seen.insert(draft.claim_id).second) {
      throw malformed(fmt::format("duplicate claim id '{}'", draft.claim_id));
    }
    if (draft.claim_text.empty()) {
      throw malformed(fmt::format("claim '{}' has empty text", draft.claim_id));
    }
    LedgerEntry entry;
    entry.claim_id = draft.claim_id;
    entry.claim_text = draft.claim_text;
    entry.risk_text = draft.risk_text;
    for (const auto* anchors : {&draft.evidence, &draft.contradictions}) {
      for (const auto& a : *anchors) {
        if (!doc.is_valid(a)) {
          throw malformed(fmt::format("claim '{}' cites anchor {} outside the document",
                                      draft.claim_id, to_string(a)));
        }
      }
    }
    entry.evidence.insert(draft.evidence.begin(), draft.evidence.end());
    entry.contradictions.insert(draft.contradictions.begin(),
                                draft.contradictions.end());
    entry.status = apply_status_rule(entry, entry.contradiction_found(), false);
    ledger.push_back(std::move(entry));
  }
  return ledger;
}

std::vector<LedgerEntry> build_ledger(const AnchoredDocument& doc,
                                      AnalystPort& analyst) {
  return ledger_from_drafts(doc, analyst.pre_review(doc));
}

std::vector<AgendaItem> one_to_one_agenda(const std::vector<LedgerEntry>& ledger) {
  std::vector<AgendaItem> agenda;
  for (const auto& entry : ledger) {
    if (entry.status != ClaimStatus::kSuspected) continue;
    AgendaItem item;
    item.question_id = fmt::format("Q{}", agenda.size() + 1);
    item.question_text =
        fmt::format("Does the claim hold under scrutiny: {}", entry.claim_text);
    item.source_claims = {entry.claim_id};
    item.risk_rank = static_cast<int>(agenda.size()) + 1;
    agenda.push_back(std::move(item));
  }
  return agenda;
}

std::vector<AgendaItem> validate_agenda(const std::vector<LedgerEntry>& ledger,
                                        std::vector<AgendaItem> plan) {
  std::set<std::string> ids;
  std::set<int> ranks;
  std::set<std::string> listed_claims;
  for (const auto& item : plan) {
    if (item.question_id.empty()) throw malformed("agenda item without id");
    if (!ids.insert(item.question_id).second) {
      throw malformed(fmt::format("duplicate question id '{}'", item.question_id));
    }
    if (item.question_text.empty()) {
      throw malformed(fmt::format("question '{}' has empty text", item.question_id));
    }
    if (item.risk_rank < 1 || !ranks.insert(item.risk_rank).second) {
      throw malformed(fmt::format("question '{}' has duplicate or invalid risk rank {}",
                                  item.question_id, item.risk_rank));
    }
    for (const auto& claim : item.source_claims) {
      const LedgerEntry* entry = find_entry(ledger, claim);
      if (entry == nullptr) {
        throw malformed(fmt::format("question '{}' cites unknown claim '{}'",
                                    item.question_id, claim));
      }
      if (entry->status != ClaimStatus::kSuspected) {
        throw malformed(fmt::format("question '{}' cites confirmed claim '{}'",
                                    item.question_id, claim));
      }
      listed_claims.insert(claim);
    }
  }
  std::sort(plan.begin(), plan.end(),
            [](const AgendaItem& a, const AgendaItem& b) { return a.risk_rank < b.risk_rank; });

  // Evidence-free suspected claims are high-risk gaps: list them first.
  std::vector<AgendaItem> forced;
  for (const auto& entry : ledger) {
    if (entry.status != ClaimStatus::kSuspected || !entry.evidence.empty() ||
        listed_claims.contains(entry.claim_id)) {
      continue;
    }
    AgendaItem item;
    item.question_id = fmt::format("gap-{}", entry.claim_id);
    item.question_text = fmt::format(
        "Where does the manuscript support the claim: {}", entry.claim_text);
    item.source_claims = {entry.claim_id};
    forced.push_back(std::move(item));
  }
  std::vector<AgendaItem> agenda;
  agenda.reserve(forced.size() + plan.size());
  for (auto& item : forced) agenda.push_back(std::move(item));
  for (auto& item : plan) agenda.push_back(std::move(item));
  for (std::size_t i = 0; i < agenda.size(); ++i) {
    agenda[i].risk_rank = static_cast<int>(i) + 1;
  }
  return agenda;
}

std::vector<AgendaItem> derive_agenda(const AnchoredDocument& doc,
                                      const std::vector<LedgerEntry>& ledger,
                                      AnalystPort& analyst) {
  const bool any_suspected =
      std::any_of(ledger.begin(), ledger.end(),
                  [](const auto& e) { return e.status == ClaimStatus::kSuspected; });
  if (!any_suspected) return {};
  auto plan = analyst.plan_agenda(doc, ledger);
  if (!plan) return validate_agenda(ledger, one_to_one_agenda(ledger));
  return validate_agenda(ledger, std::move(*plan));
}

std::vector<Anchor> paragraph_spans(const AnchoredDocument& doc) {
  std::vector<Anchor> spans;
  for (int page : doc.page_numbers()) {
    const auto& lines = doc.lines(page);
    int start = 1;
    for (int k = 2; k <= static_cast<int>(lines.size()) + 1; ++k) {
      const bool boundary =
          k > static_cast<int>(lines.size()) ||
          lines[static_cast<std::size_t>(k - 1)].kind !=
              lines[static_cast<std::size_t>(k - 2)].kind;
      if (boundary) {
        spans.push_back({page, start, k - 1});
        start = k;
      }
    }
  }
  return spans;
}

ReadCursor::ReadCursor(const AnchoredDocument& doc, int max_visits)
    : spans_(paragraph_spans(doc)), max_visits_(std::max(1, max_visits)) {}

int ReadCursor::visits(const Anchor& span) const {
  auto it = visits_.find(span);
  return it == visits_.end() ? 0 : it->second;
}

void ReadCursor::mark_visited(const Anchor& span) {
  ++visits_[span];
  ++total_visits_;
}

bool ReadCursor::exhausted() const {
  return std::all_of(spans_.begin(), spans_.end(),
                     [&](const Anchor& s) { return visits(s) >= max_visits_; });
}

bool ReadCursor::page_second_passed(int page) const {
  bool any = false;
  for (const auto& s : spans_) {
    if (s.page != page) continue;
    any = true;
    if (visits(s) < 2) return false;
  }
  return any;
}

bool ReadCursor::document_second_passed() const {
  return !spans_.empty() &&
         std::all_of(spans_.begin(), spans_.end(),
                     [&](const Anchor& s) { return visits(s) >= 2; });
}

std::vector<Anchor> pending_spans(const std::vector<LedgerEntry>& ledger,
                                  const std::vector<AgendaItem>& agenda,
                                  const ReadCursor& cursor) {
  using Key = std::tuple<int, int, int, int>;
  std::vector<std::pair<Key, Anchor>> keyed;
  for (const auto& span : cursor.spans()) {
    const int visits = cursor.visits(span);
    if (visits >= cursor.max_visits()) continue;
    keyed.push_back({{visits, implication_rank(span, ledger, agenda), span.page,
                      span.k_start},
                     span});
  }
  std::sort(keyed.begin(), keyed.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<Anchor> out;
  out.reserve(keyed.size());
  for (auto& [_, span] : keyed) out.push_back(span);
  return out;
}

std::optional<Anchor> select_span(const AnchoredDocument& doc,
                                  const std::vector<LedgerEntry>& ledger,
                                  const std::vector<AgendaItem>& agenda,
                                  ReadCursor& cursor) {
  (void)doc;
  auto pending = pending_spans(ledger, agenda, cursor);
  if (pending.empty()) return std::nullopt;
  cursor.mark_visited(pending.front());
  return pending.front();
}

LedgerUpdate update_ledger(const std::vector<LedgerEntry>& ledger,
                           const std::vector<ProvisionalNote>& notes_so_far,
                           const Anchor& span, const SpanFindings& findings,
                           bool second_pass_done) {
  LedgerUpdate out{ledger, notes_so_far};
  for (const auto& f : findings.evidence) {
    if (!span.contains(f.anchor)) {
      throw Error(ErrorCode::kEvidenceOutOfSpan,
                  fmt::format("evidence {} for claim '{}' lies outside read span {}",
                              to_string(f.anchor), f.claim_id, to_string(span)));
    }
    auto it = std::find_if(out.ledger.begin(), out.ledger.end(),
                           [&](const LedgerEntry& e) { return e.claim_id == f.claim_id; });
    if (it == out.ledger.end()) {
      throw malformed(fmt::format("evidence cites unknown claim '{}'", f.claim_id));
    }
    if (f.relation == EvidenceRelation::kSupports) {
      it->evidence.insert(f.anchor);
    } else {
      it->contradictions.insert(f.anchor);
    }
  }
  for (const auto& note : findings.notes) {
    if (!span.contains(note.anchor)) {
      throw Error(ErrorCode::kEvidenceOutOfSpan,
                  fmt::format("note '{}' at {} lies outside read span {}", note.key,
                              to_string(note.anchor), to_string(span)));
    }
    if (note.key.empty()) throw malformed("provisional note without key");
    const bool known = std::any_of(out.notes.begin(), out.notes.end(),
                                   [&](const auto& n) { return n.key == note.key; });
    if (!known) out.notes.push_back(note);
  }
  for (auto& entry : out.ledger) {
    if (entry.status == ClaimStatus::kConfirmed) continue;
    entry.status = apply_status_rule(entry, entry.contradiction_found(),
                                     second_pass_done);
  }
  return out;
}

ReadingResult run_reading_loop(const AnchoredDocument& doc,
                               std::vector<LedgerEntry> ledger,
                               const std::vector<AgendaItem>& agenda,
                               AnalystPort& analyst, int max_visits) {
  ReadCursor cursor(doc, max_visits);
  ReadingResult result{std::move(ledger), {}, 0};
  while (auto span = select_span(doc, result.ledger, agenda, cursor)) {
    AuditLog::ScopeGuard scope(kAuditReading, static_cast<int>(result.iterations));
    const SpanFindings findings =
        analyst.read_span(doc, *span, cursor.visits(*span), result.ledger);
    auto update = update_ledger(result.ledger, result.notes, *span, findings,
                                cursor.document_second_passed());
    result.ledger = std::move(update.ledger);
    result.notes = std::move(update.notes);
    ++result.iterations;
  }
  const bool second_pass = cursor.document_second_passed();
  for (auto& entry : result.ledger) {
    if (entry.status == ClaimStatus::kConfirmed) continue;
    entry.status = apply_status_rule(entry, entry.contradiction_found(), second_pass);
  }
  return result;
}

// ---- serialization ----------------------------------------------------------

void to_json(nlohmann::json& j, const LedgerEntry& e) {
  j = {{"claim_id", e.claim_id},
       {"claim_text", e.claim_text},
       {"evidence", std::vector<Anchor>(e.evidence.begin(), e.evidence.end())},
       {"contradictions",
        std::vector<Anchor>(e.contradictions.begin(), e.contradictions.end())},
       {"risk_text", e.risk_text},
       {"status", std::string(to_string(e.status))}};
}

void from_json(const nlohmann::json& j, LedgerEntry& e) {
  j.at("claim_id").get_to(e.claim_id);
  j.at("claim_text").get_to(e.claim_text);
  auto evidence = j.value("evidence", std::vector<Anchor>{});
  e.evidence = {evidence.begin(), evidence.end()};
  auto contradictions = j.value("contradictions", std::vector<Anchor>{});
  e.contradictions = {contradictions.begin(), contradictions.end()};
  e.risk_text = j.value("risk_text", std::string{});
  e.status = j.value("status", std::string("suspected")) == "confirmed"
                 ? ClaimStatus::kConfirmed
                 : ClaimStatus::kSuspected;
}

void to_json(nlohmann::json& j, const AgendaItem& a) {
  j = {{"question_id", a.question_id},
       {"question_text", a.question_text},
       {"source_claims", std::vector<std::string>(a.source_claims.begin(),
                                                  a.source_claims.end())},
       {"risk_rank", a.risk_rank},
       {"focus", a.focus}};
}

void from_json(const nlohmann::json& j, AgendaItem& a) {
  j.at("question_id").get_to(a.question_id);
  j.at("question_text").get_to(a.question_text);
  auto claims = j.value("source_claims", std::vector<std::string>{});
  a.source_claims = {claims.begin(), claims.end()};
  j.at("risk_rank").get_to(a.risk_rank);
  a.focus = j.value("focus", std::vector<Anchor>{});
}

void to_json(nlohmann::json& j, const ClaimDraft& d) {
  j = {{"claim_id", d.claim_id},         {"claim_text", d.claim_text},
       {"evidence", d.evidence},         {"contradictions", d.contradictions},
       {"risk_text", d.risk_text}};
}

void from_json(const nlohmann::json& j, ClaimDraft& d) {
  j.at("claim_id").get_to(d.claim_id);
  j.at("claim_text").get_to(d.claim_text);
  d.evidence = j.value("evidence", std::vector<Anchor>{});
  d.contradictions = j.value("contradictions", std::vector<Anchor>{});
  d.risk_text = j.value("risk_text", std::string{});
}

void to_json(nlohmann::json& j, const ProvisionalNote& n) {
  j = {{"key", n.key},          {"anchor", n.anchor},
       {"category", n.category}, {"summary", n.summary},
       {"risk_text", n.risk_text}, {"repair_text", n.repair_text},
       {"body", n.body}};
  if (n.claim_id) j["claim_id"] = *n.claim_id;
}

void from_json(const nlohmann::json& j, ProvisionalNote& n) {
  j.at("key").get_to(n.key);
  j.at("anchor").get_to(n.anchor);
  n.category = j.value("category", std::string{});
  n.summary = j.value("summary", std::string{});
  n.risk_text = j.value("risk_text", std::string{});
  n.repair_text = j.value("repair_text", std::string{});
  n.body = j.value("body", std::string{});
  if (auto it = j.find("claim_id"); it != j.end() && it->is_string()) {
    n.claim_id = it->get<std::string>();
  } else {
    n.claim_id.reset();
  }
}

void to_json(nlohmann::json& j, const EvidenceFinding& f) {
  j = {{"claim_id", f.claim_id},
       {"anchor", f.anchor},
       {"relation", f.relation == EvidenceRelation::kSupports ? "supports"
                                                              : "contradicts"}};
}

void from_json(const nlohmann::json& j, EvidenceFinding& f) {
  j.at("claim_id").get_to(f.claim_id);
  j.at("anchor").get_to(f.anchor);
  const auto relation = j.value("relation", std::string("supports"));
  if (relation == "supports") {
    f.relation = EvidenceRelation::kSupports;
  } else if (relation == "contradicts") {
    f.relation = EvidenceRelation::kContradicts;
  } else {
    throw malformed(fmt::format("unknown evidence relation '{}'", relation));
  }
}

void to_json(nlohmann::json& j, const SpanFindings& f) {
  j = {{"evidence", f.evidence}, {"notes", f.notes}};
}

void from_json(const nlohmann::json& j, SpanFindings& f) {
  f.evidence = j.value("evidence", std::vector<EvidenceFinding>{});
  f.notes = j.value("notes", std::vector<ProvisionalNote>{});
}

}  // namespace revpkg
