#include "revpkg/verification.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include <fmt/format.h>

#include "revpkg/error.hpp"
#include "revpkg/ports.hpp"

namespace revpkg {

namespace {

constexpr std::pair<NoveltyTag, std::string_view> kTagNames[] = {
    {NoveltyTag::kSupported, "supported"},
    {NoveltyTag::kPartiallyOverlapping, "partially_overlapping"},
    {NoveltyTag::kSubstantiallyOverlapped, "substantially_overlapped"},
    {NoveltyTag::kUnclear, "unclear"},
};

}  // namespace

std::string normalize_label(std::string_view label) {
  std::string out;
  out.reserve(label.size());
  bool pending_space = false;
  for (char c : label) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

bool ClaimSetting::complete() const {
  return !normalize_label(task).empty() && !normalize_label(benchmark).empty() &&
         !normalize_label(primary_metric).empty();
}

std::string_view to_string(NoveltyTag tag) {
  for (const auto& [t, name] : kTagNames) {
    if (t == tag) return name;
  }
  return "unclear";
}

std::optional<NoveltyTag> parse_novelty_tag(std::string_view text) {
  for (const auto& [t, name] : kTagNames) {
    if (name == text) return t;
  }
  return std::nullopt;
}

RetrievalOutcome retrieve(const AgendaItem& question, RetrieverPort& retriever) {
  RetrievalOutcome out;
  auto raw = retriever.search(question);
  out.searches = 1;
  std::set<std::string> seen;
  for (auto& c : raw) {
    if (c.source_id.empty()) {
      throw Error(ErrorCode::kMalformedProviderOutput,
                  fmt::format("retrieval for '{}' returned a result without source_id",
                              question.question_id));
    }
    if (seen.insert(c.source_id).second) out.comparators.push_back(std::move(c));
  }
  return out;
}

GateVerdict comparability_gate(const ClaimSetting& claim, const Comparator& cand) {
  if (!claim.complete()) {
    throw Error(ErrorCode::kIncompleteSetting,
                "claim setting needs task, benchmark and primary metric");
  }
  const bool same =
      normalize_label(claim.task) == normalize_label(cand.setting.task) &&
      normalize_label(claim.benchmark) == normalize_label(cand.setting.benchmark) &&
      normalize_label(claim.primary_metric) ==
          normalize_label(cand.setting.primary_metric);
  return same ? GateVerdict::kComparable : GateVerdict::kBackground;
}

std::optional<NoveltyTag> consensus(const OverlapVerdicts& verdicts) {
  if (verdicts.empty()) return std::nullopt;
  const NoveltyTag first = verdicts.front();
  const bool unanimous = std::all_of(verdicts.begin(), verdicts.end(),
                                     [first](NoveltyTag t) { return t == first; });
  if (!unanimous) return std::nullopt;
  return first;
}

NoveltyTag assign_novelty_tag(bool claim_mappable, bool budget_met,
                              const std::vector<Comparator>& comparables,
                              std::optional<NoveltyTag> analyst_verdict) {
  if (!claim_mappable) return NoveltyTag::kUnclear;
  if (comparables.empty()) {
    return budget_met ? NoveltyTag::kSupported : NoveltyTag::kUnclear;
  }
  if (!analyst_verdict) return NoveltyTag::kUnclear;
  return *analyst_verdict;
}

VerificationResult verify(const AgendaItem& question, const AnchoredDocument& doc,
                          const RetrievalOutcome& retrieval, AnalystPort& analyst) {
  VerificationResult result;
  result.question_id = question.question_id;
  const ClaimProfile profile = analyst.profile_question(doc, question);
  if (profile.mappable && !profile.setting.complete()) {
    throw Error(ErrorCode::kMalformedProviderOutput,
                fmt::format("question '{}' is mappable but its setting is incomplete",
                            question.question_id));
  }

  std::vector<Comparator> comparables;
  for (const auto& c : retrieval.comparators) {
    if (profile.mappable &&
        comparability_gate(profile.setting, c) == GateVerdict::kComparable) {
      result.comparable_ids.push_back(c.source_id);
      comparables.push_back(c);
    } else {
      result.background_ids.push_back(c.source_id);
    }
  }

  std::optional<NoveltyTag> verdict;
  std::string verdict_note;
  if (profile.mappable && !comparables.empty()) {
    const OverlapVerdicts verdicts =
        analyst.assess_overlap(doc, question, profile.setting, comparables);
    if (std::find(verdicts.begin(), verdicts.end(), NoveltyTag::kUnclear) !=
        verdicts.end()) {
      verdict_note = "analyst marked evidence insufficient";
    } else {
      verdict = consensus(verdicts);
      if (!verdict) {
        verdict_note = verdicts.empty() ? "no analyst verdict"
                                        : "contradictory analyst verdicts";
      }
    }
  }
  const bool budget_met = retrieval.searches >= 1;
  result.tag = assign_novelty_tag(profile.mappable, budget_met, comparables, verdict);

  if (!profile.mappable) {
    result.rationale_text = "claim cannot be mapped to a checkable setting";
  } else if (comparables.empty()) {
    result.rationale_text =
        budget_met ? fmt::format("no comparable prior work among {} retrieved",
                                 retrieval.comparators.size())
                   : "no retrieval executed";
  } else {
    result.rationale_text =
        fmt::format("{} comparable, {} background; {}", result.comparable_ids.size(),
                    result.background_ids.size(),
                    verdict ? fmt::format("analyst verdict {}", to_string(*verdict))
                            : verdict_note);
  }
  return result;
}

void to_json(nlohmann::json& j, const NoveltyTag& t) { j = std::string(to_string(t)); }

void from_json(const nlohmann::json& j, NoveltyTag& t) {
  auto parsed = parse_novelty_tag(j.get<std::string>());
  if (!parsed) {
    throw Error(ErrorCode::kMalformedProviderOutput,
                fmt::format("unknown novelty tag '{}'", j.get<std::string>()));
  }
  t = *parsed;
}

void to_json(nlohmann::json& j, const ClaimSetting& s) {
  j = {{"task", s.task}, {"benchmark", s.benchmark}, {"metric", s.primary_metric}};
}

void from_json(const nlohmann::json& j, ClaimSetting& s) {
  s.task = j.value("task", std::string{});
  s.benchmark = j.value("benchmark", std::string{});
  s.primary_metric = j.value("metric", std::string{});
}

void to_json(nlohmann::json& j, const Comparator& c) {
  j = {{"source_id", c.source_id},
       {"title", c.title},
       {"task", c.setting.task},
       {"benchmark", c.setting.benchmark},
       {"metric", c.setting.primary_metric},
       {"secondary_meta", c.secondary_meta},
       {"snippets", c.evidence_snippets}};
}

void from_json(const nlohmann::json& j, Comparator& c) {
  j.at("source_id").get_to(c.source_id);
  c.title = j.value("title", std::string{});
  c.setting.task = j.value("task", std::string{});
  c.setting.benchmark = j.value("benchmark", std::string{});
  c.setting.primary_metric = j.value("metric", std::string{});
  c.secondary_meta.clear();
  if (auto it = j.find("secondary_meta"); it != j.end() && it->is_object()) {
    for (const auto& [k, v] : it->items()) {
      c.secondary_meta[k] = v.is_string() ? v.get<std::string>() : v.dump();
    }
  }
  c.evidence_snippets = j.value("snippets", std::vector<std::string>{});
}

void to_json(nlohmann::json& j, const ClaimProfile& p) {
  j = {{"mappable", p.mappable}, {"setting", p.setting}};
}

void from_json(const nlohmann::json& j, ClaimProfile& p) {
  p.mappable = j.value("mappable", false);
  p.setting = j.value("setting", ClaimSetting{});
}

void to_json(nlohmann::json& j, const VerificationResult& r) {
  j = {{"question_id", r.question_id},
       {"tag", r.tag},
       {"comparable_ids", r.comparable_ids},
       {"background_ids", r.background_ids},
       {"rationale", r.rationale_text}};
}

void from_json(const nlohmann::json& j, VerificationResult& r) {
  j.at("question_id").get_to(r.question_id);
  j.at("tag").get_to(r.tag);
  r.comparable_ids = j.value("comparable_ids", std::vector<std::string>{});
  r.background_ids = j.value("background_ids", std::vector<std::string>{});
  r.rationale_text = j.value("rationale", std::string{});
}

}  // namespace revpkg
