#include "revpkg/ports.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include <fmt/format.h>

#include "revpkg/error.hpp"
#include "revpkg/eval_coverage.hpp"

namespace revpkg {

using nlohmann::json;

namespace {

json lines_json(const AnchoredDocument& doc, const Anchor& span) {
  json out = json::array();
  int k = span.k_start;
  for (const Line& line : doc.read(span)) {
    out.push_back({{"k", k++}, {"kind", to_string(line.kind)}, {"text", line.text}});
  }
  return out;
}

json document_json(const AnchoredDocument& doc) {
  json pages = json::array();
  for (int p : doc.page_numbers()) {
    pages.push_back({{"page", p},
                     {"lines", lines_json(doc, Anchor{p, 1, doc.line_count(p)})}});
  }
  return {{"doc_id", doc.id()}, {"pages", std::move(pages)}};
}

// Decodes a provider response; any shape mismatch is a malformed output.
template <typename T, typename F>
T decode(std::string_view operation, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedProviderOutput,
                fmt::format("{}: unexpected response shape: {}", operation, e.what()));
  }
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

Error fixture_error(const std::string& what) {
  return Error(ErrorCode::kProviderError, what);
}

}  // namespace

json AuditedTransport::call(std::string_view operation, const json& request) {
  try {
    json response = inner_.call(operation, request);
    log_.record(port_, operation, inner_.mode(), request, response, true);
    return response;
  } catch (const Error& e) {
    log_.record(port_, operation, inner_.mode(), request, json(e.what()), false);
    throw;
  }
}

// ---- transport-backed ports ----------------------------------------------

std::vector<ClaimDraft> TransportAnalyst::pre_review(const AnchoredDocument& doc) {
  const json resp = transport_.call("pre_review", {{"document", document_json(doc)}});
  return decode<std::vector<ClaimDraft>>("pre_review", [&] {
    return resp.at("claims").get<std::vector<ClaimDraft>>();
  });
}

std::optional<std::vector<AgendaItem>> TransportAnalyst::plan_agenda(
    const AnchoredDocument& doc, const std::vector<LedgerEntry>& ledger) {
  const json resp =
      transport_.call("plan_agenda", {{"doc_id", doc.id()}, {"ledger", ledger}});
  return decode<std::optional<std::vector<AgendaItem>>>(
      "plan_agenda", [&]() -> std::optional<std::vector<AgendaItem>> {
        auto it = resp.find("agenda");
        if (it == resp.end() || it->is_null()) return std::nullopt;
        return it->get<std::vector<AgendaItem>>();
      });
}

ClaimProfile TransportAnalyst::profile_question(const AnchoredDocument& doc,
                                                const AgendaItem& question) {
  const json resp =
      transport_.call("profile_question", {{"doc_id", doc.id()}, {"question", question}});
  return decode<ClaimProfile>("profile_question", [&] { return resp.get<ClaimProfile>(); });
}

OverlapVerdicts TransportAnalyst::assess_overlap(const AnchoredDocument& doc,
                                                 const AgendaItem& question,
                                                 const ClaimSetting& setting,
                                                 const std::vector<Comparator>& comparables) {
  const json resp = transport_.call("assess_overlap", {{"doc_id", doc.id()},
                                                       {"question", question},
                                                       {"setting", setting},
                                                       {"comparables", comparables}});
  return decode<OverlapVerdicts>("assess_overlap", [&] {
    return resp.at("verdicts").get<OverlapVerdicts>();
  });
}

SpanFindings TransportAnalyst::read_span(const AnchoredDocument& doc, const Anchor& span,
                                         int visit,
                                         const std::vector<LedgerEntry>& ledger) {
  const json resp = transport_.call("read_span", {{"doc_id", doc.id()},
                                                  {"span", span},
                                                  {"visit", visit},
                                                  {"lines", lines_json(doc, span)},
                                                  {"ledger", ledger}});
  return decode<SpanFindings>("read_span", [&] { return resp.get<SpanFindings>(); });
}

std::map<std::string, Severity> TransportAnalyst::assign_severity(
    const AnchoredDocument& doc, const std::vector<ProvisionalNote>& notes,
    const std::vector<LedgerEntry>& ledger,
    const std::vector<VerificationResult>& verifications) {
  const json resp = transport_.call("assign_severity", {{"doc_id", doc.id()},
                                                        {"notes", notes},
                                                        {"ledger", ledger},
                                                        {"verifications", verifications}});
  return decode<std::map<std::string, Severity>>("assign_severity", [&] {
    return resp.at("severity").get<std::map<std::string, Severity>>();
  });
}

StructuredReport TransportAnalyst::write_report(
    const AnchoredDocument& doc, const std::vector<LedgerEntry>& ledger,
    const std::vector<VerificationResult>& verifications,
    const std::vector<Annotation>& annotations) {
  const json resp = transport_.call("write_report", {{"doc_id", doc.id()},
                                                     {"ledger", ledger},
                                                     {"verifications", verifications},
                                                     {"annotations", annotations}});
  return decode<StructuredReport>("write_report",
                                  [&] { return resp.get<StructuredReport>(); });
}

std::vector<Comparator> TransportRetriever::search(const AgendaItem& question) {
  const json resp = transport_.call(
      "search", {{"question_id", question.question_id},
                 {"question_text", question.question_text}});
  return decode<std::vector<Comparator>>("search", [&] {
    return resp.at("results").get<std::vector<Comparator>>();
  });
}

std::string TransportJudge::judge_coverage(std::string_view paper_id,
                                           const std::vector<CanonicalIssue>& issues,
                                           std::string_view review_text) {
  const json resp = transport_.call(
      "judge_coverage",
      {{"paper_id", paper_id}, {"issues", issues}, {"review", review_text}});
  // Raw text is parsed downstream so bad output becomes MISSING labels.
  if (auto it = resp.find("raw"); it != resp.end() && it->is_string()) {
    return it->get<std::string>();
  }
  return resp.dump();
}

std::map<std::string, std::string> TransportJudge::rank_reviews(
    std::string_view paper_id, const std::map<std::string, std::string>& reviews) {
  const json resp =
      transport_.call("rank_reviews", {{"paper_id", paper_id}, {"reviews", reviews}});
  return decode<std::map<std::string, std::string>>("rank_reviews", [&] {
    return resp.at("chains").get<std::map<std::string, std::string>>();
  });
}

// ---- fixtures --------------------------------------------------------------

AnalystFixture AnalystFixture::from_file(const std::string& path) {
  return AnalystFixture(read_json_file(path));
}

const json& AnalystFixture::document(const json& request) const {
  std::string id;
  if (auto it = request.find("doc_id"); it != request.end()) {
    id = it->get<std::string>();
  } else if (auto d = request.find("document"); d != request.end()) {
    id = d->value("doc_id", std::string{});
  }
  if (auto docs = fixture_.find("documents"); docs != fixture_.end()) {
    for (const json& d : *docs) {
      if (d.value("doc_id", std::string{}) == id) return d;
    }
  } else if (fixture_.value("doc_id", std::string{}) == id) {
    return fixture_;
  }
  throw fixture_error(fmt::format("analyst fixture has no document '{}'", id));
}

json AnalystFixture::call(std::string_view operation, const json& request) {
  const json& d = document(request);
  if (auto fail = d.find("fail_operations"); fail != d.end()) {
    for (const json& op : *fail) {
      if (op.get<std::string>() == operation) {
        throw fixture_error(fmt::format("analyst fixture fails '{}'", operation));
      }
    }
  }

  if (operation == "pre_review") {
    return {{"claims", d.value("claims", json::array())}};
  }
  if (operation == "plan_agenda") {
    return {{"agenda", d.value("agenda", json())}};
  }
  if (operation == "profile_question") {
    const std::string q = request.at("question").at("question_id").get<std::string>();
    const json profiles = d.value("profiles", json::object());
    if (auto it = profiles.find(q); it != profiles.end()) return *it;
    return {{"mappable", false}, {"setting", json::object()}};
  }
  if (operation == "assess_overlap") {
    const std::string q = request.at("question").at("question_id").get<std::string>();
    const json overlap = d.value("overlap", json::object());
    if (auto it = overlap.find(q); it != overlap.end()) return {{"verdicts", *it}};
    return {{"verdicts", json::array()}};
  }
  if (operation == "read_span") {
    const Anchor span = request.at("span").get<Anchor>();
    const int visit = request.at("visit").get<int>();
    json evidence = json::array();
    json notes = json::array();
    // A finding is reported on each visit of the span that holds it, unless
    // pinned to one visit.
    auto applies = [&](const json& f) {
      if (f.contains("visit") && f.at("visit").get<int>() != visit) return false;
      return span.contains(f.at("anchor").get<Anchor>());
    };
    for (const json& f : d.value("findings", json::array())) {
      if (applies(f)) {
        json copy = f;
        copy.erase("visit");
        evidence.push_back(std::move(copy));
      }
    }
    for (const json& n : d.value("notes", json::array())) {
      if (applies(n)) {
        json copy = n;
        copy.erase("visit");
        copy.erase("severity");
        notes.push_back(std::move(copy));
      }
    }
    return {{"evidence", std::move(evidence)}, {"notes", std::move(notes)}};
  }
  if (operation == "assign_severity") {
    json table = json::object();
    for (const json& n : d.value("notes", json::array())) {
      table[n.at("key").get<std::string>()] = n.value("severity", std::string("minor"));
    }
    json out = json::object();
    for (const json& n : request.at("notes")) {
      const std::string key = n.at("key").get<std::string>();
      out[key] = table.value(key, std::string("minor"));
    }
    return {{"severity", std::move(out)}};
  }
  if (operation == "write_report") {
    if (auto it = d.find("report"); it != d.end()) return *it;
    throw fixture_error("analyst fixture has no report");
  }
  throw fixture_error(fmt::format("analyst fixture does not handle '{}'", operation));
}

RetrieverFixture RetrieverFixture::from_file(const std::string& path) {
  return RetrieverFixture(read_jsonl_file(path));
}

json RetrieverFixture::call(std::string_view operation, const json& request) {
  if (operation != "search") {
    throw fixture_error(fmt::format("retriever fixture does not handle '{}'", operation));
  }
  const std::string qid = request.at("question_id").get<std::string>();
  const std::string text = lower(request.value("question_text", std::string{}));
  json results = json::array();
  for (const json& rec : corpus_) {
    bool hit = false;
    for (const json& q : rec.value("questions", json::array())) {
      hit = hit || q.get<std::string>() == qid;
    }
    for (const json& kw : rec.value("keywords", json::array())) {
      hit = hit || text.find(lower(kw.get<std::string>())) != std::string::npos;
    }
    if (!hit) continue;
    json c = rec;
    c.erase("questions");
    c.erase("keywords");
    results.push_back(std::move(c));
  }
  return {{"results", std::move(results)}};
}

JudgeFixture JudgeFixture::from_file(const std::string& path) {
  return JudgeFixture(read_json_file(path));
}

json JudgeFixture::call(std::string_view operation, const json& request) {
  if (operation == "judge_coverage") {
    const std::string paper = request.at("paper_id").get<std::string>();
    if (auto raw = fixture_.find("raw"); raw != fixture_.end() && raw->contains(paper)) {
      return {{"raw", raw->at(paper)}};
    }
    const std::string review = lower(request.at("review").get<std::string>());
    const json phrases = fixture_.value("keyphrases", json::object());
    json labels = json::array();
    for (const json& issue : request.at("issues")) {
      const std::string id = issue.at("issue_id").get<std::string>();
      const std::string phrase =
          lower(phrases.value(id, issue.value("description", std::string{})));
      const bool hit = !phrase.empty() && review.find(phrase) != std::string::npos;
      json l = {{"issue_id", id},
                {"label", hit ? 1 : 0},
                {"reason", hit ? "keyphrase present" : "keyphrase absent"}};
      if (hit) l["evidence"] = phrase;
      labels.push_back(std::move(l));
    }
    return {{"raw", json{{"labels", std::move(labels)}}.dump()}};
  }
  if (operation == "rank_reviews") {
    const std::string paper = request.at("paper_id").get<std::string>();
    const json chains = fixture_.value("chains", json::object());
    if (auto it = chains.find(paper); it != chains.end()) return {{"chains", *it}};
    throw fixture_error(fmt::format("judge fixture has no chains for '{}'", paper));
  }
  throw fixture_error(fmt::format("judge fixture does not handle '{}'", operation));
}

// ---- files -----------------------------------------------------------------

json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIOError, fmt::format("cannot open '{}'", path));
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfigError,
                fmt::format("'{}' is not valid JSON: {}", path, e.what()));
  }
}

std::vector<json> read_jsonl_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIOError, fmt::format("cannot open '{}'", path));
  std::vector<json> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (std::all_of(line.begin(), line.end(),
                    [](unsigned char c) { return std::isspace(c); })) {
      continue;
    }
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kConfigError,
                  fmt::format("{}:{}: invalid JSON: {}", path, n, e.what()));
    }
  }
  return out;
}

}  // namespace revpkg
