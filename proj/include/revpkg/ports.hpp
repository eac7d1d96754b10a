#pragma once

// Provider ports. Every model or search judgment enters the engine through
// one of three ports: the analyst (ledger, agenda, span reading, overlap
// verdicts, severities, report text), the retriever (literature search)
// and the judge (coverage labels and ranking chains).
//
// Each port speaks JSON operations over a Transport. A stub transport
// answers from fixture files; the HTTP transport posts to a live endpoint.
// Request/response decoding and validation are shared by both modes.

#include <chrono>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "revpkg/annotations.hpp"
#include "revpkg/audit.hpp"
#include "revpkg/ledger.hpp"
#include "revpkg/review_package.hpp"
#include "revpkg/verification.hpp"

namespace revpkg {

struct CanonicalIssue;

class Transport {
 public:
  virtual ~Transport() = default;
  // Throws ProviderError on transport failure.
  virtual nlohmann::json call(std::string_view operation,
                              const nlohmann::json& request) = 0;
  virtual std::string_view mode() const = 0;
};

// Records a request/response digest for every call.
class AuditedTransport final : public Transport {
 public:
  AuditedTransport(Transport& inner, AuditLog& log, std::string port)
      : inner_(inner), log_(log), port_(std::move(port)) {}

  nlohmann::json call(std::string_view operation,
                      const nlohmann::json& request) override;
  std::string_view mode() const override { return inner_.mode(); }

 private:
  Transport& inner_;
  AuditLog& log_;
  std::string port_;
};

class AnalystPort {
 public:
  virtual ~AnalystPort() = default;

  virtual std::vector<ClaimDraft> pre_review(const AnchoredDocument& doc) = 0;
  // nullopt asks for the default one-question-per-claim agenda.
  virtual std::optional<std::vector<AgendaItem>> plan_agenda(
      const AnchoredDocument& doc, const std::vector<LedgerEntry>& ledger) = 0;
  virtual ClaimProfile profile_question(const AnchoredDocument& doc,
                                        const AgendaItem& question) = 0;
  virtual OverlapVerdicts assess_overlap(const AnchoredDocument& doc,
                                         const AgendaItem& question,
                                         const ClaimSetting& setting,
                                         const std::vector<Comparator>& comparables) = 0;
  virtual SpanFindings read_span(const AnchoredDocument& doc, const Anchor& span,
                                 int visit,
                                 const std::vector<LedgerEntry>& ledger) = 0;
  // Severity per provisional note key.
  virtual std::map<std::string, Severity> assign_severity(
      const AnchoredDocument& doc, const std::vector<ProvisionalNote>& notes,
      const std::vector<LedgerEntry>& ledger,
      const std::vector<VerificationResult>& verifications) = 0;
  virtual StructuredReport write_report(
      const AnchoredDocument& doc, const std::vector<LedgerEntry>& ledger,
      const std::vector<VerificationResult>& verifications,
      const std::vector<Annotation>& annotations) = 0;
};

class RetrieverPort {
 public:
  virtual ~RetrieverPort() = default;
  // Raw results; may contain duplicates.
  virtual std::vector<Comparator> search(const AgendaItem& question) = 0;
};

class JudgePort {
 public:
  virtual ~JudgePort() = default;
  // Raw judge output for one (paper, system review); parsed downstream so
  // that unparseable output can be scored as missing.
  virtual std::string judge_coverage(std::string_view paper_id,
                                     const std::vector<CanonicalIssue>& issues,
                                     std::string_view review_text) = 0;
  // Raw chain text per aspect name for one paper.
  virtual std::map<std::string, std::string> rank_reviews(
      std::string_view paper_id,
      const std::map<std::string, std::string>& reviews_by_system) = 0;
};

class TransportAnalyst final : public AnalystPort {
 public:
  explicit TransportAnalyst(Transport& transport) : transport_(transport) {}

  std::vector<ClaimDraft> pre_review(const AnchoredDocument& doc) override;
  std::optional<std::vector<AgendaItem>> plan_agenda(
      const AnchoredDocument& doc, const std::vector<LedgerEntry>& ledger) override;
  ClaimProfile profile_question(const AnchoredDocument& doc,
                                const AgendaItem& question) override;
  OverlapVerdicts assess_overlap(const AnchoredDocument& doc,
                                 const AgendaItem& question,
                                 const ClaimSetting& setting,
                                 const std::vector<Comparator>& comparables) override;
  SpanFindings read_span(const AnchoredDocument& doc, const Anchor& span, int visit,
                         const std::vector<LedgerEntry>& ledger) override;
  std::map<std::string, Severity> assign_severity(
      const AnchoredDocument& doc, const std::vector<ProvisionalNote>& notes,
      const std::vector<LedgerEntry>& ledger,
      const std::vector<VerificationResult>& verifications) override;
  StructuredReport write_report(const AnchoredDocument& doc,
                                const std::vector<LedgerEntry>& ledger,
                                const std::vector<VerificationResult>& verifications,
                                const std::vector<Annotation>& annotations) override;

 private:
  Transport& transport_;
};

class TransportRetriever final : public RetrieverPort {
 public:
  explicit TransportRetriever(Transport& transport) : transport_(transport) {}
  std::vector<Comparator> search(const AgendaItem& question) override;

 private:
  Transport& transport_;
};

class TransportJudge final : public JudgePort {
 public:
  explicit TransportJudge(Transport& transport) : transport_(transport) {}
  std::string judge_coverage(std::string_view paper_id,
                             const std::vector<CanonicalIssue>& issues,
                             std::string_view review_text) override;
  std::map<std::string, std::string> rank_reviews(
      std::string_view paper_id,
      const std::map<std::string, std::string>& reviews_by_system) override;

 private:
  Transport& transport_;
};

// ---- stub transports -------------------------------------------------------

// Deterministic analyst fixture keyed by document id. See docs/formats.md.
class AnalystFixture final : public Transport {
 public:
  explicit AnalystFixture(nlohmann::json fixture) : fixture_(std::move(fixture)) {}
  static AnalystFixture from_file(const std::string& path);

  nlohmann::json call(std::string_view operation,
                      const nlohmann::json& request) override;
  std::string_view mode() const override { return "stub"; }

 private:
  const nlohmann::json& document(const nlohmann::json& request) const;
  nlohmann::json fixture_;
};

// Fixture corpus lookup: a record matches a question when it lists the
// question id or one of its keywords occurs in the question text.
class RetrieverFixture final : public Transport {
 public:
  explicit RetrieverFixture(std::vector<nlohmann::json> corpus)
      : corpus_(std::move(corpus)) {}
  static RetrieverFixture from_file(const std::string& path);

  nlohmann::json call(std::string_view operation,
                      const nlohmann::json& request) override;
  std::string_view mode() const override { return "stub"; }

 private:
  std::vector<nlohmann::json> corpus_;
};

// Keyword judge: an issue counts as covered when its keyphrase (fixture
// entry, falling back to the issue description) occurs in the review text,
// case-insensitively. Ranking chains come verbatim from the fixture.
class JudgeFixture final : public Transport {
 public:
  explicit JudgeFixture(nlohmann::json fixture) : fixture_(std::move(fixture)) {}
  static JudgeFixture from_file(const std::string& path);

  nlohmann::json call(std::string_view operation,
                      const nlohmann::json& request) override;
  std::string_view mode() const override { return "stub"; }

 private:
  nlohmann::json fixture_;
};

// ---- live transport --------------------------------------------------------

struct HttpEndpoint {
  std::string base_url;  // scheme://host[:port][/prefix]
  std::string api_key;   // sent as a bearer token when non-empty
  std::chrono::milliseconds timeout{30000};
};

// POSTs {operation, request} to <base_url>/<port>/<operation>.
class HttpTransport final : public Transport {
 public:
  HttpTransport(HttpEndpoint endpoint, std::string port);
  ~HttpTransport() override;

  nlohmann::json call(std::string_view operation,
                      const nlohmann::json& request) override;
  std::string_view mode() const override { return "live"; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

nlohmann::json read_json_file(const std::string& path);
std::vector<nlohmann::json> read_jsonl_file(const std::string& path);

}  // namespace revpkg
