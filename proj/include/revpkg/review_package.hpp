#pragma once

// The review package Y = (report, annotations, repair plan, novelty
// assessment) together with its typed evidence graph, process counters,
// the export gate and the on-disk bundle.

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "revpkg/annotations.hpp"
#include "revpkg/error.hpp"
#include "revpkg/ledger.hpp"
#include "revpkg/verification.hpp"

namespace revpkg {

class AnalystPort;

struct StructuredReport {
  std::string summary;
  std::string strengths;
  std::string weaknesses;
  std::string prioritized_issues;
  std::string actionable_suggestions;

  friend bool operator==(const StructuredReport&, const StructuredReport&) = default;
};

// 1 iff all five sections are present and non-blank.
int schema_check(const StructuredReport& report);

std::string render_report_markdown(const StructuredReport& report);

struct RepairItem {
  int priority = 0;
  std::vector<std::string> ann_ids;
  std::string action;

  friend bool operator==(const RepairItem&, const RepairItem&) = default;
};

enum class NodeKind { kClaim, kAnchor, kAnn, kPrior };
enum class EdgeKind { kSupportedBy, kContradictedBy, kLocalizedTo, kOverlapsWith };

std::string_view to_string(NodeKind kind);
std::string_view to_string(EdgeKind kind);

struct GraphNode {
  std::string id;
  NodeKind kind = NodeKind::kClaim;
  // Priors only: passed the comparability gate for some question.
  bool comparable = false;

  friend bool operator==(const GraphNode&, const GraphNode&) = default;
};

struct GraphEdge {
  EdgeKind kind = EdgeKind::kSupportedBy;
  std::string from;
  std::string to;

  friend auto operator<=>(const GraphEdge&, const GraphEdge&) = default;
};

class EvidenceGraph {
 public:
  static std::string claim_node(std::string_view claim_id);
  static std::string anchor_node(const Anchor& anchor);
  static std::string ann_node(std::string_view ann_id);
  static std::string prior_node(std::string_view source_id);

  // Re-adding a node keeps the existing entry; a prior once marked
  // comparable stays comparable.
  void add_node(GraphNode node);
  void add_edge(GraphEdge edge);
  void remove_node(std::string_view id);  // also drops incident edges

  const std::map<std::string, GraphNode>& nodes() const { return nodes_; }
  const std::set<GraphEdge>& edges() const { return edges_; }

  friend bool operator==(const EvidenceGraph&, const EvidenceGraph&) = default;

 private:
  std::map<std::string, GraphNode> nodes_;
  std::set<GraphEdge> edges_;
};

enum class TraceViolationKind {
  kUntracedAnnotation,  // ann node without a localized-to edge
  kIllegalEndpoints,    // edge kind does not admit these node kinds
  kDanglingEdge,        // endpoint is not a node
  kBackgroundOverlap,   // overlaps-with edge to a non-comparable prior
  kPackageMismatch,     // graph / annotations / plan disagree
};

std::string_view to_string(TraceViolationKind kind);

struct TraceViolation {
  TraceViolationKind kind;
  std::string subject;
  std::string detail;

  friend bool operator==(const TraceViolation&, const TraceViolation&) = default;
};

std::vector<TraceViolation> check_traceability(const EvidenceGraph& graph);

struct ProcessCounters {
  int n_search = 0;
  std::set<std::string> covered_questions;

  int n_intent() const { return static_cast<int>(covered_questions.size()); }

  friend bool operator==(const ProcessCounters&, const ProcessCounters&) = default;
};

struct ReviewPackage {
  StructuredReport report;
  std::vector<Annotation> annotations;
  std::vector<RepairItem> repair_plan;
  std::vector<VerificationResult> novelty_assessment;
  EvidenceGraph graph;
  ProcessCounters counters;

  friend bool operator==(const ReviewPackage&, const ReviewPackage&) = default;
};

// Graph checks plus cross-references between graph, annotations and plan.
std::vector<TraceViolation> check_package_integrity(const ReviewPackage& pkg);

struct Budgets {
  int alpha = 3;   // minimum retrieval calls
  int beta = 3;    // minimum distinct questions verified
  int gamma = 10;  // minimum anchored annotations
};

enum class GateReason {
  kSchema,
  kSearchBudget,
  kIntentBudget,
  kAnnotationBudget,
  kInvalidAnnotation,
  kUntraceable,
};

std::string_view to_string(GateReason reason);

struct GateFailure {
  GateReason reason;
  std::string detail;

  friend bool operator==(const GateFailure&, const GateFailure&) = default;
};

struct GateResult {
  bool ready = false;
  std::vector<GateFailure> failures;

  bool has(GateReason reason) const;
};

GateResult export_gate(const ReviewPackage& pkg, const PageIndex& pages,
                       const Budgets& budgets,
                       const CategoryTaxonomy& taxonomy = {});

// Ordered by severity (major first), best agenda risk rank of the linked
// claim, then ann_id.
std::vector<RepairItem> build_repair_plan(const std::vector<Annotation>& anns,
                                          const std::vector<AgendaItem>& agenda);

EvidenceGraph build_evidence_graph(const std::vector<LedgerEntry>& ledger,
                                   const std::vector<AgendaItem>& agenda,
                                   const std::vector<VerificationResult>& verifications,
                                   const std::vector<Annotation>& anns);

// Throws ProviderError from the analyst, GraphViolation on an illegal graph.
ReviewPackage synthesize(const AnchoredDocument& doc,
                         const std::vector<LedgerEntry>& ledger,
                         const std::vector<AgendaItem>& agenda,
                         const std::vector<VerificationResult>& verifications,
                         const std::vector<Annotation>& annotations,
                         const ProcessCounters& counters, AnalystPort& analyst);

class NotReadyError : public Error {
 public:
  explicit NotReadyError(std::vector<GateFailure> failures);
  const std::vector<GateFailure>& failures() const { return failures_; }

 private:
  std::vector<GateFailure> failures_;
};

inline constexpr std::string_view kBundleSchema = "revpkg.bundle";
inline constexpr int kBundleVersion = 1;

// Audit material written next to the package; not part of package equality.
struct BundleExtras {
  std::vector<LedgerEntry> ledger;
  std::vector<AgendaItem> agenda;
  nlohmann::json audit_log = nlohmann::json::array();
};

// Writes the bundle directory. Refuses with NotReadyError when the gate
// fails; nothing is written in that case.
void export_bundle(const ReviewPackage& pkg, const AnchoredDocument& doc,
                   const Budgets& budgets, const CategoryTaxonomy& taxonomy,
                   const LayoutParams& layout, const BundleExtras& extras,
                   const std::filesystem::path& dir);

struct ImportedBundle {
  ReviewPackage package;
  std::string doc_id;
  PageIndex pages;
  Budgets budgets;
  CategoryTaxonomy taxonomy;
  OverlayPlan overlay;
};

// Throws BundleFormat / IOError.
ImportedBundle import_bundle(const std::filesystem::path& dir);

struct PackageValidation {
  GateResult gate;
  std::vector<TraceViolation> integrity;

  bool ok() const { return gate.ready && integrity.empty(); }
};

PackageValidation validate_bundle(const ImportedBundle& bundle);

void to_json(nlohmann::json& j, const StructuredReport& r);
void from_json(const nlohmann::json& j, StructuredReport& r);
void to_json(nlohmann::json& j, const RepairItem& r);
void from_json(const nlohmann::json& j, RepairItem& r);
void to_json(nlohmann::json& j, const EvidenceGraph& g);
void from_json(const nlohmann::json& j, EvidenceGraph& g);
void to_json(nlohmann::json& j, const ProcessCounters& c);
void from_json(const nlohmann::json& j, ProcessCounters& c);
void to_json(nlohmann::json& j, const GateFailure& f);
void to_json(nlohmann::json& j, const TraceViolation& v);

}  // namespace revpkg
