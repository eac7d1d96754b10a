#include "revpkg/review_package.hpp"

#include <algorithm>
#include <cctype>
#include <climits>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include <fmt/format.h>

#include "revpkg/ports.hpp"

namespace revpkg {

namespace fs = std::filesystem;

namespace {

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(),
                     [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
}

constexpr std::pair<NodeKind, std::string_view> kNodeNames[] = {
    {NodeKind::kClaim, "claim"},
    {NodeKind::kAnchor, "anchor"},
    {NodeKind::kAnn, "ann"},
    {NodeKind::kPrior, "prior"},
};

constexpr std::pair<EdgeKind, std::string_view> kEdgeNames[] = {
    {EdgeKind::kSupportedBy, "supported-by"},
    {EdgeKind::kContradictedBy, "contradicted-by"},
    {EdgeKind::kLocalizedTo, "localized-to"},
    {EdgeKind::kOverlapsWith, "overlaps-with"},
};

template <typename E, std::size_t N>
E parse_name(const std::pair<E, std::string_view> (&table)[N], std::string_view text,
             std::string_view what) {
  for (const auto& [value, name] : table) {
    if (name == text) return value;
  }
  throw Error(ErrorCode::kBundleFormat, fmt::format("unknown {} '{}'", what, text));
}

bool legal_endpoints(EdgeKind edge, NodeKind from, NodeKind to) {
  switch (edge) {
    case EdgeKind::kLocalizedTo:
      return (from == NodeKind::kAnn || from == NodeKind::kClaim) && to == NodeKind::kAnchor;
    case EdgeKind::kSupportedBy:
    case EdgeKind::kContradictedBy:
      return from == NodeKind::kClaim && (to == NodeKind::kAnchor || to == NodeKind::kPrior);
    case EdgeKind::kOverlapsWith:
      return from == NodeKind::kClaim && to == NodeKind::kPrior;
  }
  return false;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIOError, fmt::format("cannot write '{}'", path.string()));
  out << text;
  if (!out) throw Error(ErrorCode::kIOError, fmt::format("write failed for '{}'", path.string()));
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  write_text(path, j.dump(2) + "\n");
}

nlohmann::json read_bundle_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::kIOError, fmt::format("cannot open '{}'", path.string()));
  }
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kBundleFormat,
                fmt::format("'{}' is not valid JSON: {}", path.filename().string(), e.what()));
  }
}

nlohmann::json budgets_json(const Budgets& b) {
  return {{"alpha", b.alpha}, {"beta", b.beta}, {"gamma", b.gamma}};
}

// Every annotation shows up exactly once in the overlay, inline or continued.
std::vector<TraceViolation> overlay_violations(const ReviewPackage& pkg,
                                               const OverlayPlan& plan) {
  std::vector<TraceViolation> out;
  std::map<std::string, int> seen;
  std::set<std::string> on_sheet;
  for (const PagePlan& pp : plan.pages) {
    for (const CalloutPlacement& pl : pp.placements) ++seen[pl.ann_id];
    for (const ContinuationSheet& s : pp.sheets) {
      for (const ContinuationEntry& e : s.entries) {
        if (!on_sheet.insert(e.ann_id).second) {
          out.push_back({TraceViolationKind::kPackageMismatch, e.ann_id,
                         "annotation appears on more than one continuation sheet"});
        }
      }
    }
  }
  for (const Annotation& a : pkg.annotations) {
    auto it = seen.find(a.ann_id);
    if (it == seen.end() || it->second != 1) {
      out.push_back({TraceViolationKind::kPackageMismatch, a.ann_id,
                     "annotation is not placed exactly once in the overlay plan"});
    }
    if (it != seen.end()) seen.erase(it);
  }
  for (const auto& [id, count] : seen) {
    out.push_back({TraceViolationKind::kPackageMismatch, id,
                   "overlay placement has no matching annotation"});
  }
  return out;
}

}  // namespace

int schema_check(const StructuredReport& r) {
  for (const std::string* s : {&r.summary, &r.strengths, &r.weaknesses,
                               &r.prioritized_issues, &r.actionable_suggestions}) {
    if (blank(*s)) return 0;
  }
  return 1;
}

std::string render_report_markdown(const StructuredReport& r) {
  return fmt::format(
      "# Review\n\n## Summary\n\n{}\n\n## Strengths\n\n{}\n\n## Weaknesses\n\n{}\n\n"
      "## Prioritized Issues\n\n{}\n\n## Actionable Suggestions\n\n{}\n",
      r.summary, r.strengths, r.weaknesses, r.prioritized_issues,
      r.actionable_suggestions);
}

std::string_view to_string(NodeKind kind) {
  for (const auto& [k, name] : kNodeNames) {
    if (k == kind) return name;
  }
  return "?";
}

std::string_view to_string(EdgeKind kind) {
  for (const auto& [k, name] : kEdgeNames) {
    if (k == kind) return name;
  }
  return "?";
}

std::string_view to_string(TraceViolationKind kind) {
  switch (kind) {
    case TraceViolationKind::kUntracedAnnotation: return "UntracedAnnotation";
    case TraceViolationKind::kIllegalEndpoints: return "IllegalEndpoints";
    case TraceViolationKind::kDanglingEdge: return "DanglingEdge";
    case TraceViolationKind::kBackgroundOverlap: return "BackgroundOverlap";
    case TraceViolationKind::kPackageMismatch: return "PackageMismatch";
  }
  return "?";
}

std::string_view to_string(GateReason reason) {
  switch (reason) {
    case GateReason::kSchema: return "Schema";
    case GateReason::kSearchBudget: return "SearchBudget";
    case GateReason::kIntentBudget: return "IntentBudget";
    case GateReason::kAnnotationBudget: return "AnnotationBudget";
    case GateReason::kInvalidAnnotation: return "InvalidAnnotation";
    case GateReason::kUntraceable: return "Untraceable";
  }
  return "?";
}

std::string EvidenceGraph::claim_node(std::string_view claim_id) {
  return fmt::format("claim:{}", claim_id);
}
std::string EvidenceGraph::anchor_node(const Anchor& anchor) {
  return fmt::format("anchor:{}", to_string(anchor));
}
std::string EvidenceGraph::ann_node(std::string_view ann_id) {
  return fmt::format("ann:{}", ann_id);
}
std::string EvidenceGraph::prior_node(std::string_view source_id) {
  return fmt::format("prior:{}", source_id);
}

void EvidenceGraph::add_node(GraphNode node) {
  auto [it, inserted] = nodes_.emplace(node.id, node);
  if (!inserted && node.comparable) it->second.comparable = true;
}

void EvidenceGraph::add_edge(GraphEdge edge) { edges_.insert(std::move(edge)); }

void EvidenceGraph::remove_node(std::string_view id) {
  nodes_.erase(std::string(id));
  std::erase_if(edges_, [&](const GraphEdge& e) { return e.from == id || e.to == id; });
}

std::vector<TraceViolation> check_traceability(const EvidenceGraph& graph) {
  std::vector<TraceViolation> out;
  std::set<std::string> localized;
  for (const GraphEdge& e : graph.edges()) {
    const std::string label = fmt::format("{} -{}-> {}", e.from, to_string(e.kind), e.to);
    auto from = graph.nodes().find(e.from);
    auto to = graph.nodes().find(e.to);
    if (from == graph.nodes().end() || to == graph.nodes().end()) {
      out.push_back({TraceViolationKind::kDanglingEdge, label, "endpoint is not a node"});
      continue;
    }
    if (!legal_endpoints(e.kind, from->second.kind, to->second.kind)) {
      out.push_back({TraceViolationKind::kIllegalEndpoints, label,
                     fmt::format("{} cannot join {} to {}", to_string(e.kind),
                                 to_string(from->second.kind), to_string(to->second.kind))});
      continue;
    }
    if (e.kind == EdgeKind::kOverlapsWith && !to->second.comparable) {
      out.push_back({TraceViolationKind::kBackgroundOverlap, label,
                     "overlap edge targets a background prior"});
    }
    if (e.kind == EdgeKind::kLocalizedTo) localized.insert(e.from);
  }
  for (const auto& [id, node] : graph.nodes()) {
    if (node.kind == NodeKind::kAnn && !localized.contains(id)) {
      out.push_back({TraceViolationKind::kUntracedAnnotation, id,
                     "annotation has no localized-to edge"});
    }
  }
  return out;
}

std::vector<TraceViolation> check_package_integrity(const ReviewPackage& pkg) {
  std::vector<TraceViolation> out = check_traceability(pkg.graph);
  const auto& nodes = pkg.graph.nodes();

  std::set<std::string> ann_ids;
  for (const Annotation& a : pkg.annotations) {
    if (!ann_ids.insert(a.ann_id).second) {
      out.push_back({TraceViolationKind::kPackageMismatch, a.ann_id, "duplicate annotation id"});
      continue;
    }
    const std::string node = EvidenceGraph::ann_node(a.ann_id);
    if (!nodes.contains(node)) {
      out.push_back({TraceViolationKind::kPackageMismatch, a.ann_id,
                     "annotation has no graph node"});
      continue;
    }
    const GraphEdge expected{EdgeKind::kLocalizedTo, node,
                             EvidenceGraph::anchor_node(a.anchor)};
    if (!pkg.graph.edges().contains(expected)) {
      out.push_back({TraceViolationKind::kPackageMismatch, a.ann_id,
                     fmt::format("graph does not localize the annotation to {}",
                                 to_string(a.anchor))});
    }
  }
  for (const auto& [id, node] : nodes) {
    if (node.kind == NodeKind::kAnn && !ann_ids.contains(id.substr(4))) {
      out.push_back({TraceViolationKind::kPackageMismatch, id,
                     "graph annotation missing from the package"});
    }
  }

  int last = 0;
  for (const RepairItem& item : pkg.repair_plan) {
    if (item.priority <= last) {
      out.push_back({TraceViolationKind::kPackageMismatch,
                     fmt::format("priority {}", item.priority),
                     "repair plan priorities are not strictly increasing"});
    }
    last = item.priority;
    if (item.ann_ids.empty()) {
      out.push_back({TraceViolationKind::kPackageMismatch,
                     fmt::format("priority {}", item.priority),
                     "repair item references no annotation"});
    }
    for (const std::string& id : item.ann_ids) {
      if (!ann_ids.contains(id)) {
        out.push_back({TraceViolationKind::kPackageMismatch, id,
                       "repair plan references a missing annotation"});
      }
    }
  }
  return out;
}

bool GateResult::has(GateReason reason) const {
  return std::any_of(failures.begin(), failures.end(),
                     [reason](const GateFailure& f) { return f.reason == reason; });
}

GateResult export_gate(const ReviewPackage& pkg, const PageIndex& pages,
                       const Budgets& budgets, const CategoryTaxonomy& taxonomy) {
  GateResult g;
  if (schema_check(pkg.report) != 1) {
    g.failures.push_back({GateReason::kSchema, "report section missing or empty"});
  }
  if (pkg.counters.n_search < budgets.alpha) {
    g.failures.push_back({GateReason::kSearchBudget,
                          fmt::format("n_search {} < {}", pkg.counters.n_search,
                                      budgets.alpha)});
  }
  if (pkg.counters.n_intent() < budgets.beta) {
    g.failures.push_back({GateReason::kIntentBudget,
                          fmt::format("n_intent {} < {}", pkg.counters.n_intent(),
                                      budgets.beta)});
  }
  const int n_ann = static_cast<int>(pkg.annotations.size());
  if (n_ann < budgets.gamma) {
    g.failures.push_back({GateReason::kAnnotationBudget,
                          fmt::format("|A| {} < {}", n_ann, budgets.gamma)});
  }
  for (const Annotation& a : pkg.annotations) {
    const auto violations = validate_annotation(a, pages, taxonomy);
    if (violations.empty()) continue;
    std::string names;
    for (auto v : violations) {
      if (!names.empty()) names += ",";
      names += to_string(v);
    }
    g.failures.push_back({GateReason::kInvalidAnnotation,
                          fmt::format("{}: {}", a.ann_id, names)});
  }
  for (const TraceViolation& v : check_package_integrity(pkg)) {
    g.failures.push_back({GateReason::kUntraceable,
                          fmt::format("{} {}: {}", to_string(v.kind), v.subject, v.detail)});
  }
  g.ready = g.failures.empty();
  return g;
}

std::vector<RepairItem> build_repair_plan(const std::vector<Annotation>& anns,
                                          const std::vector<AgendaItem>& agenda) {
  auto claim_rank = [&](const Annotation& a) {
    int best = INT_MAX;
    if (!a.claim_id) return best;
    for (const AgendaItem& item : agenda) {
      if (item.source_claims.contains(*a.claim_id)) best = std::min(best, item.risk_rank);
    }
    return best;
  };
  std::vector<const Annotation*> order;
  for (const Annotation& a : anns) order.push_back(&a);
  std::sort(order.begin(), order.end(), [&](const Annotation* x, const Annotation* y) {
    return std::make_tuple(x->severity != Severity::kMajor, claim_rank(*x), x->ann_id) <
           std::make_tuple(y->severity != Severity::kMajor, claim_rank(*y), y->ann_id);
  });
  std::vector<RepairItem> plan;
  int priority = 0;
  for (const Annotation* a : order) {
    plan.push_back({++priority, {a->ann_id}, a->repair_text});
  }
  return plan;
}

EvidenceGraph build_evidence_graph(const std::vector<LedgerEntry>& ledger,
                                   const std::vector<AgendaItem>& agenda,
                                   const std::vector<VerificationResult>& verifications,
                                   const std::vector<Annotation>& anns) {
  EvidenceGraph g;
  auto anchor = [&](const Anchor& a) {
    const std::string id = EvidenceGraph::anchor_node(a);
    g.add_node({id, NodeKind::kAnchor, false});
    return id;
  };
  std::set<std::string> claims;
  for (const LedgerEntry& e : ledger) {
    const std::string c = EvidenceGraph::claim_node(e.claim_id);
    claims.insert(e.claim_id);
    g.add_node({c, NodeKind::kClaim, false});
    for (const Anchor& a : e.evidence) g.add_edge({EdgeKind::kSupportedBy, c, anchor(a)});
    for (const Anchor& a : e.contradictions) {
      g.add_edge({EdgeKind::kContradictedBy, c, anchor(a)});
    }
  }

  std::map<std::string, const AgendaItem*> questions;
  for (const AgendaItem& q : agenda) questions[q.question_id] = &q;
  for (const VerificationResult& v : verifications) {
    for (const std::string& id : v.background_ids) {
      g.add_node({EvidenceGraph::prior_node(id), NodeKind::kPrior, false});
    }
    for (const std::string& id : v.comparable_ids) {
      g.add_node({EvidenceGraph::prior_node(id), NodeKind::kPrior, true});
    }
    auto q = questions.find(v.question_id);
    if (q == questions.end()) continue;
    std::optional<EdgeKind> kind;
    if (v.tag == NoveltyTag::kSubstantiallyOverlapped ||
        v.tag == NoveltyTag::kPartiallyOverlapping) {
      kind = EdgeKind::kOverlapsWith;
    } else if (v.tag == NoveltyTag::kSupported) {
      kind = EdgeKind::kSupportedBy;
    }
    if (!kind) continue;
    for (const std::string& claim : q->second->source_claims) {
      if (!claims.contains(claim)) continue;
      for (const std::string& id : v.comparable_ids) {
        g.add_edge({*kind, EvidenceGraph::claim_node(claim), EvidenceGraph::prior_node(id)});
      }
    }
  }

  for (const Annotation& a : anns) {
    const std::string n = EvidenceGraph::ann_node(a.ann_id);
    g.add_node({n, NodeKind::kAnn, false});
    g.add_edge({EdgeKind::kLocalizedTo, n, anchor(a.anchor)});
  }
  return g;
}

ReviewPackage synthesize(const AnchoredDocument& doc,
                         const std::vector<LedgerEntry>& ledger,
                         const std::vector<AgendaItem>& agenda,
                         const std::vector<VerificationResult>& verifications,
                         const std::vector<Annotation>& annotations,
                         const ProcessCounters& counters, AnalystPort& analyst) {
  ReviewPackage pkg;
  pkg.annotations = annotations;
  pkg.novelty_assessment = verifications;
  pkg.counters = counters;
  pkg.graph = build_evidence_graph(ledger, agenda, verifications, annotations);
  const auto violations = check_traceability(pkg.graph);
  if (!violations.empty()) {
    throw Error(ErrorCode::kGraphViolation,
                fmt::format("{} {}: {}", to_string(violations.front().kind),
                            violations.front().subject, violations.front().detail));
  }
  pkg.repair_plan = build_repair_plan(annotations, agenda);
  pkg.report = analyst.write_report(doc, ledger, verifications, annotations);
  return pkg;
}

namespace {

std::string failure_summary(const std::vector<GateFailure>& failures) {
  std::string out;
  for (const GateFailure& f : failures) {
    if (!out.empty()) out += "; ";
    out += fmt::format("{} ({})", to_string(f.reason), f.detail);
  }
  return out;
}

}  // namespace

NotReadyError::NotReadyError(std::vector<GateFailure> failures)
    : Error(ErrorCode::kNotReady,
            fmt::format("export gate failed: {}", failure_summary(failures))),
      failures_(std::move(failures)) {}

void export_bundle(const ReviewPackage& pkg, const AnchoredDocument& doc,
                   const Budgets& budgets, const CategoryTaxonomy& taxonomy,
                   const LayoutParams& layout, const BundleExtras& extras,
                   const fs::path& dir) {
  GateResult gate = export_gate(pkg, doc.page_index(), budgets, taxonomy);
  if (!gate.ready) throw NotReadyError(std::move(gate.failures));
  const OverlayPlan overlay = render_overlay_plan(doc, pkg.annotations, layout);

  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw Error(ErrorCode::kIOError,
                fmt::format("cannot create '{}': {}", dir.string(), ec.message()));
  }

  nlohmann::json manifest = {
      {"schema", kBundleSchema},
      {"version", kBundleVersion},
      {"doc_id", doc.id()},
      {"pages", doc.page_index()},
      {"budgets", budgets_json(budgets)},
      {"extra_category", taxonomy.extra_label() ? nlohmann::json(*taxonomy.extra_label())
                                                : nlohmann::json()},
      {"ready", true},
      {"files",
       {"report.json", "report.md", "annotations.json", "repair_plan.json", "novelty.json",
        "graph.json", "counters.json", "overlay_plan.json", "ledger.json", "agenda.json",
        "audit_log.json"}},
  };
  write_json(dir / "report.json", pkg.report);
  write_text(dir / "report.md", render_report_markdown(pkg.report));
  write_json(dir / "annotations.json", pkg.annotations);
  write_json(dir / "repair_plan.json", pkg.repair_plan);
  write_json(dir / "novelty.json", pkg.novelty_assessment);
  write_json(dir / "graph.json", pkg.graph);
  write_json(dir / "counters.json", pkg.counters);
  write_json(dir / "overlay_plan.json", overlay);
  write_json(dir / "ledger.json", extras.ledger);
  write_json(dir / "agenda.json", extras.agenda);
  write_json(dir / "audit_log.json", extras.audit_log);
  // Manifest last: a bundle without one is incomplete.
  write_json(dir / "manifest.json", manifest);
}

ImportedBundle import_bundle(const fs::path& dir) {
  const nlohmann::json manifest = read_bundle_json(dir / "manifest.json");
  if (manifest.value("schema", std::string{}) != kBundleSchema) {
    throw Error(ErrorCode::kBundleFormat, "manifest schema is not revpkg.bundle");
  }
  if (manifest.value("version", 0) != kBundleVersion) {
    throw Error(ErrorCode::kBundleFormat,
                fmt::format("unsupported bundle version {}", manifest.value("version", 0)));
  }
  ImportedBundle b;
  try {
    b.doc_id = manifest.value("doc_id", std::string{});
    manifest.at("pages").get_to(b.pages);
    const auto& bj = manifest.at("budgets");
    b.budgets = Budgets{bj.at("alpha").get<int>(), bj.at("beta").get<int>(),
                        bj.at("gamma").get<int>()};
    if (auto it = manifest.find("extra_category"); it != manifest.end() && it->is_string()) {
      b.taxonomy = CategoryTaxonomy(it->get<std::string>());
    }
    read_bundle_json(dir / "report.json").get_to(b.package.report);
    read_bundle_json(dir / "annotations.json").get_to(b.package.annotations);
    read_bundle_json(dir / "repair_plan.json").get_to(b.package.repair_plan);
    read_bundle_json(dir / "novelty.json").get_to(b.package.novelty_assessment);
    read_bundle_json(dir / "graph.json").get_to(b.package.graph);
    read_bundle_json(dir / "counters.json").get_to(b.package.counters);
    read_bundle_json(dir / "overlay_plan.json").get_to(b.overlay);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kBundleFormat, fmt::format("bundle field error: {}", e.what()));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kIOError || e.code() == ErrorCode::kBundleFormat) throw;
    throw Error(ErrorCode::kBundleFormat, e.what());
  }
  return b;
}

PackageValidation validate_bundle(const ImportedBundle& bundle) {
  PackageValidation v;
  v.gate = export_gate(bundle.package, bundle.pages, bundle.budgets, bundle.taxonomy);
  v.integrity = check_package_integrity(bundle.package);
  for (auto& extra : overlay_violations(bundle.package, bundle.overlay)) {
    v.integrity.push_back(std::move(extra));
  }
  return v;
}

void to_json(nlohmann::json& j, const StructuredReport& r) {
  j = {{"summary", r.summary},
       {"strengths", r.strengths},
       {"weaknesses", r.weaknesses},
       {"prioritized_issues", r.prioritized_issues},
       {"actionable_suggestions", r.actionable_suggestions}};
}

void from_json(const nlohmann::json& j, StructuredReport& r) {
  r.summary = j.value("summary", std::string{});
  r.strengths = j.value("strengths", std::string{});
  r.weaknesses = j.value("weaknesses", std::string{});
  r.prioritized_issues = j.value("prioritized_issues", std::string{});
  r.actionable_suggestions = j.value("actionable_suggestions", std::string{});
}

void to_json(nlohmann::json& j, const RepairItem& r) {
  j = {{"priority", r.priority}, {"ann_ids", r.ann_ids}, {"action", r.action}};
}

void from_json(const nlohmann::json& j, RepairItem& r) {
  j.at("priority").get_to(r.priority);
  j.at("ann_ids").get_to(r.ann_ids);
  r.action = j.value("action", std::string{});
}

void to_json(nlohmann::json& j, const EvidenceGraph& g) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& [id, n] : g.nodes()) {
    nlohmann::json nj = {{"id", id}, {"kind", to_string(n.kind)}};
    if (n.kind == NodeKind::kPrior) nj["comparable"] = n.comparable;
    nodes.push_back(std::move(nj));
  }
  nlohmann::json edges = nlohmann::json::array();
  for (const GraphEdge& e : g.edges()) {
    edges.push_back({{"kind", to_string(e.kind)}, {"from", e.from}, {"to", e.to}});
  }
  j = {{"nodes", std::move(nodes)}, {"edges", std::move(edges)}};
}

void from_json(const nlohmann::json& j, EvidenceGraph& g) {
  g = EvidenceGraph{};
  for (const auto& nj : j.at("nodes")) {
    g.add_node({nj.at("id").get<std::string>(),
                parse_name(kNodeNames, nj.at("kind").get<std::string>(), "node kind"),
                nj.value("comparable", false)});
  }
  for (const auto& ej : j.at("edges")) {
    g.add_edge({parse_name(kEdgeNames, ej.at("kind").get<std::string>(), "edge kind"),
                ej.at("from").get<std::string>(), ej.at("to").get<std::string>()});
  }
}

void to_json(nlohmann::json& j, const ProcessCounters& c) {
  j = {{"n_search", c.n_search},
       {"n_intent", c.n_intent()},
       {"covered_questions", c.covered_questions}};
}

void from_json(const nlohmann::json& j, ProcessCounters& c) {
  j.at("n_search").get_to(c.n_search);
  c.covered_questions = j.value("covered_questions", std::set<std::string>{});
  if (j.contains("n_intent") && j.at("n_intent").get<int>() != c.n_intent()) {
    throw Error(ErrorCode::kBundleFormat, "n_intent disagrees with covered_questions");
  }
}

void to_json(nlohmann::json& j, const GateFailure& f) {
  j = {{"reason", to_string(f.reason)}, {"detail", f.detail}};
}

void to_json(nlohmann::json& j, const TraceViolation& v) {
  j = {{"kind", to_string(v.kind)}, {"subject", v.subject}, {"detail", v.detail}};
}

}  // namespace revpkg
