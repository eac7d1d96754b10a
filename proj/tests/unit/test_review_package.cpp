#include <fstream>
#include <random>

#include "builders.hpp"
#include "doctest.h"
#include "oracles.hpp"
#include "revpkg/ports.hpp"
#include "revpkg/review_package.hpp"

using namespace revpkg;
using nlohmann::json;

namespace {

bool has_edge(const EvidenceGraph& g, EdgeKind k, const std::string& from, const std::string& to) {
  return g.edges().contains(GraphEdge{k, from, to});
}

}  // namespace

TEST_CASE("schema check") {
  StructuredReport r = build::full_report();
  CHECK(schema_check(r) == 1);
  r.weaknesses.clear();
  CHECK(schema_check(r) == 0);
  r = build::full_report();
  r.summary = "   ";
  CHECK(schema_check(r) == 0);
}

TEST_CASE("traceability examples") {
  EvidenceGraph g;
  g.add_node({"anchor:p1:1-1", NodeKind::kAnchor, false});
  g.add_node({"ann:a", NodeKind::kAnn, false});
  g.add_node({"ann:b", NodeKind::kAnn, false});
  g.add_edge({EdgeKind::kLocalizedTo, "ann:a", "anchor:p1:1-1"});
  g.add_edge({EdgeKind::kLocalizedTo, "ann:b", "anchor:p1:1-1"});
  CHECK(check_traceability(g).empty());

  EvidenceGraph lone;
  lone.add_node({"ann:a", NodeKind::kAnn, false});
  const auto v = check_traceability(lone);
  REQUIRE(v.size() == 1);
  CHECK(v[0].kind == TraceViolationKind::kUntracedAnnotation);
  CHECK(v[0].subject == "ann:a");

  EvidenceGraph bg;
  bg.add_node({"claim:C1", NodeKind::kClaim, false});
  bg.add_node({"prior:p", NodeKind::kPrior, false});
  bg.add_edge({EdgeKind::kOverlapsWith, "claim:C1", "prior:p"});
  REQUIRE(check_traceability(bg).size() == 1);
  CHECK(check_traceability(bg)[0].kind == TraceViolationKind::kBackgroundOverlap);

  EvidenceGraph illegal;
  illegal.add_node({"ann:a", NodeKind::kAnn, false});
  illegal.add_node({"claim:C1", NodeKind::kClaim, false});
  illegal.add_edge({EdgeKind::kLocalizedTo, "ann:a", "claim:C1"});
  bool found = false;
  for (const auto& x : check_traceability(illegal)) found |= x.kind == TraceViolationKind::kIllegalEndpoints;
  CHECK(found);

  EvidenceGraph dangling;
  dangling.add_node({"ann:a", NodeKind::kAnn, false});
  dangling.add_edge({EdgeKind::kLocalizedTo, "ann:a", "anchor:p9:1-1"});
  CHECK(check_traceability(dangling)[0].kind == TraceViolationKind::kDanglingEdge);
}

TEST_CASE("gate examples") {
  const auto doc = build::document();
  const Budgets b;
  CHECK(export_gate(build::package(build::inputs(10), 3, 3), doc.page_index(), b).ready);

  const auto nine = export_gate(build::package(build::inputs(9), 3, 3), doc.page_index(), b);
  CHECK_FALSE(nine.ready);
  REQUIRE(nine.failures.size() == 1);
  CHECK(nine.failures[0].reason == GateReason::kAnnotationBudget);

  auto in = build::inputs(10);
  in.annotations[4].repair_text.clear();
  const auto g = export_gate(build::package(in, 3, 3), doc.page_index(), b);
  CHECK_FALSE(g.ready);
  CHECK(g.has(GateReason::kInvalidAnnotation));

  const auto two = export_gate(build::package(build::inputs(10), 2, 3), doc.page_index(), b);
  CHECK(two.failures.size() == 1);
  CHECK(two.has(GateReason::kSearchBudget));
}

TEST_CASE("gate is monotone in annotations, searches and intents") {
  const auto doc = build::document();
  std::mt19937_64 rng(13);
  for (int t = 0; t < 300; ++t) {
    const int n = std::uniform_int_distribution<int>(0, 14)(rng);
    const int s = std::uniform_int_distribution<int>(0, 5)(rng);
    const int q = std::uniform_int_distribution<int>(0, 5)(rng);
    const bool base = export_gate(build::package(build::inputs(n), s, q), doc.page_index(), {}).ready;
    if (!base) continue;
    CHECK(export_gate(build::package(build::inputs(n + 1), s, q), doc.page_index(), {}).ready);
    CHECK(export_gate(build::package(build::inputs(n), s + 1, q), doc.page_index(), {}).ready);
    CHECK(export_gate(build::package(build::inputs(n), s, q + 1), doc.page_index(), {}).ready);
  }
}

TEST_CASE("evidence graph construction") {
  const auto in = build::inputs(4);
  const auto g = build_evidence_graph(in.ledger, in.agenda, in.verifications, in.annotations);
  CHECK(check_traceability(g).empty());
  // Q2 is substantially overlapped with prior-a for claim C2
  CHECK(has_edge(g, EdgeKind::kOverlapsWith, "claim:C2", "prior:prior-a"));
  CHECK_FALSE(has_edge(g, EdgeKind::kOverlapsWith, "claim:C2", "prior:prior-b"));
  CHECK(g.nodes().at("prior:prior-a").comparable);
  CHECK_FALSE(g.nodes().at("prior:prior-b").comparable);
  CHECK(has_edge(g, EdgeKind::kSupportedBy, "claim:C1", "anchor:p1:1-1"));
  for (const auto& a : in.annotations) {
    CHECK(has_edge(g, EdgeKind::kLocalizedTo, "ann:" + a.ann_id,
                   EvidenceGraph::anchor_node(a.anchor)));
  }
  // only comparable priors are overlap targets
  for (const auto& e : g.edges()) {
    if (e.kind == EdgeKind::kOverlapsWith) CHECK(g.nodes().at(e.to).comparable);
  }
}

TEST_CASE("repair plan order: major first, then claim risk rank, then id") {
  auto in = build::inputs(8);
  const auto plan = build_repair_plan(in.annotations, in.agenda);
  REQUIRE(plan.size() == 8);
  std::map<std::string, const Annotation*> by_id;
  for (const auto& a : in.annotations) by_id[a.ann_id] = &a;
  auto rank = [&](const Annotation& a) {
    if (!a.claim_id) return 1 << 30;
    return *a.claim_id == "C1" ? 1 : 2;
  };
  for (std::size_t i = 0; i < plan.size(); ++i) {
    CHECK(plan[i].priority == static_cast<int>(i) + 1);
    if (i == 0) continue;
    const Annotation& x = *by_id.at(plan[i - 1].ann_ids[0]);
    const Annotation& y = *by_id.at(plan[i].ann_ids[0]);
    CHECK(std::make_tuple(x.severity != Severity::kMajor, rank(x), x.ann_id) <
          std::make_tuple(y.severity != Severity::kMajor, rank(y), y.ann_id));
  }
}

TEST_CASE("synthesize uses the analyst report and stays legal") {
  const auto doc = build::document();
  const auto in = build::inputs(10);
  json report = {{"summary", "s"}, {"strengths", "st"}, {"weaknesses", "w"},
                 {"prioritized_issues", "p"}, {"actionable_suggestions", "a"}};
  AnalystFixture fx({{"doc_id", "built"}, {"report", report}});
  TransportAnalyst analyst(fx);
  ProcessCounters counters;
  counters.n_search = 2;
  counters.covered_questions = {"Q1", "Q2", "Q3"};
  const auto pkg = synthesize(doc, in.ledger, in.agenda, in.verifications, in.annotations,
                              counters, analyst);
  CHECK(pkg.report.summary == "s");
  CHECK(check_package_integrity(pkg).empty());
  const auto gate = export_gate(pkg, doc.page_index(), {});
  CHECK_FALSE(gate.ready);
  CHECK(gate.has(GateReason::kSearchBudget));
}

TEST_CASE("bundle round trip, refusal and tamper detection") {
  const auto doc = build::document();
  const auto pkg = build::package(build::inputs(12), 4, 3);
  const auto dir = oracle::scratch_dir("bundle_rt");
  export_bundle(pkg, doc, {}, {}, {}, {}, dir / "ok");
  const auto back = import_bundle(dir / "ok");
  CHECK(back.package == pkg);
  CHECK(back.doc_id == "built");
  CHECK(back.pages == doc.page_index());
  CHECK(validate_bundle(back).ok());

  // exporting twice gives identical bytes
  export_bundle(pkg, doc, {}, {}, {}, {}, dir / "again");
  for (const auto& f : std::filesystem::directory_iterator(dir / "ok")) {
    CHECK(oracle::slurp(f.path()) == oracle::slurp(dir / "again" / f.path().filename()));
  }

  const auto thin = build::package(build::inputs(12), 2, 3);
  try {
    export_bundle(thin, doc, {}, {}, {}, {}, dir / "thin");
    FAIL("no error");
  } catch (const NotReadyError& e) {
    REQUIRE(e.failures().size() == 1);
    CHECK(e.failures()[0].reason == GateReason::kSearchBudget);
  }
  CHECK_FALSE(std::filesystem::exists(dir / "thin" / "manifest.json"));

  // drop one annotation from the written bundle
  json anns = json::parse(oracle::slurp(dir / "ok" / "annotations.json"));
  anns.erase(anns.begin());
  std::ofstream(dir / "ok" / "annotations.json") << anns.dump(2);
  const auto tampered = import_bundle(dir / "ok");
  const auto v = validate_bundle(tampered);
  CHECK_FALSE(v.ok());
  CHECK_FALSE(v.integrity.empty());
}

TEST_CASE("import rejects missing or broken bundles") {
  const auto dir = oracle::scratch_dir("bundle_bad");
  try {
    import_bundle(dir / "nothing");
    FAIL("no error");
  } catch (const Error& e) {
    CHECK((e.code() == ErrorCode::kIOError || e.code() == ErrorCode::kBundleFormat));
  }
  std::filesystem::create_directories(dir / "broken");
  std::ofstream(dir / "broken" / "manifest.json") << "{\"schema\": \"other\"}";
  try {
    import_bundle(dir / "broken");
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kBundleFormat);
  }
}

TEST_CASE("report markdown has the five sections") {
  const std::string md = render_report_markdown(build::full_report());
  for (const char* s : {"Summary text.", "Strengths text.", "Weaknesses text.", "1. Issue one.",
                        "- Do this."}) {
    CHECK(md.find(s) != std::string::npos);
  }
}
