#include <cstdlib>
#include <filesystem>

#include <fmt/format.h>

#include "doctest.h"
#include "oracles.hpp"
#include "revpkg/error.hpp"
#include "revpkg/pipeline.hpp"

using namespace revpkg;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kIOError;
}

RunConfig demo_config() { return load_config_file(RunConfig{}, oracle::fixture("demo/config.json")); }

std::string demo_doc() { return oracle::fixture("demo/demo.blocks.jsonl"); }

void same_files(const fs::path& a, const fs::path& b) {
  std::size_t n = 0;
  for (const auto& f : fs::directory_iterator(a)) {
    ++n;
    CHECK_MESSAGE(oracle::slurp(f.path()) == oracle::slurp(b / f.path().filename()),
                  f.path().filename().string());
  }
  CHECK(n > 0);
  CHECK(n == static_cast<std::size_t>(std::distance(fs::directory_iterator(b), fs::directory_iterator())));
}

}  // namespace

TEST_CASE("demo run exports a ready bundle") {
  const auto dir = oracle::scratch_dir("pipeline_demo");
  const ReviewRun run = review_to_bundle(demo_doc(), demo_config(), dir / "a");
  CHECK(run.gate.ready);
  CHECK(run.package.annotations.size() >= 10);
  CHECK(run.package.counters.n_search >= 3);
  CHECK(run.package.counters.covered_questions.size() >= 3);
  CHECK(run.doc.id() == "demo");
  CHECK(fs::exists(dir / "a" / "manifest.json"));
  for (std::size_t i = 0; i < run.package.annotations.size(); ++i) {
    CHECK(run.package.annotations[i].ann_id == fmt::format("ann-{:03}", i + 1));
  }

  const auto bundle = import_bundle(dir / "a");
  CHECK(bundle.package == run.package);
  CHECK(validate_bundle(bundle).ok());
  for (const auto& entry : run.audit_log) CHECK(entry["mode"] == "stub");
}

TEST_CASE("demo bundles are byte-identical across runs and thread counts") {
  const auto dir = oracle::scratch_dir("pipeline_repeat");
  RunConfig c = demo_config();
  review_to_bundle(demo_doc(), c, dir / "one");
  review_to_bundle(demo_doc(), c, dir / "two");
  c.threads = 4;
  review_to_bundle(demo_doc(), c, dir / "four");
  same_files(dir / "one", dir / "two");
  same_files(dir / "one", dir / "four");
}

TEST_CASE("thin document is refused without writing") {
  const auto dir = oracle::scratch_dir("pipeline_thin");
  RunConfig c = demo_config();
  c.doc_id = "demo-thin";
  try {
    review_to_bundle(demo_doc(), c, dir / "out");
    FAIL("no error");
  } catch (const NotReadyError& e) {
    CHECK(e.code() == ErrorCode::kNotReady);
    bool search = false, intent = false;
    for (const auto& f : e.failures()) {
      search |= f.reason == GateReason::kSearchBudget;
      intent |= f.reason == GateReason::kIntentBudget;
    }
    CHECK(search);
    CHECK(intent);
  }
  CHECK_FALSE(fs::exists(dir / "out" / "manifest.json"));
}

TEST_CASE("errors carry the failing stage") {
  const auto dir = oracle::scratch_dir("pipeline_err");
  try {
    review_to_bundle("/nonexistent/doc.jsonl", demo_config(), dir);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kIOError);
    CHECK(std::string(e.what()).rfind("[ingest]", 0) == 0);
  }

  RunConfig c = demo_config();
  c.doc_id = "unknown-doc";
  try {
    review_to_bundle(demo_doc(), c, dir);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kProviderError);
    CHECK(std::string(e.what()).rfind("[ledger]", 0) == 0);
  }
}

TEST_CASE("config file values override defaults") {
  const json j = {{"budgets", {{"alpha", 5}}},
                  {"seed", 17},
                  {"threads", 3},
                  {"extra_category", "Reproducibility"},
                  {"layout", {{"chars_per_line", 40}}},
                  {"ports", {{"judge", {{"mode", "live"}, {"url", "http://x/"}, {"timeout_ms", 50}}},
                             {"analyst", {{"fixture", "a.json"}}}}}};
  const RunConfig c = apply_config_json(RunConfig{}, j, "/base");
  CHECK(c.budgets.alpha == 5);
  CHECK(c.budgets.beta == RunConfig{}.budgets.beta);
  CHECK(c.seed == 17);
  CHECK(c.threads == 3);
  CHECK(c.extra_category == "Reproducibility");
  CHECK(c.layout.chars_per_line == 40);
  CHECK(c.judge.mode == PortMode::kLive);
  CHECK(c.judge.endpoint.timeout == std::chrono::milliseconds(50));
  CHECK(c.analyst.fixture == "/base/a.json");

  CHECK(code_of([] { apply_config_json(RunConfig{}, json::array()); }) == ErrorCode::kConfigError);
  CHECK(code_of([] { apply_config_json(RunConfig{}, json{{"seed", "x"}}); }) ==
        ErrorCode::kConfigError);
  CHECK(code_of([] {
          apply_config_json(RunConfig{}, json{{"ports", {{"analyst", {{"mode", "remote"}}}}}});
        }) == ErrorCode::kConfigError);
  CHECK(code_of([] { load_config_file(RunConfig{}, "/nonexistent/config.json"); }) ==
        ErrorCode::kIOError);
}

TEST_CASE("environment supplies credentials only") {
  ::setenv("REVPKG_API_KEY", "shared", 1);
  ::setenv("REVPKG_JUDGE_API_KEY", "judge-only", 1);
  RunConfig base;
  base.seed = 3;
  const RunConfig c = apply_env(base);
  ::unsetenv("REVPKG_API_KEY");
  ::unsetenv("REVPKG_JUDGE_API_KEY");
  CHECK(c.analyst.endpoint.api_key == "shared");
  CHECK(c.retriever.endpoint.api_key == "shared");
  CHECK(c.judge.endpoint.api_key == "judge-only");
  CHECK(c.seed == 3);
  CHECK(apply_env(RunConfig{}).analyst.endpoint.api_key.empty());
}

TEST_CASE("live port without a url is a config error") {
  RunConfig c;
  c.analyst.mode = PortMode::kLive;
  AuditLog log;
  CHECK(code_of([&] { PortSet ports(c, log); }) == ErrorCode::kConfigError);
}

TEST_CASE("notes become sequentially numbered annotations") {
  std::vector<ProvisionalNote> notes = {
      {"k1", {1, 1, 2}, "Clarity", "s1", "risk", "fix", "b", std::nullopt},
      {"k2", {2, 3, 3}, "Soundness", "s2", "risk", "fix", "b", std::string("C1")}};
  const auto anns = annotations_from_notes(notes, {{"k1", Severity::kMinor}, {"k2", Severity::kMajor}});
  REQUIRE(anns.size() == 2);
  CHECK(anns[0].ann_id == "ann-001");
  CHECK(anns[1].ann_id == "ann-002");
  CHECK(anns[1].severity == Severity::kMajor);
  CHECK(anns[1].claim_id == "C1");
  CHECK(code_of([&] { annotations_from_notes(notes, {{"k1", Severity::kMinor}}); }) ==
        ErrorCode::kMalformedProviderOutput);
}
