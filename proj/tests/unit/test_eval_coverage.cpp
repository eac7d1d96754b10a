#include <random>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "revpkg/error.hpp"
#include "revpkg/eval_coverage.hpp"
#include "revpkg/ports.hpp"

using namespace revpkg;
using nlohmann::json;

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

std::vector<CanonicalIssue> fixture_issues() {
  return read_issues_file(oracle::fixture("coverage/issues.jsonl"));
}

CanonicalIssue issue(std::string id, Severity s, std::string cat = "Soundness") {
  return {std::move(id), "P", s, std::move(cat), ""};
}

void label(LabelSet& ls, const std::string& sys, const std::string& id, CoverageValue v) {
  ls.add({sys, "P", id, v, "", std::nullopt});
}

constexpr auto kC = CoverageValue::kCovered;
constexpr auto kU = CoverageValue::kUncovered;
constexpr auto kM = CoverageValue::kMissing;

}  // namespace

TEST_CASE("overall coverage examples") {
  std::vector<CanonicalIssue> issues;
  for (int i = 0; i < 4; ++i) issues.push_back(issue("i" + std::to_string(i), Severity::kMinor));
  LabelSet ls;
  label(ls, "s", "i0", kC);
  label(ls, "s", "i1", kC);
  label(ls, "s", "i2", kU);
  label(ls, "s", "i3", kM);
  CHECK(overall_coverage(ls, issues, "s") == Fraction{2, 4});
  CHECK(overall_coverage(ls, issues, "s").value() == 0.5);

  LabelSet all;
  for (const auto& i : issues) label(all, "s", i.issue_id, kC);
  CHECK(overall_coverage(all, issues, "s").value() == 1.0);

  // no labels at all: counted as uncovered, not dropped
  CHECK(overall_coverage(ls, issues, "nobody") == Fraction{0, 4});
  CHECK(code_of([&] { overall_coverage(ls, std::vector<CanonicalIssue>{}, "s"); }) ==
        ErrorCode::kEmptyDenominator);
}

TEST_CASE("severity coverage and critical miss") {
  std::vector<CanonicalIssue> issues = {issue("a", Severity::kMajor), issue("b", Severity::kMajor),
                                        issue("c", Severity::kMinor), issue("d", Severity::kMinor)};
  LabelSet ls;
  label(ls, "s", "a", kC);
  label(ls, "s", "b", kU);
  label(ls, "s", "c", kC);
  label(ls, "s", "d", kC);
  const auto sc = severity_coverage(ls, issues, "s");
  CHECK(sc.major->value() == 0.5);
  CHECK(sc.minor->value() == 1.0);
  CHECK(sc.critical_miss->value() == 0.5);

  LabelSet full;
  label(full, "s", "a", kC);
  label(full, "s", "b", kC);
  CHECK(severity_coverage(full, issues, "s").critical_miss->value() == 0.0);

  // 0.3726 major coverage leaves 0.6274 missed
  const Fraction major{3726, 10000};
  CHECK(format_percent(major) == "37.26");
  CHECK(format_percent(major.complement()) == "62.74");

  std::vector<CanonicalIssue> minor_only = {issue("c", Severity::kMinor)};
  const auto undefined = severity_coverage(ls, minor_only, "s");
  CHECK_FALSE(undefined.major.has_value());
  CHECK_FALSE(undefined.critical_miss.has_value());
  CHECK(format_percent(undefined.major) == "undefined");
}

TEST_CASE("category coverage examples") {
  std::vector<CanonicalIssue> issues;
  for (int i = 0; i < 6; ++i) issues.push_back(issue("e" + std::to_string(i), Severity::kMinor, "Ethics"));
  LabelSet none, half;
  for (int i = 0; i < 6; ++i) {
    label(none, "s", "e" + std::to_string(i), kU);
    label(half, "s", "e" + std::to_string(i), i < 3 ? kC : kM);
  }
  CHECK(category_coverage(none, issues, "s").at("Ethics").value() == 0.0);
  CHECK(category_coverage(half, issues, "s").at("Ethics").value() == 0.5);
  CHECK_FALSE(category_coverage(half, issues, "s").contains("Novelty"));
}

TEST_CASE("fixture table matches hand counts") {
  const auto issues = fixture_issues();
  REQUIRE(issues.size() == 20);
  const auto labels = read_labels_file(oracle::fixture("coverage/labels.jsonl"), issues);
  const auto rows = coverage_table(labels, issues, {"sysA", "sysB", "sysC"});
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].overall == Fraction{11, 20});
  CHECK(rows[0].severity.major == Fraction{5, 8});
  CHECK(rows[0].severity.minor == Fraction{6, 12});
  CHECK(rows[0].severity.critical_miss == Fraction{3, 8});
  CHECK(rows[1].overall == Fraction{7, 20});
  CHECK(rows[1].severity.major == Fraction{2, 8});
  CHECK(rows[1].severity.minor == Fraction{5, 12});
  CHECK(rows[2].overall == Fraction{0, 20});
  CHECK(rows[2].severity.critical_miss == Fraction{8, 8});

  std::ostringstream csv;
  write_coverage_table(csv, rows);
  CHECK(csv.str() ==
        "system,overall,major,minor,critical_miss\n"
        "sysA,55.00,62.50,50.00,37.50\n"
        "sysB,35.00,25.00,41.67,75.00\n"
        "sysC,0.00,0.00,0.00,100.00\n");

  const auto cats = category_coverage(labels, issues, "sysA");
  CHECK(cats.at("Experiments") == Fraction{5, 5});
  CHECK(cats.at("Ethics") == Fraction{1, 2});
  CHECK(category_coverage(labels, issues, "sysB").at("Ethics") == Fraction{1, 2});
}

TEST_CASE("weighted consistency and complement hold on random labels") {
  const auto issues = fixture_issues();
  std::mt19937_64 rng(5);
  const CoverageValue values[] = {kC, kU, kM};
  for (int t = 0; t < 300; ++t) {
    LabelSet ls;
    for (const auto& i : issues) {
      const int pick = std::uniform_int_distribution<int>(0, 3)(rng);
      if (pick < 3) ls.add({"s", i.paper_id, i.issue_id, values[pick], "", std::nullopt});
    }
    const Fraction all = overall_coverage(ls, issues, "s");
    const auto sc = severity_coverage(ls, issues, "s");
    CHECK(all.numerator == sc.major->numerator + sc.minor->numerator);
    CHECK(all.denominator == sc.major->denominator + sc.minor->denominator);
    CHECK(sc.critical_miss->numerator + sc.major->numerator == sc.major->denominator);
    CHECK(all.value() >= 0.0);
    CHECK(all.value() <= 1.0);
  }
}

TEST_CASE("replacing MISSING with 1 never lowers a metric") {
  const auto issues = fixture_issues();
  std::mt19937_64 rng(11);
  for (int t = 0; t < 200; ++t) {
    LabelSet ls;
    for (const auto& i : issues) {
      ls.add({"s", i.paper_id, i.issue_id,
              std::bernoulli_distribution(0.5)(rng) ? kC : kM, "", std::nullopt});
    }
    const auto& target = issues[std::uniform_int_distribution<std::size_t>(0, issues.size() - 1)(rng)];
    const auto before_value = ls.find("s", target.paper_id, target.issue_id);
    const Fraction before = overall_coverage(ls, issues, "s");
    const auto before_sev = severity_coverage(ls, issues, "s");
    const auto flipped = *before_value == kM ? kC : kM;
    ls.set("s", target.paper_id, target.issue_id, flipped);
    const Fraction after = overall_coverage(ls, issues, "s");
    const auto after_sev = severity_coverage(ls, issues, "s");
    if (flipped == kC) {
      CHECK(after.numerator >= before.numerator);
      CHECK(after_sev.major->numerator >= before_sev.major->numerator);
      CHECK(after_sev.critical_miss->numerator <= before_sev.critical_miss->numerator);
    } else {
      CHECK(after.numerator <= before.numerator);
      CHECK(after_sev.minor->numerator <= before_sev.minor->numerator);
    }
  }
}

TEST_CASE("judge output parsing") {
  std::vector<CanonicalIssue> issues = {issue("a", Severity::kMajor), issue("b", Severity::kMinor),
                                        issue("c", Severity::kMinor)};
  const auto labels = parse_judge_coverage(
      R"({"labels":[{"issue_id":"a","label":1,"evidence":"quote"},
                    {"issue_id":"b","label":0},{"issue_id":"b","label":1}]})",
      issues, "s");
  REQUIRE(labels.size() == 3);
  CHECK(labels[0].label == kC);
  CHECK(labels[0].evidence == "quote");
  CHECK(labels[1].label == kM);  // judged twice
  CHECK(labels[2].label == kM);  // never judged

  const auto bad_value = parse_judge_coverage(R"([{"issue_id":"a","label":2}])", issues, "s");
  CHECK(bad_value[0].label == kM);
  for (const auto& l : parse_judge_coverage("not json {", issues, "s")) CHECK(l.label == kM);
  for (const auto& l : parse_judge_coverage(R"({"other": 1})", issues, "s")) CHECK(l.label == kM);
}

TEST_CASE("stub judge labels by phrase") {
  std::vector<CanonicalIssue> issues = {{"i1", "P", Severity::kMajor, "Clarity", "error bars"},
                                        {"i2", "P", Severity::kMinor, "Clarity", "typos"}};
  JudgeFixture fx(json::object());
  TransportJudge judge(fx);
  const auto out = judge_coverage(issues, "Where are the error bars?", "s", judge);
  REQUIRE(out.size() == 2);
  CHECK(out[0].label == kC);
  CHECK(out[1].label == kU);
}

TEST_CASE("judged fixture run counts the failed paper as uncovered") {
  const auto issues = fixture_issues();
  auto fx = JudgeFixture::from_file(oracle::fixture("coverage/judge.json"));
  TransportJudge judge(fx);
  LabelSet labels;
  for (const json& rec : read_jsonl_file(oracle::fixture("coverage/reviews.jsonl"))) {
    std::vector<CanonicalIssue> paper;
    for (const auto& i : issues) {
      if (i.paper_id == rec["paper_id"]) paper.push_back(i);
    }
    for (auto& l : judge_coverage(paper, rec.value("review", ""), rec["system_id"].get<std::string>(),
                                  judge)) {
      labels.add(std::move(l));
    }
  }
  CHECK(labels.find("sysA", "P5", "P5-i1") == kM);
  const auto rows = coverage_table(labels, issues, {"sysA", "sysB"});
  CHECK(rows[0].overall == Fraction{8, 20});
  CHECK(rows[0].severity.major == Fraction{3, 8});
  CHECK(rows[1].overall == Fraction{6, 20});
  CHECK(rows[1].severity.critical_miss == Fraction{6, 8});
}

TEST_CASE("label file errors") {
  const auto issues = fixture_issues();
  auto read = [&](const std::string& text) {
    std::istringstream in(text);
    return read_labels(in, issues);
  };
  const std::string line =
      R"({"system_id":"s","paper_id":"P1","issue_id":"P1-i1","label":1})";
  CHECK(read(line + "\n").size() == 1);
  CHECK(code_of([&] { read(line + "\n" + line + "\n"); }) == ErrorCode::kDuplicateLabel);
  CHECK(code_of([&] { read(R"({"system_id":"s","paper_id":"P1","issue_id":"P9-i9","label":1})"); }) ==
        ErrorCode::kMalformedRecord);
  CHECK(code_of([&] { read(R"({"system_id":"s","paper_id":"P1","issue_id":"P1-i1","label":"yes"})"); }) ==
        ErrorCode::kMalformedRecord);
  try {
    read(line + "\n{broken\n");
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kMalformedRecord);
    CHECK(e.index() == 2);
  }
  CHECK(read(R"({"system_id":"s","paper_id":"P1","issue_id":"P1-i1","label":null})")
            .find("s", "P1", "P1-i1") == kM);
}

TEST_CASE("issue file errors") {
  auto read = [](const std::string& text) {
    std::istringstream in(text);
    return read_issues(in);
  };
  const std::string ok = R"({"issue_id":"a","paper_id":"P","severity":"major","category":"Ethics"})";
  CHECK(read(ok).size() == 1);
  CHECK(code_of([&] { read(ok + "\n" + ok); }) == ErrorCode::kMalformedRecord);
  CHECK(code_of([&] {
          read(R"({"issue_id":"a","paper_id":"P","severity":"huge","category":"Ethics"})");
        }) == ErrorCode::kMalformedRecord);
  CHECK(code_of([] { read_issues_file("/nonexistent/issues.jsonl"); }) == ErrorCode::kIOError);
}
