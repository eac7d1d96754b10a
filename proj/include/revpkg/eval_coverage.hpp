#pragma once

// Strict issue-coverage metrics. Missing or unparseable judge output counts
// as uncovered but keeps the issue in every denominator. Fractions are kept
// as exact counts; a zero denominator is "undefined", never 0.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "revpkg/annotations.hpp"

namespace revpkg {

class JudgePort;

struct CanonicalIssue {
  std::string issue_id;
  std::string paper_id;
  Severity severity = Severity::kMinor;
  std::string category;
  std::string description;
};

enum class CoverageValue { kUncovered, kCovered, kMissing };

struct CoverageLabel {
  std::string system_id;
  std::string paper_id;
  std::string issue_id;
  CoverageValue label = CoverageValue::kMissing;
  std::string reason;
  std::optional<std::string> evidence;
};

// Append-only label store keyed by (system, paper, issue); a second label
// for the same key is rejected with DuplicateLabel.
class LabelSet {
 public:
  void add(CoverageLabel label);
  // nullopt when no label was recorded.
  std::optional<CoverageValue> find(std::string_view system, std::string_view paper,
                                    std::string_view issue) const;
  // Replaces an existing label; for perturbation experiments only.
  void set(std::string_view system, std::string_view paper, std::string_view issue,
           CoverageValue value);
  std::vector<std::string> systems() const;
  std::size_t size() const { return labels_.size(); }

 private:
  using Key = std::tuple<std::string, std::string, std::string>;
  std::map<Key, CoverageLabel> labels_;
};

struct Fraction {
  std::int64_t numerator = 0;
  std::int64_t denominator = 0;

  double value() const;
  Fraction complement() const { return {denominator - numerator, denominator}; }

  friend bool operator==(const Fraction&, const Fraction&) = default;
};

// Throws EmptyDenominator when there are no issues.
Fraction overall_coverage(const LabelSet& labels,
                          std::span<const CanonicalIssue> issues,
                          std::string_view system);

struct SeverityCoverage {
  std::optional<Fraction> major;
  std::optional<Fraction> minor;
  std::optional<Fraction> critical_miss;  // 1 - major
};

SeverityCoverage severity_coverage(const LabelSet& labels,
                                   std::span<const CanonicalIssue> issues,
                                   std::string_view system);

// Categories without issues are omitted.
std::map<std::string, Fraction> category_coverage(const LabelSet& labels,
                                                  std::span<const CanonicalIssue> issues,
                                                  std::string_view system);

struct CoverageRow {
  std::string system;
  Fraction overall;
  SeverityCoverage severity;
};

std::vector<CoverageRow> coverage_table(const LabelSet& labels,
                                        std::span<const CanonicalIssue> issues,
                                        const std::vector<std::string>& systems);

// Percent with two decimals, or "undefined".
std::string format_percent(const std::optional<Fraction>& f);

// Columns: system,overall,major,minor,critical_miss
void write_coverage_table(std::ostream& out, const std::vector<CoverageRow>& rows);
void write_category_table(std::ostream& out, const LabelSet& labels,
                          std::span<const CanonicalIssue> issues,
                          const std::vector<std::string>& systems);

// Parses a judge's structured record into one label per issue. Entries that
// are missing, duplicated, or carry a label outside {0,1} become MISSING;
// unparseable output makes every issue MISSING.
std::vector<CoverageLabel> parse_judge_coverage(std::string_view raw,
                                                std::span<const CanonicalIssue> issues,
                                                std::string_view system_id);

// Judges every issue of one paper against one system review.
std::vector<CoverageLabel> judge_coverage(std::span<const CanonicalIssue> issues,
                                          std::string_view review_text,
                                          std::string_view system_id, JudgePort& judge);

// Throws MalformedRecord for bad records or duplicate (paper, issue) ids.
std::vector<CanonicalIssue> read_issues(std::istream& in);
std::vector<CanonicalIssue> read_issues_file(const std::string& path);
// Throws MalformedRecord, DuplicateLabel.
LabelSet read_labels(std::istream& in, std::span<const CanonicalIssue> issues);
LabelSet read_labels_file(const std::string& path,
                          std::span<const CanonicalIssue> issues);

void to_json(nlohmann::json& j, const CanonicalIssue& issue);

}  // namespace revpkg
