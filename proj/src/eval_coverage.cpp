#include "revpkg/eval_coverage.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>

#include <fmt/format.h>

#include "revpkg/error.hpp"
#include "revpkg/ports.hpp"

namespace revpkg {

using nlohmann::json;

namespace {

Fraction count(const LabelSet& labels, std::span<const CanonicalIssue> issues,
               std::string_view system, auto&& keep) {
  Fraction f;
  for (const CanonicalIssue& issue : issues) {
    if (!keep(issue)) continue;
    ++f.denominator;
    if (labels.find(system, issue.paper_id, issue.issue_id) == CoverageValue::kCovered) {
      ++f.numerator;
    }
  }
  return f;
}

std::optional<Fraction> defined(Fraction f) {
  if (f.denominator == 0) return std::nullopt;
  return f;
}

Error bad_record(std::size_t line, const std::string& what) {
  return Error(ErrorCode::kMalformedRecord, fmt::format("line {}: {}", line, what), line);
}

// Calls f(line_number, record) for each non-blank JSON line.
template <typename F>
void for_each_record(std::istream& in, F&& f) {
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (std::all_of(line.begin(), line.end(),
                    [](unsigned char c) { return std::isspace(c); })) {
      continue;
    }
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception&) {
      throw bad_record(n, "not valid JSON");
    }
    if (!rec.is_object()) throw bad_record(n, "record is not an object");
    try {
      f(n, rec);
    } catch (const json::exception& e) {
      throw bad_record(n, e.what());
    }
  }
}

std::ifstream open(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIOError, fmt::format("cannot open '{}'", path));
  return in;
}

}  // namespace

void LabelSet::add(CoverageLabel label) {
  Key key{label.system_id, label.paper_id, label.issue_id};
  if (labels_.contains(key)) {
    throw Error(ErrorCode::kDuplicateLabel,
                fmt::format("second label for system '{}', paper '{}', issue '{}'",
                            label.system_id, label.paper_id, label.issue_id));
  }
  labels_.emplace(std::move(key), std::move(label));
}

std::optional<CoverageValue> LabelSet::find(std::string_view system,
                                            std::string_view paper,
                                            std::string_view issue) const {
  auto it = labels_.find(Key{std::string(system), std::string(paper), std::string(issue)});
  if (it == labels_.end()) return std::nullopt;
  return it->second.label;
}

void LabelSet::set(std::string_view system, std::string_view paper, std::string_view issue,
                   CoverageValue value) {
  Key key{std::string(system), std::string(paper), std::string(issue)};
  auto it = labels_.find(key);
  if (it == labels_.end()) {
    labels_.emplace(key, CoverageLabel{std::get<0>(key), std::get<1>(key), std::get<2>(key),
                                       value, {}, std::nullopt});
  } else {
    it->second.label = value;
  }
}

std::vector<std::string> LabelSet::systems() const {
  std::set<std::string> out;
  for (const auto& [key, label] : labels_) out.insert(std::get<0>(key));
  return {out.begin(), out.end()};
}

double Fraction::value() const {
  return static_cast<double>(numerator) / static_cast<double>(denominator);
}

Fraction overall_coverage(const LabelSet& labels, std::span<const CanonicalIssue> issues,
                          std::string_view system) {
  if (issues.empty()) {
    throw Error(ErrorCode::kEmptyDenominator, "coverage needs at least one issue");
  }
  return count(labels, issues, system, [](const CanonicalIssue&) { return true; });
}

SeverityCoverage severity_coverage(const LabelSet& labels,
                                   std::span<const CanonicalIssue> issues,
                                   std::string_view system) {
  SeverityCoverage out;
  out.major = defined(count(labels, issues, system, [](const CanonicalIssue& i) {
    return i.severity == Severity::kMajor;
  }));
  out.minor = defined(count(labels, issues, system, [](const CanonicalIssue& i) {
    return i.severity == Severity::kMinor;
  }));
  if (out.major) out.critical_miss = out.major->complement();
  return out;
}

std::map<std::string, Fraction> category_coverage(const LabelSet& labels,
                                                  std::span<const CanonicalIssue> issues,
                                                  std::string_view system) {
  std::map<std::string, Fraction> out;
  for (const CanonicalIssue& issue : issues) {
    Fraction& f = out[issue.category];
    ++f.denominator;
    if (labels.find(system, issue.paper_id, issue.issue_id) == CoverageValue::kCovered) {
      ++f.numerator;
    }
  }
  return out;
}

std::vector<CoverageRow> coverage_table(const LabelSet& labels,
                                        std::span<const CanonicalIssue> issues,
                                        const std::vector<std::string>& systems) {
  std::vector<CoverageRow> rows;
  for (const std::string& s : systems) {
    rows.push_back({s, overall_coverage(labels, issues, s),
                    severity_coverage(labels, issues, s)});
  }
  return rows;
}

std::string format_percent(const std::optional<Fraction>& f) {
  if (!f || f->denominator == 0) return "undefined";
  return fmt::format("{:.2f}", 100.0 * f->value());
}

void write_coverage_table(std::ostream& out, const std::vector<CoverageRow>& rows) {
  out << "system,overall,major,minor,critical_miss\n";
  for (const CoverageRow& r : rows) {
    out << fmt::format("{},{},{},{},{}\n", r.system, format_percent(r.overall),
                       format_percent(r.severity.major), format_percent(r.severity.minor),
                       format_percent(r.severity.critical_miss));
  }
}

void write_category_table(std::ostream& out, const LabelSet& labels,
                          std::span<const CanonicalIssue> issues,
                          const std::vector<std::string>& systems) {
  out << "system,category,covered,total,coverage\n";
  for (const std::string& s : systems) {
    for (const auto& [cat, f] : category_coverage(labels, issues, s)) {
      out << fmt::format("{},{},{},{},{}\n", s, cat, f.numerator, f.denominator,
                         format_percent(f));
    }
  }
}

std::vector<CoverageLabel> parse_judge_coverage(std::string_view raw,
                                                std::span<const CanonicalIssue> issues,
                                                std::string_view system_id) {
  std::vector<CoverageLabel> out;
  for (const CanonicalIssue& issue : issues) {
    out.push_back({std::string(system_id), issue.paper_id, issue.issue_id,
                   CoverageValue::kMissing, "no judge label", std::nullopt});
  }

  json parsed = json::parse(raw, nullptr, false);
  if (parsed.is_discarded()) {
    for (auto& l : out) l.reason = "unparseable judge output";
    return out;
  }
  const json* records = nullptr;
  if (parsed.is_array()) {
    records = &parsed;
  } else if (parsed.is_object() && parsed.contains("labels") && parsed["labels"].is_array()) {
    records = &parsed["labels"];
  }
  if (records == nullptr) {
    for (auto& l : out) l.reason = "judge output has no label list";
    return out;
  }

  std::map<std::string, std::vector<const json*>> by_issue;
  for (const json& r : *records) {
    if (r.is_object() && r.contains("issue_id") && r["issue_id"].is_string()) {
      by_issue[r["issue_id"].get<std::string>()].push_back(&r);
    }
  }
  for (CoverageLabel& l : out) {
    auto it = by_issue.find(l.issue_id);
    if (it == by_issue.end()) continue;
    if (it->second.size() != 1) {
      l.reason = "issue judged more than once";
      continue;
    }
    const json& r = *it->second.front();
    const json label = r.value("label", json());
    if (!label.is_number_integer() || (label.get<int>() != 0 && label.get<int>() != 1)) {
      l.reason = "label outside {0,1}";
      continue;
    }
    l.label = label.get<int>() == 1 ? CoverageValue::kCovered : CoverageValue::kUncovered;
    l.reason = r.value("reason", std::string{});
    if (auto ev = r.find("evidence"); ev != r.end() && ev->is_string()) {
      l.evidence = ev->get<std::string>();
    }
  }
  return out;
}

std::vector<CoverageLabel> judge_coverage(std::span<const CanonicalIssue> issues,
                                          std::string_view review_text,
                                          std::string_view system_id, JudgePort& judge) {
  std::map<std::string, std::vector<CanonicalIssue>> by_paper;
  for (const CanonicalIssue& i : issues) by_paper[i.paper_id].push_back(i);
  std::vector<CoverageLabel> out;
  for (const auto& [paper, paper_issues] : by_paper) {
    std::string raw;
    try {
      raw = judge.judge_coverage(paper, paper_issues, review_text);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kMalformedProviderOutput) throw;
      raw.clear();
    }
    auto labels = parse_judge_coverage(raw, paper_issues, system_id);
    out.insert(out.end(), labels.begin(), labels.end());
  }
  return out;
}

std::vector<CanonicalIssue> read_issues(std::istream& in) {
  std::vector<CanonicalIssue> out;
  std::set<std::pair<std::string, std::string>> seen;
  for_each_record(in, [&](std::size_t n, const json& rec) {
    CanonicalIssue issue;
    issue.issue_id = rec.at("issue_id").get<std::string>();
    issue.paper_id = rec.at("paper_id").get<std::string>();
    const auto sev = parse_severity(rec.at("severity").get<std::string>());
    if (!sev) throw bad_record(n, "severity must be major or minor");
    issue.severity = *sev;
    issue.category = rec.at("category").get<std::string>();
    issue.description = rec.value("description", std::string{});
    if (issue.issue_id.empty() || issue.paper_id.empty() || issue.category.empty()) {
      throw bad_record(n, "issue_id, paper_id and category must be non-empty");
    }
    if (!seen.emplace(issue.paper_id, issue.issue_id).second) {
      throw bad_record(n, fmt::format("duplicate issue '{}' in paper '{}'", issue.issue_id,
                                      issue.paper_id));
    }
    out.push_back(std::move(issue));
  });
  return out;
}

std::vector<CanonicalIssue> read_issues_file(const std::string& path) {
  auto in = open(path);
  return read_issues(in);
}

LabelSet read_labels(std::istream& in, std::span<const CanonicalIssue> issues) {
  std::set<std::pair<std::string, std::string>> known;
  for (const CanonicalIssue& i : issues) known.emplace(i.paper_id, i.issue_id);
  LabelSet labels;
  for_each_record(in, [&](std::size_t n, const json& rec) {
    CoverageLabel l;
    l.system_id = rec.at("system_id").get<std::string>();
    l.paper_id = rec.at("paper_id").get<std::string>();
    l.issue_id = rec.at("issue_id").get<std::string>();
    if (!known.contains({l.paper_id, l.issue_id})) {
      throw bad_record(n, fmt::format("unknown issue '{}' in paper '{}'", l.issue_id,
                                      l.paper_id));
    }
    const json& v = rec.contains("label") ? rec.at("label") : json();
    if (v.is_null() || (v.is_string() && v.get<std::string>() == "missing")) {
      l.label = CoverageValue::kMissing;
    } else if (v.is_number_integer() && (v.get<int>() == 0 || v.get<int>() == 1)) {
      l.label = v.get<int>() == 1 ? CoverageValue::kCovered : CoverageValue::kUncovered;
    } else {
      throw bad_record(n, "label must be 0, 1, null or \"missing\"");
    }
    l.reason = rec.value("reason", std::string{});
    if (auto ev = rec.find("evidence"); ev != rec.end() && ev->is_string()) {
      l.evidence = ev->get<std::string>();
    }
    labels.add(std::move(l));
  });
  return labels;
}

LabelSet read_labels_file(const std::string& path, std::span<const CanonicalIssue> issues) {
  auto in = open(path);
  return read_labels(in, issues);
}

void to_json(json& j, const CanonicalIssue& issue) {
  j = {{"issue_id", issue.issue_id},
       {"paper_id", issue.paper_id},
       {"severity", to_string(issue.severity)},
       {"category", issue.category},
       {"description", issue.description}};
}

}  // namespace revpkg
