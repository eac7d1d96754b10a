// revpkg: review-package pipeline and evaluation harness.
//
//   revpkg review DOC.jsonl --out DIR [--config FILE] [--stub|--live] ...
//   revpkg validate-package DIR
//   revpkg eval-coverage --issues FILE (--labels FILE | --reviews FILE) [--out DIR]
//   revpkg eval-rank --chains FILE [--seed N] [--resamples N] [--h2h A,B] [--out DIR]
//
// Exit codes: 0 ok, 2 validation / not ready, 3 provider, 4 I/O.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "revpkg/error.hpp"
#include "revpkg/eval_coverage.hpp"
#include "revpkg/eval_ranking.hpp"
#include "revpkg/pipeline.hpp"

namespace fs = std::filesystem;
using namespace revpkg;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitProvider = 3;
constexpr int kExitIO = 4;

int exit_code(const Error& e) {
  switch (classify(e.code())) {
    case ErrorClass::kProvider: return kExitProvider;
    case ErrorClass::kIO: return kExitIO;
    case ErrorClass::kValidation: return kExitValidation;
  }
  return kExitValidation;
}

// Writes `text` to dir/name, or to stdout under a heading when dir is empty.
void emit(const std::string& dir, const std::string& name, const std::string& text) {
  if (dir.empty()) {
    std::cout << "# " << name << "\n" << text << "\n";
    return;
  }
  fs::create_directories(dir);
  std::ofstream out(fs::path(dir) / name, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIOError, fmt::format("cannot write {}/{}", dir, name));
  out << text;
}

struct ReviewArgs {
  std::string doc;
  std::string out;
  std::string config;
  bool stub = false;
  bool live = false;
  std::optional<int> alpha, beta, gamma;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::string analyst_fixture, retriever_fixture;
  std::string analyst_url, retriever_url;
  std::string doc_id;
  std::string extra_category;
};

struct RankArgs {
  std::string chains;
  std::string out;
  std::string config;
  std::vector<std::string> roster;
  std::optional<std::uint64_t> seed;
  std::optional<int> resamples;
  std::optional<unsigned> threads;
  std::optional<double> pseudo_count;
  bool exhaustive = false;
  bool no_bootstrap = false;
  std::vector<std::string> h2h;
};

struct CoverageArgs {
  std::string issues;
  std::string labels;
  std::string reviews;
  std::string judge_fixture;
  std::string config;
  std::string out;
  std::vector<std::string> systems;
};

// Flags > environment > config file > defaults.
RunConfig base_config(const std::string& config_path) {
  RunConfig c;
  if (!config_path.empty()) c = load_config_file(c, config_path);
  return apply_env(c);
}

int cmd_review(const ReviewArgs& a) {
  RunConfig c = base_config(a.config);
  if (a.alpha) c.budgets.alpha = *a.alpha;
  if (a.beta) c.budgets.beta = *a.beta;
  if (a.gamma) c.budgets.gamma = *a.gamma;
  if (a.seed) c.seed = *a.seed;
  if (a.threads) c.threads = *a.threads;
  if (!a.doc_id.empty()) c.doc_id = a.doc_id;
  if (!a.extra_category.empty()) c.extra_category = a.extra_category;
  if (!a.analyst_fixture.empty()) c.analyst.fixture = a.analyst_fixture;
  if (!a.retriever_fixture.empty()) c.retriever.fixture = a.retriever_fixture;
  if (!a.analyst_url.empty()) c.analyst.endpoint.base_url = a.analyst_url;
  if (!a.retriever_url.empty()) c.retriever.endpoint.base_url = a.retriever_url;
  if (a.stub || a.live) {
    const PortMode m = a.live ? PortMode::kLive : PortMode::kStub;
    c.analyst.mode = c.retriever.mode = c.judge.mode = m;
  }
  try {
    const ReviewRun run = review_to_bundle(a.doc, c, a.out);
    std::cout << fmt::format(
        "bundle written to {}: {} annotations, n_search={}, n_intent={}\n", a.out,
        run.package.annotations.size(), run.package.counters.n_search,
        run.package.counters.n_intent());
    return kExitOk;
  } catch (const NotReadyError& e) {
    nlohmann::json report = {{"ready", false}, {"reasons", e.failures()}};
    std::cerr << "NotReady: export gate failed\n" << report.dump(2) << "\n";
    return kExitValidation;
  }
}

int cmd_validate(const std::string& dir) {
  const ImportedBundle bundle = import_bundle(dir);
  const PackageValidation v = validate_bundle(bundle);
  nlohmann::json out = {{"ready", v.gate.ready},
                        {"gate_failures", v.gate.failures},
                        {"integrity", v.integrity},
                        {"ok", v.ok()}};
  std::cout << out.dump(2) << "\n";
  return v.ok() ? kExitOk : kExitValidation;
}

int cmd_eval_coverage(const CoverageArgs& a) {
  const auto issues = read_issues_file(a.issues);
  LabelSet labels;
  if (!a.labels.empty()) {
    labels = read_labels_file(a.labels, issues);
  } else if (!a.reviews.empty()) {
    RunConfig c = base_config(a.config);
    if (!a.judge_fixture.empty()) c.judge.fixture = a.judge_fixture;
    AuditLog log;
    PortSet ports(c, log);
    std::ostringstream labels_out;
    for (const nlohmann::json& rec : read_jsonl_file(a.reviews)) {
      const std::string system = rec.at("system_id").get<std::string>();
      const std::string paper = rec.at("paper_id").get<std::string>();
      std::vector<CanonicalIssue> paper_issues;
      for (const auto& i : issues) {
        if (i.paper_id == paper) paper_issues.push_back(i);
      }
      for (CoverageLabel& l : judge_coverage(paper_issues, rec.value("review", ""), system,
                                             ports.judge())) {
        nlohmann::json lj = {{"system_id", l.system_id}, {"paper_id", l.paper_id},
                             {"issue_id", l.issue_id}, {"reason", l.reason}};
        lj["label"] = l.label == CoverageValue::kMissing ? nlohmann::json()
                      : nlohmann::json(l.label == CoverageValue::kCovered ? 1 : 0);
        labels_out << lj.dump() << "\n";
        labels.add(std::move(l));
      }
    }
    emit(a.out, "labels.jsonl", labels_out.str());
  } else {
    throw Error(ErrorCode::kConfigError, "eval-coverage needs --labels or --reviews");
  }

  // Listed systems without a single label still get a (zero) row.
  std::vector<std::string> systems = labels.systems();
  for (const std::string& s : a.systems) {
    if (std::find(systems.begin(), systems.end(), s) == systems.end()) systems.push_back(s);
  }
  std::ostringstream table, categories;
  write_coverage_table(table, coverage_table(labels, issues, systems));
  write_category_table(categories, labels, issues, systems);
  emit(a.out, "coverage.csv", table.str());
  emit(a.out, "category_coverage.csv", categories.str());
  return kExitOk;
}

int cmd_eval_rank(const RankArgs& a) {
  RunConfig c = base_config(a.config);
  if (a.seed) c.seed = *a.seed;
  if (a.resamples) c.resamples = *a.resamples;
  if (a.threads) c.threads = *a.threads;
  if (a.pseudo_count) c.bt.pseudo_count = *a.pseudo_count;

  const ChainFile file = read_chain_file(a.chains);
  std::vector<std::string> ids = a.roster;
  if (ids.empty() && file.roster) ids = *file.roster;
  if (ids.empty()) {
    throw Error(ErrorCode::kConfigError,
                "no roster: pass --roster or put a {\"roster\": [...]} record in the chain file");
  }
  const ChainPool pool = build_chain_pool(file.records, Roster(ids));
  for (const std::string& why : pool.drop_reasons) std::cerr << "dropped " << why << "\n";

  RankingOptions opt;
  opt.bt = c.bt;
  opt.with_bootstrap = !a.no_bootstrap;
  opt.bootstrap.resamples = c.resamples;
  opt.bootstrap.seed = c.seed;
  opt.bootstrap.exhaustive = a.exhaustive;
  opt.bootstrap.threads = c.threads;
  const RankingReport report = evaluate_ranking(pool, opt);

  std::ostringstream wins, ranks, elo;
  write_win_matrix(wins, report.wins);
  write_rank_table(ranks, report);
  write_elo_table(elo, report);
  emit(a.out, "win_matrix.csv", wins.str());
  emit(a.out, "rank_table.csv", ranks.str());
  emit(a.out, "elo_table.csv", elo.str());
  if (a.h2h.size() == 2) {
    std::ostringstream h;
    write_head_to_head(h, head_to_head(pool.chains, a.h2h[0], a.h2h[1]));
    emit(a.out, "head_to_head.csv", h.str());
  }
  std::string summary = fmt::format("chains_used,{}\nchains_dropped,{}\n", report.chains_used,
                                    report.chains_dropped);
  if (report.bootstrap) {
    summary += fmt::format("resamples_usable,{}\nresamples_skipped,{}\n",
                           report.bootstrap->usable, report.bootstrap->skipped);
  }
  emit(a.out, "summary.csv", summary);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Review-package pipeline and review-system evaluation harness"};
  app.require_subcommand(1);

  ReviewArgs review;
  auto* rv = app.add_subcommand("review", "Run the review pipeline on a block list");
  rv->add_option("doc", review.doc, "Block-list JSONL file")->required();
  rv->add_option("--out", review.out, "Bundle output directory")->required();
  rv->add_option("--config", review.config, "JSON config file");
  rv->add_flag("--stub", review.stub, "Answer every port from fixtures");
  rv->add_flag("--live", review.live, "Call live endpoints");
  rv->add_option("--alpha", review.alpha, "Minimum retrieval calls");
  rv->add_option("--beta", review.beta, "Minimum verified questions");
  rv->add_option("--gamma", review.gamma, "Minimum annotations");
  rv->add_option("--seed", review.seed, "Run seed");
  rv->add_option("--threads", review.threads, "Verification workers");
  rv->add_option("--analyst-fixture", review.analyst_fixture, "Analyst fixture (stub)");
  rv->add_option("--retriever-fixture", review.retriever_fixture, "Retriever corpus (stub)");
  rv->add_option("--analyst-url", review.analyst_url, "Analyst endpoint (live)");
  rv->add_option("--retriever-url", review.retriever_url, "Retriever endpoint (live)");
  rv->add_option("--doc-id", review.doc_id, "Document id (default: file name)");
  rv->add_option("--extra-category", review.extra_category, "Eighth category label");

  std::string bundle_dir;
  auto* vp = app.add_subcommand("validate-package", "Re-check an exported bundle");
  vp->add_option("bundle", bundle_dir, "Bundle directory")->required();

  CoverageArgs cov;
  auto* ec = app.add_subcommand("eval-coverage", "Strict issue-coverage tables");
  ec->add_option("--issues", cov.issues, "Canonical issue JSONL")->required();
  ec->add_option("--labels", cov.labels, "Coverage label JSONL");
  ec->add_option("--reviews", cov.reviews, "System review JSONL, judged via the judge port");
  ec->add_option("--judge-fixture", cov.judge_fixture, "Judge fixture (stub)");
  ec->add_option("--config", cov.config, "JSON config file");
  ec->add_option("--out", cov.out, "Output directory (default: stdout)");
  ec->add_option("--systems", cov.systems, "Systems to report even without labels")
      ->delimiter(',');

  RankArgs rank;
  auto* er = app.add_subcommand("eval-rank", "Ranking-chain aggregates and Elo");
  er->add_option("--chains", rank.chains, "Chain JSONL")->required();
  er->add_option("--roster", rank.roster, "System ids")->delimiter(',');
  er->add_option("--config", rank.config, "JSON config file");
  er->add_option("--seed", rank.seed, "Bootstrap seed");
  er->add_option("--resamples", rank.resamples, "Bootstrap resamples");
  er->add_option("--threads", rank.threads, "Bootstrap workers");
  er->add_option("--pseudo-count", rank.pseudo_count, "Pseudo-count added to win cells");
  er->add_flag("--exhaustive", rank.exhaustive, "Enumerate every resample");
  er->add_flag("--no-bootstrap", rank.no_bootstrap, "Skip confidence intervals");
  er->add_option("--h2h", rank.h2h, "Head-to-head pair A,B")->delimiter(',')->expected(2);
  er->add_option("--out", rank.out, "Output directory (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*rv) return cmd_review(review);
    if (*vp) return cmd_validate(bundle_dir);
    if (*ec) return cmd_eval_coverage(cov);
    if (*er) return cmd_eval_rank(rank);
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return exit_code(e);
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "IOError: " << e.what() << "\n";
    return kExitIO;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitValidation;
  }
  return kExitValidation;
}
