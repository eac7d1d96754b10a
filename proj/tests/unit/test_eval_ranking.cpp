#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "revpkg/error.hpp"
#include "revpkg/eval_ranking.hpp"

using namespace revpkg;

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

const Roster kAbcd({"A", "B", "C", "D"});

Roster roster_of(std::size_t n) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back(std::string(1, static_cast<char>('A' + i)));
  return Roster(ids);
}

WinMatrix matrix(const oracle::Matrix& m) {
  WinMatrix w(roster_of(m.size()));
  for (std::size_t x = 0; x < m.size(); ++x) {
    for (std::size_t y = 0; y < m.size(); ++y) w.wins[x][y] = m[x][y];
  }
  return w;
}

ChainPool pool_of(const std::vector<ChainRecord>& records, const Roster& roster) {
  return build_chain_pool(records, roster);
}

ChainPool fixture_pool(const std::string& name) {
  const ChainFile f = read_chain_file(oracle::fixture("ranking/" + name));
  return build_chain_pool(f.records, Roster(*f.roster));
}

}  // namespace

TEST_CASE("chain grammar") {
  const auto c = parse_chain("A > B = C > D", kAbcd);
  REQUIRE(c.tiers.size() == 3);
  CHECK(c.tiers[0] == Tier{"A"});
  CHECK(c.tiers[1] == Tier{"B", "C"});
  CHECK(c.tiers[2] == Tier{"D"});
  CHECK(parse_chain("  A>B  ", kAbcd).tiers.size() == 2);
  CHECK(code_of([] { parse_chain("A > A", kAbcd); }) == ErrorCode::kDuplicateSystem);
  CHECK(code_of([] { parse_chain("A >> B", kAbcd); }) == ErrorCode::kMalformedToken);
  CHECK(code_of([] { parse_chain("A > > B", kAbcd); }) == ErrorCode::kMalformedToken);
  CHECK(code_of([] { parse_chain("A = ", kAbcd); }) == ErrorCode::kMalformedToken);
  CHECK(code_of([] { parse_chain("   ", kAbcd); }) == ErrorCode::kEmptyChain);
  CHECK(code_of([] { parse_chain("A > Z", kAbcd); }) == ErrorCode::kUnknownSystem);
  CHECK(code_of([] { Roster({"A", "A"}); }) == ErrorCode::kDuplicateSystem);
  CHECK(format_chain(c) == "A > B = C > D");
  CHECK(parse_aspect("Technical Accuracy") == Aspect::kTechnicalAccuracy);
  CHECK(parse_aspect("overall_judgment") == Aspect::kOverallJudgment);
  CHECK_FALSE(parse_aspect("Vibes").has_value());
}

TEST_CASE("tier ranks") {
  const auto r = tier_ranks(parse_chain("A > B = C > D", kAbcd));
  CHECK(r.at("A") == 1.0);
  CHECK(r.at("B") == 2.5);
  CHECK(r.at("C") == 2.5);
  CHECK(r.at("D") == 4.0);
  for (const auto& [id, v] : tier_ranks(parse_chain("A = B = C", kAbcd))) CHECK(v == 2.0);
  const auto strict = tier_ranks(parse_chain("D > C > B > A", kAbcd));
  CHECK(strict.at("D") == 1.0);
  CHECK(strict.at("A") == 4.0);
}

TEST_CASE("win matrix ignores ties") {
  const Roster ab({"A", "B"});
  std::vector<RankingChain> one = {parse_chain("A > B", ab)};
  auto w = accumulate_wins(one, ab);
  CHECK(w.at(0, 1) == 1);
  CHECK(w.at(1, 0) == 0);
  std::vector<RankingChain> tie = {parse_chain("A = B", ab)};
  w = accumulate_wins(tie, ab);
  CHECK(w.at(0, 1) == 0);
  CHECK(w.at(1, 0) == 0);
  std::vector<RankingChain> both = {parse_chain("A > B", ab), parse_chain("B > A", ab)};
  w = accumulate_wins(both, ab);
  CHECK(w.at(0, 1) == 1);
  CHECK(w.at(1, 0) == 1);
  CHECK(w.at(0, 0) == 0);
}

TEST_CASE("win fraction and average win rate") {
  auto w = matrix({{0, 2, 1, 0}, {1, 0, 1, 0}, {0, 1, 0, 0}, {0, 0, 0, 0}});
  CHECK(*win_fraction(w, 0, 1) == doctest::Approx(2.0 / 3.0));
  CHECK_FALSE(win_fraction(w, 0, 3).has_value());
  // opponents B (2/3) and C (1/1); D never met
  CHECK(*avg_win_rate(w, 0) == doctest::Approx((2.0 / 3.0 + 1.0) / 2.0));
  CHECK_FALSE(avg_win_rate(w, 3).has_value());
  auto two = matrix({{0, 1, 1}, {1, 0, 0}, {0, 0, 0}});
  CHECK(*avg_win_rate(two, 0) == doctest::Approx(0.75));
}

TEST_CASE("average rank skips chains without the system") {
  const Roster abc({"A", "B", "C"});
  std::vector<RankingChain> chains = {parse_chain("A > B = C", abc), parse_chain("B > A", abc)};
  CHECK(*avg_rank(chains, "A") == doctest::Approx(1.5));
  CHECK(*avg_rank(chains, "C") == doctest::Approx(2.5));
  CHECK_FALSE(avg_rank(chains, "Z").has_value());
}

TEST_CASE("bradley-terry examples") {
  auto sym = fit_bradley_terry(matrix({{0, 3}, {3, 0}}));
  CHECK(sym.theta[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sym.theta[1] == doctest::Approx(1.0).epsilon(1e-12));

  const oracle::Matrix m = {{0, 3, 3}, {1, 0, 3}, {1, 1, 0}};
  const auto fit = fit_bradley_terry(matrix(m));
  CHECK(fit.converged);
  const auto ref = oracle::bt_coordinate_search(m);
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(fit.theta[i] - ref[i]) < 1e-6);
  CHECK(std::abs(std::log(fit.theta[0]) + std::log(fit.theta[1]) + std::log(fit.theta[2])) < 1e-9);

  CHECK(code_of([] { fit_bradley_terry(matrix({{0, 2, 1}, {0, 0, 1}, {0, 1, 0}})); }) ==
        ErrorCode::kDegenerateMLE);
  CHECK(code_of([] {
          fit_bradley_terry(matrix({{0, 1, 0, 0}, {1, 0, 0, 0}, {0, 0, 0, 1}, {0, 0, 1, 0}}));
        }) == ErrorCode::kDisconnectedComparisons);
}

TEST_CASE("pseudo-count regularizes an all-win system") {
  BtOptions o;
  o.pseudo_count = 1;
  // effective counts 4 vs 1
  const auto fit = fit_bradley_terry(matrix({{0, 3}, {0, 0}}), o);
  CHECK(fit.theta[0] == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(fit.theta[1] == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("bradley-terry agrees with the coordinate-search oracle") {
  std::mt19937_64 rng(101);
  int checked = 0;
  while (checked < 25) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 4)(rng);
    oracle::Matrix m(n, std::vector<long>(n, 0));
    for (std::size_t x = 0; x < n; ++x) {
      for (std::size_t y = 0; y < n; ++y) {
        if (x != y) m[x][y] = std::uniform_int_distribution<long>(0, 5)(rng);
      }
    }
    if (!oracle::strongly_connected(m)) {
      const auto code = code_of([&] { fit_bradley_terry(matrix(m)); });
      CHECK((code == ErrorCode::kDegenerateMLE || code == ErrorCode::kDisconnectedComparisons));
      continue;
    }
    ++checked;
    BtOptions o;
    o.record_trace = true;
    const auto fit = fit_bradley_terry(matrix(m), o);
    const auto ref = oracle::bt_coordinate_search(m);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(fit.theta[i] - ref[i]) < 1e-6);
    for (std::size_t i = 1; i < fit.log_likelihood_trace.size(); ++i) {
      CHECK(fit.log_likelihood_trace[i] >= fit.log_likelihood_trace[i - 1] - 1e-12);
    }

    // relabeling systems relabels abilities
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    oracle::Matrix pm(n, std::vector<long>(n, 0));
    for (std::size_t x = 0; x < n; ++x) {
      for (std::size_t y = 0; y < n; ++y) pm[perm[x]][perm[y]] = m[x][y];
    }
    const auto pfit = fit_bradley_terry(matrix(pm));
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(pfit.theta[perm[i]] - fit.theta[i]) < 1e-8);
  }
}

TEST_CASE("elo mapping") {
  const std::vector<double> theta = {1.0, 10.0, 0.1};
  const auto elo = to_elo(theta);
  CHECK(elo[0] == doctest::Approx(1500));
  CHECK(elo[1] == doctest::Approx(1900));
  CHECK(elo[2] == doctest::Approx(1100));
  CHECK(code_of([] { to_elo(std::vector<double>{1.0, 0.0}); }) == ErrorCode::kInvalidAbility);
  CHECK(code_of([] { to_elo(std::vector<double>{-2.0}); }) == ErrorCode::kInvalidAbility);
}

TEST_CASE("nearest-rank percentile matches the integer oracle") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 3000)(rng);
    std::vector<double> v(n);
    for (auto& x : v) x = std::uniform_real_distribution<double>(0, 1)(rng);
    std::sort(v.begin(), v.end());
    CHECK(nearest_rank_percentile(v, 0.025) == oracle::percentile_num_den(v, 25, 1000));
    CHECK(nearest_rank_percentile(v, 0.975) == oracle::percentile_num_den(v, 975, 1000));
  }
}

TEST_CASE("bootstrap on a single paper is a zero-width interval") {
  const Roster abc({"A", "B", "C"});
  const auto pool = pool_of({{"p", "Technical Accuracy", "A > B > C"},
                             {"p", "Overall Judgment", "C > A > B"},
                             {"p", "Analytical Depth", "B > C = A"}},
                            abc);
  BootstrapOptions o;
  o.resamples = 100;
  o.seed = 9;
  const auto r = bootstrap_elo(pool, o);
  const auto elo = to_elo(fit_bradley_terry(accumulate_wins(pool.chains, abc)).theta);
  CHECK(r.usable == 100);
  for (std::size_t s = 0; s < 3; ++s) {
    CHECK(r.intervals[s].lo == r.intervals[s].hi);
    CHECK(r.intervals[s].lo == doctest::Approx(elo[s]).epsilon(1e-12));
  }
}

TEST_CASE("bootstrap is seed-deterministic and thread-independent") {
  const auto pool = fixture_pool("chains.jsonl");
  BootstrapOptions o;
  o.resamples = 300;
  o.seed = 42;
  const auto a = bootstrap_elo(pool, o);
  const auto b = bootstrap_elo(pool, o);
  o.threads = 4;
  const auto c = bootstrap_elo(pool, o);
  for (std::size_t s = 0; s < pool.roster.size(); ++s) {
    CHECK(a.intervals[s].lo == b.intervals[s].lo);
    CHECK(a.intervals[s].hi == b.intervals[s].hi);
    CHECK(a.intervals[s].lo == c.intervals[s].lo);
    CHECK(a.intervals[s].hi == c.intervals[s].hi);
    CHECK(a.intervals[s].lo <= a.intervals[s].hi);
  }
  CHECK(a.usable + a.skipped == 300);
}

TEST_CASE("bootstrap fails when every resample is degenerate") {
  const Roster ab({"A", "B"});
  const auto pool = pool_of({{"p", "Technical Accuracy", "A > B"}}, ab);
  BootstrapOptions o;
  o.resamples = 10;
  CHECK(code_of([&] { bootstrap_elo(pool, o); }) == ErrorCode::kBootstrapFailed);
  CHECK(code_of([&] { bootstrap_elo(ChainPool{ab, {}, 0, {}}, o); }) ==
        ErrorCode::kBootstrapFailed);
}

TEST_CASE("exhaustive bootstrap interval contains the point estimate") {
  const auto pool = fixture_pool("five_papers.jsonl");
  BootstrapOptions o;
  o.exhaustive = true;
  const auto r = bootstrap_elo(pool, o);
  CHECK(r.usable + r.skipped == 3125);
  const auto elo = to_elo(fit_bradley_terry(accumulate_wins(pool.chains, pool.roster)).theta);
  for (std::size_t s = 0; s < 3; ++s) {
    CHECK(r.intervals[s].lo <= elo[s]);
    CHECK(elo[s] <= r.intervals[s].hi);
  }
}

TEST_CASE("chain pool drops bad instances and counts them") {
  const auto pool = fixture_pool("chains.jsonl");
  CHECK(pool.dropped == 1);
  CHECK(pool.chains.size() == 40);
  CHECK(pool.papers().size() == 8);

  const Roster ab({"A", "B"});
  const auto p = pool_of({{"x", "Overall Judgment", "A > B"},
                          {"x", "overall_judgment", "B > A"},
                          {"x", "Vibes", "A > B"},
                          {"y", "Overall Judgment", "A > C"}},
                         ab);
  CHECK(p.chains.size() == 1);
  CHECK(p.dropped == 3);
  CHECK(p.drop_reasons.size() == 3);
}

TEST_CASE("head-to-head percentages") {
  const Roster ab({"A", "B"});
  const auto p = pool_of({{"1", "Overall Judgment", "A > B"},
                          {"2", "Overall Judgment", "A > B"},
                          {"3", "Overall Judgment", "A = B"},
                          {"4", "Overall Judgment", "B > A"}},
                         ab);
  const auto h = head_to_head(p.chains, "A", "B");
  REQUIRE(h.aspects.size() == 1);
  CHECK(h.micro.win_pct() == 50.0);
  CHECK(h.micro.tie_pct() == 25.0);
  CHECK(h.micro.lose_pct() == 25.0);

  const auto ties = pool_of({{"1", "Overall Judgment", "A = B"}, {"1", "Analytical Depth", "A = B"}}, ab);
  const auto t = head_to_head(ties.chains, "A", "B");
  CHECK(t.micro.tie_pct() == 100.0);
  CHECK(t.aspects.size() == 2);

  std::ostringstream csv;
  write_head_to_head(csv, h);
  CHECK(csv.str() ==
        "aspect,win,tie,lose,win_pct,tie_pct,lose_pct\n"
        "Overall Judgment,2,1,1,50.00,25.00,25.00\n"
        "All Dimensions (micro),2,1,1,50.00,25.00,25.00\n");
}

TEST_CASE("head-to-head micro row matches the raw tally") {
  const ChainFile f = read_chain_file(oracle::fixture("ranking/chains.jsonl"));
  const auto pool = build_chain_pool(f.records, Roster(*f.roster));
  std::vector<std::string> texts;
  // the one malformed record in the fixture uses ">>"
  for (const auto& r : f.records) {
    if (r.chain.find(">>") == std::string::npos) texts.push_back(r.chain);
  }
  REQUIRE(texts.size() == pool.chains.size());
  for (const auto& [a, b] : std::vector<std::pair<std::string, std::string>>{
           {"sysA", "sysB"}, {"sysB", "sysC"}, {"sysC", "sysA"}}) {
    const auto h = head_to_head(pool.chains, a, b);
    const auto o = oracle::tally(texts, a, b);
    CHECK(h.micro.win == o.win);
    CHECK(h.micro.tie == o.tie);
    CHECK(h.micro.lose == o.lose);
    CHECK(std::abs(h.micro.win_pct() + h.micro.tie_pct() + h.micro.lose_pct() - 100.0) < 1e-9);
  }
}

TEST_CASE("ranking report and csv output") {
  const auto pool = fixture_pool("chains.jsonl");
  RankingOptions o;
  o.bootstrap.resamples = 200;
  const auto report = evaluate_ranking(pool, o);
  CHECK(report.chains_used == 40);
  CHECK(report.chains_dropped == 1);
  REQUIRE(report.systems.size() == 3);
  double log_sum = 0;
  for (const auto& s : report.systems) {
    log_sum += std::log(s.theta);
    CHECK(s.elo == doctest::Approx(1500 + 400 * std::log10(s.theta)));
    REQUIRE(s.ci.has_value());
  }
  CHECK(std::abs(log_sum) < 1e-9);

  std::ostringstream elo, ranks, wins;
  write_elo_table(elo, report);
  write_rank_table(ranks, report);
  write_win_matrix(wins, report.wins);
  CHECK(elo.str().rfind("system,theta,elo,ci_lo,ci_hi\n", 0) == 0);
  CHECK(ranks.str().rfind("system,avg_win_rate,avg_rank\n", 0) == 0);
  CHECK(wins.str().rfind("system,sysA,sysB,sysC\nsysA,-,", 0) == 0);

  const auto small = matrix({{0, 2}, {1, 0}});
  std::ostringstream two;
  write_win_matrix(two, small);
  CHECK(two.str() == "system,A,B\nA,-,66.67\nB,33.33,-\n");
}

TEST_CASE("chain file errors") {
  std::istringstream bad("{\"paper_id\": \"x\"}\n");
  CHECK(code_of([&] { read_chain_file(bad); }) == ErrorCode::kMalformedRecord);
  CHECK(code_of([] { read_chain_file(std::string("/nonexistent/chains.jsonl")); }) ==
        ErrorCode::kIOError);
}
