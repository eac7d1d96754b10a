#pragma once

// Ranking-chain evaluation: chain parsing, tie-tier ranks, non-tie win
// matrices, Bradley-Terry abilities fitted by minorization-maximization,
// Elo mapping, paper-level bootstrap intervals and head-to-head tables.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace revpkg {

enum class Aspect {
  kTechnicalAccuracy,
  kConstructiveValue,
  kAnalyticalDepth,
  kCommunicationClarity,
  kOverallJudgment,
};

inline constexpr Aspect kAllAspects[] = {
    Aspect::kTechnicalAccuracy, Aspect::kConstructiveValue,
    Aspect::kAnalyticalDepth, Aspect::kCommunicationClarity,
    Aspect::kOverallJudgment};

std::string_view to_string(Aspect aspect);
// Accepts the display name ("Technical Accuracy") or snake_case.
std::optional<Aspect> parse_aspect(std::string_view text);

class Roster {
 public:
  Roster() = default;
  explicit Roster(std::vector<std::string> ids);  // throws DuplicateSystem

  std::size_t size() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::string& id(std::size_t i) const { return ids_[i]; }
  std::optional<std::size_t> index_of(std::string_view id) const;

 private:
  std::vector<std::string> ids_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

using Tier = std::vector<std::string>;

struct RankingChain {
  std::string paper_id;
  Aspect aspect = Aspect::kOverallJudgment;
  std::vector<Tier> tiers;

  bool contains(std::string_view system) const;
};

// "A > B = C > D". Ids are the trimmed text between operators.
// Throws EmptyChain, MalformedToken, UnknownSystem, DuplicateSystem.
RankingChain parse_chain(std::string_view text, const Roster& roster,
                         std::string paper_id = {},
                         Aspect aspect = Aspect::kOverallJudgment);

std::string format_chain(const RankingChain& chain);

// Tier spanning positions r..r+k-1 gives each member (2r+k-1)/2.
std::map<std::string, double> tier_ranks(const RankingChain& chain);

struct WinMatrix {
  Roster roster;
  std::vector<std::vector<std::int64_t>> wins;  // wins[x][y]: strict wins of x over y

  explicit WinMatrix(Roster r);
  std::int64_t at(std::size_t x, std::size_t y) const { return wins[x][y]; }
  std::int64_t meetings(std::size_t x, std::size_t y) const {
    return wins[x][y] + wins[y][x];
  }
};

// Only '>' relations count; same-tier pairs contribute nothing.
WinMatrix accumulate_wins(std::span<const RankingChain> chains, const Roster& roster);

std::optional<double> win_fraction(const WinMatrix& w, std::size_t x, std::size_t y);
// Unweighted mean over opponents with a defined win fraction.
std::optional<double> avg_win_rate(const WinMatrix& w, std::size_t x);
std::optional<double> avg_rank(std::span<const RankingChain> chains,
                               std::string_view system);

struct BtOptions {
  double tolerance = 1e-10;  // max relative change in theta
  int max_iterations = 10000;
  double pseudo_count = 0;   // added to every off-diagonal cell when > 0
  bool record_trace = false;
};

struct BtFit {
  std::vector<double> theta;  // geometric mean 1
  int iterations = 0;
  bool converged = false;
  std::vector<double> log_likelihood_trace;
};

// Throws DisconnectedComparisons when the comparison graph is not
// connected, DegenerateMLE when it is connected but not strongly connected
// through wins (some group never loses to the rest, e.g. an all-win system).
BtFit fit_bradley_terry(const WinMatrix& w, const BtOptions& options = {});

double bt_log_likelihood(const WinMatrix& w, std::span<const double> theta,
                         double pseudo_count = 0);

// Throws InvalidAbility for theta <= 0.
std::vector<double> to_elo(std::span<const double> theta);

// Valid chains of one evaluation plus the instances dropped while parsing.
// Every rank, win and Elo aggregate reads from one pool.
struct ChainPool {
  Roster roster;
  std::vector<RankingChain> chains;
  std::size_t dropped = 0;
  std::vector<std::string> drop_reasons;

  // Paper ids in first-seen order.
  std::vector<std::string> papers() const;
};

struct ChainRecord {
  std::string paper_id;
  std::string aspect;
  std::string chain;
};

ChainPool build_chain_pool(const std::vector<ChainRecord>& records,
                           const Roster& roster);

struct ChainFile {
  std::vector<ChainRecord> records;
  std::optional<std::vector<std::string>> roster;  // from a {"roster": [...]} record
};

ChainFile read_chain_file(std::istream& in);
ChainFile read_chain_file(const std::string& path);

// Nearest-rank percentile of an ascending sample: value at rank ceil(p*n).
double nearest_rank_percentile(std::span<const double> sorted, double p);

struct BootstrapOptions {
  int resamples = 1000;
  std::uint64_t seed = 0;
  // Enumerate all n^n ordered resamples instead of drawing; small n only.
  bool exhaustive = false;
  double lower = 0.025;
  double upper = 0.975;
  unsigned threads = 1;
  BtOptions bt;
};

struct EloInterval {
  double lo = 0;
  double hi = 0;
};

struct BootstrapResult {
  std::vector<EloInterval> intervals;  // roster order
  int usable = 0;
  int skipped = 0;
};

// Throws BootstrapFailed when no resample yields a fit.
BootstrapResult bootstrap_elo(const ChainPool& pool, const BootstrapOptions& options);

struct OutcomeRow {
  std::string label;
  std::int64_t win = 0;
  std::int64_t tie = 0;
  std::int64_t lose = 0;

  std::int64_t total() const { return win + tie + lose; }
  double win_pct() const;
  double tie_pct() const;
  double lose_pct() const;
};

struct HeadToHead {
  std::string system_a;
  std::string system_b;
  std::vector<OutcomeRow> aspects;  // aspects with at least one comparison
  OutcomeRow micro;
};

// Per aspect, counts chains where a ranks ahead of, level with, or behind
// b; chains missing either system are skipped.
HeadToHead head_to_head(std::span<const RankingChain> chains, std::string_view a,
                        std::string_view b);

struct RankingOptions {
  BtOptions bt;
  BootstrapOptions bootstrap;
  bool with_bootstrap = true;
};

struct SystemSummary {
  std::string system;
  std::optional<double> avg_win_rate;
  std::optional<double> avg_rank;
  double theta = 0;
  double elo = 0;
  std::optional<EloInterval> ci;
};

struct RankingReport {
  WinMatrix wins;
  std::vector<SystemSummary> systems;
  std::optional<BootstrapResult> bootstrap;
  std::size_t chains_used = 0;
  std::size_t chains_dropped = 0;
};

RankingReport evaluate_ranking(const ChainPool& pool, const RankingOptions& options);

// CSV writers; percentages and Elo to two decimals.
void write_win_matrix(std::ostream& out, const WinMatrix& w);
void write_rank_table(std::ostream& out, const RankingReport& report);
void write_elo_table(std::ostream& out, const RankingReport& report);
void write_head_to_head(std::ostream& out, const HeadToHead& h2h);

}  // namespace revpkg
