#include "revpkg/eval_ranking.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <thread>

#include <fmt/format.h>

#include "revpkg/error.hpp"

namespace revpkg {

using nlohmann::json;

namespace {

constexpr std::pair<Aspect, std::string_view> kAspectNames[] = {
    {Aspect::kTechnicalAccuracy, "Technical Accuracy"},
    {Aspect::kConstructiveValue, "Constructive Value"},
    {Aspect::kAnalyticalDepth, "Analytical Depth"},
    {Aspect::kCommunicationClarity, "Communication Clarity"},
    {Aspect::kOverallJudgment, "Overall Judgment"},
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string snake(std::string_view s) {
  std::string out;
  for (char c : s) {
    out.push_back(c == ' ' ? '_' : static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos
                                                                : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

// Reachability over adjacency `adj` from node 0.
std::vector<bool> reach(const std::vector<std::vector<bool>>& adj, std::size_t from) {
  std::vector<bool> seen(adj.size(), false);
  std::vector<std::size_t> stack{from};
  seen[from] = true;
  while (!stack.empty()) {
    const std::size_t x = stack.back();
    stack.pop_back();
    for (std::size_t y = 0; y < adj.size(); ++y) {
      if (adj[x][y] && !seen[y]) {
        seen[y] = true;
        stack.push_back(y);
      }
    }
  }
  return seen;
}

bool all_true(const std::vector<bool>& v) {
  return std::all_of(v.begin(), v.end(), [](bool b) { return b; });
}

std::vector<std::vector<double>> effective_wins(const WinMatrix& w, double eps) {
  const std::size_t n = w.roster.size();
  std::vector<std::vector<double>> out(n, std::vector<double>(n, 0.0));
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t y = 0; y < n; ++y) {
      if (x != y) out[x][y] = static_cast<double>(w.at(x, y)) + (eps > 0 ? eps : 0.0);
    }
  }
  return out;
}

void normalize_geometric(std::vector<double>& theta) {
  double log_sum = 0;
  for (double t : theta) log_sum += std::log(t);
  const double scale = std::exp(-log_sum / static_cast<double>(theta.size()));
  for (double& t : theta) t *= scale;
}

// Unbiased draw in [0, n) from a 64-bit engine; independent of the
// standard library's distribution implementation.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return v % n;
}

std::string pct(double v) { return fmt::format("{:.2f}", 100.0 * v); }

}  // namespace

std::string_view to_string(Aspect aspect) {
  for (const auto& [a, name] : kAspectNames) {
    if (a == aspect) return name;
  }
  return "?";
}

std::optional<Aspect> parse_aspect(std::string_view text) {
  const std::string key = snake(trim(text));
  for (const auto& [a, name] : kAspectNames) {
    if (snake(name) == key) return a;
  }
  return std::nullopt;
}

Roster::Roster(std::vector<std::string> ids) : ids_(std::move(ids)) {
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!index_.emplace(ids_[i], i).second) {
      throw Error(ErrorCode::kDuplicateSystem,
                  fmt::format("system '{}' listed twice in roster", ids_[i]));
    }
  }
}

std::optional<std::size_t> Roster::index_of(std::string_view id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

bool RankingChain::contains(std::string_view system) const {
  for (const Tier& t : tiers) {
    if (std::find(t.begin(), t.end(), system) != t.end()) return true;
  }
  return false;
}

RankingChain parse_chain(std::string_view text, const Roster& roster, std::string paper_id,
                         Aspect aspect) {
  RankingChain chain;
  chain.paper_id = std::move(paper_id);
  chain.aspect = aspect;
  if (trim(text).empty()) throw Error(ErrorCode::kEmptyChain, "chain text is empty");
  std::set<std::string, std::less<>> seen;
  for (std::string_view tier_text : split(text, '>')) {
    Tier tier;
    for (std::string_view raw : split(tier_text, '=')) {
      const std::string_view id = trim(raw);
      const bool bad = id.empty() || std::any_of(id.begin(), id.end(), [](char c) {
                         return std::isspace(static_cast<unsigned char>(c));
                       });
      if (bad) {
        throw Error(ErrorCode::kMalformedToken,
                    fmt::format("malformed token '{}' in chain '{}'", raw, text));
      }
      if (!roster.index_of(id)) {
        throw Error(ErrorCode::kUnknownSystem, fmt::format("unknown system '{}'", id));
      }
      if (!seen.emplace(id).second) {
        throw Error(ErrorCode::kDuplicateSystem,
                    fmt::format("system '{}' appears twice in chain", id));
      }
      tier.emplace_back(id);
    }
    chain.tiers.push_back(std::move(tier));
  }
  return chain;
}

std::string format_chain(const RankingChain& chain) {
  std::string out;
  for (std::size_t i = 0; i < chain.tiers.size(); ++i) {
    if (i > 0) out += " > ";
    for (std::size_t j = 0; j < chain.tiers[i].size(); ++j) {
      if (j > 0) out += " = ";
      out += chain.tiers[i][j];
    }
  }
  return out;
}

std::map<std::string, double> tier_ranks(const RankingChain& chain) {
  std::map<std::string, double> out;
  int r = 1;
  for (const Tier& tier : chain.tiers) {
    const int k = static_cast<int>(tier.size());
    const double rank = (2.0 * r + k - 1) / 2.0;
    for (const std::string& s : tier) out[s] = rank;
    r += k;
  }
  return out;
}

WinMatrix::WinMatrix(Roster r)
    : roster(std::move(r)),
      wins(roster.size(), std::vector<std::int64_t>(roster.size(), 0)) {}

WinMatrix accumulate_wins(std::span<const RankingChain> chains, const Roster& roster) {
  WinMatrix w(roster);
  for (const RankingChain& chain : chains) {
    for (std::size_t i = 0; i < chain.tiers.size(); ++i) {
      for (std::size_t j = i + 1; j < chain.tiers.size(); ++j) {
        for (const std::string& x : chain.tiers[i]) {
          for (const std::string& y : chain.tiers[j]) {
            const auto xi = roster.index_of(x);
            const auto yi = roster.index_of(y);
            if (!xi || !yi) {
              throw Error(ErrorCode::kUnknownSystem,
                          fmt::format("chain mentions '{}' outside the roster",
                                      xi ? y : x));
            }
            ++w.wins[*xi][*yi];
          }
        }
      }
    }
  }
  return w;
}

std::optional<double> win_fraction(const WinMatrix& w, std::size_t x, std::size_t y) {
  const std::int64_t n = w.meetings(x, y);
  if (x == y || n == 0) return std::nullopt;
  return static_cast<double>(w.at(x, y)) / static_cast<double>(n);
}

std::optional<double> avg_win_rate(const WinMatrix& w, std::size_t x) {
  double sum = 0;
  int count = 0;
  for (std::size_t y = 0; y < w.roster.size(); ++y) {
    if (auto f = win_fraction(w, x, y)) {
      sum += *f;
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return sum / count;
}

std::optional<double> avg_rank(std::span<const RankingChain> chains,
                               std::string_view system) {
  double sum = 0;
  int count = 0;
  for (const RankingChain& c : chains) {
    const auto ranks = tier_ranks(c);
    if (auto it = ranks.find(std::string(system)); it != ranks.end()) {
      sum += it->second;
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return sum / count;
}

double bt_log_likelihood(const WinMatrix& w, std::span<const double> theta,
                         double pseudo_count) {
  const auto eff = effective_wins(w, pseudo_count);
  double ll = 0;
  for (std::size_t x = 0; x < eff.size(); ++x) {
    for (std::size_t y = 0; y < eff.size(); ++y) {
      if (eff[x][y] > 0) ll += eff[x][y] * std::log(theta[x] / (theta[x] + theta[y]));
    }
  }
  return ll;
}

BtFit fit_bradley_terry(const WinMatrix& w, const BtOptions& options) {
  const std::size_t n = w.roster.size();
  if (n == 0) throw Error(ErrorCode::kDisconnectedComparisons, "roster is empty");
  BtFit fit;
  fit.theta.assign(n, 1.0);
  if (n == 1) {
    fit.converged = true;
    return fit;
  }

  const auto eff = effective_wins(w, options.pseudo_count);
  std::vector<std::vector<bool>> met(n, std::vector<bool>(n, false));
  std::vector<std::vector<bool>> beats(n, std::vector<bool>(n, false));
  std::vector<std::vector<bool>> beaten_by(n, std::vector<bool>(n, false));
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t y = 0; y < n; ++y) {
      met[x][y] = eff[x][y] + eff[y][x] > 0;
      beats[x][y] = eff[x][y] > 0;
      beaten_by[y][x] = eff[x][y] > 0;
    }
  }
  if (!all_true(reach(met, 0))) {
    throw Error(ErrorCode::kDisconnectedComparisons,
                "some systems share no non-tie comparison path");
  }
  // A finite maximizer exists iff every system can reach every other
  // through "beats" edges.
  if (!all_true(reach(beats, 0)) || !all_true(reach(beaten_by, 0))) {
    throw Error(ErrorCode::kDegenerateMLE,
                "a group of systems never loses (or never wins) against the rest");
  }

  std::vector<double> total_wins(n, 0.0);
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t y = 0; y < n; ++y) total_wins[x] += eff[x][y];
  }

  if (options.record_trace) fit.log_likelihood_trace.push_back(
      bt_log_likelihood(w, fit.theta, options.pseudo_count));
  std::vector<double> next(n);
  for (int it = 1; it <= options.max_iterations; ++it) {
    for (std::size_t x = 0; x < n; ++x) {
      double denom = 0;
      for (std::size_t y = 0; y < n; ++y) {
        const double meetings = eff[x][y] + eff[y][x];
        if (y != x && meetings > 0) denom += meetings / (fit.theta[x] + fit.theta[y]);
      }
      next[x] = total_wins[x] / denom;
    }
    normalize_geometric(next);
    double change = 0;
    for (std::size_t x = 0; x < n; ++x) {
      change = std::max(change, std::abs(next[x] - fit.theta[x]) / fit.theta[x]);
    }
    fit.theta.swap(next);
    fit.iterations = it;
    if (options.record_trace) {
      fit.log_likelihood_trace.push_back(
          bt_log_likelihood(w, fit.theta, options.pseudo_count));
    }
    if (change < options.tolerance) {
      fit.converged = true;
      break;
    }
  }
  return fit;
}

std::vector<double> to_elo(std::span<const double> theta) {
  std::vector<double> out;
  out.reserve(theta.size());
  for (double t : theta) {
    if (!(t > 0) || !std::isfinite(t)) {
      throw Error(ErrorCode::kInvalidAbility, fmt::format("ability {} is not positive", t));
    }
    out.push_back(1500.0 + 400.0 * std::log10(t));
  }
  return out;
}

std::vector<std::string> ChainPool::papers() const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const RankingChain& c : chains) {
    if (seen.insert(c.paper_id).second) out.push_back(c.paper_id);
  }
  return out;
}

ChainPool build_chain_pool(const std::vector<ChainRecord>& records, const Roster& roster) {
  ChainPool pool;
  pool.roster = roster;
  std::set<std::pair<std::string, Aspect>> seen;
  auto drop = [&](const ChainRecord& r, const std::string& why) {
    ++pool.dropped;
    pool.drop_reasons.push_back(fmt::format("{} / {}: {}", r.paper_id, r.aspect, why));
  };
  for (const ChainRecord& r : records) {
    const auto aspect = parse_aspect(r.aspect);
    if (!aspect) {
      drop(r, "unknown aspect");
      continue;
    }
    if (seen.contains({r.paper_id, *aspect})) {
      drop(r, "second chain for the same paper and aspect");
      continue;
    }
    try {
      pool.chains.push_back(parse_chain(r.chain, roster, r.paper_id, *aspect));
      seen.emplace(r.paper_id, *aspect);
    } catch (const Error& e) {
      drop(r, e.what());
    }
  }
  return pool;
}

ChainFile read_chain_file(std::istream& in) {
  ChainFile file;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty()) continue;
    try {
      const json rec = json::parse(line);
      if (rec.contains("roster")) {
        file.roster = rec.at("roster").get<std::vector<std::string>>();
        continue;
      }
      file.records.push_back({rec.at("paper_id").get<std::string>(),
                              rec.at("aspect").get<std::string>(),
                              rec.at("chain").get<std::string>()});
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kMalformedRecord, fmt::format("line {}: {}", n, e.what()), n);
    }
  }
  return file;
}

ChainFile read_chain_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIOError, fmt::format("cannot open '{}'", path));
  return read_chain_file(in);
}

double nearest_rank_percentile(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw Error(ErrorCode::kBootstrapFailed, "no samples");
  const double n = static_cast<double>(sorted.size());
  // The epsilon keeps p*n that is integral in exact arithmetic from rounding up.
  auto rank = static_cast<std::size_t>(std::ceil(p * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

BootstrapResult bootstrap_elo(const ChainPool& pool, const BootstrapOptions& options) {
  const std::vector<std::string> papers = pool.papers();
  if (papers.empty()) throw Error(ErrorCode::kBootstrapFailed, "chain pool is empty");
  const std::size_t n = papers.size();
  const std::size_t systems = pool.roster.size();

  // Per-paper win matrices; a resample sums them with multiplicity.
  std::vector<WinMatrix> per_paper;
  for (const std::string& p : papers) {
    std::vector<RankingChain> mine;
    for (const RankingChain& c : pool.chains) {
      if (c.paper_id == p) mine.push_back(c);
    }
    per_paper.push_back(accumulate_wins(mine, pool.roster));
  }

  std::uint64_t total = static_cast<std::uint64_t>(std::max(options.resamples, 0));
  if (options.exhaustive) {
    total = 1;
    for (std::size_t i = 0; i < n; ++i) {
      total *= n;
      if (total > 10'000'000) {
        throw Error(ErrorCode::kConfigError,
                    fmt::format("exhaustive bootstrap over {} papers is too large", n));
      }
    }
  }
  if (total == 0) throw Error(ErrorCode::kBootstrapFailed, "no resamples requested");

  std::vector<std::optional<std::vector<double>>> elos(total);
  std::atomic<std::uint64_t> next{0};
  auto worker = [&] {
    std::vector<std::size_t> pick(n);
    while (true) {
      const std::uint64_t b = next.fetch_add(1);
      if (b >= total) return;
      if (options.exhaustive) {
        std::uint64_t code = b;
        for (std::size_t i = 0; i < n; ++i) {
          pick[i] = static_cast<std::size_t>(code % n);
          code /= n;
        }
      } else {
        std::seed_seq seq{static_cast<std::uint32_t>(options.seed),
                          static_cast<std::uint32_t>(options.seed >> 32),
                          static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
        std::mt19937_64 rng(seq);
        for (std::size_t i = 0; i < n; ++i) pick[i] = bounded(rng, n);
      }
      WinMatrix w(pool.roster);
      for (std::size_t p : pick) {
        for (std::size_t x = 0; x < systems; ++x) {
          for (std::size_t y = 0; y < systems; ++y) w.wins[x][y] += per_paper[p].wins[x][y];
        }
      }
      try {
        elos[b] = to_elo(fit_bradley_terry(w, options.bt).theta);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kDegenerateMLE &&
            e.code() != ErrorCode::kDisconnectedComparisons) {
          throw;
        }
      }
    }
  };

  const unsigned threads = std::max(1u, options.threads);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool_threads;
    for (unsigned t = 0; t < threads; ++t) {
      pool_threads.emplace_back([&, t] {
        try {
          worker();
        } catch (...) {
          errors[t] = std::current_exception();
          next = total;
        }
      });
    }
    for (auto& th : pool_threads) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  BootstrapResult result;
  std::vector<std::vector<double>> per_system(systems);
  for (const auto& e : elos) {
    if (!e) {
      ++result.skipped;
      continue;
    }
    ++result.usable;
    for (std::size_t s = 0; s < systems; ++s) per_system[s].push_back((*e)[s]);
  }
  if (result.usable == 0) {
    throw Error(ErrorCode::kBootstrapFailed,
                fmt::format("all {} resamples were degenerate", result.skipped));
  }
  for (auto& values : per_system) {
    std::sort(values.begin(), values.end());
    result.intervals.push_back({nearest_rank_percentile(values, options.lower),
                                nearest_rank_percentile(values, options.upper)});
  }
  return result;
}

double OutcomeRow::win_pct() const {
  return total() == 0 ? 0.0 : 100.0 * static_cast<double>(win) / static_cast<double>(total());
}
double OutcomeRow::tie_pct() const {
  return total() == 0 ? 0.0 : 100.0 * static_cast<double>(tie) / static_cast<double>(total());
}
double OutcomeRow::lose_pct() const {
  return total() == 0 ? 0.0 : 100.0 * static_cast<double>(lose) / static_cast<double>(total());
}

HeadToHead head_to_head(std::span<const RankingChain> chains, std::string_view a,
                        std::string_view b) {
  HeadToHead h;
  h.system_a = std::string(a);
  h.system_b = std::string(b);
  h.micro.label = "All Dimensions (micro)";
  for (Aspect aspect : kAllAspects) {
    OutcomeRow row;
    row.label = std::string(to_string(aspect));
    for (const RankingChain& c : chains) {
      if (c.aspect != aspect || !c.contains(a) || !c.contains(b)) continue;
      const auto ranks = tier_ranks(c);
      const double ra = ranks.at(std::string(a));
      const double rb = ranks.at(std::string(b));
      if (ra < rb) {
        ++row.win;
      } else if (ra == rb) {
        ++row.tie;
      } else {
        ++row.lose;
      }
    }
    if (row.total() == 0) continue;
    h.micro.win += row.win;
    h.micro.tie += row.tie;
    h.micro.lose += row.lose;
    h.aspects.push_back(std::move(row));
  }
  return h;
}

RankingReport evaluate_ranking(const ChainPool& pool, const RankingOptions& options) {
  RankingReport report{accumulate_wins(pool.chains, pool.roster), {}, std::nullopt,
                       pool.chains.size(), pool.dropped};
  const BtFit fit = fit_bradley_terry(report.wins, options.bt);
  const std::vector<double> elo = to_elo(fit.theta);
  if (options.with_bootstrap) {
    BootstrapOptions bo = options.bootstrap;
    bo.bt = options.bt;
    report.bootstrap = bootstrap_elo(pool, bo);
  }
  for (std::size_t s = 0; s < pool.roster.size(); ++s) {
    SystemSummary sum;
    sum.system = pool.roster.id(s);
    sum.avg_win_rate = avg_win_rate(report.wins, s);
    sum.avg_rank = avg_rank(pool.chains, sum.system);
    sum.theta = fit.theta[s];
    sum.elo = elo[s];
    if (report.bootstrap) sum.ci = report.bootstrap->intervals[s];
    report.systems.push_back(std::move(sum));
  }
  return report;
}

void write_win_matrix(std::ostream& out, const WinMatrix& w) {
  out << "system";
  for (const std::string& id : w.roster.ids()) out << ',' << id;
  out << '\n';
  for (std::size_t x = 0; x < w.roster.size(); ++x) {
    out << w.roster.id(x);
    for (std::size_t y = 0; y < w.roster.size(); ++y) {
      const auto f = win_fraction(w, x, y);
      out << ',' << (x == y ? std::string("-") : f ? pct(*f) : std::string("undefined"));
    }
    out << '\n';
  }
}

void write_rank_table(std::ostream& out, const RankingReport& report) {
  out << "system,avg_win_rate,avg_rank\n";
  for (const SystemSummary& s : report.systems) {
    out << fmt::format("{},{},{}\n", s.system,
                       s.avg_win_rate ? pct(*s.avg_win_rate) : "undefined",
                       s.avg_rank ? fmt::format("{:.2f}", *s.avg_rank) : "undefined");
  }
}

void write_elo_table(std::ostream& out, const RankingReport& report) {
  out << "system,theta,elo,ci_lo,ci_hi\n";
  for (const SystemSummary& s : report.systems) {
    out << fmt::format("{},{:.6f},{:.2f},{},{}\n", s.system, s.theta, s.elo,
                       s.ci ? fmt::format("{:.2f}", s.ci->lo) : "",
                       s.ci ? fmt::format("{:.2f}", s.ci->hi) : "");
  }
}

void write_head_to_head(std::ostream& out, const HeadToHead& h2h) {
  out << "aspect,win,tie,lose,win_pct,tie_pct,lose_pct\n";
  auto row = [&](const OutcomeRow& r) {
    out << fmt::format("{},{},{},{},{:.2f},{:.2f},{:.2f}\n", r.label, r.win, r.tie, r.lose,
                       r.win_pct(), r.tie_pct(), r.lose_pct());
  };
  for (const OutcomeRow& r : h2h.aspects) row(r);
  row(h2h.micro);
}

}  // namespace revpkg
