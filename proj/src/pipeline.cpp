#include "revpkg/pipeline.hpp"

#include <cstdlib>
#include <future>

#include <fmt/format.h>

#include "revpkg/error.hpp"

namespace revpkg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <typename F>
auto in_stage(std::string_view stage, F&& f) {
  try {
    return f();
  } catch (const NotReadyError&) {
    throw;
  } catch (const Error& e) {
    throw e.with_context(stage);
  }
}

PortConfig apply_port(PortConfig port, const json& j, const fs::path& base_dir) {
  if (auto it = j.find("mode"); it != j.end()) {
    const std::string mode = it->get<std::string>();
    if (mode == "stub") {
      port.mode = PortMode::kStub;
    } else if (mode == "live") {
      port.mode = PortMode::kLive;
    } else {
      throw Error(ErrorCode::kConfigError, fmt::format("unknown port mode '{}'", mode));
    }
  }
  if (auto it = j.find("fixture"); it != j.end()) {
    fs::path p = it->get<std::string>();
    port.fixture = (p.is_relative() && !base_dir.empty() ? base_dir / p : p).string();
  }
  if (auto it = j.find("url"); it != j.end()) port.endpoint.base_url = it->get<std::string>();
  if (auto it = j.find("timeout_ms"); it != j.end()) {
    port.endpoint.timeout = std::chrono::milliseconds(it->get<long>());
  }
  return port;
}

std::string default_doc_id(const std::string& path) {
  const std::string name = fs::path(path).filename().string();
  return name.substr(0, name.find('.'));
}

}  // namespace

RunConfig apply_config_json(RunConfig c, const json& j, const fs::path& base_dir) {
  try {
    if (!j.is_object()) throw Error(ErrorCode::kConfigError, "config must be an object");
    if (auto b = j.find("budgets"); b != j.end()) {
      c.budgets.alpha = b->value("alpha", c.budgets.alpha);
      c.budgets.beta = b->value("beta", c.budgets.beta);
      c.budgets.gamma = b->value("gamma", c.budgets.gamma);
    }
    c.seed = j.value("seed", c.seed);
    c.resamples = j.value("resamples", c.resamples);
    c.bt.tolerance = j.value("tolerance", c.bt.tolerance);
    c.bt.max_iterations = j.value("max_iterations", c.bt.max_iterations);
    c.bt.pseudo_count = j.value("pseudo_count", c.bt.pseudo_count);
    c.max_visits = j.value("max_visits", c.max_visits);
    c.threads = j.value("threads", c.threads);
    if (auto it = j.find("extra_category"); it != j.end() && it->is_string()) {
      c.extra_category = it->get<std::string>();
    }
    if (auto it = j.find("doc_id"); it != j.end() && it->is_string()) {
      c.doc_id = it->get<std::string>();
    }
    if (auto l = j.find("layout"); l != j.end()) {
      c.layout.margin_fraction = l->value("margin_fraction", c.layout.margin_fraction);
      c.layout.chars_per_line = l->value("chars_per_line", c.layout.chars_per_line);
      c.layout.line_height = l->value("line_height", c.layout.line_height);
      c.layout.max_callout_height =
          l->value("max_callout_height", c.layout.max_callout_height);
    }
    if (auto p = j.find("ports"); p != j.end()) {
      if (p->contains("analyst")) c.analyst = apply_port(c.analyst, p->at("analyst"), base_dir);
      if (p->contains("retriever")) {
        c.retriever = apply_port(c.retriever, p->at("retriever"), base_dir);
      }
      if (p->contains("judge")) c.judge = apply_port(c.judge, p->at("judge"), base_dir);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfigError, fmt::format("bad config value: {}", e.what()));
  }
  if (c.budgets.alpha < 0 || c.budgets.beta < 0 || c.budgets.gamma < 0) {
    throw Error(ErrorCode::kConfigError, "budgets must be nonnegative");
  }
  if (c.max_visits < 1) throw Error(ErrorCode::kConfigError, "max_visits must be >= 1");
  return c;
}

RunConfig load_config_file(RunConfig base, const std::string& path) {
  return apply_config_json(std::move(base), read_json_file(path),
                           fs::path(path).parent_path());
}

RunConfig apply_env(RunConfig c) {
  auto env = [](const char* name) -> std::optional<std::string> {
    const char* v = std::getenv(name);
    if (v == nullptr || *v == '\0') return std::nullopt;
    return std::string(v);
  };
  if (auto key = env("REVPKG_API_KEY")) {
    for (PortConfig* p : {&c.analyst, &c.retriever, &c.judge}) p->endpoint.api_key = *key;
  }
  if (auto key = env("REVPKG_ANALYST_API_KEY")) c.analyst.endpoint.api_key = *key;
  if (auto key = env("REVPKG_RETRIEVER_API_KEY")) c.retriever.endpoint.api_key = *key;
  if (auto key = env("REVPKG_JUDGE_API_KEY")) c.judge.endpoint.api_key = *key;
  return c;
}

struct PortSet::Impl {
  std::vector<std::unique_ptr<Transport>> owned;
  std::vector<std::unique_ptr<AuditedTransport>> audited;
  std::unique_ptr<AnalystPort> analyst;
  std::unique_ptr<RetrieverPort> retriever;
  std::unique_ptr<JudgePort> judge;
};

PortSet::PortSet(const RunConfig& config, AuditLog& log) : impl_(std::make_unique<Impl>()) {
  auto transport = [&](const PortConfig& pc, const std::string& name,
                       auto load_stub) -> Transport& {
    std::unique_ptr<Transport> t;
    if (pc.mode == PortMode::kLive) {
      if (pc.endpoint.base_url.empty()) {
        throw Error(ErrorCode::kConfigError, fmt::format("{} port needs a url", name));
      }
      t = std::make_unique<HttpTransport>(pc.endpoint, name);
    } else {
      t = pc.fixture.empty() ? nullptr : load_stub(pc.fixture);
    }
    if (!t) {
      // Built lazily: a port without a fixture fails on first use only.
      struct Unconfigured final : Transport {
        std::string port;
        json call(std::string_view op, const json&) override {
          throw Error(ErrorCode::kConfigError,
                      fmt::format("{} port has no fixture for '{}'", port, op));
        }
        std::string_view mode() const override { return "stub"; }
      };
      auto u = std::make_unique<Unconfigured>();
      u->port = name;
      t = std::move(u);
    }
    impl_->owned.push_back(std::move(t));
    impl_->audited.push_back(
        std::make_unique<AuditedTransport>(*impl_->owned.back(), log, name));
    return *impl_->audited.back();
  };
  impl_->analyst = std::make_unique<TransportAnalyst>(
      transport(config.analyst, "analyst", [](const std::string& p) {
        return std::make_unique<AnalystFixture>(AnalystFixture::from_file(p));
      }));
  impl_->retriever = std::make_unique<TransportRetriever>(
      transport(config.retriever, "retriever", [](const std::string& p) {
        return std::make_unique<RetrieverFixture>(RetrieverFixture::from_file(p));
      }));
  impl_->judge = std::make_unique<TransportJudge>(
      transport(config.judge, "judge", [](const std::string& p) {
        return std::make_unique<JudgeFixture>(JudgeFixture::from_file(p));
      }));
}

PortSet::~PortSet() = default;

AnalystPort& PortSet::analyst() { return *impl_->analyst; }
RetrieverPort& PortSet::retriever() { return *impl_->retriever; }
JudgePort& PortSet::judge() { return *impl_->judge; }

std::vector<Annotation> annotations_from_notes(const std::vector<ProvisionalNote>& notes,
                                               const std::map<std::string, Severity>& severity) {
  std::vector<Annotation> out;
  for (const ProvisionalNote& n : notes) {
    auto it = severity.find(n.key);
    if (it == severity.end()) {
      throw Error(ErrorCode::kMalformedProviderOutput,
                  fmt::format("no severity for note '{}'", n.key));
    }
    Annotation a;
    a.ann_id = fmt::format("ann-{:03}", out.size() + 1);
    a.anchor = n.anchor;
    a.category = n.category;
    a.severity = it->second;
    a.risk_text = n.risk_text;
    a.repair_text = n.repair_text;
    a.summary = n.summary;
    a.body = n.body;
    a.claim_id = n.claim_id;
    out.push_back(std::move(a));
  }
  return out;
}

ReviewRun run_review(const AnchoredDocument& doc, const RunConfig& config,
                     AnalystPort& analyst, RetrieverPort& retriever, AuditLog& log) {
  ReviewRun run;
  run.doc = doc;

  run.ledger = in_stage("ledger", [&] {
    AuditLog::ScopeGuard scope(kAuditLedger, 0);
    return build_ledger(doc, analyst);
  });
  run.agenda = in_stage("agenda", [&] {
    AuditLog::ScopeGuard scope(kAuditAgenda, 0);
    return derive_agenda(doc, run.ledger, analyst);
  });

  // Per-question retrieve + verify fan out; results merge in agenda order.
  ProcessCounters counters;
  in_stage("verify", [&] {
    struct Outcome {
      VerificationResult result;
      int searches = 0;
    };
    auto task = [&](std::size_t i) {
      AuditLog::ScopeGuard scope(kAuditVerify, static_cast<int>(i));
      const AgendaItem& q = run.agenda[i];
      const RetrievalOutcome r = retrieve(q, retriever);
      return Outcome{verify(q, doc, r, analyst), r.searches};
    };
    std::vector<Outcome> outcomes(run.agenda.size());
    const std::size_t width = std::max<std::size_t>(1, config.threads);
    for (std::size_t start = 0; start < run.agenda.size(); start += width) {
      std::vector<std::future<Outcome>> batch;
      const std::size_t end = std::min(run.agenda.size(), start + width);
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(std::async(width == 1 ? std::launch::deferred : std::launch::async,
                                   task, i));
      }
      for (std::size_t i = start; i < end; ++i) outcomes[i] = batch[i - start].get();
    }
    for (Outcome& o : outcomes) {
      counters.n_search += o.searches;
      counters.covered_questions.insert(o.result.question_id);
      run.verifications.push_back(std::move(o.result));
    }
    return 0;
  });

  in_stage("reading", [&] {
    ReadingResult r = run_reading_loop(doc, run.ledger, run.agenda, analyst, config.max_visits);
    run.ledger = std::move(r.ledger);
    run.notes = std::move(r.notes);
    run.reading_iterations = r.iterations;
    return 0;
  });

  const std::vector<Annotation> annotations = in_stage("annotate", [&] {
    AuditLog::ScopeGuard scope(kAuditSynthesis, 0);
    const auto severity = analyst.assign_severity(doc, run.notes, run.ledger, run.verifications);
    return annotations_from_notes(run.notes, severity);
  });

  run.package = in_stage("synthesize", [&] {
    AuditLog::ScopeGuard scope(kAuditSynthesis, 1);
    return synthesize(doc, run.ledger, run.agenda, run.verifications, annotations, counters,
                      analyst);
  });
  run.gate = export_gate(run.package, doc.page_index(), config.budgets,
                         CategoryTaxonomy(config.extra_category));
  run.audit_log = log.to_json();
  return run;
}

ReviewRun review_to_bundle(const std::string& doc_path, const RunConfig& config,
                           const fs::path& out_dir) {
  const AnchoredDocument doc = in_stage("ingest", [&] {
    const auto blocks = read_block_list_file(doc_path);
    return ingest_block_list(blocks, config.doc_id.value_or(default_doc_id(doc_path)));
  });
  AuditLog log;
  PortSet ports(config, log);
  ReviewRun run = run_review(doc, config, ports.analyst(), ports.retriever(), log);
  if (!run.gate.ready) throw NotReadyError(run.gate.failures);
  in_stage("export", [&] {
    export_bundle(run.package, doc, config.budgets, CategoryTaxonomy(config.extra_category),
                  config.layout, BundleExtras{run.ledger, run.agenda, run.audit_log}, out_dir);
    return 0;
  });
  return run;
}

}  // namespace revpkg
