#include "raec/cli.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>

#include "raec/annotation.hpp"
#include "raec/corpus.hpp"
#include "raec/embedding.hpp"
#include "raec/error.hpp"
#include "raec/evalstats.hpp"
#include "raec/induction.hpp"
#include "raec/judge.hpp"
#include "raec/llm_backend.hpp"
#include "raec/prompts.hpp"
#include "raec/reporting.hpp"
#include "raec/retrieval.hpp"
#include "raec/service.hpp"
#include "raec/taxonomy.hpp"

namespace raec {

namespace {

using Action = std::function<int()>;

struct BackendFlags {
  std::string llm_config;
  std::string fixture;

  void add(CLI::App* cmd) {
    cmd->add_option("--llm-config", llm_config, "LLM backend config (JSON)");
    cmd->add_option("--fixture", fixture, "Scripted backend fixture (JSON)");
  }

  std::unique_ptr<LlmBackend> make() const {
    if (!llm_config.empty() && !fixture.empty()) {
      throw ValidationError("give either --llm-config or --fixture, not both");
    }
    if (!fixture.empty()) return std::make_unique<ScriptedBackend>(ScriptedBackend::load(fixture));
    if (llm_config.empty()) throw ValidationError("one of --llm-config or --fixture is required");
    std::filesystem::path path = llm_config;
    auto cfg = LlmConfig::from_json(Json::parse(read_text_file(path)));
    if (!cfg.fixture_path.empty() && std::filesystem::path(cfg.fixture_path).is_relative()) {
      cfg.fixture_path = (path.parent_path() / cfg.fixture_path).string();
    }
    if (cfg.api_key.empty()) {
      if (const char* k = std::getenv("RAEC_LLM_API_KEY")) cfg.api_key = k;
    }
    return make_backend(cfg);
  }
};

EmbedderConfig embedder_config_from_file(const std::string& path) {
  auto cfg = EmbedderConfig::from_json(Json::parse(read_text_file(path)));
  if (cfg.api_key.empty()) {
    if (const char* k = std::getenv("RAEC_EMBEDDER_API_KEY")) cfg.api_key = k;
  }
  return cfg;
}

Level level_flag(const std::string& s) {
  return parse_level(s);
}

std::string dump_pretty(const Json& j) { return j.dump(2) + "\n"; }

void write_jsonl(const std::string& path, const std::vector<Json>& records) {
  write_text_file(path, to_jsonl(records));
}

AnnotationSet annotations_flag(const std::string& path, const std::string& source) {
  return load_annotations(path, source);
}

// ---------------------------------------------------------------------------

Action add_ingest(CLI::App& app, std::ostream& out) {
  auto* cmd = app.add_subcommand("ingest", "Validate raw export records into triplets");
  struct Opts {
    std::string input, output, report, key = "patient-message";
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("--input", o->input, "Raw JSON-lines export")->required();
  cmd->add_option("--output", o->output, "Triplets JSON-lines")->required();
  cmd->add_option("--report", o->report, "Ingest report JSON");
  cmd->add_option("--dedupe-key", o->key, "Duplicate key text")
      ->check(CLI::IsMember({"patient-message", "all-text"}));
  return [cmd, o, &out]() -> int {
    if (!cmd->parsed()) return -1;
    std::ifstream in(o->input);
    if (!in) throw IoError("cannot open " + o->input);
    auto result = ingest(in);
    auto d = dedupe(result.triplets,
                    o->key == "all-text" ? DedupeKey::kAllText : DedupeKey::kPatientMessage);
    result.report.duplicates_collapsed = d.duplicates_collapsed;
    write_text_file(o->output, triplets_to_jsonl(d.triplets));
    auto report = result.report.to_json();
    report["triplets_written"] = d.triplets.size();
    if (!o->report.empty()) write_text_file(o->report, dump_pretty(report));
    out << report.dump() << "\n";
    return kExitOk;
  };
}

Action add_index(CLI::App& app, std::ostream& out) {
  auto* cmd = app.add_subcommand("index", "Exemplar index commands");
  cmd->require_subcommand(1);
  auto* build = cmd->add_subcommand("build", "Embed triplets into an exemplar index");
  struct Opts {
    std::string triplets, prefix, embedder;
    size_t dim = 768;
    std::uint64_t seed = kDefaultHashSeed;
  };
  auto o = std::make_shared<Opts>();
  build->add_option("--triplets", o->triplets, "Triplets JSON-lines")->required();
  build->add_option("--out", o->prefix, "Output path prefix")->required();
  build->add_option("--embedder-config", o->embedder, "Embedder config (JSON)");
  build->add_option("--dim", o->dim, "Test embedder dimension");
  build->add_option("--seed", o->seed, "Test embedder seed");
  return [build, o, &out]() -> int {
    if (!build->parsed()) return -1;
    EmbedderConfig cfg;
    if (!o->embedder.empty()) {
      cfg = embedder_config_from_file(o->embedder);
    } else {
      cfg.dim = o->dim;
      cfg.seed = o->seed;
    }
    auto embedder = make_embedder(cfg);
    const auto idx = Index::build(load_triplets(o->triplets), *embedder);
    idx.save(o->prefix);
    out << Json{{"rows", idx.size()}, {"dim", idx.dim()}, {"embedder", idx.embedder_description()}}.dump()
        << "\n";
    return kExitOk;
  };
}

Action add_check(CLI::App& app, std::ostream& out, std::ostream& err) {
  auto* cmd = app.add_subcommand("check", "Run the guardrail over a batch");
  struct Opts {
    std::string triplets, requests, mode = "baseline", index, embedder, taxonomy, prompts, out,
        annotations_out, source, failures_out;
    size_t k = kMaxExemplars;
    bool fail_on_retrieval = false, no_timings = false, relax = false;
    double min_confidence = 0.0;
    BackendFlags backend;
  };
  auto o = std::make_shared<Opts>();
  auto* in_group = cmd->add_option_group("input");
  in_group->add_option("--triplets", o->triplets, "Triplets JSON-lines");
  in_group->add_option("--requests", o->requests, "GuardrailInput documents, JSON-lines");
  in_group->require_option(1);
  cmd->add_option("--mode", o->mode, "baseline or enhanced")
      ->check(CLI::IsMember({"baseline", "enhanced"}));
  cmd->add_option("--index", o->index, "Exemplar index prefix (enhanced mode)");
  cmd->add_option("--embedder-config", o->embedder, "Query embedder; defaults to the index's");
  cmd->add_option("--taxonomy", o->taxonomy, "Taxonomy JSON")->required();
  cmd->add_option("--prompts", o->prompts, "Prompt templates JSON")->required();
  cmd->add_option("--out", o->out, "Verdicts JSON-lines")->required();
  cmd->add_option("--annotations-out", o->annotations_out, "Verdicts as annotation records");
  cmd->add_option("--source", o->source, "Source tag for --annotations-out (default: mode)");
  cmd->add_option("--failures-out", o->failures_out, "Per-message failures JSON-lines");
  cmd->add_option("--min-confidence", o->min_confidence, "Annotation confidence floor");
  cmd->add_option("--k", o->k, "Exemplars per query")->check(CLI::Range(1, 5));
  cmd->add_flag("--fail-on-retrieval-error", o->fail_on_retrieval, "Fail instead of degrading");
  cmd->add_flag("--relax-filters", o->relax, "Drop recipient, then department, when sparse");
  cmd->add_flag("--no-timings", o->no_timings, "Omit wall-clock timings from provenance");
  o->backend.add(cmd);
  return [cmd, o, &out, &err]() -> int {
    if (!cmd->parsed()) return -1;
    const Mode mode = parse_mode(o->mode);
    if (mode == Mode::kEnhanced && o->index.empty()) {
      throw ValidationError("check --mode enhanced requires --index");
    }
    const auto taxonomy = Taxonomy::load(o->taxonomy);
    const auto templates = PromptTemplates::load(o->prompts);
    auto backend = o->backend.make();

    std::optional<Index> index;
    std::unique_ptr<Embedder> embedder;
    std::unique_ptr<Retriever> retriever;
    if (mode == Mode::kEnhanced) {
      index.emplace(Index::load(o->index));
      embedder = make_embedder(o->embedder.empty()
                                   ? EmbedderConfig::from_json(index->embedder_description())
                                   : embedder_config_from_file(o->embedder));
      retriever = std::make_unique<Retriever>(*index, *embedder, RetrieverOptions{o->relax});
    }
    JudgeConfig jc;
    jc.k = o->k;
    jc.fail_on_retrieval_error = o->fail_on_retrieval;
    jc.record_timings = !o->no_timings;
    Guardrail guardrail(taxonomy, templates, *backend, retriever.get(), jc);

    std::vector<GuardrailInput> inputs;
    if (!o->triplets.empty()) {
      for (const auto& t : load_triplets(o->triplets)) inputs.push_back(GuardrailInput::from_triplet(t, mode));
    } else {
      for (const auto& r : read_jsonl(o->requests)) inputs.push_back(GuardrailInput::from_json(r, mode));
    }

    std::vector<GuardrailVerdict> verdicts;
    std::vector<Json> records, failures;
    int code = kExitOk;
    size_t flagged = 0;
    for (auto& in : inputs) {
      const auto id = in.message_id;
      try {
        auto v = guardrail.check(std::move(in));
        flagged += v.stage1.has_error ? 1 : 0;
        records.push_back(v.to_json());
        verdicts.push_back(std::move(v));
      } catch (const Error& e) {
        const auto reply = error_reply(e);
        auto f = reply.body["error"];
        f["message_id"] = id;
        failures.push_back(f);
        const int c = dynamic_cast<const ValidationError*>(&e) ? kExitValidation : kExitIo;
        code = std::max(code, c);
        err << "check " << id << ": " << e.what() << "\n";
      }
    }
    write_jsonl(o->out, records);
    if (!o->failures_out.empty()) write_jsonl(o->failures_out, failures);
    if (!o->annotations_out.empty()) {
      const auto source = o->source.empty() ? std::string(to_string(mode)) : o->source;
      write_jsonl(o->annotations_out,
                  annotations_to_records(verdicts_to_annotations(verdicts, source, o->min_confidence)));
    }
    out << Json{{"checked", verdicts.size()}, {"flagged", flagged}, {"failures", failures.size()}}.dump()
        << "\n";
    return code;
  };
}

Action add_evaluate(CLI::App& app, std::ostream& out) {
  auto* cmd = app.add_subcommand("evaluate", "Agreement statistics");
  cmd->require_subcommand(1);
  struct Opts {
    std::string reference, predicted, a, b, taxonomy, level = "code", universe = "observed",
        method = "chi-square-cc", ref_source, pred_source, a_source, b_source, out, table;
    std::vector<size_t> counts;
  };
  auto o = std::make_shared<Opts>();

  auto* conc = cmd->add_subcommand("concordance", "Message-level concordance");
  conc->add_option("--reference", o->reference)->required();
  conc->add_option("--predicted", o->predicted)->required();
  auto* mcn = cmd->add_subcommand("mcnemar", "Paired test of two sources against a reference");
  mcn->add_option("--reference", o->reference);
  mcn->add_option("--a", o->a, "First predicted source");
  mcn->add_option("--b", o->b, "Second predicted source");
  mcn->add_option("--counts", o->counts, "Discordant counts b c instead of files")->expected(2);
  mcn->add_option("--method", o->method)->check(CLI::IsMember({"exact", "chi-square-cc"}));
  mcn->add_option("--a-source", o->a_source);
  mcn->add_option("--b-source", o->b_source);
  auto* met = cmd->add_subcommand("metrics", "Per-label confusion and derived metrics");
  met->add_option("--reference", o->reference)->required();
  met->add_option("--predicted", o->predicted)->required();
  met->add_option("--universe", o->universe)->check(CLI::IsMember({"full", "observed"}));
  met->add_option("--table", o->table, "Text table output");
  for (auto* c : {conc, mcn, met}) {
    c->add_option("--taxonomy", o->taxonomy, "Taxonomy JSON");
    c->add_option("--level", o->level)->check(CLI::IsMember({"code", "subdomain", "domain"}));
    c->add_option("--reference-source", o->ref_source);
    c->add_option("--out", o->out, "JSON output");
  }
  conc->add_option("--predicted-source", o->pred_source);
  met->add_option("--predicted-source", o->pred_source);

  return [conc, mcn, met, o, &out]() -> int {
    if (!conc->parsed() && !mcn->parsed() && !met->parsed()) return -1;
    auto need_taxonomy = [&] {
      if (o->taxonomy.empty()) throw ValidationError("--taxonomy is required");
      return Taxonomy::load(o->taxonomy);
    };
    Json result;
    std::string text;
    const Level level = level_flag(o->level);
    if (conc->parsed()) {
      const auto t = need_taxonomy();
      const auto r = concordance(annotations_flag(o->reference, o->ref_source),
                                 annotations_flag(o->predicted, o->pred_source), level, t);
      result = r.to_json();
      text = "concordance (" + o->level + "): " + std::to_string(r.concordant_count) + "/" +
             std::to_string(r.total) + " = " + format_number(r.rate(), 4) + "\n";
    } else if (mcn->parsed()) {
      const auto method = parse_mcnemar_method(o->method);
      McNemarResult r;
      if (!o->counts.empty()) {
        r = mcnemar_from_counts(o->counts[0], o->counts[1], method);
      } else {
        if (o->reference.empty() || o->a.empty() || o->b.empty()) {
          throw ValidationError("mcnemar needs --reference, --a and --b, or --counts");
        }
        const auto t = need_taxonomy();
        const auto ref = annotations_flag(o->reference, o->ref_source);
        const auto ca = concordance(ref, annotations_flag(o->a, o->a_source), level, t);
        const auto cb = concordance(ref, annotations_flag(o->b, o->b_source), level, t);
        const auto pairs = pair_outcomes(ca, cb);
        r = mcnemar(pairs, method);
      }
      result = r.to_json();
      text = "mcnemar (" + o->method + "): b=" + std::to_string(r.b) + " c=" + std::to_string(r.c) +
             " statistic=" + format_number(r.statistic, 4) + " p=" + format_number(r.p_value, 6) + "\n";
    } else {
      const auto t = need_taxonomy();
      const auto ref = annotations_flag(o->reference, o->ref_source);
      const auto pred = annotations_flag(o->predicted, o->pred_source);
      std::vector<std::string> universe;
      if (o->universe == "full") {
        universe = label_universe(level, t);
      } else {
        const std::vector<AnnotationSet> sets{ref, pred};
        universe = label_universe(level, sets, t);
      }
      const auto rows = confusion(ref, pred, level, universe, t);
      result = metrics_json(rows, level, o->universe);
      text = metrics_table(rows);
      if (!o->table.empty()) write_text_file(o->table, text);
    }
    if (!o->out.empty()) write_text_file(o->out, dump_pretty(result));
    out << text;
    return kExitOk;
  };
}

Action add_retrieve_eval(CLI::App& app, std::ostream& out) {
  auto* cmd = app.add_subcommand("retrieve-eval", "Usefulness and rank agreement of retrieved sets");
  struct Opts {
    std::string judgments, out;
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("--judgments", o->judgments, "Physician judgments JSON-lines")->required();
  cmd->add_option("--out", o->out, "JSON output");
  return [cmd, o, &out]() -> int {
    if (!cmd->parsed()) return -1;
    std::vector<RetrievalJudgment> js;
    for (const auto& r : read_jsonl(o->judgments)) js.push_back(RetrievalJudgment::from_json(r));
    const auto result = evaluate_retrieval(js).to_json();
    if (!o->out.empty()) write_text_file(o->out, dump_pretty(result));
    out << result.dump() << "\n";
    return kExitOk;
  };
}

Action add_report(CLI::App& app, std::ostream& out) {
  auto* cmd = app.add_subcommand("report", "Error summaries from verdicts");
  struct Opts {
    std::string verdicts, taxonomy, triplets, out, text;
    bool by_utilization = false, per_instance = false;
    double min_confidence = 0.0;
    size_t top = 10;
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("--verdicts", o->verdicts, "Verdicts JSON-lines")->required();
  cmd->add_option("--taxonomy", o->taxonomy, "Taxonomy JSON")->required();
  cmd->add_option("--out", o->out, "JSON report")->required();
  cmd->add_option("--text", o->text, "Text report");
  cmd->add_option("--triplets", o->triplets, "Triplets with draft_utilized");
  cmd->add_flag("--by-utilization", o->by_utilization, "Stratify by draft utilization");
  cmd->add_flag("--per-instance", o->per_instance, "Per-error-instance code frequencies");
  cmd->add_option("--min-confidence", o->min_confidence, "Ignore assignments below this");
  cmd->add_option("--top", o->top, "Codes in the frequency view");
  return [cmd, o, &out]() -> int {
    if (!cmd->parsed()) return -1;
    if (o->by_utilization && o->triplets.empty()) {
      throw ValidationError("--by-utilization requires --triplets");
    }
    const auto t = Taxonomy::load(o->taxonomy);
    std::vector<GuardrailVerdict> verdicts;
    for (const auto& r : read_jsonl(o->verdicts)) verdicts.push_back(GuardrailVerdict::from_json(r));
    ReportOptions opts{o->min_confidence};

    Json report = Json::object();
    const auto summary = summarize(verdicts, t, opts);
    report["summary"] = summary.to_json();
    std::string text = summary.to_text(t);

    report["relative_frequencies"] = Json::array();
    if (summary.total_errors > 0) {
      const auto shares = top_k(relative_frequencies(verdicts, opts), o->top);
      std::vector<std::vector<std::string>> rows;
      for (const auto& s : shares) {
        report["relative_frequencies"].push_back(
            {{"code_id", s.code_id}, {"count", s.count}, {"share", s.share}});
        rows.push_back({s.code_id, std::to_string(s.count), format_number(100.0 * s.share, 1)});
      }
      text += "\nTop codes by share of error instances\n";
      text += format_table({"Code", "Count", "Share (%)"}, rows);
    }
    if (o->by_utilization) {
      const auto u = stratify_by_utilization(verdicts, load_triplets(o->triplets),
                                             o->per_instance ? FrequencyDenominator::kPerInstance
                                                             : FrequencyDenominator::kPerMessage,
                                             opts);
      report["utilization"] = u.to_json();
      text += "\nDraft utilization\n" + u.to_text();
    }
    write_text_file(o->out, dump_pretty(report));
    if (!o->text.empty()) write_text_file(o->text, text);
    out << text;
    return kExitOk;
  };
}

Action add_induct(CLI::App& app, std::ostream& out) {
  auto* cmd = app.add_subcommand("induct", "Label with the current taxonomy and queue proposals");
  struct Opts {
    std::string triplets, taxonomy, prompts, queue, labels, summary;
    BackendFlags backend;
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("--triplets", o->triplets, "Triplets JSON-lines")->required();
  cmd->add_option("--taxonomy", o->taxonomy, "Taxonomy JSON")->required();
  cmd->add_option("--prompts", o->prompts, "Prompt templates JSON")->required();
  cmd->add_option("--queue-out", o->queue, "Review queue JSON-lines")->required();
  cmd->add_option("--labels-out", o->labels, "Labels as annotation records");
  cmd->add_option("--summary-out", o->summary, "Run summary JSON");
  o->backend.add(cmd);
  return [cmd, o, &out]() -> int {
    if (!cmd->parsed()) return -1;
    const auto t = Taxonomy::load(o->taxonomy);
    const auto templates = PromptTemplates::load(o->prompts);
    auto backend = o->backend.make();
    const auto result = induct(load_triplets(o->triplets), t, templates, *backend);
    write_text_file(o->queue, proposals_to_jsonl(result.proposals));
    if (!o->labels.empty()) write_jsonl(o->labels, annotations_to_records(result.labels));
    const auto summary = result.summary_json();
    if (!o->summary.empty()) write_text_file(o->summary, dump_pretty(summary));
    out << summary.dump() << "\n";
    return kExitOk;
  };
}

Action add_taxonomy(CLI::App& app, std::ostream& out) {
  auto* cmd = app.add_subcommand("taxonomy", "Taxonomy maintenance");
  cmd->require_subcommand(1);
  struct Opts {
    std::string file, taxonomy, proposals, decisions, out;
  };
  auto o = std::make_shared<Opts>();
  auto* validate = cmd->add_subcommand("validate", "Validate a taxonomy file");
  validate->add_option("file", o->file, "Taxonomy JSON")->required();
  auto* apply = cmd->add_subcommand("apply", "Apply review decisions to a taxonomy");
  apply->add_option("--taxonomy", o->taxonomy, "Current taxonomy")->required();
  apply->add_option("--proposals", o->proposals, "Review queue from induct")->required();
  apply->add_option("--decisions", o->decisions, "Review decisions JSON-lines")->required();
  apply->add_option("--out", o->out, "New taxonomy JSON")->required();
  return [validate, apply, o, &out]() -> int {
    if (validate->parsed()) {
      const auto t = Taxonomy::load(o->file);
      out << "valid: version " << t.version() << ", " << t.domains().size() << " domains, "
          << t.subdomains().size() << " subdomains, " << t.codes().size() << " codes\n";
      return kExitOk;
    }
    if (!apply->parsed()) return -1;
    const auto t = Taxonomy::load(o->taxonomy);
    const auto next = merge_review(t, load_proposals(o->proposals), load_decisions(o->decisions));
    write_text_file(o->out, dump_pretty(next.to_json()));
    out << "wrote version " << next.version() << " with " << next.codes().size() << " codes\n";
    return kExitOk;
  };
}

Action add_sample(CLI::App& app, std::ostream& out) {
  auto* cmd = app.add_subcommand("sample", "Seeded sampling for annotation batches");
  cmd->require_subcommand(1);
  struct Opts {
    std::string triplets, annotations, source, stratum = "specialty", out, manifest;
    size_t n = 0;
    std::uint64_t seed = 0;
  };
  auto o = std::make_shared<Opts>();
  auto* strat = cmd->add_subcommand("stratified", "Proportional stratified sample");
  strat->add_option("--stratum", o->stratum)
      ->check(CLI::IsMember({"specialty", "department", "recipient_name", "message_sender"}));
  auto* bal = cmd->add_subcommand("balanced", "1:1 sample of flagged and clean messages");
  bal->add_option("--annotations", o->annotations, "Labels deciding the error class")->required();
  bal->add_option("--source", o->source, "Annotation source");
  for (auto* c : {strat, bal}) {
    c->add_option("--triplets", o->triplets, "Triplets JSON-lines")->required();
    c->add_option("--n", o->n, "Sample size")->required();
    c->add_option("--seed", o->seed, "RNG seed")->required();
    c->add_option("--out", o->out, "Sampled triplets JSON-lines")->required();
    c->add_option("--manifest", o->manifest, "Sampling manifest JSON");
  }
  return [strat, bal, o, &out]() -> int {
    if (!strat->parsed() && !bal->parsed()) return -1;
    const auto triplets = load_triplets(o->triplets);
    Json manifest;
    if (strat->parsed()) {
      const auto s = stratified_sample(triplets, o->n, o->seed, parse_stratum_field(o->stratum));
      write_text_file(o->out, triplets_to_jsonl(s.sample));
      manifest = s.manifest.to_json();
    } else {
      const auto ann = load_annotations(o->annotations, o->source);
      std::vector<ScoredTriplet> scored;
      for (const auto& t : triplets) {
        auto it = ann.labels.find(t.message_id);
        if (it == ann.labels.end()) throw ValidationError("no annotation for message " + t.message_id);
        scored.push_back({t, !it->second.empty()});
      }
      const auto s = balanced_sample(scored, o->n, o->seed);
      std::vector<MessageTriplet> picked;
      for (const auto& x : s.sample) picked.push_back(x.triplet);
      write_text_file(o->out, triplets_to_jsonl(picked));
      manifest = s.manifest();
    }
    if (!o->manifest.empty()) write_text_file(o->manifest, dump_pretty(manifest));
    out << manifest.dump() << "\n";
    return kExitOk;
  };
}

ServiceServer* g_server = nullptr;

extern "C" void handle_stop_signal(int) {
  if (g_server) g_server->stop();
}

Action add_serve(CLI::App& app, std::ostream& out, std::ostream& err) {
  auto* cmd = app.add_subcommand("serve", "Run the HTTP guardrail service");
  struct Opts {
    std::string config, host, mode;
    int port = -1;
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("--config", o->config, "Service config JSON")->required();
  cmd->add_option("--host", o->host, "Listen address override");
  cmd->add_option("--port", o->port, "Listen port override");
  cmd->add_option("--mode", o->mode, "Default mode override")
      ->check(CLI::IsMember({"baseline", "enhanced"}));
  return [cmd, o, &out, &err]() -> int {
    if (!cmd->parsed()) return -1;
    auto cfg = ServiceConfig::load(o->config);
    cfg.apply_env();
    if (!o->host.empty()) cfg.host = o->host;
    if (o->port >= 0) cfg.port = o->port;
    if (!o->mode.empty()) cfg.default_mode = parse_mode(o->mode);
    if (cfg.default_mode == Mode::kEnhanced && cfg.index_path.empty()) {
      throw ConfigError("enhanced default mode needs index_path");
    }
    auto service = GuardrailService::from_config(cfg);
    service->set_logger([&err](const std::string& line) { err << line << std::endl; });
    ServiceServer server(*service);
    const int port = server.start(cfg.host, cfg.port);
    out << "listening on " << cfg.host << ":" << port << std::endl;
    g_server = &server;
    std::signal(SIGINT, handle_stop_signal);
    std::signal(SIGTERM, handle_stop_signal);
    server.wait();
    g_server = nullptr;
    return kExitOk;
  };
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Retrieval-augmented guardrail for drafted patient-portal replies", "raec"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  std::vector<Action> actions{add_ingest(app, out),        add_index(app, out),
                              add_check(app, out, err),    add_evaluate(app, out),
                              add_retrieve_eval(app, out), add_report(app, out),
                              add_induct(app, out),        add_taxonomy(app, out),
                              add_sample(app, out),        add_serve(app, out, err)};

  std::vector<std::string> argv_store{"raec"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitValidation;
  }

  try {
    for (auto& run : actions) {
      const int code = run();
      if (code >= 0) return code;
    }
    err << "raec: no command ran\n";
    return kExitValidation;
  } catch (const ValidationError& e) {
    err << "raec: " << e.what() << "\n";
    return kExitValidation;
  } catch (const Json::exception& e) {
    err << "raec: malformed JSON input: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "raec: " << e.what() << "\n";
    return kExitIo;
  }
}

}  // namespace raec
