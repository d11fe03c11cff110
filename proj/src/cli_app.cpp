#include "rasr/cli_app.hpp"

#include <atomic>
#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rasr/config.hpp"
#include "rasr/corpus.hpp"
#include "rasr/embedding.hpp"
#include "rasr/errors.hpp"
#include "rasr/evaluation.hpp"
#include "rasr/http_backends.hpp"
#include "rasr/logging.hpp"
#include "rasr/pipeline.hpp"
#include "rasr/prompting.hpp"
#include "rasr/retrieval.hpp"
#include "rasr/server.hpp"
#include "rasr/staged_training.hpp"
#include "rasr/toy_model.hpp"
#include "rasr/vector_store.hpp"

namespace rasr {

namespace {

// All option targets in one place; resolved by CLI11 with the precedence
// flag > RASR_* environment variable > --config file > default.
struct CliValues {
  AppConfig cfg;
  std::string embedder_id = "deterministic";
  int embed_dim = 0;  // 0 = provider default, or the open store's dimension
  int ngram_order = 3;
  std::uint64_t hash_seed = 0;
  std::size_t char_budget = 0;  // 0 = unbounded

  // Per-command values.
  std::string corpus_path;
  std::string query_text;
  std::string hypothesis;
  std::string transcript;
  std::vector<std::string> exclude_talks;
  std::string mode_label = "full";
  std::vector<std::string> mode_labels;
  std::string instruction_mode = "on";
  std::string baseline_mode;
  std::string eval_path;
  std::string pairs_path;
  bool normalize_pairs = false;
  std::string out_path;
  std::string schedule_label;
  std::string epochs_override;
  TrainConfig train;
  bool show_default_instruction = false;
};

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return in;
}

void write_output(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << content;
  if (!out) throw IoError("failed writing '" + path + "'");
}

std::string require_db(const CliValues& v) {
  if (v.cfg.db_path.empty()) {
    throw ConfigError("this command needs a store; pass --db or set RASR_DB");
  }
  return v.cfg.db_path;
}

// Embedder for an already-loaded store: an unset --embed-dim adopts the
// store's dimension so queries can never mismatch by default.
std::unique_ptr<Embedder> make_query_embedder(const CliValues& v,
                                              const VectorStore& store) {
  const int dim = v.embed_dim > 0 ? v.embed_dim : store.dim();
  return make_embedder(
      make_embedder_spec(v.embedder_id, dim, v.ngram_order, v.hash_seed));
}

std::optional<std::size_t> budget_of(const CliValues& v) {
  if (v.char_budget == 0) return std::nullopt;
  return v.char_budget;
}

std::optional<QueryMode> parse_cell_mode(const std::string& label) {
  if (label == "none") return std::nullopt;
  return QueryMode::parse(label);
}

std::vector<EvalUtterance> load_eval_path(const std::string& path) {
  std::ifstream in = open_input(path);
  return load_eval_dataset(in);
}

std::map<std::string, std::string> reference_map(
    const std::vector<EvalUtterance>& dataset) {
  std::map<std::string, std::string> refs;
  for (const auto& u : dataset) refs[u.audio_ref] = u.reference;
  return refs;
}

int cmd_ingest(const CliValues& v) {
  const std::string db = v.out_path.empty() ? require_db(v) : v.out_path;
  const EmbedderSpec spec =
      make_embedder_spec(v.embedder_id, v.embed_dim, v.ngram_order, v.hash_seed);
  v.cfg.chunking.validate();

  std::ifstream in = open_input(v.corpus_path);
  const std::vector<TalkRecord> talks = load_corpus(in);

  std::vector<Chunk> chunks;
  for (const auto& talk : talks) {
    std::vector<Chunk> talk_chunks = split_chunks(talk, v.cfg.chunking);
    chunks.insert(chunks.end(), std::make_move_iterator(talk_chunks.begin()),
                  std::make_move_iterator(talk_chunks.end()));
  }

  std::unique_ptr<Embedder> embedder = make_embedder(spec);
  std::vector<std::string> texts;
  texts.reserve(chunks.size());
  for (const auto& c : chunks) texts.push_back(c.text);
  const std::vector<EmbeddingVector> vectors = embedder->embed_batch(texts);

  VectorStore store(embedder->dim());
  std::vector<StoreEntry> entries;
  entries.reserve(chunks.size());
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    entries.push_back(StoreEntry{chunks[i].chunk_id, chunks[i].talk_id,
                                 vectors[i], chunks[i].text});
  }
  const std::size_t inserted = store.upsert(std::move(entries));
  store.save(db);

  std::cout << nlohmann::json{{"db", db},
                              {"talks", talks.size()},
                              {"chunks", inserted},
                              {"dim", store.dim()}}
                   .dump(2)
            << "\n";
  return 0;
}

int cmd_query(const CliValues& v) {
  const VectorStore store = VectorStore::load(require_db(v));
  std::unique_ptr<Embedder> embedder = make_query_embedder(v, store);
  EmbeddingVector q = embedder->embed(v.query_text);
  l2_normalize(q);
  QueryFilter filter;
  filter.exclude_talk_ids.insert(v.exclude_talks.begin(),
                                 v.exclude_talks.end());
  const std::vector<ScoredChunk> hits = store.top_k(q, v.cfg.k, filter);

  nlohmann::json results = nlohmann::json::array();
  for (const auto& h : hits) {
    results.push_back(nlohmann::json{{"chunk_id", h.entry.chunk_id},
                                     {"talk_id", h.entry.talk_id},
                                     {"score", h.score},
                                     {"text", h.entry.text}});
  }
  std::cout << nlohmann::json{{"query_text", v.query_text},
                              {"k", v.cfg.k},
                              {"results", std::move(results)}}
                   .dump(2)
            << "\n";
  return 0;
}

int cmd_retrieve(const CliValues& v) {
  const VectorStore store = VectorStore::load(require_db(v));
  std::unique_ptr<Embedder> embedder = make_query_embedder(v, store);

  const QueryMode mode = QueryMode::parse(v.mode_label);
  std::optional<std::string> transcript;
  if (!v.transcript.empty()) transcript = v.transcript;

  RetrievalRequest req;
  req.query_text = build_query(v.hypothesis, transcript, mode);
  req.k = v.cfg.k;
  req.exclude_talk_ids.insert(v.exclude_talks.begin(), v.exclude_talks.end());
  req.validate();

  const RetrievalResult result = retrieve(req, mode, store, *embedder);
  std::cout << retrieval_result_to_json(result).dump(2) << "\n";
  return 0;
}

int cmd_transcribe(const CliValues& v) {
  const VectorStore store = VectorStore::load(require_db(v));
  std::unique_ptr<Embedder> embedder = make_query_embedder(v, store);
  const std::vector<EvalUtterance> dataset = load_eval_path(v.eval_path);
  if (dataset.empty()) throw EmptyInputError("eval dataset is empty");

  std::unique_ptr<AsrBackend> asr =
      make_asr_backend(v.cfg.asr_backend, v.cfg.mock_corruption_rate,
                       v.cfg.mock_seed, reference_map(dataset));
  std::unique_ptr<ContextualDecoder> decoder =
      make_decoder_backend(v.cfg.decoder_backend);

  ExperimentSpec spec;
  spec.k = v.cfg.k;
  spec.asr_id = v.cfg.asr_backend;
  spec.decoder_id = v.cfg.decoder_backend;
  const bool with_instruction = v.instruction_mode == "on";
  std::vector<std::string> labels = v.mode_labels;
  if (labels.empty()) labels.push_back(v.mode_label);
  for (const auto& label : labels) {
    spec.cells.push_back(
        ExperimentCell{parse_cell_mode(label), with_instruction});
  }
  if (!v.baseline_mode.empty()) {
    spec.baseline_label =
        ExperimentCell{parse_cell_mode(v.baseline_mode), with_instruction}
            .condition_label();
  }
  spec.validate();

  PipelineDeps deps;
  deps.store = &store;
  deps.embedder = embedder.get();
  deps.asr = asr.get();
  deps.decoder = decoder.get();
  deps.char_budget = budget_of(v);
  deps.workers = v.cfg.workers;

  const ExperimentReport report = run_experiment(dataset, spec, deps);
  std::cout << render_table(report.comparison).table_text << "\n";
  if (report.failed_utterances > 0) {
    log::warn("utterances_failed", {{"count", report.failed_utterances}});
  }
  if (!v.out_path.empty()) {
    write_output(v.out_path, experiment_report_to_json(report).dump(2) + "\n");
    log::info("report_written", {{"path", v.out_path}});
  }
  return 0;
}

int cmd_evaluate(const CliValues& v) {
  std::ifstream in = open_input(v.pairs_path);
  const TextNormalizer normalizer =
      v.normalize_pairs ? TextNormalizer([](const std::string& s) {
        return normalize_text(s);
      })
                        : TextNormalizer();

  std::vector<CerReport> reports;
  nlohmann::json pairs = nlohmann::json::array();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) {
      throw ParseError("invalid JSON object", line_no);
    }
    if (!obj.contains("reference") || !obj["reference"].is_string() ||
        !obj.contains("hypothesis") || !obj["hypothesis"].is_string()) {
      throw ParseError("expected string fields 'reference' and 'hypothesis'",
                       line_no);
    }
    const CerReport r = score_pair(obj["reference"].get<std::string>(),
                                   obj["hypothesis"].get<std::string>(),
                                   normalizer);
    reports.push_back(r);
    pairs.push_back(nlohmann::json{{"line", line_no},
                                   {"substitutions", r.substitutions},
                                   {"deletions", r.deletions},
                                   {"insertions", r.insertions},
                                   {"reference_chars", r.reference_chars},
                                   {"cer", r.cer}});
  }
  const CerReport pooled = pool_cer(reports);
  const nlohmann::json report{{"schema", "rasr-eval/1"},
                              {"pairs", std::move(pairs)},
                              {"pooled",
                               {{"substitutions", pooled.substitutions},
                                {"deletions", pooled.deletions},
                                {"insertions", pooled.insertions},
                                {"reference_chars", pooled.reference_chars},
                                {"cer", pooled.cer}}}};
  if (!v.out_path.empty()) write_output(v.out_path, report.dump(2) + "\n");
  std::cout << report.dump(2) << "\n";
  return 0;
}

std::vector<int> parse_epoch_list(const std::string& text) {
  std::vector<int> epochs;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const int value = std::stoi(item, &used);
      if (used != item.size() || value < 1) throw std::invalid_argument(item);
      epochs.push_back(value);
    } catch (const std::exception&) {
      throw ConfigError("epoch override must be positive integers, got '" +
                        text + "'");
    }
  }
  if (epochs.empty()) throw ConfigError("empty epoch override");
  return epochs;
}

int cmd_train_toy(const CliValues& v) {
  StageSchedule schedule = StageSchedule::from_label(v.schedule_label);
  if (!v.epochs_override.empty()) {
    const std::vector<int> epochs = parse_epoch_list(v.epochs_override);
    if (epochs.size() != schedule.stages.size()) {
      throw ConfigError("schedule " + schedule.label + " has " +
                        std::to_string(schedule.stages.size()) +
                        " stages but the override lists " +
                        std::to_string(epochs.size()));
    }
    for (std::size_t i = 0; i < epochs.size(); ++i) {
      schedule.stages[i].epochs = epochs[i];
    }
  }
  v.train.validate();

  const ToyDataset data = make_disambiguation_dataset(v.train.seed);
  ToyModel model = ToyModel::init(v.train.seed);
  const TrainOutcome outcome =
      train_schedule(std::move(model), data, schedule, v.train);

  const EpochRecord& last = outcome.history.back();
  nlohmann::json out{{"schema", "rasr-train-toy/1"},
                     {"schedule", schedule.label},
                     {"seed", v.train.seed},
                     {"learning_rate", v.train.learning_rate},
                     {"batch_size", v.train.batch_size},
                     {"cosine_annealing", v.train.cosine_annealing},
                     {"epochs", outcome.history.size()},
                     {"final", {{"stage", last.stage},
                                {"train_nll", last.train_nll},
                                {"dev_nll", last.dev_nll}}}};
  if (!v.out_path.empty()) {
    nlohmann::json full = out;
    full["history"] = history_to_json(outcome.history);
    write_output(v.out_path, full.dump(2) + "\n");
    log::info("history_written", {{"path", v.out_path}});
  } else {
    out["history"] = history_to_json(outcome.history);
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

std::atomic<bool> g_shutdown{false};

void handle_shutdown_signal(int) { g_shutdown.store(true); }

int cmd_serve(const CliValues& v) {
  const VectorStore store = VectorStore::load(require_db(v));
  std::unique_ptr<Embedder> embedder = make_query_embedder(v, store);

  std::map<std::string, std::string> refs;
  if (!v.eval_path.empty()) refs = reference_map(load_eval_path(v.eval_path));
  std::unique_ptr<AsrBackend> asr = make_asr_backend(
      v.cfg.asr_backend, v.cfg.mock_corruption_rate, v.cfg.mock_seed, refs);
  std::unique_ptr<ContextualDecoder> decoder =
      make_decoder_backend(v.cfg.decoder_backend);

  ServerDeps deps;
  deps.store = &store;
  deps.embedder = embedder.get();
  deps.asr = asr.get();
  deps.decoder = decoder.get();
  deps.default_k = v.cfg.k;
  deps.char_budget = budget_of(v);
  RasrServer server(deps);

  g_shutdown.store(false);
  std::signal(SIGINT, handle_shutdown_signal);
  std::signal(SIGTERM, handle_shutdown_signal);
  std::thread watcher([&server]() {
    while (!g_shutdown.load()) {
      std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    server.stop();
  });

  const bool ok = server.listen(v.cfg.server.bind_address, v.cfg.server.port);
  g_shutdown.store(true);
  watcher.join();
  if (!ok) {
    throw Error("could not serve on " + v.cfg.server.bind_address + ":" +
                std::to_string(v.cfg.server.port));
  }
  log::info("server_stopped", {});
  return 0;
}

int cmd_prompt(const CliValues&) {
  std::cout << default_instruction().text << "\n";
  return 0;
}

}  // namespace

int run_cli(std::vector<std::string> args) {
  CliValues v;
  CLI::App app{"Retrieval-augmented speech transcription toolkit"};
  app.require_subcommand(0, 1);

  app.set_config("--config", "", "Read default option values from a file")
      ->envname("RASR_CONFIG");
  bool print_config = false;
  app.add_flag("--print-config", print_config,
               "Print the resolved configuration as JSON and exit");

  app.add_option("--db", v.cfg.db_path, "Vector store path")->envname("RASR_DB");
  app.add_option("-k,--k", v.cfg.k, "Chunks to retrieve per query")
      ->envname("RASR_K");
  app.add_option("--chunk-size", v.cfg.chunking.chunk_size,
                 "Chunk length in Unicode scalar values")
      ->envname("RASR_CHUNK_SIZE");
  app.add_option("--overlap", v.cfg.chunking.overlap,
                 "Overlap between consecutive chunks")
      ->envname("RASR_OVERLAP");
  app.add_option("--embedder", v.embedder_id,
                 "Embedding provider: deterministic | remote:<endpoint>")
      ->envname("RASR_EMBEDDER");
  app.add_option("--embed-dim", v.embed_dim,
                 "Embedding dimension (0 = provider default or store match)")
      ->envname("RASR_EMBED_DIM");
  app.add_option("--ngram-order", v.ngram_order,
                 "N-gram order of the deterministic embedder")
      ->envname("RASR_NGRAM_ORDER");
  app.add_option("--hash-seed", v.hash_seed,
                 "Hash seed of the deterministic embedder")
      ->envname("RASR_HASH_SEED");
  app.add_option("--asr", v.cfg.asr_backend,
                 "First-pass recognizer: mock | http:<url>")
      ->envname("RASR_ASR");
  app.add_option("--decoder", v.cfg.decoder_backend,
                 "Contextual decoder: mock | http:<url>")
      ->envname("RASR_DECODER");
  app.add_option("--mock-rate", v.cfg.mock_corruption_rate,
                 "Token corruption rate of the mock recognizer")
      ->envname("RASR_MOCK_RATE");
  app.add_option("--mock-seed", v.cfg.mock_seed,
                 "Corruption seed of the mock recognizer")
      ->envname("RASR_MOCK_SEED");
  app.add_option("--char-budget", v.char_budget,
                 "Prompt length budget in scalar values (0 = unbounded)")
      ->envname("RASR_CHAR_BUDGET");
  app.add_option("--bind", v.cfg.server.bind_address, "Serve bind address")
      ->envname("RASR_BIND");
  app.add_option("--port", v.cfg.server.port, "Serve port")->envname("RASR_PORT");
  app.add_option("--workers", v.cfg.workers,
                 "Worker threads for batch transcription (0 = hardware)")
      ->envname("RASR_WORKERS");

  CLI::App* ingest =
      app.add_subcommand("ingest", "Chunk and embed a transcript corpus");
  ingest->fallthrough();
  ingest->add_option("--corpus", v.corpus_path, "Corpus JSONL path")->required();
  ingest->add_option("--out", v.out_path,
                     "Store output path (defaults to --db)");

  CLI::App* query =
      app.add_subcommand("query", "Rank stored chunks against a text query");
  query->fallthrough();
  query->add_option("--text", v.query_text, "Query text")->required();
  query->add_option("--exclude-talk", v.exclude_talks,
                    "Talk ids to exclude (repeatable)");

  CLI::App* retrieve_cmd = app.add_subcommand(
      "retrieve", "Build a query from a hypothesis and fetch context chunks");
  retrieve_cmd->fallthrough();
  retrieve_cmd->add_option("--hypothesis", v.hypothesis, "First-pass text")
      ->required();
  retrieve_cmd->add_option(
      "--mode", v.mode_label,
      "Query strategy: prefix:<n> | full | oracle | rand:<seed>");
  retrieve_cmd->add_option("--transcript", v.transcript,
                           "Reference transcript (oracle mode)");
  retrieve_cmd->add_option("--exclude-talk", v.exclude_talks,
                           "Talk ids to exclude (repeatable)");

  CLI::App* transcribe = app.add_subcommand(
      "transcribe", "Two-pass transcription over an eval dataset");
  transcribe->fallthrough();
  transcribe->add_option("--dataset", v.eval_path, "Eval dataset JSONL path")
      ->required();
  transcribe->add_option("--mode", v.mode_labels,
                         "Conditions to run (repeatable; 'none' = no context)");
  transcribe
      ->add_option("--instruction", v.instruction_mode,
                   "Include the instruction segment: on | off")
      ->check(CLI::IsMember({"on", "off"}));
  transcribe->add_option("--baseline", v.baseline_mode,
                         "Mode treated as the comparison baseline");
  transcribe->add_option("--out", v.out_path, "Write the full report JSON here");

  CLI::App* evaluate =
      app.add_subcommand("evaluate", "Score reference/hypothesis pairs");
  evaluate->fallthrough();
  evaluate->add_option("--pairs", v.pairs_path, "Pairs JSONL path")->required();
  evaluate->add_flag("--normalize", v.normalize_pairs,
                     "Normalize both sides before alignment");
  evaluate->add_option("--out", v.out_path, "Write the report JSON here");

  CLI::App* train_toy = app.add_subcommand(
      "train-toy", "Train the toy conditioning model on synthetic data");
  train_toy->fallthrough();
  train_toy
      ->add_option("--schedule", v.schedule_label, "Stage schedule: s1..s5")
      ->required();
  train_toy->add_option("--epochs-override", v.epochs_override,
                        "Comma-separated epochs per stage");
  train_toy->add_option("--seed", v.train.seed, "Training seed");
  train_toy->add_option("--lr", v.train.learning_rate, "Learning rate");
  train_toy->add_option("--batch-size", v.train.batch_size, "Minibatch size");
  train_toy->add_flag("--cosine", v.train.cosine_annealing,
                      "Cosine-anneal the learning rate within each stage");
  train_toy->add_option("--out", v.out_path, "Write the epoch history here");

  CLI::App* serve = app.add_subcommand("serve", "Run the HTTP service");
  serve->fallthrough();
  serve->add_option("--eval", v.eval_path,
                    "Eval dataset whose references seed the mock recognizer");

  CLI::App* prompt =
      app.add_subcommand("prompt", "Inspect prompt assembly defaults");
  prompt->fallthrough();
  prompt->add_flag("--show-default-instruction", v.show_default_instruction,
                   "Print the built-in instruction text")
      ->required();

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (print_config) {
      AppConfig cfg = v.cfg;
      cfg.embedder = make_embedder_spec(v.embedder_id, v.embed_dim,
                                        v.ngram_order, v.hash_seed);
      std::cout << cfg.to_json().dump(2) << "\n";
      return 0;
    }
    if (app.got_subcommand(ingest)) return cmd_ingest(v);
    if (app.got_subcommand(query)) return cmd_query(v);
    if (app.got_subcommand(retrieve_cmd)) return cmd_retrieve(v);
    if (app.got_subcommand(transcribe)) return cmd_transcribe(v);
    if (app.got_subcommand(evaluate)) return cmd_evaluate(v);
    if (app.got_subcommand(train_toy)) return cmd_train_toy(v);
    if (app.got_subcommand(serve)) return cmd_serve(v);
    if (app.got_subcommand(prompt)) return cmd_prompt(v);
  } catch (const std::exception& e) {
    log::error("command_failed", {{"error", e.what()}});
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  std::cerr << app.help();
  return 1;
}

}  // namespace rasr
