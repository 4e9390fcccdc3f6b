#include "lowmt/cli.hpp"

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <pthread.h>

#include <CLI11.hpp>

#include "lowmt/corpus.hpp"
#include "lowmt/error.hpp"
#include "lowmt/hpo.hpp"
#include "lowmt/humeval.hpp"
#include "lowmt/metrics.hpp"
#include "lowmt/service.hpp"
#include "lowmt/store.hpp"
#include "lowmt/subword.hpp"

namespace lowmt::cli {

namespace fs = std::filesystem;

std::string error_line(const std::exception& e) {
  const auto payload = service::error_payload(e).at("error");
  std::string line = "error: kind=" + payload.at("kind").get<std::string>();
  if (payload.contains("field")) line += " field=" + payload.at("field").get<std::string>();
  line += " message=" + nlohmann::json(std::string(e.what())).dump();
  return line;
}

namespace {

std::vector<std::string> read_input_lines(const std::string& path) {
  if (path.empty() || path == "-") {
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(std::cin, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      lines.push_back(line);
    }
    return lines;
  }
  return corpus::read_lines(path);
}

std::vector<std::string> split_spaces(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string piece;
  while (in >> piece) out.push_back(piece);
  return out;
}

nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out << text;
}

struct CorpusArgs {
  std::string source, target, out;
  std::size_t dev = 0, test = 0;
  std::uint64_t seed = 0;
  bool casefold = false, nfc = false;
};

struct SubwordArgs {
  std::string kind = "bpe";
  int vocab_size = subword::kDefaultVocabSize;
  std::vector<std::string> inputs;
  std::string corpus_tsv;
  std::string model;
  std::string input;
  int seed_vocab = 0;
  int em_iterations = 2;
};

struct MetricsArgs {
  std::string hyp, ref;
  bool lc = false, json = false, tsv = false;
};

struct HpoArgs {
  std::string space;
  std::string trainer = "toy";
  std::string command;
  long cycle_steps = hpo::kDefaultCycleSteps;
  int trials_per_stage = 0;
  int patience = hpo::kDefaultPatience;
  std::uint64_t seed = 0;
  double factor = hpo::kDefaultEmissionFactor;
  std::string out;
};

struct HumevalArgs {
  std::string config, store, bind = "127.0.0.1:8080", static_dir, input, mapping, format = "tsv";
};

void run_corpus_split(const CorpusArgs& a, std::ostream& out) {
  auto corpus = corpus::load_parallel(a.source, a.target);
  if (a.casefold || a.nfc) {
    const corpus::TextNormalizationConfig cfg{a.casefold,
                                              a.nfc ? corpus::NormalizationForm::nfc : corpus::NormalizationForm::none};
    std::vector<corpus::SentencePair> pairs;
    for (const auto& p : corpus.pairs()) pairs.push_back({corpus::normalize(p.source, cfg), corpus::normalize(p.target, cfg)});
    corpus = corpus::ParallelCorpus(std::move(pairs));
  }
  const auto split = corpus::split_corpus(corpus, a.dev, a.test, a.seed);
  corpus::save_tsv(split, a.out);
  out << "train " << split.count(corpus::Split::train) << "\ndev " << split.count(corpus::Split::dev) << "\ntest "
      << split.count(corpus::Split::test) << "\n";
}

void run_subword_train(const SubwordArgs& a, std::ostream& out) {
  std::vector<std::string> lines;
  if (!a.corpus_tsv.empty()) lines = corpus::concat_bilingual(corpus::load_tsv(a.corpus_tsv));
  for (const auto& path : a.inputs) {
    auto more = corpus::read_lines(path);
    lines.insert(lines.end(), more.begin(), more.end());
  }
  if (lines.empty()) throw Error(ErrorKind::empty_input, "no training text given");
  subword::SubwordModel model;
  if (a.kind == "bpe") {
    model = subword::bpe_train(lines, a.vocab_size);
  } else if (a.kind == "unigram") {
    subword::UnigramOptions opts;
    opts.vocab_size = a.vocab_size;
    opts.seed_vocab_size = a.seed_vocab > 0 ? a.seed_vocab : 4 * a.vocab_size;
    opts.em_iterations = a.em_iterations;
    model = subword::unigram_train(lines, opts);
  } else {
    throw Error(ErrorKind::model_kind, "unknown model kind '" + a.kind + "'");
  }
  subword::save_model(model, a.model);
  out << "kind " << subword::to_string(model.kind) << "\nvocab_size " << model.vocab_size << "\n";
}

void run_subword_encode(const SubwordArgs& a, std::ostream& out) {
  const auto model = subword::load_model(a.model);
  for (const auto& line : read_input_lines(a.input)) {
    const auto pieces = subword::encode(model, line);
    for (std::size_t i = 0; i < pieces.size(); ++i) out << (i ? " " : "") << pieces[i];
    out << "\n";
  }
}

void run_subword_decode(const SubwordArgs& a, std::ostream& out) {
  for (const auto& line : read_input_lines(a.input)) out << subword::decode(split_spaces(line)) << "\n";
}

void run_metrics(const MetricsArgs& a, std::ostream& out) {
  const auto hyps = corpus::read_lines(a.hyp);
  const auto refs = corpus::read_lines(a.ref);
  const auto report = metrics::evaluate_all(hyps, refs, {.case_insensitive = a.lc});
  if (a.json) {
    out << metrics::to_json(report).dump(2) << "\n";
  } else if (a.tsv) {
    out << "BLEU\tTER\tCHRF3\n" << metrics::render_tsv_row(report);
  } else {
    out << metrics::render_text(report);
  }
}

// Custom spaces may name the toy trainer's argmax under "optimum".
hpo::Config toy_optimum(const std::string& space_path) {
  if (space_path.empty()) return hpo::transformer_optimum();
  std::ifstream in(space_path);
  const auto j = nlohmann::json::parse(in, nullptr, false);
  hpo::Config optimum;
  if (j.is_object() && j.contains("optimum")) {
    if (!j.at("optimum").is_object()) throw Error(ErrorKind::parse, "'optimum' must be an object");
    for (const auto& [name, value] : j.at("optimum").items()) optimum[name] = hpo::value_from_json(value);
  }
  return optimum;
}

void run_hpo(const HpoArgs& a, std::ostream& out) {
  const auto space = a.space.empty() ? hpo::transformer_space() : hpo::load_space(a.space);
  std::unique_ptr<hpo::TrainerAdapter> trainer;
  if (a.trainer == "toy") {
    hpo::ToyTrainer::Options o;
    o.seed = a.seed;
    o.eval_interval = a.cycle_steps;
    trainer = std::make_unique<hpo::ToyTrainer>(space, toy_optimum(a.space), o);
  } else if (a.trainer == "command") {
    if (a.command.empty()) throw Error(ErrorKind::configuration, "--command is required for the command trainer");
    trainer = std::make_unique<hpo::CommandTrainer>(a.command);
  } else {
    throw Error(ErrorKind::configuration, "unknown trainer '" + a.trainer + "'");
  }
  hpo::SearchOptions opts;
  opts.cycle_steps = a.cycle_steps;
  if (a.trials_per_stage > 0) opts.trials_per_stage = a.trials_per_stage;
  opts.early_stop_patience = a.patience;
  opts.seed = a.seed;
  opts.emission_factor = a.factor;
  const auto result = hpo::staged_search(space, *trainer, opts);
  if (!a.out.empty()) {
    std::string log;
    for (const auto& t : result.trials) log += hpo::to_json(t).dump() + "\n";
    write_text(a.out, log);
  }
  const nlohmann::json summary = {{"best", hpo::to_json(result.best)},
                                  {"trials", result.trials.size()},
                                  {"exhaustive_size", space.exhaustive_size()},
                                  {"energy_kwh", result.ledger.total_kwh()},
                                  {"kg_co2", result.ledger.total_kg()}};
  out << summary.dump(2) << "\n";
}

humeval::AnnotationSession session_from_config(const nlohmann::json& j) {
  auto def = j;
  def["version"] = j.value("version", humeval::kSessionFormatVersion);
  def.erase("blinding");
  return humeval::AnnotationSession::from_definition(def);
}

store::ReportFormat report_format(const std::string& f) {
  if (f == "json") return store::ReportFormat::json;
  if (f == "tsv") return store::ReportFormat::tsv;
  if (f == "kappa") return store::ReportFormat::kappa;
  throw Error(ErrorKind::configuration, "format must be json, tsv or kappa");
}

void run_humeval_create(const HumevalArgs& a, std::ostream& out) {
  const auto session = session_from_config(read_json_file(a.config));
  store::CampaignStore::initialize(a.store, session);
  out << "created " << a.store << " units " << session.total_units() << "\n";
}

void run_humeval_ingest(const HumevalArgs& a, std::ostream& out) {
  const auto mapping = humeval::mapping_from_json(read_json_file(a.mapping));
  const auto result = humeval::ingest_published_dataset(a.input, mapping);
  const fs::path root = a.store;
  if (fs::exists(root / store::kSessionFile)) {
    const auto existing = store::CampaignStore::open(root, store::CampaignStore::Mode::reader);
    std::string log;
    for (const auto& r : result.records) log += humeval::to_json(r).dump() + "\n";
    std::ifstream in(root / store::kLogFile, std::ios::binary);
    const std::string stored((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (existing->snapshot().definition_json() != result.session.definition_json() || stored != log) {
      throw Error(ErrorKind::conflict, "store " + root.string() + " holds a different campaign");
    }
    out << "unchanged " << root.string() << " units " << result.session.done_units() << "\n";
    return;
  }
  store::CampaignStore::initialize(root, humeval::AnnotationSession::from_definition(result.session.definition_json()),
                                   result.records);
  out << "ingested " << root.string() << " units " << result.session.done_units() << "\n";
}

void run_humeval_report(const HumevalArgs& a, std::ostream& out, store::ReportFormat format) {
  const auto st = store::CampaignStore::open(a.store, store::CampaignStore::Mode::reader);
  out << store::render_report(st->snapshot(), format);
}

void run_humeval_serve(HumevalArgs a, std::ostream& out) {
  auto bind = service::parse_bind(a.bind);
  fs::path root = a.store;
  service::apply_environment(bind, root);
  if (root.empty()) throw Error(ErrorKind::configuration, "--store or LOWMT_STORE is required");

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  auto st = store::CampaignStore::open(root, store::CampaignStore::Mode::writer);
  service::ServiceOptions opts{bind, std::nullopt};
  if (!a.static_dir.empty()) opts.static_dir = a.static_dir;
  service::AnnotationService svc(*st, opts);
  svc.start();
  out << "listening " << bind.host << ":" << svc.port() << " store " << root.string() << std::endl;
  int sig = 0;
  sigwait(&signals, &sig);
  svc.stop();
  out << "stopped" << std::endl;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Low-resource MT toolkit", "lowmt"};
  app.require_subcommand(1);

  CorpusArgs ca;
  auto* corpus_cmd = app.add_subcommand("corpus", "Parallel corpus preparation")->require_subcommand(1);
  auto* split_cmd = corpus_cmd->add_subcommand("split", "Seeded train/dev/test split to a labeled TSV");
  split_cmd->add_option("--src", ca.source, "Source sentences, one per line")->required();
  split_cmd->add_option("--tgt", ca.target, "Target sentences, one per line")->required();
  split_cmd->add_option("--dev", ca.dev, "Dev set size")->required();
  split_cmd->add_option("--test", ca.test, "Test set size")->required();
  split_cmd->add_option("--seed", ca.seed);
  split_cmd->add_option("--out", ca.out, "Output TSV")->required();
  split_cmd->add_flag("--casefold", ca.casefold);
  split_cmd->add_flag("--nfc", ca.nfc);

  SubwordArgs sa;
  auto* subword_cmd = app.add_subcommand("subword", "Subword models")->require_subcommand(1);
  auto* train_cmd = subword_cmd->add_subcommand("train", "Train a shared BPE or unigram model");
  train_cmd->add_option("--kind", sa.kind)->check(CLI::IsMember({"bpe", "unigram"}));
  train_cmd->add_option("--vocab-size", sa.vocab_size);
  train_cmd->add_option("--input", sa.inputs, "Plain text files (repeatable)");
  train_cmd->add_option("--corpus", sa.corpus_tsv, "Labeled TSV; train sources then targets are used");
  train_cmd->add_option("--seed-vocab", sa.seed_vocab, "Unigram seed vocabulary size");
  train_cmd->add_option("--em-iterations", sa.em_iterations);
  train_cmd->add_option("--model", sa.model, "Output model file")->required();
  auto* encode_cmd = subword_cmd->add_subcommand("encode", "Segment lines into pieces");
  encode_cmd->add_option("--model", sa.model)->required();
  encode_cmd->add_option("--input", sa.input, "Input file (default stdin)");
  auto* decode_cmd = subword_cmd->add_subcommand("decode", "Join space-separated pieces back into text");
  decode_cmd->add_option("--input", sa.input, "Input file (default stdin)");

  MetricsArgs ma;
  auto* metrics_cmd = app.add_subcommand("metrics", "Automatic evaluation")->require_subcommand(1);
  auto* score_cmd = metrics_cmd->add_subcommand("score", "BLEU, TER and ChrF3 of a hypothesis file");
  score_cmd->add_option("--hyp", ma.hyp)->required();
  score_cmd->add_option("--ref", ma.ref)->required();
  score_cmd->add_flag("--lc", ma.lc, "Case-insensitive scoring");
  auto* json_flag = score_cmd->add_flag("--json", ma.json);
  score_cmd->add_flag("--tsv", ma.tsv)->excludes(json_flag);

  HpoArgs ha;
  auto* hpo_cmd = app.add_subcommand("hpo", "Hyperparameter search")->require_subcommand(1);
  auto* run_cmd = hpo_cmd->add_subcommand("run", "Staged random search");
  run_cmd->add_option("--space", ha.space, "Search space JSON (default: transformer space)");
  run_cmd->add_option("--trainer", ha.trainer)->check(CLI::IsMember({"toy", "command"}));
  run_cmd->add_option("--command", ha.command, "Trainer program for --trainer command");
  run_cmd->add_option("--cycle-steps", ha.cycle_steps);
  run_cmd->add_option("--trials-per-stage", ha.trials_per_stage);
  run_cmd->add_option("--patience", ha.patience);
  run_cmd->add_option("--seed", ha.seed);
  run_cmd->add_option("--emission-factor", ha.factor, "gCO2 per kWh");
  run_cmd->add_option("--out", ha.out, "Trial log (JSONL)");

  HumevalArgs ea;
  auto* he_cmd = app.add_subcommand("humeval", "Human evaluation campaigns")->require_subcommand(1);
  auto* create_cmd = he_cmd->add_subcommand("create", "Create a campaign store from a definition");
  create_cmd->add_option("--config", ea.config)->required();
  create_cmd->add_option("--store", ea.store)->required();
  auto* serve_cmd = he_cmd->add_subcommand("serve", "Serve the annotation API");
  serve_cmd->add_option("--store", ea.store);
  serve_cmd->add_option("--bind", ea.bind);
  serve_cmd->add_option("--static", ea.static_dir, "Built UI bundle directory");
  auto* ingest_cmd = he_cmd->add_subcommand("ingest", "Import a published annotation export");
  ingest_cmd->add_option("--input", ea.input)->required();
  ingest_cmd->add_option("--mapping", ea.mapping)->required();
  ingest_cmd->add_option("--store", ea.store)->required();
  auto* report_cmd = he_cmd->add_subcommand("report", "Campaign report");
  report_cmd->add_option("--store", ea.store)->required();
  report_cmd->add_option("--format", ea.format)->check(CLI::IsMember({"json", "tsv", "kappa"}));
  auto* kappa_cmd = he_cmd->add_subcommand("kappa", "Per-category agreement table");
  kappa_cmd->add_option("--store", ea.store)->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*split_cmd) run_corpus_split(ca, out);
    else if (*train_cmd) run_subword_train(sa, out);
    else if (*encode_cmd) run_subword_encode(sa, out);
    else if (*decode_cmd) run_subword_decode(sa, out);
    else if (*score_cmd) run_metrics(ma, out);
    else if (*run_cmd) run_hpo(ha, out);
    else if (*create_cmd) run_humeval_create(ea, out);
    else if (*serve_cmd) run_humeval_serve(ea, out);
    else if (*ingest_cmd) run_humeval_ingest(ea, out);
    else if (*report_cmd) run_humeval_report(ea, out, report_format(ea.format));
    else if (*kappa_cmd) run_humeval_report(ea, out, store::ReportFormat::kappa);
  } catch (const std::exception& e) {
    err << error_line(e) << "\n";
    return kExitError;
  }
  return kExitOk;
}

}  // namespace lowmt::cli
