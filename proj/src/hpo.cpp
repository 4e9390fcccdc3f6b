#include "lowmt/hpo.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

#include "lowmt/error.hpp"

namespace lowmt::hpo {

namespace {

bool is_numeric(const ParamValue& v) { return !std::holds_alternative<std::string>(v); }

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  return out + "'";
}

}  // namespace

bool same_value(const ParamValue& a, const ParamValue& b) {
  if (is_numeric(a) && is_numeric(b)) return as_number(a) == as_number(b);
  return a == b;
}

double as_number(const ParamValue& value) {
  if (const auto* i = std::get_if<std::int64_t>(&value)) return static_cast<double>(*i);
  if (const auto* d = std::get_if<double>(&value)) return *d;
  throw Error(ErrorKind::configuration, "value '" + std::get<std::string>(value) + "' is not numeric");
}

std::string to_string(const ParamValue& value) { return to_json(value).dump(); }

nlohmann::json to_json(const ParamValue& value) {
  return std::visit([](const auto& v) { return nlohmann::json(v); }, value);
}

nlohmann::json to_json(const Config& config) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, value] : config) j[name] = to_json(value);
  return j;
}

ParamValue value_from_json(const nlohmann::json& j) {
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  throw Error(ErrorKind::parse, "candidate values must be numbers or strings, got " + j.dump());
}

SearchSpace::SearchSpace(std::vector<Parameter> parameters) : parameters_(std::move(parameters)) {
  std::set<std::string> seen;
  for (const auto& p : parameters_) {
    if (p.name.empty()) throw Error(ErrorKind::configuration, "parameter with an empty name");
    if (!seen.insert(p.name).second) {
      throw Error(ErrorKind::configuration, "duplicate parameter '" + p.name + "'");
    }
    if (p.candidates.empty()) {
      throw Error(ErrorKind::configuration, "parameter '" + p.name + "' has no candidate values");
    }
  }
}

const Parameter* SearchSpace::find(std::string_view name) const {
  for (const auto& p : parameters_)
    if (p.name == name) return &p;
  return nullptr;
}

std::size_t SearchSpace::exhaustive_size() const {
  std::size_t n = 1;
  for (const auto& p : parameters_) n *= p.candidates.size();
  return n;
}

std::size_t SearchSpace::staged_size() const {
  std::size_t n = 0;
  for (const auto& p : parameters_) n += p.candidates.size();
  return n;
}

SearchSpace transformer_space() {
  using V = std::vector<ParamValue>;
  return SearchSpace({
      {"learning_rate", V{0.1, 0.01, 0.001, std::int64_t{2}}},
      {"batch_size", V{std::int64_t{1024}, std::int64_t{2048}, std::int64_t{4096}, std::int64_t{8192}}},
      {"attention_heads", V{std::int64_t{2}, std::int64_t{4}, std::int64_t{8}}},
      {"num_layers", V{std::int64_t{5}, std::int64_t{6}}},
      {"feed_forward_dim", V{std::int64_t{2048}}},
      {"embedding_dim", V{std::int64_t{128}, std::int64_t{256}, std::int64_t{512}}},
      {"label_smoothing", V{0.1, 0.3}},
      {"dropout", V{0.1, 0.3}},
      {"attention_dropout", V{0.1}},
      {"average_decay", V{std::int64_t{0}, 0.0001}},
  });
}

Config transformer_optimum() {
  return {
      {"learning_rate", std::int64_t{2}},   {"batch_size", std::int64_t{2048}},
      {"attention_heads", std::int64_t{2}}, {"num_layers", std::int64_t{6}},
      {"feed_forward_dim", std::int64_t{2048}}, {"embedding_dim", std::int64_t{256}},
      {"label_smoothing", 0.1},             {"dropout", 0.3},
      {"attention_dropout", 0.1},           {"average_decay", 0.0001},
  };
}

SearchSpace parse_space(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("version") || !j.contains("parameters")) {
    throw Error(ErrorKind::parse, "search space needs 'version' and 'parameters'");
  }
  if (j.at("version") != kSpaceFormatVersion) {
    throw Error(ErrorKind::parse, "unsupported search space version " + j.at("version").dump());
  }
  std::vector<Parameter> params;
  for (const auto& entry : j.at("parameters")) {
    if (!entry.contains("name") || !entry.contains("values") || !entry.at("values").is_array()) {
      throw Error(ErrorKind::parse, "parameter entries need 'name' and a 'values' list");
    }
    Parameter p;
    p.name = entry.at("name").get<std::string>();
    for (const auto& v : entry.at("values")) p.candidates.push_back(value_from_json(v));
    params.push_back(std::move(p));
  }
  return SearchSpace(std::move(params));
}

nlohmann::json space_to_json(const SearchSpace& space) {
  nlohmann::json params = nlohmann::json::array();
  for (const auto& p : space.parameters()) {
    nlohmann::json values = nlohmann::json::array();
    for (const auto& v : p.candidates) values.push_back(to_json(v));
    params.push_back({{"name", p.name}, {"values", values}});
  }
  return {{"version", kSpaceFormatVersion}, {"parameters", params}};
}

SearchSpace load_space(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  try {
    return parse_space(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, path.string() + ": " + e.what());
  }
}

double emissions_kg(double energy_kwh, double factor_g_per_kwh) {
  return energy_kwh * factor_g_per_kwh / 1000.0;
}

const EmissionEntry& EmissionsLedger::record(int trial_id, double energy_kwh, double factor_g_per_kwh) {
  if (!(energy_kwh >= 0.0)) {
    throw Error(ErrorKind::range, "energy must be non-negative, got " + std::to_string(energy_kwh));
  }
  if (!(factor_g_per_kwh >= 0.0)) throw Error(ErrorKind::range, "emission factor must be non-negative");
  entries_.push_back({trial_id, energy_kwh, factor_g_per_kwh, emissions_kg(energy_kwh, factor_g_per_kwh)});
  return entries_.back();
}

double EmissionsLedger::total_kg() const {
  double total = 0.0;
  for (const auto& e : entries_) total += e.kg_co2;
  return total;
}

double EmissionsLedger::total_kwh() const {
  double total = 0.0;
  for (const auto& e : entries_) total += e.energy_kwh;
  return total;
}

EmissionsLedger record_emissions(const EmissionsLedger& ledger, double energy_kwh, double factor_g_per_kwh) {
  EmissionsLedger next = ledger;
  next.record(static_cast<int>(ledger.entries().size()), energy_kwh, factor_g_per_kwh);
  return next;
}

std::string_view to_string(TrialStatus status) {
  switch (status) {
    case TrialStatus::completed: return "completed";
    case TrialStatus::early_stopped: return "early_stopped";
    case TrialStatus::failed: return "failed";
  }
  return "failed";
}

bool EarlyStopping::observe(double objective) {
  if (objective > best_) {
    best_ = objective;
    stale_ = 0;
    return false;
  }
  return ++stale_ >= patience_;
}

nlohmann::json to_json(const TrialRecord& trial) {
  nlohmann::json j{
      {"trial", trial.id},
      {"stage", trial.stage},
      {"config", to_json(trial.config)},
      {"objective", trial.objective ? nlohmann::json(*trial.objective) : nlohmann::json(nullptr)},
      {"steps", trial.steps_run},
      {"runtime_hours", trial.runtime_hours},
      {"energy_kwh", trial.energy_kwh},
      {"kg_co2", trial.emissions_kg},
      {"status", std::string(to_string(trial.status))},
  };
  if (!trial.error.empty()) j["error"] = trial.error;
  return j;
}

Config sample_config(const SearchSpace& space, const Config& locked, std::uint64_t seed) {
  for (const auto& [name, value] : locked) {
    if (space.find(name) == nullptr) {
      throw Error(ErrorKind::configuration, "locked parameter '" + name + "' is not in the search space");
    }
  }
  std::mt19937_64 rng(seed);
  Config config;
  for (const auto& p : space.parameters()) {
    std::uniform_int_distribution<std::size_t> pick(0, p.candidates.size() - 1);
    const std::size_t k = pick(rng);  // drawn even when locked so streams stay aligned
    if (const auto it = locked.find(p.name); it != locked.end()) {
      config[p.name] = it->second;
    } else {
      config[p.name] = p.candidates[k];
    }
  }
  return config;
}

namespace {

TrialRecord run_trial(int id, std::string stage, const Config& config, TrainerAdapter& trainer,
                      long max_steps, int patience, double factor) {
  TrialRecord t;
  t.id = id;
  t.stage = std::move(stage);
  t.config = config;
  try {
    const TrainOutcome out = trainer.train(config, max_steps, patience);
    if (out.steps_run > max_steps) {
      throw Error(ErrorKind::search, "trainer ran " + std::to_string(out.steps_run) +
                                         " steps, limit was " + std::to_string(max_steps));
    }
    if (!(out.energy_kwh >= 0.0)) throw Error(ErrorKind::range, "trainer reported negative energy");
    t.objective = out.objective;
    t.steps_run = out.steps_run;
    t.runtime_hours = out.runtime_hours;
    t.energy_kwh = out.energy_kwh;
    t.emissions_kg = emissions_kg(out.energy_kwh, factor);
    t.status = out.early_stopped && out.steps_run < max_steps ? TrialStatus::early_stopped
                                                               : TrialStatus::completed;
  } catch (const std::exception& e) {
    t.status = TrialStatus::failed;
    t.objective.reset();
    t.error = e.what();
  }
  return t;
}

}  // namespace

SearchResult staged_search(const SearchSpace& space, TrainerAdapter& trainer, const SearchOptions& options) {
  if (options.trials_per_stage && *options.trials_per_stage < 1) {
    throw Error(ErrorKind::configuration, "trials_per_stage must be >= 1");
  }
  if (options.cycle_steps < 1) throw Error(ErrorKind::configuration, "cycle_steps must be >= 1");
  if (options.early_stop_patience < 1) throw Error(ErrorKind::configuration, "patience must be >= 1");

  SearchResult result;
  for (const auto& p : space.parameters()) result.best[p.name] = p.candidates.front();

  std::mt19937_64 rng(options.seed);
  int next_id = 0;
  for (const auto& p : space.parameters()) {
    std::vector<std::size_t> chosen(p.candidates.size());
    for (std::size_t k = 0; k < chosen.size(); ++k) chosen[k] = k;
    if (options.trials_per_stage && static_cast<std::size_t>(*options.trials_per_stage) < chosen.size()) {
      std::shuffle(chosen.begin(), chosen.end(), rng);
      chosen.resize(static_cast<std::size_t>(*options.trials_per_stage));
      std::sort(chosen.begin(), chosen.end());
    }

    std::optional<std::size_t> winner;
    double winner_score = 0.0;
    for (std::size_t k : chosen) {
      Config config = result.best;
      config[p.name] = p.candidates[k];
      TrialRecord trial = run_trial(next_id++, p.name, config, trainer, options.cycle_steps,
                                    options.early_stop_patience, options.emission_factor);
      if (trial.status != TrialStatus::failed) {
        result.ledger.record(trial.id, trial.energy_kwh, options.emission_factor);
        if (!winner || *trial.objective > winner_score) {
          winner = k;
          winner_score = *trial.objective;
        }
      }
      result.trials.push_back(std::move(trial));
    }
    if (!winner) {
      throw Error(ErrorKind::search, "every trial of stage '" + p.name + "' failed");
    }
    result.best[p.name] = p.candidates[*winner];
  }
  return result;
}

TrialRecord full_train(const Config& config, TrainerAdapter& trainer, long max_steps,
                       int early_stop_patience, double emission_factor) {
  if (early_stop_patience < 1) throw Error(ErrorKind::configuration, "patience must be >= 1");
  if (max_steps < 1) throw Error(ErrorKind::configuration, "max_steps must be >= 1");
  return run_trial(0, "full", config, trainer, max_steps, early_stop_patience, emission_factor);
}

ToyTrainer::ToyTrainer(SearchSpace space, Config optimum, Options options)
    : space_(std::move(space)), optimum_(std::move(optimum)), options_(options) {
  if (options_.eval_interval < 1) throw Error(ErrorKind::configuration, "eval_interval must be >= 1");
  std::mt19937_64 rng(options_.seed);
  std::uniform_real_distribution<double> weight(0.5, 1.5);
  for (const auto& p : space_.parameters()) {
    const auto best = optimum_.find(p.name);
    std::vector<double> pen(p.candidates.size(), 0.0);
    std::optional<std::size_t> best_index;
    if (best != optimum_.end()) {
      for (std::size_t k = 0; k < p.candidates.size(); ++k)
        if (same_value(p.candidates[k], best->second)) best_index = k;
      if (!best_index) {
        throw Error(ErrorKind::configuration, "optimum for '" + p.name + "' is not a candidate");
      }
    }
    for (std::size_t k = 0; k < p.candidates.size(); ++k) {
      const double w = weight(rng);
      if (best_index && k != *best_index) {
        const auto dist = static_cast<double>(k > *best_index ? k - *best_index : *best_index - k);
        pen[k] = w * (0.5 + 0.5 * dist);
      }
    }
    penalties_[p.name] = std::move(pen);
  }
}

double ToyTrainer::objective(const Config& config) const {
  constexpr double kCeiling = 60.5;
  double value = kCeiling;
  for (const auto& p : space_.parameters()) {
    const auto it = config.find(p.name);
    if (it == config.end()) throw Error(ErrorKind::configuration, "config lacks '" + p.name + "'");
    std::optional<std::size_t> index;
    for (std::size_t k = 0; k < p.candidates.size(); ++k)
      if (same_value(p.candidates[k], it->second)) index = k;
    if (!index) {
      throw Error(ErrorKind::configuration, "value " + to_string(it->second) + " is not a candidate for '" +
                                                p.name + "'");
    }
    value -= penalties_.at(p.name)[*index];
  }
  return value;
}

double ToyTrainer::objective_at(const Config& config, long steps) const {
  constexpr double kTimeScale = 40000.0;
  return objective(config) * (1.0 - std::exp(-static_cast<double>(steps) / kTimeScale));
}

TrainOutcome ToyTrainer::train(const Config& config, long max_steps, int early_stop_patience) {
  if (max_steps < 1) throw Error(ErrorKind::configuration, "max_steps must be >= 1");
  EarlyStopping stopper(early_stop_patience);
  TrainOutcome out;
  long step = 0;
  int evals = 0;
  while (step < max_steps) {
    step = std::min(max_steps, step + options_.eval_interval);
    ++evals;
    long effective = step;
    if (options_.plateau_after_evals && evals > *options_.plateau_after_evals) {
      effective = static_cast<long>(*options_.plateau_after_evals) * options_.eval_interval;
    }
    if (stopper.observe(objective_at(config, effective))) {
      out.early_stopped = true;
      break;
    }
  }
  out.objective = stopper.best();
  out.steps_run = step;
  out.energy_kwh = static_cast<double>(step) * options_.kwh_per_step;
  out.runtime_hours = static_cast<double>(step) * options_.hours_per_step;
  return out;
}

ToyTrainer toy_trainer(std::uint64_t seed) {
  ToyTrainer::Options options;
  options.seed = seed;
  return ToyTrainer(transformer_space(), transformer_optimum(), options);
}

TrainOutcome CommandTrainer::train(const Config& config, long max_steps, int early_stop_patience) {
  const auto input = std::filesystem::temp_directory_path() /
                     ("lowmt-trial-" + std::to_string(::getpid()) + "-" +
                      std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()) + ".json");
  {
    std::ofstream f(input);
    f << to_json(config).dump() << '\n';
  }
  const std::string cmd = command_ + " --max-steps " + std::to_string(max_steps) + " --patience " +
                          std::to_string(early_stop_patience) + " < " + shell_quote(input.string());
  const auto started = std::chrono::steady_clock::now();
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (pipe == nullptr) {
    std::filesystem::remove(input);
    throw Error(ErrorKind::io, "cannot run trainer command");
  }
  std::string output;
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), static_cast<int>(buf.size()), pipe) != nullptr) output += buf.data();
  const int status = ::pclose(pipe);
  std::filesystem::remove(input);
  if (status == -1 || !WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    throw Error(ErrorKind::search, "trainer command exited with failure");
  }

  std::string last;
  std::istringstream lines(output);
  for (std::string line; std::getline(lines, line);)
    if (line.find_first_not_of(" \t\r") != std::string::npos) last = line;

  std::optional<double> objective, energy;
  std::optional<long> steps;
  std::istringstream fields(last);
  for (std::string field; fields >> field;) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = field.substr(0, eq), value = field.substr(eq + 1);
    try {
      if (key == "objective") objective = std::stod(value);
      if (key == "energy_kwh") energy = std::stod(value);
      if (key == "steps") steps = std::stol(value);
    } catch (const std::exception&) {
      throw Error(ErrorKind::parse, "unparsable trainer field '" + field + "'");
    }
  }
  if (!objective || !energy) {
    throw Error(ErrorKind::parse, "trainer output lacks 'objective=<real> energy_kwh=<real>': " + last);
  }
  TrainOutcome out;
  out.objective = *objective;
  out.energy_kwh = *energy;
  out.steps_run = steps.value_or(max_steps);
  out.early_stopped = out.steps_run < max_steps;
  out.runtime_hours =
      std::chrono::duration<double, std::ratio<3600>>(std::chrono::steady_clock::now() - started).count();
  return out;
}

}  // namespace lowmt::hpo
