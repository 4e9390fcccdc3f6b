#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace lowmt::hpo {

using ParamValue = std::variant<std::int64_t, double, std::string>;
using Config = std::map<std::string, ParamValue>;

// Numeric values compare by value, so 2 and 2.0 are the same candidate.
bool same_value(const ParamValue& a, const ParamValue& b);
double as_number(const ParamValue& value);
std::string to_string(const ParamValue& value);
nlohmann::json to_json(const ParamValue& value);
nlohmann::json to_json(const Config& config);
ParamValue value_from_json(const nlohmann::json& j);

struct Parameter {
  std::string name;
  std::vector<ParamValue> candidates;
};

// Ordered hyperparameters; the order is the staging order.
class SearchSpace {
 public:
  SearchSpace() = default;
  explicit SearchSpace(std::vector<Parameter> parameters);

  const std::vector<Parameter>& parameters() const { return parameters_; }
  const Parameter* find(std::string_view name) const;
  // Number of configurations an exhaustive grid would visit.
  std::size_t exhaustive_size() const;
  // Number of trials a staged search that enumerates every candidate runs.
  std::size_t staged_size() const;

 private:
  std::vector<Parameter> parameters_;
};

inline constexpr int kSpaceFormatVersion = 1;

// The Transformer search space, rows in tuning order.
SearchSpace transformer_space();
// Its best-performing configuration (two attention heads).
Config transformer_optimum();

SearchSpace parse_space(const nlohmann::json& j);
nlohmann::json space_to_json(const SearchSpace& space);
SearchSpace load_space(const std::filesystem::path& path);

inline constexpr double kDefaultEmissionFactor = 324.0;  // gCO2 per kWh

struct EmissionEntry {
  int trial_id = 0;
  double energy_kwh = 0.0;
  double factor_g_per_kwh = kDefaultEmissionFactor;
  double kg_co2 = 0.0;
};

class EmissionsLedger {
 public:
  const EmissionEntry& record(int trial_id, double energy_kwh,
                              double factor_g_per_kwh = kDefaultEmissionFactor);

  const std::vector<EmissionEntry>& entries() const { return entries_; }
  double total_kg() const;
  double total_kwh() const;

 private:
  std::vector<EmissionEntry> entries_;
};

double emissions_kg(double energy_kwh, double factor_g_per_kwh = kDefaultEmissionFactor);

// Functional form: returns a copy of the ledger with one more entry.
EmissionsLedger record_emissions(const EmissionsLedger& ledger, double energy_kwh,
                                 double factor_g_per_kwh = kDefaultEmissionFactor);

enum class TrialStatus { completed, early_stopped, failed };
std::string_view to_string(TrialStatus status);

struct TrainOutcome {
  double objective = 0.0;
  long steps_run = 0;
  double energy_kwh = 0.0;
  double runtime_hours = 0.0;
  bool early_stopped = false;
};

// Contract for anything that can train a model for a configuration. Must be
// deterministic for a fixed configuration and never exceed max_steps.
// Failures are reported by throwing.
class TrainerAdapter {
 public:
  virtual ~TrainerAdapter() = default;
  virtual TrainOutcome train(const Config& config, long max_steps, int early_stop_patience) = 0;
};

// Stop once `patience` consecutive evaluations fail to improve on the best.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {}

  // Returns true when training should stop.
  bool observe(double objective);
  double best() const { return best_; }

 private:
  int patience_;
  int stale_ = 0;
  double best_ = -std::numeric_limits<double>::infinity();
};

struct TrialRecord {
  int id = 0;
  std::string stage;
  Config config;
  std::optional<double> objective;
  long steps_run = 0;
  double runtime_hours = 0.0;
  double energy_kwh = 0.0;
  double emissions_kg = 0.0;
  TrialStatus status = TrialStatus::completed;
  std::string error;
};

nlohmann::json to_json(const TrialRecord& trial);

Config sample_config(const SearchSpace& space, const Config& locked, std::uint64_t seed);

inline constexpr long kDefaultCycleSteps = 5000;
inline constexpr long kDefaultFullSteps = 200000;
inline constexpr int kDefaultPatience = 4;

struct SearchOptions {
  long cycle_steps = kDefaultCycleSteps;
  // Candidates tried per stage; unset means every listed candidate.
  std::optional<int> trials_per_stage;
  int early_stop_patience = kDefaultPatience;
  std::uint64_t seed = 0;
  double emission_factor = kDefaultEmissionFactor;
};

struct SearchResult {
  Config best;
  std::vector<TrialRecord> trials;
  EmissionsLedger ledger;
};

// Tunes one parameter at a time in declared order, locking in each stage's
// best value before moving on. Parameters not yet tuned sit at their first
// candidate. Objective ties go to the earlier-listed candidate.
SearchResult staged_search(const SearchSpace& space, TrainerAdapter& trainer,
                           const SearchOptions& options = {});

TrialRecord full_train(const Config& config, TrainerAdapter& trainer, long max_steps = kDefaultFullSteps,
                       int early_stop_patience = kDefaultPatience,
                       double emission_factor = kDefaultEmissionFactor);

// Desk-scale stand-in for an NMT trainer. The objective is a sum of
// per-parameter penalties subtracted from a ceiling, so its unique argmax is
// the supplied optimum; it rises with steps toward that value and can be
// made to plateau so early stopping triggers.
class ToyTrainer : public TrainerAdapter {
 public:
  struct Options {
    std::uint64_t seed = 0;
    long eval_interval = kDefaultCycleSteps;
    // Evaluations after which the curve stops improving; unset = never.
    std::optional<int> plateau_after_evals;
    double kwh_per_step = 1.5e-4;
    double hours_per_step = 1.0e-4;
  };

  ToyTrainer(SearchSpace space, Config optimum, Options options);

  TrainOutcome train(const Config& config, long max_steps, int early_stop_patience) override;

  // Asymptotic objective of a configuration (the curve's ceiling).
  double objective(const Config& config) const;
  double objective_at(const Config& config, long steps) const;

 private:
  SearchSpace space_;
  Config optimum_;
  Options options_;
  std::map<std::string, std::vector<double>> penalties_;
};

ToyTrainer toy_trainer(std::uint64_t seed);

// Runs an external program: the configuration goes to its stdin as JSON and
// the last output line must read `objective=<real> energy_kwh=<real>`, with
// an optional `steps=<int>`. Invoked as `<command> --max-steps N --patience P`.
class CommandTrainer : public TrainerAdapter {
 public:
  explicit CommandTrainer(std::string command) : command_(std::move(command)) {}

  TrainOutcome train(const Config& config, long max_steps, int early_stop_patience) override;

 private:
  std::string command_;
};

}  // namespace lowmt::hpo
