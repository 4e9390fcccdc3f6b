#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace lowmt::humeval {

// Core MQM tagset, in report row order.
enum class Category {
  non_translation,
  addition,
  omission,
  mistranslation,
  untranslated_text,
  punctuation,
  spelling,
  grammar,
  register_,
  inconsistency,
  character_encoding,
};

inline constexpr std::size_t kCategoryCount = 11;
inline constexpr std::array<Category, kCategoryCount> kCategories = {
    Category::non_translation, Category::addition,   Category::omission,
    Category::mistranslation,  Category::untranslated_text, Category::punctuation,
    Category::spelling,        Category::grammar,    Category::register_,
    Category::inconsistency,   Category::character_encoding,
};

enum class CategoryGroup { non_translation, accuracy, fluency };

std::string_view to_string(Category category);
std::string_view display_name(Category category);
CategoryGroup group_of(Category category);
std::optional<Category> parse_category(std::string_view name);

enum class Severity { minor, major };
std::string_view to_string(Severity severity);
std::optional<Severity> parse_severity(std::string_view name);

inline constexpr int kSqmMin = 0;
inline constexpr int kSqmMax = 6;

// Anchored SQM level descriptions (levels 6, 4, 2, 0; odd levels sit between).
std::string_view sqm_level_description(int level);

// Character offsets (code points) into the system output, half-open.
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;

  bool operator==(const Span&) const = default;
};

struct ErrorAnnotation {
  std::string annotator;
  int segment = 0;
  std::string system;
  Category category = Category::mistranslation;
  Severity severity = Severity::minor;
  std::optional<Span> span;

  bool operator==(const ErrorAnnotation&) const = default;
};

struct SqmRating {
  std::string annotator;
  int segment = 0;
  std::string system;
  int rating = 0;

  bool operator==(const SqmRating&) const = default;
};

struct MqmWeights {
  double minor = 1.0;
  double major = 10.0;
  double non_translation = 25.0;
};

struct Segment {
  int id = 0;
  std::string source;
  std::string reference;
  std::map<std::string, std::string> outputs;  // system id -> text

  bool operator==(const Segment&) const = default;
};

// What an annotator sends for one display slot.
struct ErrorInput {
  std::string category;
  std::string severity = "minor";
  std::optional<Span> span;
};

struct SlotSubmission {
  std::string slot;
  int rating = 0;
  std::vector<ErrorInput> errors;
};

// A validated submission with slots resolved to systems. This is the unit
// of persistence: one record per accepted request.
struct SubmissionRecord {
  struct Unit {
    std::string slot;
    std::string system;
    int rating = 0;
    std::vector<ErrorAnnotation> errors;
  };
  std::string annotator;
  int segment = 0;
  std::vector<Unit> units;
  std::string timestamp;
};

nlohmann::json to_json(const SubmissionRecord& record);
SubmissionRecord submission_from_json(const nlohmann::json& j);

struct OutputView {
  std::string slot;
  std::string text;
  bool done = false;
};

// A blinded task: outputs are identified by slot label only.
struct Task {
  int segment_id = 0;
  std::string source;
  std::string reference;
  std::vector<OutputView> outputs;
  std::size_t done_units = 0;
  std::size_t total_units = 0;
};

nlohmann::json to_json(const Task& task);

struct Progress {
  std::size_t done = 0;
  std::size_t total = 0;
  std::map<std::string, std::pair<std::size_t, std::size_t>> per_annotator;
};

std::string slot_label(std::size_t index);

inline constexpr int kSessionFormatVersion = 1;

// A blind annotation campaign. Every annotator sees every (segment, system)
// unit; display slots map to systems through a seeded per-(annotator,
// segment) permutation.
class AnnotationSession {
 public:
  static AnnotationSession create(std::vector<Segment> segments, std::vector<std::string> systems,
                                  std::vector<std::string> annotators, std::uint64_t seed);

  const std::vector<Segment>& segments() const { return segments_; }
  const std::vector<std::string>& systems() const { return systems_; }
  const std::vector<std::string>& annotators() const { return annotators_; }
  std::uint64_t seed() const { return seed_; }

  bool has_annotator(std::string_view annotator) const;
  const Segment* find_segment(int id) const;

  // Systems in display order for this annotator and segment.
  const std::vector<std::string>& slots(std::string_view annotator, int segment) const;
  std::optional<std::string> system_for_slot(std::string_view annotator, int segment,
                                             std::string_view slot) const;

  bool is_done(std::string_view annotator, int segment, std::string_view system) const;
  std::size_t total_units() const;
  std::size_t done_units() const;
  bool complete() const { return done_units() == total_units(); }
  bool annotator_complete_for(std::string_view annotator, std::string_view system) const;
  Progress progress() const;

  const std::vector<SqmRating>& ratings() const { return ratings_; }
  const std::vector<ErrorAnnotation>& errors() const { return errors_; }

  // Validates a request and resolves its slots without changing state.
  SubmissionRecord prepare(std::string_view annotator, int segment,
                           const std::vector<SlotSubmission>& slots) const;
  // Applies a prepared (or replayed) record; all units or none.
  void apply(const SubmissionRecord& record);

  // Session definition (no annotation state).
  nlohmann::json definition_json() const;
  static AnnotationSession from_definition(const nlohmann::json& j);

 private:
  std::size_t annotator_index(std::string_view annotator) const;
  std::size_t segment_index(int segment) const;
  std::size_t unit_index(std::size_t a, std::size_t s, std::size_t sys) const;
  std::size_t system_index(std::string_view system) const;

  std::vector<Segment> segments_;
  std::vector<std::string> systems_;
  std::vector<std::string> annotators_;
  std::uint64_t seed_ = 0;
  // blinding_[a * segments + s] = systems by slot
  std::vector<std::vector<std::string>> blinding_;
  std::vector<char> done_;
  std::vector<SqmRating> ratings_;
  std::vector<ErrorAnnotation> errors_;
};

AnnotationSession create_session(std::vector<Segment> segments, std::vector<std::string> systems,
                                 std::vector<std::string> annotators, std::uint64_t seed);

// Lowest-id segment with pending work for the annotator; nullopt once done.
std::optional<Task> next_task(const AnnotationSession& session, std::string_view annotator);

SubmissionRecord submit_annotation(AnnotationSession& session, std::string_view annotator, int segment,
                                   const SlotSubmission& submission);

struct MqmSystemReport {
  double total_penalty = 0.0;
  std::array<long, kCategoryCount> category_counts{};
  long error_count = 0;
  double penalty_per_segment = 0.0;
};

// Severity-weighted penalty per system. A non_translation tag replaces every
// other tag on its (annotator, segment, system) unit in the penalty; raw
// counts keep all tags. units_per_system = segments x annotators.
std::map<std::string, MqmSystemReport> mqm_penalty(std::span<const ErrorAnnotation> annotations,
                                                   const MqmWeights& weights,
                                                   const std::vector<std::string>& systems,
                                                   std::size_t units_per_system);

// 100 * (1 - penalty / (25 * units)), clamped to [0, 100].
double mqm_quality_score(double total_penalty, std::size_t units_per_system,
                         const MqmWeights& weights = {});

struct SqmSummary {
  double mean = 0.0;
  std::size_t count = 0;
  std::map<std::string, double> per_annotator;
};

std::map<std::string, SqmSummary> sqm_aggregate(std::span<const SqmRating> ratings);

struct Contingency {
  long both = 0;
  long only_a = 0;
  long only_b = 0;
  long neither = 0;

  long total() const { return both + only_a + only_b + neither; }
};

// Cohen's kappa from a 2x2 table, computed in integer arithmetic. When chance
// agreement is 1 the result is 1.0 for full agreement, else 0.0.
double cohen_kappa(const Contingency& table);
Contingency contingency(const std::vector<bool>& flags_a, const std::vector<bool>& flags_b);

std::string_view agreement_band(double kappa);

struct KappaEntry {
  std::string system;
  Category category = Category::non_translation;
  double kappa = 1.0;
  Contingency counts;
};

// Segment-level agreement on "at least one error of this category".
KappaEntry kappa_per_category(const AnnotationSession& session, std::string_view annotator_a,
                              std::string_view annotator_b, std::string_view system, Category category);

struct SystemMetrics {
  std::optional<double> bleu;
  std::optional<double> ter;
  std::optional<double> chrf3;
};

struct ReportOptions {
  MqmWeights weights;
  bool require_complete = true;
};

// Combined human-evaluation report as a JSON bundle.
nlohmann::json he_report(const AnnotationSession& session,
                         const std::map<std::string, SystemMetrics>& metrics = {},
                         const ReportOptions& options = {});

// The same content as tab-separated tables.
std::string he_report_tsv(const nlohmann::json& report);
std::string kappa_table_tsv(const nlohmann::json& report);

// Binds the columns of a delimited annotation export to the annotation model.
struct IngestMapping {
  char delimiter = ',';
  std::string annotator_column;
  std::string segment_column;
  std::string system_column;
  std::string category_column;
  std::optional<std::string> severity_column;
  std::string rating_column;
  std::optional<std::string> source_column;
  std::optional<std::string> reference_column;
  std::optional<std::string> output_column;
  Severity default_severity = Severity::minor;
  std::map<std::string, std::string> category_aliases;
  std::vector<std::string> no_error_values{"", "none", "no error"};
  std::uint64_t seed = 0;
};

IngestMapping mapping_from_json(const nlohmann::json& j);

struct IngestResult {
  AnnotationSession session;
  std::vector<SubmissionRecord> records;
};

IngestResult ingest_published_dataset(const std::filesystem::path& path, const IngestMapping& mapping);

}  // namespace lowmt::humeval
