#include "lowmt/humeval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>
#include <sstream>

#include <boost/tokenizer.hpp>

#include "lowmt/corpus.hpp"
#include "lowmt/error.hpp"
#include "lowmt/unicode.hpp"

namespace lowmt::humeval {

namespace {

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  return buf;
}

template <typename T>
void require_unique(const std::vector<T>& items, const std::string& what) {
  std::set<T> seen;
  for (const auto& item : items) {
    if (!seen.insert(item).second) {
      std::ostringstream msg;
      msg << "duplicate " << what << " '" << item << "'";
      throw Error(ErrorKind::configuration, msg.str());
    }
  }
}

nlohmann::json span_json(const std::optional<Span>& span) {
  if (!span) return nullptr;
  return nlohmann::json::array({span->start, span->end});
}

std::optional<Span> span_from_json(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_unsigned() || !j[1].is_number_unsigned()) {
    throw ValidationError("span", "span must be [start, end] with non-negative offsets");
  }
  return Span{j[0].get<std::size_t>(), j[1].get<std::size_t>()};
}

}  // namespace

// --- taxonomy ----------------------------------------------------------------

std::string_view to_string(Category category) {
  switch (category) {
    case Category::non_translation: return "non_translation";
    case Category::addition: return "addition";
    case Category::omission: return "omission";
    case Category::mistranslation: return "mistranslation";
    case Category::untranslated_text: return "untranslated_text";
    case Category::punctuation: return "punctuation";
    case Category::spelling: return "spelling";
    case Category::grammar: return "grammar";
    case Category::register_: return "register";
    case Category::inconsistency: return "inconsistency";
    case Category::character_encoding: return "character_encoding";
  }
  return "";
}

std::string_view display_name(Category category) {
  switch (category) {
    case Category::non_translation: return "Non-translation";
    case Category::addition: return "Addition";
    case Category::omission: return "Omission";
    case Category::mistranslation: return "Mistranslation";
    case Category::untranslated_text: return "Untranslated text";
    case Category::punctuation: return "Punctuation";
    case Category::spelling: return "Spelling";
    case Category::grammar: return "Grammar";
    case Category::register_: return "Register";
    case Category::inconsistency: return "Inconsistency";
    case Category::character_encoding: return "Character encoding";
  }
  return "";
}

CategoryGroup group_of(Category category) {
  switch (category) {
    case Category::non_translation: return CategoryGroup::non_translation;
    case Category::addition:
    case Category::omission:
    case Category::mistranslation:
    case Category::untranslated_text: return CategoryGroup::accuracy;
    default: return CategoryGroup::fluency;
  }
}

std::optional<Category> parse_category(std::string_view name) {
  for (Category c : kCategories)
    if (to_string(c) == name) return c;
  return std::nullopt;
}

std::string_view to_string(Severity severity) { return severity == Severity::minor ? "minor" : "major"; }

std::optional<Severity> parse_severity(std::string_view name) {
  if (name == "minor") return Severity::minor;
  if (name == "major") return Severity::major;
  return std::nullopt;
}

std::string_view sqm_level_description(int level) {
  switch (level) {
    case 6:
      return "Perfect Meaning and Grammar: The meaning of the translation is completely consistent "
             "with the source and the surrounding context (if applicable). The grammar is also correct.";
    case 4:
      return "Most Meaning Preserved and Few Grammar Mistakes: The translation retains most of the "
             "meaning of the source. This may contain some grammar mistakes or minor contextual "
             "inconsistencies.";
    case 2:
      return "Some Meaning Preserved: The translation preserves some of the meaning of the source but "
             "misses significant parts. The narrative is hard to follow due to fundamental errors. "
             "Grammar may be poor.";
    case 0:
      return "Nonsense/No meaning preserved: Nearly all information is lost between the translation "
             "and source. Grammar is irrelevant.";
    case 1:
    case 3:
    case 5: return "Intermediate level between the neighbouring descriptions.";
    default: return "";
  }
}

std::string slot_label(std::size_t index) {
  std::string label;
  ++index;
  while (index > 0) {
    --index;
    label.insert(label.begin(), static_cast<char>('A' + index % 26));
    index /= 26;
  }
  return label;
}

// --- submissions -------------------------------------------------------------

nlohmann::json to_json(const SubmissionRecord& record) {
  nlohmann::json units = nlohmann::json::array();
  for (const auto& u : record.units) {
    nlohmann::json errors = nlohmann::json::array();
    for (const auto& e : u.errors) {
      errors.push_back({{"category", std::string(to_string(e.category))},
                        {"severity", std::string(to_string(e.severity))},
                        {"span", span_json(e.span)}});
    }
    units.push_back({{"slot", u.slot}, {"system", u.system}, {"rating", u.rating}, {"errors", errors}});
  }
  return {{"annotator", record.annotator},
          {"segment", record.segment},
          {"units", units},
          {"timestamp", record.timestamp}};
}

SubmissionRecord submission_from_json(const nlohmann::json& j) {
  SubmissionRecord r;
  try {
    r.annotator = j.at("annotator").get<std::string>();
    r.segment = j.at("segment").get<int>();
    r.timestamp = j.value("timestamp", std::string());
    for (const auto& u : j.at("units")) {
      SubmissionRecord::Unit unit;
      unit.slot = u.at("slot").get<std::string>();
      unit.system = u.at("system").get<std::string>();
      unit.rating = u.at("rating").get<int>();
      for (const auto& e : u.at("errors")) {
        ErrorAnnotation a;
        a.annotator = r.annotator;
        a.segment = r.segment;
        a.system = unit.system;
        const auto cat = parse_category(e.at("category").get<std::string>());
        const auto sev = parse_severity(e.at("severity").get<std::string>());
        if (!cat || !sev) throw Error(ErrorKind::parse, "unknown category or severity in record");
        a.category = *cat;
        a.severity = *sev;
        a.span = span_from_json(e.value("span", nlohmann::json(nullptr)));
        unit.errors.push_back(std::move(a));
      }
      r.units.push_back(std::move(unit));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, std::string("malformed submission record: ") + e.what());
  }
  return r;
}

nlohmann::json to_json(const Task& task) {
  nlohmann::json outputs = nlohmann::json::array();
  for (const auto& o : task.outputs) outputs.push_back({{"slot", o.slot}, {"text", o.text}, {"done", o.done}});
  return {{"segment_id", task.segment_id},
          {"source", task.source},
          {"reference", task.reference},
          {"outputs", outputs},
          {"progress", {{"done", task.done_units}, {"total", task.total_units}}}};
}

// --- session -----------------------------------------------------------------

AnnotationSession AnnotationSession::create(std::vector<Segment> segments, std::vector<std::string> systems,
                                            std::vector<std::string> annotators, std::uint64_t seed) {
  if (segments.empty() || systems.empty() || annotators.empty()) {
    throw Error(ErrorKind::configuration, "segments, systems and annotators must all be non-empty");
  }
  std::vector<int> ids;
  for (const auto& s : segments) ids.push_back(s.id);
  require_unique(ids, "segment id");
  require_unique(systems, "system id");
  require_unique(annotators, "annotator id");
  for (const auto& id : systems)
    if (id.empty()) throw Error(ErrorKind::configuration, "empty system id");
  for (const auto& id : annotators)
    if (id.empty()) throw Error(ErrorKind::configuration, "empty annotator id");
  for (const auto& s : segments) {
    if (s.source.empty()) {
      throw Error(ErrorKind::configuration, "segment " + std::to_string(s.id) + " has an empty source");
    }
    for (const auto& sys : systems) {
      if (!s.outputs.contains(sys)) {
        throw Error(ErrorKind::configuration,
                    "segment " + std::to_string(s.id) + " has no output for system '" + sys + "'");
      }
    }
    if (s.outputs.size() != systems.size()) {
      throw Error(ErrorKind::configuration,
                  "segment " + std::to_string(s.id) + " has outputs for undeclared systems");
    }
  }
  std::sort(segments.begin(), segments.end(), [](const auto& a, const auto& b) { return a.id < b.id; });

  AnnotationSession session;
  session.segments_ = std::move(segments);
  session.systems_ = std::move(systems);
  session.annotators_ = std::move(annotators);
  session.seed_ = seed;
  for (std::size_t a = 0; a < session.annotators_.size(); ++a) {
    for (std::size_t s = 0; s < session.segments_.size(); ++s) {
      std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                        static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(s)};
      std::mt19937_64 rng(seq);
      auto order = session.systems_;
      std::shuffle(order.begin(), order.end(), rng);
      session.blinding_.push_back(std::move(order));
    }
  }
  session.done_.assign(session.total_units(), 0);
  return session;
}

bool AnnotationSession::has_annotator(std::string_view annotator) const {
  return std::find(annotators_.begin(), annotators_.end(), annotator) != annotators_.end();
}

const Segment* AnnotationSession::find_segment(int id) const {
  for (const auto& s : segments_)
    if (s.id == id) return &s;
  return nullptr;
}

std::size_t AnnotationSession::annotator_index(std::string_view annotator) const {
  const auto it = std::find(annotators_.begin(), annotators_.end(), annotator);
  if (it == annotators_.end()) throw Error(ErrorKind::not_found, "unknown annotator '" + std::string(annotator) + "'");
  return static_cast<std::size_t>(it - annotators_.begin());
}

std::size_t AnnotationSession::segment_index(int segment) const {
  for (std::size_t i = 0; i < segments_.size(); ++i)
    if (segments_[i].id == segment) return i;
  throw Error(ErrorKind::not_found, "unknown segment " + std::to_string(segment));
}

std::size_t AnnotationSession::system_index(std::string_view system) const {
  const auto it = std::find(systems_.begin(), systems_.end(), system);
  if (it == systems_.end()) throw Error(ErrorKind::not_found, "unknown system '" + std::string(system) + "'");
  return static_cast<std::size_t>(it - systems_.begin());
}

std::size_t AnnotationSession::unit_index(std::size_t a, std::size_t s, std::size_t sys) const {
  return (a * segments_.size() + s) * systems_.size() + sys;
}

const std::vector<std::string>& AnnotationSession::slots(std::string_view annotator, int segment) const {
  return blinding_[annotator_index(annotator) * segments_.size() + segment_index(segment)];
}

std::optional<std::string> AnnotationSession::system_for_slot(std::string_view annotator, int segment,
                                                              std::string_view slot) const {
  const auto& order = slots(annotator, segment);
  for (std::size_t i = 0; i < order.size(); ++i)
    if (slot_label(i) == slot) return order[i];
  return std::nullopt;
}

bool AnnotationSession::is_done(std::string_view annotator, int segment, std::string_view system) const {
  return done_[unit_index(annotator_index(annotator), segment_index(segment), system_index(system))] != 0;
}

std::size_t AnnotationSession::total_units() const {
  return annotators_.size() * segments_.size() * systems_.size();
}

std::size_t AnnotationSession::done_units() const {
  return static_cast<std::size_t>(std::count(done_.begin(), done_.end(), 1));
}

bool AnnotationSession::annotator_complete_for(std::string_view annotator, std::string_view system) const {
  const std::size_t a = annotator_index(annotator), sys = system_index(system);
  for (std::size_t s = 0; s < segments_.size(); ++s)
    if (!done_[unit_index(a, s, sys)]) return false;
  return true;
}

Progress AnnotationSession::progress() const {
  Progress p;
  p.total = total_units();
  p.done = done_units();
  const std::size_t per = segments_.size() * systems_.size();
  for (std::size_t a = 0; a < annotators_.size(); ++a) {
    const auto first = done_.begin() + static_cast<std::ptrdiff_t>(a * per);
    p.per_annotator[annotators_[a]] = {
        static_cast<std::size_t>(std::count(first, first + static_cast<std::ptrdiff_t>(per), 1)), per};
  }
  return p;
}

SubmissionRecord AnnotationSession::prepare(std::string_view annotator, int segment,
                                            const std::vector<SlotSubmission>& slots_in) const {
  const std::size_t a = annotator_index(annotator);
  const Segment* seg = find_segment(segment);
  if (seg == nullptr) throw ValidationError("segment_id", "unknown segment " + std::to_string(segment));
  if (slots_in.empty()) throw ValidationError("slot", "submission names no slot");

  SubmissionRecord record;
  record.annotator = std::string(annotator);
  record.segment = segment;
  std::set<std::string> seen;
  for (const auto& sub : slots_in) {
    const auto system = system_for_slot(annotator, segment, sub.slot);
    if (!system) throw ValidationError("slot", "unknown slot '" + sub.slot + "'");
    if (!seen.insert(sub.slot).second) throw ValidationError("slot", "slot '" + sub.slot + "' given twice");
    if (sub.rating < kSqmMin || sub.rating > kSqmMax) {
      throw ValidationError("rating", "rating must be an integer from 0 to 6, got " + std::to_string(sub.rating));
    }
    const std::size_t out_len = unicode::length(seg->outputs.at(*system));
    SubmissionRecord::Unit unit{sub.slot, *system, sub.rating, {}};
    for (const auto& e : sub.errors) {
      const auto category = parse_category(e.category);
      if (!category) throw ValidationError("category", "unknown error category '" + e.category + "'");
      const auto severity = parse_severity(e.severity);
      if (!severity) throw ValidationError("severity", "severity must be 'minor' or 'major'");
      if (e.span) {
        if (*category == Category::non_translation) {
          throw ValidationError("span", "non_translation applies to the whole segment and takes no span");
        }
        if (e.span->start >= e.span->end || e.span->end > out_len) {
          throw ValidationError("span", "span must satisfy start < end <= " + std::to_string(out_len));
        }
      }
      unit.errors.push_back({record.annotator, segment, *system, *category, *severity, e.span});
    }
    if (done_[unit_index(a, segment_index(segment), system_index(*system))]) {
      throw Error(ErrorKind::conflict, "slot '" + sub.slot + "' of segment " + std::to_string(segment) +
                                           " was already submitted by " + record.annotator);
    }
    record.units.push_back(std::move(unit));
  }
  return record;
}

void AnnotationSession::apply(const SubmissionRecord& record) {
  const std::size_t a = annotator_index(record.annotator);
  const std::size_t s = segment_index(record.segment);
  std::vector<std::size_t> units;
  for (const auto& u : record.units) {
    const auto system = system_for_slot(record.annotator, record.segment, u.slot);
    if (!system || *system != u.system) {
      throw Error(ErrorKind::validation, "slot '" + u.slot + "' does not resolve to system '" + u.system + "'");
    }
    const std::size_t idx = unit_index(a, s, system_index(u.system));
    if (done_[idx] || std::find(units.begin(), units.end(), idx) != units.end()) {
      throw Error(ErrorKind::conflict, "unit already submitted");
    }
    if (u.rating < kSqmMin || u.rating > kSqmMax) throw Error(ErrorKind::validation, "rating out of range");
    units.push_back(idx);
  }
  for (std::size_t k = 0; k < record.units.size(); ++k) {
    const auto& u = record.units[k];
    done_[units[k]] = 1;
    ratings_.push_back({record.annotator, record.segment, u.system, u.rating});
    errors_.insert(errors_.end(), u.errors.begin(), u.errors.end());
  }
}

nlohmann::json AnnotationSession::definition_json() const {
  nlohmann::json segs = nlohmann::json::array();
  for (const auto& s : segments_) {
    segs.push_back({{"id", s.id}, {"source", s.source}, {"reference", s.reference}, {"outputs", s.outputs}});
  }
  nlohmann::json blinding = nlohmann::json::object();
  for (std::size_t a = 0; a < annotators_.size(); ++a) {
    nlohmann::json per = nlohmann::json::object();
    for (std::size_t s = 0; s < segments_.size(); ++s)
      per[std::to_string(segments_[s].id)] = blinding_[a * segments_.size() + s];
    blinding[annotators_[a]] = per;
  }
  return {{"version", kSessionFormatVersion}, {"seed", seed_},       {"systems", systems_},
          {"annotators", annotators_},        {"segments", segs},    {"blinding", blinding}};
}

AnnotationSession AnnotationSession::from_definition(const nlohmann::json& j) {
  try {
    if (j.at("version").get<int>() != kSessionFormatVersion) {
      throw Error(ErrorKind::parse, "unsupported session version " + j.at("version").dump());
    }
    std::vector<Segment> segments;
    for (const auto& s : j.at("segments")) {
      Segment seg;
      seg.id = s.at("id").get<int>();
      seg.source = s.at("source").get<std::string>();
      seg.reference = s.value("reference", std::string());
      seg.outputs = s.at("outputs").get<std::map<std::string, std::string>>();
      segments.push_back(std::move(seg));
    }
    auto session = create(std::move(segments), j.at("systems").get<std::vector<std::string>>(),
                          j.at("annotators").get<std::vector<std::string>>(), j.value("seed", std::uint64_t{0}));
    if (j.contains("blinding") && j.at("blinding") != session.definition_json().at("blinding")) {
      throw Error(ErrorKind::parse, "stored blinding does not match the seed");
    }
    return session;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, std::string("malformed session definition: ") + e.what());
  }
}

AnnotationSession create_session(std::vector<Segment> segments, std::vector<std::string> systems,
                                 std::vector<std::string> annotators, std::uint64_t seed) {
  return AnnotationSession::create(std::move(segments), std::move(systems), std::move(annotators), seed);
}

std::optional<Task> next_task(const AnnotationSession& session, std::string_view annotator) {
  if (!session.has_annotator(annotator)) {
    throw Error(ErrorKind::not_found, "unknown annotator '" + std::string(annotator) + "'");
  }
  const auto progress = session.progress().per_annotator.at(std::string(annotator));
  for (const auto& seg : session.segments()) {
    const auto& order = session.slots(annotator, seg.id);
    bool pending = false;
    for (const auto& sys : order) pending = pending || !session.is_done(annotator, seg.id, sys);
    if (!pending) continue;
    Task task;
    task.segment_id = seg.id;
    task.source = seg.source;
    task.reference = seg.reference;
    for (std::size_t i = 0; i < order.size(); ++i) {
      task.outputs.push_back({slot_label(i), seg.outputs.at(order[i]), session.is_done(annotator, seg.id, order[i])});
    }
    task.done_units = progress.first;
    task.total_units = progress.second;
    return task;
  }
  return std::nullopt;
}

SubmissionRecord submit_annotation(AnnotationSession& session, std::string_view annotator, int segment,
                                   const SlotSubmission& submission) {
  auto record = session.prepare(annotator, segment, {submission});
  session.apply(record);
  return record;
}

// --- scoring -----------------------------------------------------------------

std::map<std::string, MqmSystemReport> mqm_penalty(std::span<const ErrorAnnotation> annotations,
                                                   const MqmWeights& weights,
                                                   const std::vector<std::string>& systems,
                                                   std::size_t units_per_system) {
  if (!(weights.minor > 0 && weights.major > 0 && weights.non_translation > 0)) {
    throw Error(ErrorKind::configuration, "MQM weights must be positive");
  }
  std::map<std::string, MqmSystemReport> out;
  for (const auto& s : systems) out[s];
  using Unit = std::tuple<std::string, int, std::string>;
  std::set<Unit> non_translated;
  for (const auto& a : annotations)
    if (a.category == Category::non_translation) non_translated.insert({a.annotator, a.segment, a.system});

  for (const auto& a : annotations) {
    auto& r = out[a.system];
    ++r.category_counts[static_cast<std::size_t>(a.category)];
    ++r.error_count;
    if (a.category == Category::non_translation) {
      r.total_penalty += weights.non_translation;
    } else if (!non_translated.contains({a.annotator, a.segment, a.system})) {
      r.total_penalty += a.severity == Severity::major ? weights.major : weights.minor;
    }
  }
  for (auto& [system, r] : out) {
    r.penalty_per_segment = units_per_system > 0 ? r.total_penalty / static_cast<double>(units_per_system) : 0.0;
  }
  return out;
}

double mqm_quality_score(double total_penalty, std::size_t units_per_system, const MqmWeights& weights) {
  if (units_per_system == 0) return 0.0;
  const double worst = weights.non_translation * static_cast<double>(units_per_system);
  return std::clamp(100.0 * (1.0 - total_penalty / worst), 0.0, 100.0);
}

std::map<std::string, SqmSummary> sqm_aggregate(std::span<const SqmRating> ratings) {
  if (ratings.empty()) throw Error(ErrorKind::empty_input, "no SQM ratings");
  std::map<std::string, std::pair<long, std::size_t>> sys;
  std::map<std::string, std::map<std::string, std::pair<long, std::size_t>>> per;
  for (const auto& r : ratings) {
    if (r.rating < kSqmMin || r.rating > kSqmMax) throw Error(ErrorKind::validation, "rating out of range");
    auto& s = sys[r.system];
    s.first += r.rating;
    ++s.second;
    auto& p = per[r.system][r.annotator];
    p.first += r.rating;
    ++p.second;
  }
  std::map<std::string, SqmSummary> out;
  for (const auto& [system, agg] : sys) {
    SqmSummary summary;
    summary.count = agg.second;
    summary.mean = static_cast<double>(agg.first) / static_cast<double>(agg.second);
    for (const auto& [annotator, pa] : per[system])
      summary.per_annotator[annotator] = static_cast<double>(pa.first) / static_cast<double>(pa.second);
    out[system] = std::move(summary);
  }
  return out;
}

double cohen_kappa(const Contingency& t) {
  const long n = t.total();
  if (n == 0) return 1.0;
  const long agree = t.both + t.neither;
  const long a_yes = t.both + t.only_a, b_yes = t.both + t.only_b;
  const long a_no = t.neither + t.only_b, b_no = t.neither + t.only_a;
  const long chance = a_yes * b_yes + a_no * b_no;  // p_e * n^2
  const long n2 = n * n;
  if (chance == n2) return agree == n ? 1.0 : 0.0;
  return static_cast<double>(n * agree - chance) / static_cast<double>(n2 - chance);
}

Contingency contingency(const std::vector<bool>& flags_a, const std::vector<bool>& flags_b) {
  if (flags_a.size() != flags_b.size()) throw Error(ErrorKind::alignment, "flag vectors differ in length");
  Contingency t;
  for (std::size_t i = 0; i < flags_a.size(); ++i) {
    if (flags_a[i] && flags_b[i]) {
      ++t.both;
    } else if (flags_a[i]) {
      ++t.only_a;
    } else if (flags_b[i]) {
      ++t.only_b;
    } else {
      ++t.neither;
    }
  }
  return t;
}

std::string_view agreement_band(double kappa) {
  if (kappa <= 0.0) return "none";
  if (kappa <= 0.20) return "slight";
  if (kappa <= 0.40) return "fair";
  if (kappa <= 0.60) return "moderate";
  if (kappa <= 0.80) return "substantial";
  return "almost perfect";
}

KappaEntry kappa_per_category(const AnnotationSession& session, std::string_view annotator_a,
                              std::string_view annotator_b, std::string_view system, Category category) {
  for (auto who : {annotator_a, annotator_b}) {
    if (!session.annotator_complete_for(who, system)) {
      throw Error(ErrorKind::completeness, "annotator '" + std::string(who) + "' has not finished system '" +
                                               std::string(system) + "'");
    }
  }
  const auto& segs = session.segments();
  std::vector<bool> fa(segs.size(), false), fb(segs.size(), false);
  for (const auto& e : session.errors()) {
    if (e.system != system || e.category != category) continue;
    const auto it = std::find_if(segs.begin(), segs.end(), [&](const Segment& s) { return s.id == e.segment; });
    const auto idx = static_cast<std::size_t>(it - segs.begin());
    if (e.annotator == annotator_a) fa[idx] = true;
    if (e.annotator == annotator_b) fb[idx] = true;
  }
  KappaEntry entry;
  entry.system = std::string(system);
  entry.category = category;
  entry.counts = contingency(fa, fb);
  entry.kappa = cohen_kappa(entry.counts);
  return entry;
}

// --- reports -----------------------------------------------------------------

nlohmann::json he_report(const AnnotationSession& session, const std::map<std::string, SystemMetrics>& metrics,
                         const ReportOptions& options) {
  using nlohmann::json;
  if (options.require_complete && !session.complete()) {
    throw Error(ErrorKind::completeness, std::to_string(session.done_units()) + " of " +
                                             std::to_string(session.total_units()) + " units annotated");
  }
  const auto& systems = session.systems();
  const std::size_t units = session.segments().size() * session.annotators().size();
  const auto mqm = mqm_penalty(session.errors(), options.weights, systems, units);
  std::map<std::string, SqmSummary> sqm;
  if (!session.ratings().empty()) sqm = sqm_aggregate(session.ratings());

  const auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };

  json sys_rows = json::array();
  for (const auto& s : systems) {
    const auto& m = mqm.at(s);
    const auto mit = metrics.find(s);
    const SystemMetrics sm = mit == metrics.end() ? SystemMetrics{} : mit->second;
    const auto q = sqm.find(s);
    json per_annotator = json::object();
    if (q != sqm.end())
      for (const auto& [a, mean] : q->second.per_annotator) per_annotator[a] = mean;
    sys_rows.push_back({
        {"system", s},
        {"bleu", opt(sm.bleu)},
        {"ter", opt(sm.ter)},
        {"chrf3", opt(sm.chrf3)},
        {"sqm_mean", q == sqm.end() ? json(nullptr) : json(q->second.mean)},
        {"sqm_count", q == sqm.end() ? 0 : q->second.count},
        {"sqm_per_annotator", per_annotator},
        {"mqm_penalty", m.total_penalty},
        {"mqm_penalty_per_segment", m.penalty_per_segment},
        {"mqm_score", mqm_quality_score(m.total_penalty, units, options.weights)},
        {"error_count", m.error_count},
    });
  }

  json annotator_rows = json::array();
  for (const auto& a : session.annotators()) {
    json totals = json::object();
    for (const auto& s : systems) totals[s] = 0;
    for (const auto& e : session.errors())
      if (e.annotator == a) totals[e.system] = totals[e.system].get<long>() + 1;
    annotator_rows.push_back({{"annotator", a}, {"totals", totals}});
  }

  json category_rows = json::array();
  json category_totals = json::object();
  for (Category c : kCategories) {
    json counts = json::object();
    for (const auto& s : systems) counts[s] = mqm.at(s).category_counts[static_cast<std::size_t>(c)];
    category_rows.push_back({{"category", std::string(to_string(c))},
                             {"label", std::string(display_name(c))},
                             {"counts", counts}});
  }
  for (const auto& s : systems) category_totals[s] = mqm.at(s).error_count;

  json kappa = nullptr;
  if (session.annotators().size() >= 2) {
    const auto& a = session.annotators()[0];
    const auto& b = session.annotators()[1];
    json rows = json::array();
    for (Category c : kCategories) {
      json values = json::object();
      for (const auto& s : systems) {
        if (!session.annotator_complete_for(a, s) || !session.annotator_complete_for(b, s)) {
          values[s] = nullptr;
          continue;
        }
        const auto k = kappa_per_category(session, a, b, s, c);
        values[s] = {{"kappa", k.kappa},
                     {"band", std::string(agreement_band(k.kappa))},
                     {"counts",
                      {{"both", k.counts.both},
                       {"only_a", k.counts.only_a},
                       {"only_b", k.counts.only_b},
                       {"neither", k.counts.neither}}}};
      }
      rows.push_back({{"category", std::string(to_string(c))}, {"label", std::string(display_name(c))},
                      {"values", values}});
    }
    kappa = {{"annotators", {a, b}}, {"rows", rows}};
  }

  return {
      {"version", 1},
      {"complete", session.complete()},
      {"progress", {{"done", session.done_units()}, {"total", session.total_units()}}},
      {"systems_order", systems},
      {"weights",
       {{"minor", options.weights.minor},
        {"major", options.weights.major},
        {"non_translation", options.weights.non_translation}}},
      {"mqm_score_convention", "100*(1-penalty/(non_translation_weight*segments*annotators)), clamped"},
      {"systems", sys_rows},
      {"annotator_totals", annotator_rows},
      {"category_counts", category_rows},
      {"category_totals", category_totals},
      {"kappa", kappa},
  };
}

namespace {

std::string cell(const nlohmann::json& v, int decimals) {
  if (v.is_null()) return "-";
  if (v.is_number_integer()) return std::to_string(v.get<long>());
  return fixed(v.get<double>(), decimals);
}

std::string kappa_section(const nlohmann::json& report) {
  std::string out = "# kappa\n";
  const auto& systems = report.at("systems_order");
  const auto& kappa = report.at("kappa");
  out += "category";
  for (const auto& s : systems) out += "\t" + s.get<std::string>();
  out += "\n";
  if (kappa.is_null()) return out;
  for (const auto& row : kappa.at("rows")) {
    out += row.at("label").get<std::string>();
    for (const auto& s : systems) {
      const auto& v = row.at("values").at(s.get<std::string>());
      out += "\t" + (v.is_null() ? std::string("-") : fixed(v.at("kappa").get<double>(), 3));
    }
    out += "\n";
  }
  return out;
}

}  // namespace

std::string kappa_table_tsv(const nlohmann::json& report) { return kappa_section(report); }

std::string he_report_tsv(const nlohmann::json& report) {
  const auto& systems = report.at("systems_order");
  std::string out = "# summary\tcomplete=" + std::string(report.at("complete").get<bool>() ? "true" : "false") +
                    "\tdone=" + std::to_string(report.at("progress").at("done").get<long>()) +
                    "\ttotal=" + std::to_string(report.at("progress").at("total").get<long>()) + "\n";
  out += "system\tBLEU\tTER\tCHRF3\tSQM\tMQM\tMQM_penalty\terrors\n";
  for (const auto& row : report.at("systems")) {
    out += row.at("system").get<std::string>() + "\t" + cell(row.at("bleu"), 1) + "\t" + cell(row.at("ter"), 2) +
           "\t" + cell(row.at("chrf3"), 2) + "\t" + cell(row.at("sqm_mean"), 2) + "\t" +
           cell(row.at("mqm_score"), 2) + "\t" + cell(row.at("mqm_penalty"), 1) + "\t" +
           cell(row.at("error_count"), 0) + "\n";
  }
  out += "\n# annotator_totals\nannotator";
  for (const auto& s : systems) out += "\t" + s.get<std::string>();
  out += "\n";
  for (const auto& row : report.at("annotator_totals")) {
    out += row.at("annotator").get<std::string>();
    for (const auto& s : systems) out += "\t" + cell(row.at("totals").at(s.get<std::string>()), 0);
    out += "\n";
  }
  out += "\n# category_counts\ncategory";
  for (const auto& s : systems) out += "\t" + s.get<std::string>();
  out += "\n";
  for (const auto& row : report.at("category_counts")) {
    out += row.at("label").get<std::string>();
    for (const auto& s : systems) out += "\t" + cell(row.at("counts").at(s.get<std::string>()), 0);
    out += "\n";
  }
  out += "Total errors";
  for (const auto& s : systems) out += "\t" + cell(report.at("category_totals").at(s.get<std::string>()), 0);
  out += "\n\n" + kappa_section(report);
  return out;
}

// --- ingestion ---------------------------------------------------------------

IngestMapping mapping_from_json(const nlohmann::json& j) {
  IngestMapping m;
  try {
    const auto delim = j.value("delimiter", std::string(","));
    if (delim == "\\t" || delim == "tab") {
      m.delimiter = '\t';
    } else if (delim.size() == 1) {
      m.delimiter = delim[0];
    } else {
      throw Error(ErrorKind::configuration, "delimiter must be a single character");
    }
    const auto& cols = j.at("columns");
    m.annotator_column = cols.at("annotator").get<std::string>();
    m.segment_column = cols.at("segment").get<std::string>();
    m.system_column = cols.at("system").get<std::string>();
    m.category_column = cols.at("category").get<std::string>();
    m.rating_column = cols.at("rating").get<std::string>();
    const auto optional_col = [&](const char* key) -> std::optional<std::string> {
      if (!cols.contains(key) || cols.at(key).is_null()) return std::nullopt;
      return cols.at(key).get<std::string>();
    };
    m.severity_column = optional_col("severity");
    m.source_column = optional_col("source");
    m.reference_column = optional_col("reference");
    m.output_column = optional_col("output");
    if (j.contains("default_severity")) {
      const auto sev = parse_severity(j.at("default_severity").get<std::string>());
      if (!sev) throw Error(ErrorKind::configuration, "default_severity must be minor or major");
      m.default_severity = *sev;
    }
    if (j.contains("category_aliases")) {
      m.category_aliases = j.at("category_aliases").get<std::map<std::string, std::string>>();
    }
    if (j.contains("no_error_values")) m.no_error_values = j.at("no_error_values").get<std::vector<std::string>>();
    m.seed = j.value("seed", std::uint64_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::configuration, std::string("malformed mapping config: ") + e.what());
  }
  return m;
}

IngestResult ingest_published_dataset(const std::filesystem::path& path, const IngestMapping& mapping) {
  const auto lines = corpus::read_lines(path);
  if (lines.empty()) throw Error(ErrorKind::ingestion, path.string() + ": empty file");

  using Tokenizer = boost::tokenizer<boost::escaped_list_separator<char>>;
  const boost::escaped_list_separator<char> sep("", std::string(1, mapping.delimiter), "\"");
  const auto split = [&](const std::string& line) {
    std::vector<std::string> fields;
    Tokenizer tok(line, sep);
    for (const auto& f : tok) fields.push_back(f);
    return fields;
  };

  std::vector<std::string> header;
  try {
    header = split(lines[0]);
  } catch (const boost::escaped_list_error& e) {
    throw Error(ErrorKind::ingestion, "line 1: " + std::string(e.what()));
  }
  for (auto& h : header) h = trim(h);
  const auto column = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error(ErrorKind::ingestion, "missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto optional_column = [&](const std::optional<std::string>& name) -> std::optional<std::size_t> {
    if (!name) return std::nullopt;
    return column(*name);
  };
  const std::size_t c_annotator = column(mapping.annotator_column);
  const std::size_t c_segment = column(mapping.segment_column);
  const std::size_t c_system = column(mapping.system_column);
  const std::size_t c_category = column(mapping.category_column);
  const std::size_t c_rating = column(mapping.rating_column);
  const auto c_severity = optional_column(mapping.severity_column);
  const auto c_source = optional_column(mapping.source_column);
  const auto c_reference = optional_column(mapping.reference_column);
  const auto c_output = optional_column(mapping.output_column);

  std::set<std::string> no_error;
  for (const auto& v : mapping.no_error_values) no_error.insert(lower_ascii(trim(v)));

  struct UnitData {
    std::optional<int> rating;
    std::vector<ErrorAnnotation> errors;
  };
  using UnitKey = std::tuple<std::string, int, std::string>;
  std::map<UnitKey, UnitData> units;
  std::vector<std::string> annotators, systems;
  std::map<int, Segment> segments;
  std::vector<std::size_t> bad_rows;

  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t row_no = i + 1;
    if (trim(lines[i]).empty()) continue;
    try {
      const auto f = split(lines[i]);
      if (f.size() != header.size()) throw Error(ErrorKind::ingestion, "field count");
      const std::string annotator = trim(f[c_annotator]);
      const std::string system = trim(f[c_system]);
      const int segment = std::stoi(trim(f[c_segment]));
      if (annotator.empty() || system.empty()) throw Error(ErrorKind::ingestion, "empty id");

      UnitData& unit = units[{annotator, segment, system}];
      const std::string rating_text = trim(f[c_rating]);
      if (!rating_text.empty()) {
        std::size_t used = 0;
        const int rating = std::stoi(rating_text, &used);
        if (used != rating_text.size() || rating < kSqmMin || rating > kSqmMax) {
          throw Error(ErrorKind::ingestion, "rating");
        }
        if (unit.rating && *unit.rating != rating) throw Error(ErrorKind::ingestion, "conflicting rating");
        unit.rating = rating;
      }

      const std::string raw_category = trim(f[c_category]);
      if (!no_error.contains(lower_ascii(raw_category))) {
        std::string name = raw_category;
        if (auto it = mapping.category_aliases.find(name); it != mapping.category_aliases.end()) {
          name = it->second;
        }
        name = lower_ascii(name);
        std::replace(name.begin(), name.end(), ' ', '_');
        std::replace(name.begin(), name.end(), '-', '_');
        const auto category = parse_category(name);
        if (!category) throw Error(ErrorKind::ingestion, "category");
        Severity severity = mapping.default_severity;
        if (c_severity) {
          const std::string s = lower_ascii(trim(f[*c_severity]));
          if (!s.empty()) {
            const auto parsed = parse_severity(s);
            if (!parsed) throw Error(ErrorKind::ingestion, "severity");
            severity = *parsed;
          }
        }
        unit.errors.push_back({annotator, segment, system, *category, severity, std::nullopt});
      }

      if (std::find(annotators.begin(), annotators.end(), annotator) == annotators.end()) annotators.push_back(annotator);
      if (std::find(systems.begin(), systems.end(), system) == systems.end()) systems.push_back(system);
      Segment& seg = segments[segment];
      seg.id = segment;
      if (c_source && seg.source.empty()) seg.source = trim(f[*c_source]);
      if (c_reference && seg.reference.empty()) seg.reference = trim(f[*c_reference]);
      std::string& out = seg.outputs[system];
      if (c_output && out.empty()) out = trim(f[*c_output]);
    } catch (const std::exception&) {
      bad_rows.push_back(row_no);
    }
  }
  if (!bad_rows.empty()) {
    std::string rows;
    for (std::size_t k = 0; k < bad_rows.size(); ++k) rows += (k ? "," : "") + std::to_string(bad_rows[k]);
    throw Error(ErrorKind::ingestion, "unmappable rows: " + rows);
  }
  if (segments.empty()) throw Error(ErrorKind::ingestion, "no annotation rows");

  std::vector<Segment> segs;
  for (auto& [id, seg] : segments) {
    if (seg.source.empty()) seg.source = "segment " + std::to_string(id);
    for (const auto& s : systems) seg.outputs.try_emplace(s);
    segs.push_back(seg);
  }

  IngestResult result{AnnotationSession::create(segs, systems, annotators, mapping.seed), {}};
  auto& session = result.session;
  for (const auto& a : annotators) {
    for (const auto& seg : session.segments()) {
      SubmissionRecord record;
      record.annotator = a;
      record.segment = seg.id;
      record.timestamp = "ingested";
      const auto& order = session.slots(a, seg.id);
      for (std::size_t k = 0; k < order.size(); ++k) {
        const auto it = units.find({a, seg.id, order[k]});
        if (it == units.end() || !it->second.rating) {
          throw Error(ErrorKind::ingestion, "no rating for annotator '" + a + "', segment " +
                                                std::to_string(seg.id) + ", system '" + order[k] + "'");
        }
        record.units.push_back({slot_label(k), order[k], *it->second.rating, it->second.errors});
      }
      session.apply(record);
      result.records.push_back(std::move(record));
    }
  }
  return result;
}

}  // namespace lowmt::humeval
