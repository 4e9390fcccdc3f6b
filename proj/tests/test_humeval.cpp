#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "humeval_fixtures.hpp"
#include "lowmt/error.hpp"

using namespace lowmt;
using namespace lowmt::humeval;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error raised");
  return ErrorKind::io;
}

std::string field_of(auto&& fn) {
  try {
    fn();
  } catch (const ValidationError& e) {
    return e.field();
  }
  FAIL("no validation error raised");
  return {};
}

std::vector<Category> none(const std::string&, int, const std::string&) { return {}; }

}  // namespace

TEST_CASE("taxonomy") {
  CHECK(kCategories.size() == 11);
  CHECK(to_string(Category::register_) == "register");
  CHECK(parse_category("untranslated_text") == Category::untranslated_text);
  CHECK_FALSE(parse_category("style").has_value());
  CHECK(group_of(Category::omission) == CategoryGroup::accuracy);
  CHECK(group_of(Category::spelling) == CategoryGroup::fluency);
  CHECK(group_of(Category::non_translation) == CategoryGroup::non_translation);
  CHECK(sqm_level_description(6).rfind("Perfect Meaning and Grammar", 0) == 0);
  CHECK(sqm_level_description(0).rfind("Nonsense/No meaning preserved", 0) == 0);
  CHECK(sqm_level_description(7).empty());
  CHECK(slot_label(0) == "A");
  CHECK(slot_label(1) == "B");
  CHECK(slot_label(26) == "AA");
}

TEST_CASE("session creation validates its inputs") {
  const auto segs = fixtures::segments(3, {"x", "y"});
  CHECK(kind_of([&] { create_session(segs, {"x", "y"}, {}, 0); }) == ErrorKind::configuration);
  CHECK(kind_of([&] { create_session(segs, {"x", "x"}, {"a"}, 0); }) == ErrorKind::configuration);
  CHECK(kind_of([&] { create_session(segs, {"x", "y", "z"}, {"a"}, 0); }) == ErrorKind::configuration);
  auto dup = segs;
  dup[1].id = 1;
  CHECK(kind_of([&] { create_session(dup, {"x", "y"}, {"a"}, 0); }) == ErrorKind::configuration);
}

TEST_CASE("blinding is a seeded bijection per annotator and segment") {
  const auto s = fixtures::campaign(11);
  const auto again = fixtures::campaign(11);
  bool any_swap = false;
  for (const auto& a : s.annotators()) {
    for (const auto& seg : s.segments()) {
      auto order = s.slots(a, seg.id);
      CHECK(order == again.slots(a, seg.id));
      any_swap = any_swap || order.front() != "rnn";
      std::sort(order.begin(), order.end());
      CHECK(order == std::vector<std::string>{"rnn", "transformer"});
      CHECK(s.system_for_slot(a, seg.id, "A") != s.system_for_slot(a, seg.id, "B"));
    }
  }
  CHECK(any_swap);
}

TEST_CASE("tasks never name systems") {
  auto s = fixtures::campaign();
  const auto task = next_task(s, "ann1");
  REQUIRE(task.has_value());
  CHECK(task->segment_id == 1);
  CHECK(task->outputs.size() == 2);
  const auto text = to_json(*task).dump();
  CHECK(text.find("\"rnn\"") == std::string::npos);
  CHECK(text.find("\"transformer\"") == std::string::npos);
  CHECK(text.find("\"system") == std::string::npos);
  CHECK(kind_of([&] { next_task(s, "ghost"); }) == ErrorKind::not_found);
}

TEST_CASE("submission flow") {
  auto s = fixtures::campaign();
  fixtures::annotate(s, "ann1", 1, "rnn", 3, {Category::grammar});
  CHECK(s.is_done("ann1", 1, "rnn"));
  CHECK_FALSE(s.is_done("ann1", 1, "transformer"));
  CHECK(next_task(s, "ann1")->segment_id == 1);
  fixtures::annotate(s, "ann1", 1, "transformer", 5, {});
  CHECK(next_task(s, "ann1")->segment_id == 2);
  CHECK(next_task(s, "ann2")->segment_id == 1);
  CHECK(s.done_units() == 2);
  CHECK(s.total_units() == 80);
  CHECK(s.ratings().size() == 2);
  CHECK(s.errors().size() == 1);
}

TEST_CASE("submission validation names the field") {
  auto s = fixtures::campaign();
  CHECK(field_of([&] { submit_annotation(s, "ann1", 1, {"A", 7, {}}); }) == "rating");
  CHECK(field_of([&] { submit_annotation(s, "ann1", 1, {"A", -1, {}}); }) == "rating");
  CHECK(field_of([&] { submit_annotation(s, "ann1", 1, {"C", 3, {}}); }) == "slot");
  CHECK(field_of([&] { submit_annotation(s, "ann1", 1, {"A", 3, {{"style", "minor", {}}}}); }) == "category");
  CHECK(field_of([&] { submit_annotation(s, "ann1", 1, {"A", 3, {{"grammar", "huge", {}}}}); }) == "severity");
  CHECK(field_of([&] { submit_annotation(s, "ann1", 1, {"A", 3, {{"grammar", "minor", Span{0, 999}}}}); }) ==
        "span");
  CHECK(field_of([&] { submit_annotation(s, "ann1", 1, {"A", 3, {{"grammar", "minor", Span{2, 2}}}}); }) == "span");
  CHECK(field_of([&] { submit_annotation(s, "ann1", 1, {"A", 3, {{"non_translation", "major", Span{0, 1}}}}); }) ==
        "span");
  CHECK(field_of([&] { submit_annotation(s, "ann1", 99, {"A", 3, {}}); }) == "segment_id");
  CHECK(kind_of([&] { submit_annotation(s, "nobody", 1, {"A", 3, {}}); }) == ErrorKind::not_found);
  CHECK(s.done_units() == 0);
  submit_annotation(s, "ann1", 1, {"A", 3, {{"grammar", "minor", Span{0, 3}}}});
  CHECK(kind_of([&] { submit_annotation(s, "ann1", 1, {"A", 2, {}}); }) == ErrorKind::conflict);
  CHECK(s.done_units() == 1);
}

TEST_CASE("batch submissions are all or nothing") {
  auto s = fixtures::campaign();
  CHECK_THROWS(s.prepare("ann1", 1, {{"A", 3, {}}, {"B", 9, {}}}));
  CHECK_THROWS(s.prepare("ann1", 1, {{"A", 3, {}}, {"A", 4, {}}}));
  const auto rec = s.prepare("ann1", 1, {{"A", 3, {}}, {"B", 4, {}}});
  s.apply(rec);
  CHECK(s.done_units() == 2);
  CHECK_THROWS_AS(s.apply(rec), Error);
  CHECK(s.done_units() == 2);
}

TEST_CASE("records round trip through JSON") {
  auto s = fixtures::campaign();
  const auto rec = s.prepare("ann2", 3, {{"B", 1, {{"omission", "major", Span{1, 4}}, {"spelling", "minor", {}}}}});
  const auto back = submission_from_json(to_json(rec));
  CHECK(to_json(back) == to_json(rec));
  CHECK(back.units[0].errors[0].span == Span{1, 4});
}

TEST_CASE("session definitions round trip") {
  const auto s = fixtures::campaign(99);
  const auto back = AnnotationSession::from_definition(s.definition_json());
  CHECK(back.definition_json() == s.definition_json());
  auto tampered = s.definition_json();
  tampered["seed"] = 100;
  CHECK(kind_of([&] { AnnotationSession::from_definition(tampered); }) == ErrorKind::parse);
}

TEST_CASE("MQM penalty weights and non-translation exclusivity") {
  std::vector<ErrorAnnotation> errs = {
      {"a", 1, "x", Category::grammar, Severity::minor, {}},
      {"a", 1, "x", Category::omission, Severity::major, {}},
      {"a", 2, "x", Category::non_translation, Severity::major, {}},
      {"a", 2, "x", Category::spelling, Severity::major, {}},
  };
  const auto r = mqm_penalty(errs, {}, {"x", "y"}, 2);
  CHECK(r.at("x").total_penalty == 1 + 10 + 25);
  CHECK(r.at("x").error_count == 4);
  CHECK(r.at("x").category_counts[static_cast<std::size_t>(Category::spelling)] == 1);
  CHECK(r.at("y").total_penalty == 0);
  CHECK(r.at("x").penalty_per_segment == 18.0);
  CHECK(mqm_quality_score(0, 40) == 100.0);
  CHECK(mqm_quality_score(500, 40) == doctest::Approx(50.0));
  CHECK(mqm_quality_score(5000, 40) == 0.0);
}

TEST_CASE("SQM aggregation") {
  std::vector<SqmRating> r = {{"a", 1, "x", 6}, {"b", 1, "x", 3}, {"a", 1, "y", 2}};
  const auto agg = sqm_aggregate(r);
  CHECK(agg.at("x").mean == 4.5);
  CHECK(agg.at("x").per_annotator.at("b") == 3.0);
  CHECK(agg.at("y").count == 1);
  CHECK(kind_of([] { sqm_aggregate({}); }) == ErrorKind::empty_input);
}

TEST_CASE("kappa arithmetic") {
  CHECK(cohen_kappa({0, 0, 0, 20}) == 1.0);
  CHECK(cohen_kappa({20, 0, 0, 0}) == 1.0);
  CHECK(cohen_kappa({0, 1, 0, 19}) == 0.0);
  CHECK(cohen_kappa({0, 4, 0, 16}) == 0.0);
  // p_o = 0.9, p_e = (2*3 + 18*17)/400 = 0.78
  CHECK(cohen_kappa({1, 1, 2, 16}) == doctest::Approx((0.85 - 0.78) / (1 - 0.78)));
  CHECK(cohen_kappa({0, 10, 10, 0}) == -1.0);
  CHECK(agreement_band(1.0) == "almost perfect");
  CHECK(agreement_band(0.7) == "substantial");
  CHECK(agreement_band(0.5) == "moderate");
  CHECK(agreement_band(0.3) == "fair");
  CHECK(agreement_band(0.1) == "slight");
  CHECK(agreement_band(0.0) == "none");
  CHECK(agreement_band(-0.071) == "none");
}

TEST_CASE("kappa per category needs complete annotations") {
  auto s = fixtures::campaign();
  CHECK(kind_of([&] { kappa_per_category(s, "ann1", "ann2", "rnn", Category::grammar); }) ==
        ErrorKind::completeness);
  fixtures::complete(s, [](const std::string& a, int seg, const std::string& sys) {
    std::vector<Category> c;
    if (sys == "rnn" && a == "ann1" && seg == 5) c.push_back(Category::spelling);
    if (sys == "rnn" && seg <= 3) c.push_back(Category::grammar);
    return c;
  });
  const auto spelling = kappa_per_category(s, "ann1", "ann2", "rnn", Category::spelling);
  CHECK(spelling.counts.only_a == 1);
  CHECK(spelling.counts.neither == 19);
  CHECK(spelling.kappa == 0.0);
  CHECK(kappa_per_category(s, "ann1", "ann2", "rnn", Category::grammar).kappa == 1.0);
  CHECK(kappa_per_category(s, "ann1", "ann2", "transformer", Category::addition).kappa == 1.0);
}

TEST_CASE("report on a complete campaign") {
  auto s = fixtures::campaign();
  fixtures::complete(s, [](const std::string& a, int seg, const std::string& sys) {
    std::vector<Category> c;
    if (sys == "rnn") c.push_back(Category::mistranslation);
    if (sys == "rnn" && a == "ann2" && seg == 1) c.push_back(Category::grammar);
    return c;
  });
  const auto r = he_report(s);
  CHECK(r.at("complete") == true);
  const auto& rows = r.at("category_counts");
  REQUIRE(rows.size() == 11);
  for (std::size_t i = 0; i < rows.size(); ++i) CHECK(rows[i].at("category") == std::string(to_string(kCategories[i])));
  long total = 0;
  for (const auto& row : rows) total += row.at("counts").at("rnn").get<long>();
  CHECK(total == r.at("category_totals").at("rnn").get<long>());
  CHECK(total == 41);
  CHECK(r.at("annotator_totals")[0].at("totals").at("rnn") == 20);
  CHECK(r.at("annotator_totals")[1].at("totals").at("rnn") == 21);
  CHECK(r.at("systems")[0].at("sqm_mean") == 4.0);
  CHECK(r.at("systems")[0].at("mqm_penalty") == 41.0);
  CHECK(r.at("systems")[1].at("mqm_score") == 100.0);
  CHECK(r.at("systems")[0].at("bleu").is_null());
  CHECK(r.at("kappa").at("rows")[0].at("values").at("rnn").at("kappa") == 1.0);
  const auto tsv = he_report_tsv(r);
  CHECK(tsv.find("Total errors\t41\t0") != std::string::npos);
  CHECK(kappa_table_tsv(r).find("Mistranslation\t1.000\t1.000") != std::string::npos);
}

TEST_CASE("incomplete campaigns") {
  auto s = fixtures::campaign();
  CHECK(kind_of([&] { he_report(s); }) == ErrorKind::completeness);
  const auto partial = he_report(s, {}, {.weights = {}, .require_complete = false});
  CHECK(partial.at("complete") == false);
  for (const auto& row : partial.at("category_counts")) CHECK(row.at("counts").at("rnn") == 0);
  CHECK(partial.at("kappa").at("rows")[0].at("values").at("rnn").is_null());
  fixtures::complete(s, none);
  const auto full = he_report(s);
  for (const auto& row : full.at("category_counts")) CHECK(row.at("counts").at("transformer") == 0);
}

TEST_CASE("ingesting a delimited export") {
  const auto dir = std::filesystem::temp_directory_path() / "lowmt_ingest";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "export.csv") << "annotator,sentence,system,error,severity,sqm\n"
                                       "A1,1,nmt,Mistranslation,major,4\n"
                                       "A1,1,nmt,\"Grammar\",,4\n"
                                       "A1,1,rnn,none,,2\n"
                                       "A2,1,nmt,,,5\n"
                                       "A2,1,rnn,Untranslated text,minor,1\n";
  IngestMapping m;
  m.annotator_column = "annotator";
  m.segment_column = "sentence";
  m.system_column = "system";
  m.category_column = "error";
  m.severity_column = "severity";
  m.rating_column = "sqm";
  const auto r = ingest_published_dataset(dir / "export.csv", m);
  CHECK(r.session.complete());
  CHECK(r.session.done_units() == 4);
  CHECK(r.session.errors().size() == 3);
  CHECK(r.records.size() == 2 * 1);
  CHECK(r.session.errors()[0].severity == Severity::major);
  const auto again = ingest_published_dataset(dir / "export.csv", m);
  CHECK(again.session.definition_json() == r.session.definition_json());
  CHECK(again.session.errors() == r.session.errors());

  auto missing = m;
  missing.severity_column = "sev";
  try {
    ingest_published_dataset(dir / "export.csv", missing);
    FAIL("missing column accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ingestion);
    CHECK(std::string(e.what()).find("sev") != std::string::npos);
  }

  std::ofstream(dir / "bad.csv") << "annotator,sentence,system,error,severity,sqm\n"
                                    "A1,1,nmt,Nonsense,minor,4\n"
                                    "A1,x,rnn,none,,2\n"
                                    "A1,2,rnn,none,,9\n";
  try {
    ingest_published_dataset(dir / "bad.csv", m);
    FAIL("bad rows accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ingestion);
    CHECK(std::string(e.what()).find("2,3,4") != std::string::npos);
  }
}

TEST_CASE("mapping configs") {
  const auto m = mapping_from_json(nlohmann::json::parse(R"({
    "delimiter": "tab",
    "columns": {"annotator": "a", "segment": "s", "system": "m", "category": "c", "rating": "r"},
    "default_severity": "major",
    "category_aliases": {"Accuracy/Mistranslation": "mistranslation"}
  })"));
  CHECK(m.delimiter == '\t');
  CHECK(m.default_severity == Severity::major);
  CHECK_FALSE(m.severity_column.has_value());
  CHECK(m.category_aliases.size() == 1);
  CHECK_THROWS_AS(mapping_from_json(nlohmann::json::parse(R"({"columns": {}})")), Error);
}
