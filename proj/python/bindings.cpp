#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "lowmt/corpus.hpp"
#include "lowmt/error.hpp"
#include "lowmt/hpo.hpp"
#include "lowmt/humeval.hpp"
#include "lowmt/metrics.hpp"
#include "lowmt/store.hpp"
#include "lowmt/subword.hpp"

namespace py = pybind11;
using namespace lowmt;

namespace {

subword::SubwordModel parse(const std::string& text) { return subword::parse_model(text); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of the lowmt toolkit";

  static py::exception<Error> error_type(m, "LowmtError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyErr_SetString(error_type.ptr(), (std::string(to_string(e.kind())) + ": " + e.what()).c_str());
    }
  });

  // corpus
  m.def("tokenize_words", &corpus::tokenize_words, py::arg("text"));
  m.def(
      "normalize",
      [](const std::string& text, bool casefold, bool nfc) {
        return corpus::normalize(text, {casefold, nfc ? corpus::NormalizationForm::nfc : corpus::NormalizationForm::none});
      },
      py::arg("text"), py::arg("casefold") = false, py::arg("nfc") = true);

  // subword: models cross the boundary in their text file format
  m.def(
      "bpe_train",
      [](const std::vector<std::string>& lines, int vocab_size) {
        return subword::serialize_model(subword::bpe_train(lines, vocab_size));
      },
      py::arg("lines"), py::arg("vocab_size") = subword::kDefaultVocabSize);
  m.def(
      "bpe_train_counts",
      [](const std::map<std::string, long>& counts, int vocab_size) {
        return subword::serialize_model(subword::bpe_train_counts(counts, vocab_size));
      },
      py::arg("word_counts"), py::arg("vocab_size"));
  m.def(
      "unigram_train",
      [](const std::vector<std::string>& lines, int vocab_size, int seed_vocab_size, int em_iterations) {
        subword::UnigramOptions o;
        o.vocab_size = vocab_size;
        o.seed_vocab_size = seed_vocab_size > 0 ? seed_vocab_size : 4 * vocab_size;
        o.em_iterations = em_iterations;
        return subword::serialize_model(subword::unigram_train(lines, o));
      },
      py::arg("lines"), py::arg("vocab_size"), py::arg("seed_vocab_size") = 0, py::arg("em_iterations") = 2);
  m.def(
      "merges",
      [](const std::string& model) {
        std::vector<std::pair<std::string, std::string>> out;
        for (const auto& mg : parse(model).merges) out.emplace_back(mg.left, mg.right);
        return out;
      },
      py::arg("model"));
  m.def(
      "encode", [](const std::string& model, const std::string& text) { return subword::encode(parse(model), text); },
      py::arg("model"), py::arg("text"));
  m.def("decode", &subword::decode, py::arg("pieces"));

  // metrics: reports are returned as JSON text
  m.def(
      "bleu_sentence",
      [](const std::string& hyp, const std::string& ref, bool smooth, bool lc) {
        return metrics::bleu_sentence(
            hyp, ref, smooth ? metrics::BleuSmoothing::add_one_for_n_ge_2 : metrics::BleuSmoothing::none, lc);
      },
      py::arg("hypothesis"), py::arg("reference"), py::arg("smooth") = true, py::arg("lc") = false);
  m.def(
      "evaluate_json",
      [](const std::vector<std::string>& hyps, const std::vector<std::string>& refs, bool lc) {
        return metrics::to_json(metrics::evaluate_all(hyps, refs, {.case_insensitive = lc})).dump();
      },
      py::arg("hypotheses"), py::arg("references"), py::arg("lc") = false);
  m.def(
      "ter", [](const std::string& hyp, const std::string& ref, bool lc) { return metrics::ter(hyp, ref, lc).score; },
      py::arg("hypothesis"), py::arg("reference"), py::arg("lc") = false);
  m.def(
      "chrf",
      [](const std::vector<std::string>& hyps, const std::vector<std::string>& refs, int max_ngram, double beta) {
        return metrics::chrf(hyps, refs, max_ngram, beta).score;
      },
      py::arg("hypotheses"), py::arg("references"), py::arg("max_ngram") = 6, py::arg("beta") = 3.0);

  // hpo
  m.def(
      "staged_search_toy_json",
      [](std::uint64_t seed, long cycle_steps) {
        auto trainer = hpo::toy_trainer(seed);
        hpo::SearchOptions o;
        o.seed = seed;
        o.cycle_steps = cycle_steps;
        const auto space = hpo::transformer_space();
        const auto r = hpo::staged_search(space, trainer, o);
        nlohmann::json trials = nlohmann::json::array();
        for (const auto& t : r.trials) trials.push_back(hpo::to_json(t));
        return nlohmann::json{{"best", hpo::to_json(r.best)},
                              {"trials", trials},
                              {"exhaustive_size", space.exhaustive_size()},
                              {"kg_co2", r.ledger.total_kg()}}
            .dump();
      },
      py::arg("seed") = 0, py::arg("cycle_steps") = hpo::kDefaultCycleSteps);
  m.def(
      "emissions_kg", [](double kwh, double factor) { return hpo::emissions_kg(kwh, factor); }, py::arg("energy_kwh"),
      py::arg("factor_g_per_kwh") = hpo::kDefaultEmissionFactor);

  // humeval
  m.def(
      "cohen_kappa",
      [](const std::vector<bool>& a, const std::vector<bool>& b) {
        return humeval::cohen_kappa(humeval::contingency(a, b));
      },
      py::arg("flags_a"), py::arg("flags_b"));
  m.def(
      "agreement_band", [](double k) { return std::string(humeval::agreement_band(k)); }, py::arg("kappa"));
  m.def("categories", [] {
    std::vector<std::string> out;
    for (auto c : humeval::kCategories) out.emplace_back(humeval::to_string(c));
    return out;
  });
  m.def(
      "render_report",
      [](const std::string& store_dir, const std::string& format) {
        const auto st = store::CampaignStore::open(store_dir, store::CampaignStore::Mode::reader);
        const auto f = format == "json"  ? store::ReportFormat::json
                       : format == "tsv" ? store::ReportFormat::tsv
                                         : store::ReportFormat::kappa;
        return store::render_report(st->snapshot(), f);
      },
      py::arg("store"), py::arg("format") = "json");
}
