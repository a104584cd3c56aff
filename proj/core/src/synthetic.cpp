#include "xlt/synthetic.hpp"

#include "xlt/errors.hpp"
#include "xlt/random.hpp"
#include "unicode.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

namespace xlt {

namespace {

// Training-split label counts of the original corpus, used as concept weights.
constexpr std::array<double, kNumLabels> kConceptWeights = {106, 182, 163, 227, 251, 345, 375, 265};
// Probability of 0, 1, 2, 3 keywords per text.
constexpr std::array<double, 4> kKeywordCounts = {0.28, 0.50, 0.17, 0.05};

const std::vector<std::string> kLatinSyllables = [] {
  std::vector<std::string> out;
  for (char c : std::string("bdfgklmnprstvz")) {
    for (char v : std::string("aeiou")) out.push_back(std::string{c, v});
  }
  return out;
}();

const std::vector<std::string> kCyrillicSyllables = [] {
  // б в г д ж з к л м н п р с т and а е и о у
  const std::vector<char32_t> cons = {0x431, 0x432, 0x433, 0x434, 0x436, 0x437, 0x43a,
                                      0x43b, 0x43c, 0x43d, 0x43f, 0x440, 0x441, 0x442};
  const std::vector<char32_t> vows = {0x430, 0x435, 0x438, 0x43e, 0x443};
  std::vector<std::string> out;
  for (char32_t c : cons) {
    for (char32_t v : vows) {
      std::string s;
      unicode::append_utf8(s, c);
      unicode::append_utf8(s, v);
      out.push_back(s);
    }
  }
  return out;
}();

std::vector<std::string> make_words(std::size_t n, const std::vector<std::string>& syllables, Rng& rng,
                                    std::set<std::string>& used) {
  std::vector<std::string> words;
  while (words.size() < n) {
    const std::size_t len = 2 + rng.uniform_int(2);
    std::string w;
    for (std::size_t i = 0; i < len; ++i) w += syllables[rng.uniform_int(syllables.size())];
    if (used.insert(w).second) words.push_back(std::move(w));
  }
  return words;
}

std::size_t draw(std::span<const double> weights, double u) {
  double total = 0.0;
  for (double w : weights) total += w;
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i] / total;
    if (u < acc) return i;
  }
  return weights.size() - 1;
}

struct Lexicon {
  // keyword[c][k] and filler[i] surface forms per language
  std::array<std::array<std::string, kSyntheticForms>, kNumLabels> keyword;
  std::vector<std::string> filler;
};

// Slot in a shared index space: keywords first (c * forms + k), then fillers.
constexpr std::size_t kKeywordSlots = kNumLabels * kSyntheticForms;

std::string id_for(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "s%04zu", i);
  return buf;
}

}  // namespace

void SyntheticSpec::validate() const {
  if (!(overlap >= 0.0 && overlap <= 1.0)) throw ConfigError("synthetic overlap must lie in [0, 1]");
  if (!(noise >= 0.0 && noise <= 1.0)) throw ConfigError("synthetic noise must lie in [0, 1]");
  if (size < 4) throw ConfigError("synthetic size must be at least 4");
  if (lang_a.empty() || lang_b.empty() || lang_a == lang_b) {
    throw ConfigError("synthetic languages must be two distinct non-empty codes");
  }
}

const Dataset& SyntheticBenchmark::train(const std::string& lang) const {
  if (lang == spec.lang_a) return train_a;
  if (lang == spec.lang_b) return train_b;
  throw DataError("synthetic benchmark has no language '" + lang + "'");
}

const Dataset& SyntheticBenchmark::test(const std::string& lang) const {
  if (lang == spec.lang_a) return test_a;
  if (lang == spec.lang_b) return test_b;
  throw DataError("synthetic benchmark has no language '" + lang + "'");
}

std::uint64_t SyntheticBenchmark::checksum() const {
  return hash_string(to_jsonl(train_a) + to_jsonl(test_a) + to_jsonl(train_b) + to_jsonl(test_b));
}

SyntheticBenchmark generate_synthetic_benchmark(const SyntheticSpec& spec) {
  spec.validate();
  // The lexicon depends on the seed only, so corpora that differ in overlap
  // share their language-A side.
  Rng lex_rng(hash_mix(spec.seed, 0x1e71c0ULL));
  std::set<std::string> used;
  Lexicon a;
  Lexicon b;
  const auto a_words = make_words(kKeywordSlots + kSyntheticFillers, kLatinSyllables, lex_rng, used);
  const auto b_words = make_words(kKeywordSlots + kSyntheticFillers, kCyrillicSyllables, lex_rng, used);

  // Shared entries: a seeded ranking within keywords and within fillers; the
  // first round(overlap * count) of each take language A's form.
  auto ranking = [&lex_rng](std::size_t n) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    lex_rng.shuffle(std::span<std::size_t>(order));
    std::vector<std::size_t> rank(n);
    for (std::size_t i = 0; i < n; ++i) rank[order[i]] = i;
    return rank;
  };
  const auto kw_rank = ranking(kKeywordSlots);
  const auto filler_rank = ranking(kSyntheticFillers);
  const auto kw_shared = static_cast<std::size_t>(std::llround(spec.overlap * kKeywordSlots));
  const auto filler_shared = static_cast<std::size_t>(std::llround(spec.overlap * kSyntheticFillers));

  for (std::size_t c = 0; c < kNumLabels; ++c) {
    for (std::size_t k = 0; k < kSyntheticForms; ++k) {
      const std::size_t slot = c * kSyntheticForms + k;
      a.keyword[c][k] = a_words[slot];
      b.keyword[c][k] = kw_rank[slot] < kw_shared ? a_words[slot] : b_words[slot];
    }
  }
  for (std::size_t i = 0; i < kSyntheticFillers; ++i) {
    a.filler.push_back(a_words[kKeywordSlots + i]);
    b.filler.push_back(filler_rank[i] < filler_shared ? a_words[kKeywordSlots + i] : b_words[kKeywordSlots + i]);
  }

  // Text templates: a sequence of slots, rendered per language.
  struct Token {
    bool keyword;
    std::size_t concept_or_filler;
    std::size_t form;
  };
  Rng rng(hash_mix(spec.seed, 0x7e47ULL));
  std::vector<std::vector<Token>> templates;
  std::vector<LabelSet> labels;
  for (std::size_t i = 0; i < spec.size; ++i) {
    const std::size_t n_kw = draw(kKeywordCounts, rng.uniform());
    LabelSet ls;
    std::vector<Token> toks;
    std::array<double, kNumLabels> w = kConceptWeights;
    for (std::size_t j = 0; j < n_kw; ++j) {
      const std::size_t c = draw(w, rng.uniform());
      w[c] = 0.0;
      ls.set(c, true);
      toks.push_back({true, c, rng.uniform_int(kSyntheticForms)});
    }
    const std::size_t n_fill = 3 + rng.uniform_int(4);
    for (std::size_t j = 0; j < n_fill; ++j) toks.push_back({false, rng.uniform_int(kSyntheticFillers), 0});
    rng.shuffle(std::span<Token>(toks));
    templates.push_back(std::move(toks));
    labels.push_back(ls);
  }

  auto render = [](const std::vector<Token>& toks, const Lexicon& lex) {
    std::string s;
    for (const auto& t : toks) {
      if (!s.empty()) s += ' ';
      s += t.keyword ? lex.keyword[t.concept_or_filler][t.form] : lex.filler[t.concept_or_filler];
    }
    return s;
  };

  const std::size_t n_train = spec.size * 3 / 4;
  std::vector<Example> tr_a, te_a, tr_b, te_b;
  for (std::size_t i = 0; i < spec.size; ++i) {
    Example ea{id_for(i), spec.lang_a, render(templates[i], a), labels[i], Origin::original()};
    Example eb{id_for(i), spec.lang_b, render(templates[i], b), labels[i], Origin::original()};
    (i < n_train ? tr_a : te_a).push_back(std::move(ea));
    (i < n_train ? tr_b : te_b).push_back(std::move(eb));
  }

  SyntheticBenchmark bench;
  bench.spec = spec;
  bench.train_a = Dataset(std::move(tr_a), Split::train);
  bench.test_a = Dataset(std::move(te_a), Split::test);
  bench.train_b = Dataset(std::move(tr_b), Split::train);
  bench.test_b = Dataset(std::move(te_b), Split::test);

  // Provider dictionaries. Keyword alternatives are target fillers, so a
  // corrupted keyword leaves a text whose labels no longer match its words.
  auto build = [&](const Lexicon& from, const Lexicon& to, const std::string& src, const std::string& tgt,
                   std::size_t dropped_form) {
    FakeDictionary d;
    d.source_lang = src;
    d.target_lang = tgt;
    for (std::size_t c = 0; c < kNumLabels; ++c) {
      for (std::size_t k = 0; k < kSyntheticForms; ++k) {
        const std::size_t out_form = k == dropped_form ? 0 : k;
        std::vector<std::string> alts;
        for (std::size_t j = 0; j < 3; ++j) alts.push_back(to.filler[(c * 5 + k * 3 + j * 7) % kSyntheticFillers]);
        d.words.insert_or_assign(from.keyword[c][k], DictEntry{to.keyword[c][out_form], std::move(alts)});
      }
    }
    for (std::size_t i = 0; i < kSyntheticFillers; ++i) {
      d.words.emplace(from.filler[i], DictEntry{to.filler[i], {}});
    }
    return d;
  };
  bench.dictionaries_g = {build(a, b, spec.lang_a, spec.lang_b, 2), build(b, a, spec.lang_b, spec.lang_a, 2)};
  bench.dictionaries_a = {build(a, b, spec.lang_a, spec.lang_b, 1), build(b, a, spec.lang_b, spec.lang_a, 1)};
  return bench;
}

std::unique_ptr<FakeProvider> synthetic_provider(const SyntheticBenchmark& bench, const std::string& id) {
  ProviderConfig pc;
  pc.id = id;
  pc.kind = ProviderKind::fake;
  pc.rate_limit = 1e9;
  pc.texts_per_request = 64;
  pc.retry.backoff_base_s = 0.0;
  if (id == "g") return std::make_unique<FakeProvider>(pc, bench.dictionaries_g, bench.spec.noise, hash_mix(bench.spec.seed, 0x67ULL));
  if (id == "a") return std::make_unique<FakeProvider>(pc, bench.dictionaries_a, bench.spec.noise, hash_mix(bench.spec.seed, 0x61ULL));
  throw ConfigError("synthetic benchmark provides fake translators 'g' and 'a', not '" + id + "'");
}

void save_synthetic_benchmark(const SyntheticBenchmark& bench, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_dataset(bench.train_a, dir / (bench.spec.lang_a + ".train.jsonl"));
  save_dataset(bench.test_a, dir / (bench.spec.lang_a + ".test.jsonl"));
  save_dataset(bench.train_b, dir / (bench.spec.lang_b + ".train.jsonl"));
  save_dataset(bench.test_b, dir / (bench.spec.lang_b + ".test.jsonl"));
  for (const std::string id : {"g", "a"}) save_fake_provider(*synthetic_provider(bench, id), dir / ("provider_" + id + ".json"));
}

}  // namespace xlt
