// Copyright 2026 The XSumForge Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "doctest.h"
#include "test_support.h"
#include "xsumforge/evalsuite.h"

namespace xsf {
namespace {

using testing::lcs_table;
using testing::mean_f1_oracle;
using testing::ngram_f1;

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::kFormatError;
}

Tokens words(std::string_view text) {
  Tokens out;
  std::string cur;
  for (char c : text) {
    if (c == ' ') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

Document doc_of(std::initializer_list<std::string_view> sentences) {
  Document d;
  d.id = "d";
  for (auto s : sentences) d.sentences.push_back(words(s));
  return d;
}

Tokens random_tokens(Rng& rng, int max_len, int alphabet) {
  Tokens t(rng.uniform_int(static_cast<uint64_t>(max_len) + 1));
  for (auto& w : t) w = std::string(1, static_cast<char>('a' + rng.uniform_int(alphabet)));
  return t;
}

// --- tests ---------------------------------------------------------------

TEST_CASE("porter stems match the frozen reference list") {
  std::ifstream in(XSF_FIXTURE_DIR "/porter_pairs.tsv");
  REQUIRE(in);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    const auto tab = line.find('\t');
    REQUIRE(tab != std::string::npos);
    const std::string word = line.substr(0, tab), stem = line.substr(tab + 1);
    INFO(word);
    CHECK(porter_stem(word) == stem);
    ++n;
  }
  CHECK(n >= 200);
  CHECK(porter_stem("caresses") == "caress");
  CHECK(porter_stem("relational") == "relat");
  CHECK(porter_stem("a") == "a");
  CHECK(porter_stem("") == "");
}

TEST_CASE("rouge hand examples") {
  const Tokens ref = words("the cat sat");
  const RougeScores same = rouge(ref, ref);
  CHECK(same.r1.f1 == 1.0);
  CHECK(same.r2.f1 == 1.0);
  CHECK(same.rl.f1 == 1.0);

  const RougeScores part = rouge(words("the cat"), ref);
  CHECK(part.r1.precision == 1.0);
  CHECK(part.r1.recall == doctest::Approx(2.0 / 3));
  CHECK(part.r1.f1 == doctest::Approx(0.8));
  CHECK(part.r2.precision == 1.0);
  CHECK(part.r2.recall == doctest::Approx(0.5));

  const RougeScores none = rouge(words("dog ran"), ref);
  for (const Prf* p : {&none.r1, &none.r2, &none.rl}) {
    CHECK(p->precision == 0.0);
    CHECK(p->recall == 0.0);
    CHECK(p->f1 == 0.0);
  }
  // Clipping: repeated candidate words only match as often as the reference has them.
  const RougeScores clip = rouge(words("the the the"), words("the cat"));
  CHECK(clip.r1.precision == doctest::Approx(1.0 / 3));
  CHECK(clip.r1.recall == doctest::Approx(0.5));

  CHECK(rouge({}, ref).r1.f1 == 0.0);
  CHECK(code_of([&] { rouge(ref, {}); }) == ErrorCode::kEmptyReference);

  const RougeScores stemmed = rouge(words("cats running"), words("cat runs"), {true});
  CHECK(stemmed.r1.f1 == 1.0);
  CHECK(rouge(words("cats running"), words("cat runs")).r1.f1 == 0.0);
}

TEST_CASE("rouge agrees with brute-force counting") {
  Rng rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const Tokens c = random_tokens(rng, 12, 5);
    Tokens r = random_tokens(rng, 12, 5);
    if (r.empty()) r.push_back("a");
    const RougeScores s = rouge(c, r);
    CHECK(s.r1.f1 == doctest::Approx(ngram_f1(c, r, 1)).epsilon(1e-12));
    CHECK(s.r2.f1 == doctest::Approx(ngram_f1(c, r, 2)).epsilon(1e-12));
    CHECK(s.mean_f1() == doctest::Approx(mean_f1_oracle(c, r)).epsilon(1e-12));
    for (const Prf* p : {&s.r1, &s.r2, &s.rl}) {
      CHECK(p->precision >= 0.0);
      CHECK(p->precision <= 1.0);
      CHECK(p->recall >= 0.0);
      CHECK(p->recall <= 1.0);
      CHECK(p->f1 >= 0.0);
      CHECK(p->f1 <= 1.0);
      if (p->precision + p->recall > 0) {
        CHECK(p->f1 == doctest::Approx(2 * p->precision * p->recall /
                                       (p->precision + p->recall)));
      }
    }
  }
}

TEST_CASE("lcs agrees with the full dynamic-programming table") {
  Rng rng(2);
  for (int trial = 0; trial < 1000; ++trial) {
    const Tokens a = random_tokens(rng, 15, 4);
    const Tokens b = random_tokens(rng, 15, 4);
    CHECK(lcs_length(a, b) == lcs_table(a, b));
  }
}

TEST_CASE("token permutations") {
  Rng rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    Tokens c = random_tokens(rng, 10, 6);
    Tokens r = random_tokens(rng, 10, 6);
    if (r.empty()) r.push_back("b");
    const Tokens shuffled = [&] {
      Tokens s = r;
      for (size_t i = s.size(); i > 1; --i) std::swap(s[i - 1], s[rng.uniform_int(i)]);
      return s;
    }();
    // Scoring the reference against a shuffle of itself: R-1 stays perfect,
    // R-L can only drop.
    const RougeScores base = rouge(r, r);
    const RougeScores perm = rouge(shuffled, r);
    CHECK(perm.r1.f1 == base.r1.f1);
    CHECK(perm.rl.f1 <= base.rl.f1);
    Tokens cs = c;
    for (size_t i = cs.size(); i > 1; --i) std::swap(cs[i - 1], cs[rng.uniform_int(i)]);
    CHECK(rouge(cs, r).r1.f1 == doctest::Approx(rouge(c, r).r1.f1).epsilon(1e-15));
  }
}

TEST_CASE("lead and random sentence") {
  const Document two = doc_of({"first one here", "second one"});
  CHECK(lead(two) == words("first one here"));
  const Document one = doc_of({"only sentence"});
  CHECK(lead(one) == words("only sentence"));
  for (uint64_t s = 0; s < 20; ++s) CHECK(random_sentence(one, s) == words("only sentence"));
  const Document empty;
  CHECK(code_of([&] { lead(empty); }) == ErrorCode::kEmptyDocument);
  CHECK(code_of([&] { random_sentence(empty, 1); }) == ErrorCode::kEmptyDocument);

  const Document four = doc_of({"s0", "s1", "s2", "s3"});
  std::map<std::string, int> counts;
  for (uint64_t s = 0; s < 10000; ++s) ++counts[random_sentence(four, s)[0]];
  REQUIRE(counts.size() == 4);
  for (const auto& [name, c] : counts) {
    INFO(name);
    CHECK(std::abs(c / 10000.0 - 0.25) <= 0.02);
  }
  CHECK(random_sentence(four, 77) == random_sentence(four, 77));
}

TEST_CASE("ext oracle") {
  const Tokens gold = words("the council approved the plan");
  const Document d = doc_of({"nothing to see", "the council met", "the council approved the plan",
                             "the plan"});
  const OracleChoice o = ext_oracle(d, gold);
  CHECK(o.sentence == 2);
  CHECK(o.tokens == gold);
  CHECK(o.scores.r1.f1 == 1.0);
  CHECK(o.scores.r2.f1 == 1.0);
  CHECK(o.scores.rl.f1 == 1.0);

  // Ties go to the earliest sentence.
  const Document tie = doc_of({"x y", "a b", "a b"});
  CHECK(ext_oracle(tie, words("a b")).sentence == 1);
  const Document zero = doc_of({"p", "q"});
  CHECK(ext_oracle(zero, words("z")).sentence == 0);

  CHECK(code_of([&] { ext_oracle(Document{}, gold); }) == ErrorCode::kEmptyDocument);
  CHECK(code_of([&] { ext_oracle(d, {}); }) == ErrorCode::kEmptyReference);

  // Maximal against brute-force rescoring of every fixture sentence.
  for (const Document& doc : load_jsonl(XSF_FIXTURE_DIR "/xsum_fixture.jsonl")) {
    const OracleChoice pick = ext_oracle(doc, doc.summary);
    double best = -1.0;
    size_t arg = 0;
    for (size_t i = 0; i < doc.sentences.size(); ++i) {
      const double s = mean_f1_oracle(doc.sentences[i], doc.summary);
      if (s > best + 1e-12) {
        best = s;
        arg = i;
      }
    }
    CHECK(pick.sentence == arg);
    CHECK(pick.scores.mean_f1() == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("novelty") {
  const Tokens doc = words("a b c d e f");
  const NoveltyReport inside = novelty(words("b c d"), doc);
  for (int n = 0; n < 3; ++n) {
    CHECK(inside.defined[n]);
    CHECK(inside.pct_novel[n] == 0.0);
  }
  CHECK_FALSE(inside.defined[3]);

  const NoveltyReport outside = novelty(words("x y z w q"), doc);
  for (int n = 0; n < 4; ++n) CHECK(outside.pct_novel[n] == 100.0);

  // Types, not occurrences: "a x a x" has unigram types {a, x}.
  const NoveltyReport types = novelty(words("a x a x"), doc);
  CHECK(types.pct_novel[0] == 50.0);
  CHECK(types.pct_novel[1] == 100.0);

  // Reordered known words form novel bigrams.
  const NoveltyReport swapped = novelty(words("b a"), doc);
  CHECK(swapped.pct_novel[0] == 0.0);
  CHECK(swapped.pct_novel[1] == 100.0);

  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const Tokens s = random_tokens(rng, 8, 6);
    const Tokens d = random_tokens(rng, 20, 6);
    const NoveltyReport r = novelty(s, d);
    for (int n = 0; n < 4; ++n) {
      CHECK(r.pct_novel[n] >= 0.0);
      CHECK(r.pct_novel[n] <= 100.0);
      CHECK(r.defined[n] == (s.size() >= static_cast<size_t>(n + 1)));
    }
  }
}

TEST_CASE("extractive outputs have no novel n-grams") {
  for (const Document& doc : load_jsonl(XSF_FIXTURE_DIR "/xsum_fixture.jsonl")) {
    const Tokens flat = doc.flat_tokens();
    for (const Tokens& out : {lead(doc), ext_oracle(doc, doc.summary).tokens,
                              random_sentence(doc, 5)}) {
      const NoveltyReport r = novelty(out, flat);
      for (int n = 0; n < 4; ++n) CHECK(r.pct_novel[n] == 0.0);
    }
  }
}

TEST_CASE("system evaluation") {
  const std::map<std::string, Tokens> refs = {{"a", words("x y z")}, {"b", words("p q r")}};
  const std::map<std::string, Tokens> docs = {{"a", words("x y z w")}, {"b", words("p q r s")}};
  const SystemReport perfect = evaluate_system("gold", refs, refs, docs);
  CHECK(perfect.r1 == 1.0);
  CHECK(perfect.r2 == 1.0);
  CHECK(perfect.rl == 1.0);
  CHECK(perfect.documents == 2);
  CHECK(perfect.mean_length == 3.0);

  const std::map<std::string, Tokens> half = {{"a", words("x y z")}, {"b", words("k l m n")}};
  const SystemReport h = evaluate_system("half", half, refs, docs);
  CHECK(h.r1 == doctest::Approx(0.5));
  CHECK(h.r2 == doctest::Approx(0.5));
  CHECK(h.rl == doctest::Approx(0.5));
  CHECK(h.mean_length == 3.5);
  CHECK(h.novelty[0] == doctest::Approx(50.0));

  const std::map<std::string, Tokens> stray = {{"c", words("x")}};
  CHECK(code_of([&] { evaluate_system("bad", stray, refs, docs); }) ==
        ErrorCode::kMissingReference);
  const std::map<std::string, Tokens> no_doc = {{"a", words("x y")}};
  CHECK(code_of([&] { evaluate_system("bad", no_doc, refs, {}); }) ==
        ErrorCode::kMissingReference);

  const nlohmann::json j = to_json(h);
  CHECK(j.at("rouge1_f1").get<double>() == doctest::Approx(0.5));
  CHECK(j.at("rouge_variant") == "unstemmed");
  CHECK(j.at("novel_ngram_pct").contains("4"));
  const SystemReport reports[] = {perfect, h};
  const std::string table = format_system_table(reports);
  CHECK(table.find("half") != std::string::npos);
  CHECK(table.find("50.00") != std::string::npos);
  CHECK(table.find("unstemmed") != std::string::npos);
}

TEST_CASE("summary sentence counting") {
  CHECK(count_sentences(words("one . two ?")) == 2);
  CHECK(count_sentences(words("one . two")) == 2);
  CHECK(count_sentences(words("no end")) == 1);
  CHECK(count_sentences({}) == 0);
  CHECK(count_sentences(words(". .")) == 2);
}

TEST_CASE("corpus statistics match the frozen oracle output") {
  const auto docs = load_jsonl(XSF_FIXTURE_DIR "/xsum_fixture.jsonl");
  const CorpusStats s = analyze_corpus(docs);
  std::ifstream in(XSF_FIXTURE_DIR "/xsum_fixture_stats.json");
  const nlohmann::json want = nlohmann::json::parse(in);
  auto two = [](double x) { return std::round(x * 100.0) / 100.0; };

  CHECK(s.documents == want["documents"].get<size_t>());
  CHECK(two(s.avg_doc_sentences) == two(want["avg_document_sentences"].get<double>()));
  CHECK(two(s.avg_doc_tokens) == two(want["avg_document_words"].get<double>()));
  CHECK(two(s.avg_summary_sentences) == two(want["avg_summary_sentences"].get<double>()));
  CHECK(two(s.avg_summary_tokens) == two(want["avg_summary_words"].get<double>()));
  CHECK(s.doc_vocab == want["document_vocabulary"].get<size_t>());
  CHECK(s.summary_vocab == want["summary_vocabulary"].get<size_t>());
  for (int n = 0; n < 4; ++n) {
    CHECK(two(s.gold_novelty.pct_novel[n]) ==
          two(want["gold_novel_ngram_pct"][std::to_string(n + 1)].get<double>()));
  }
  for (const auto& [report, key] :
       {std::pair{&s.lead, "lead"}, std::pair{&s.ext_oracle, "ext_oracle"}}) {
    const auto& w = want[key];
    INFO(key);
    CHECK(two(100 * report->r1) == two(100 * w["rouge1_f1"].get<double>()));
    CHECK(two(100 * report->r2) == two(100 * w["rouge2_f1"].get<double>()));
    CHECK(two(100 * report->rl) == two(100 * w["rougeL_f1"].get<double>()));
    CHECK(two(report->mean_length) == two(w["mean_length"].get<double>()));
    for (int n = 0; n < 4; ++n) CHECK(report->novelty[n] == 0.0);
  }

  const nlohmann::json j = to_json(s);
  CHECK(j.at("documents") == 100);
  CHECK(j.at("systems").size() == 2);
  CHECK(format_corpus_stats(s).find("100") != std::string::npos);

  CHECK(code_of([] { analyze_corpus({}); }) == ErrorCode::kEmptyCorpus);
  std::vector<Document> dup = {docs[0], docs[0]};
  CHECK(code_of([&] { analyze_corpus(dup); }) == ErrorCode::kFormatError);
}

}  // namespace
}  // namespace xsf
