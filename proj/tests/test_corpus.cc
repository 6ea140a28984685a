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

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "doctest.h"
#include "xsumforge/common.h"
#include "xsumforge/corpus.h"

namespace xsf {
namespace {

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

Document make_doc(std::string id, std::vector<Tokens> sentences, Tokens summary = {}) {
  Document d;
  d.id = std::move(id);
  d.sentences = std::move(sentences);
  d.summary = std::move(summary);
  return d;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::kInvalidArgument;
}

TEST_CASE("extract_summary takes the introduction paragraph and leaves the body") {
  const auto ex = extract_summary(
      "<html><body><p class=\"story-body__introduction\">A man died.</p>"
      "<p>Police are investigating.</p><p>More later.</p></body></html>");
  CHECK(ex.summary_text == "A man died.");
  CHECK(ex.body_text.find("A man died") == std::string::npos);
  CHECK(ex.body_text.find("Police are investigating.") != std::string::npos);
  CHECK(ex.body_text.find("More later.") != std::string::npos);
}

TEST_CASE("extract_summary without the class fails") {
  CHECK(code_of([] { extract_summary("<p class=\"intro\">Hello.</p>"); }) ==
        ErrorCode::kMissingSummaryClass);
  CHECK(code_of([] { extract_summary(""); }) == ErrorCode::kMissingSummaryClass);
  // A longer class name that merely contains the token does not count.
  CHECK(code_of([] {
          extract_summary("<p class=\"story-body__introduction-old\">x</p>");
        }) == ErrorCode::kMissingSummaryClass);
}

TEST_CASE("extract_summary joins sibling introduction elements") {
  const auto ex = extract_summary(
      "<div><p class=\"story-body__introduction\">X.</p>"
      "<p class=\"story-body__introduction\">Y.</p><p>Rest of it.</p></div>");
  CHECK(ex.summary_text == "X. Y.");
  CHECK(ex.body_text == "Rest of it.");
}

TEST_CASE("extract_summary on the bundled article pages") {
  // Expected strings come from reading the fixture markup by hand.
  const auto a = extract_summary(read_file(XSF_FIXTURE_DIR "/html/36010912.html"));
  CHECK(a.summary_text ==
        "Plans for new flood defences in Carlisle have been approved by councillors.");
  CHECK(a.body_text.find("commented out") == std::string::npos);
  CHECK(a.body_text.find("not this") == std::string::npos);
  CHECK(a.body_text.find("font-weight") == std::string::npos);
  CHECK(a.body_text.find("\xC2\xA3" "25m scheme") != std::string::npos);
  CHECK(a.body_text.find("decision & said") != std::string::npos);

  const auto b = extract_summary(read_file(XSF_FIXTURE_DIR "/html/36020417.html"));
  CHECK(b.summary_text == "A man has died after a crash on the M4. Two others were injured.");
  const auto sents = tokenize_sentences(b.body_text);
  REQUIRE(sents.size() == 3);
  CHECK(join_tokens(sents[0]) ==
        "police said the collision happened at about 07:00 bst near junction 32 .");
  CHECK(join_tokens(sents[2]) == "officers have appealed for witnesses .");

  CHECK(code_of([] {
          extract_summary(read_file(XSF_FIXTURE_DIR "/html/36099001.html"));
        }) == ErrorCode::kMissingSummaryClass);
}

TEST_CASE("tokenize lowercases and detaches punctuation") {
  CHECK(tokenize("A man died.") == Tokens{"a", "man", "died", "."});
  CHECK(tokenize("").empty());
  CHECK(tokenize("   \n\t ").empty());
  CHECK(tokenize("\"Hello,\" she said!") ==
        Tokens{"\"", "hello", ",", "\"", "she", "said", "!"});
  CHECK(tokenize("U.K. growth") == Tokens{"u.k.", "growth"});
  CHECK(tokenize("(BBC) 07:00 e-mail") ==
        Tokens{"(", "bbc", ")", "07:00", "e-mail"});
  CHECK(tokenize("...") == Tokens{".", ".", "."});
}

TEST_CASE("sentence splitting on terminal punctuation before a capital") {
  const auto s = tokenize_sentences("U.K. growth fell. Banks rose.");
  REQUIRE(s.size() == 2);
  CHECK(s[0] == Tokens{"u.k.", "growth", "fell", "."});
  CHECK(s[1] == Tokens{"banks", "rose", "."});
  CHECK(split_sentences("Is it? yes it is. No!") ==
        std::vector<std::string>{"Is it? yes it is.", "No!"});
  CHECK(split_sentences("One.\nTwo") == std::vector<std::string>{"One.", "Two"});
  CHECK(split_sentences("").empty());
}

TEST_CASE("tokens are non-empty and lowercase on the fixture corpus") {
  const auto docs = load_jsonl(XSF_FIXTURE_DIR "/xsum_fixture.jsonl");
  REQUIRE(docs.size() == 100);
  for (const auto& d : docs) {
    CHECK_FALSE(d.sentences.empty());
    for (const auto& s : d.sentences) {
      for (const auto& t : s) {
        CHECK_FALSE(t.empty());
        CHECK(std::none_of(t.begin(), t.end(), [](char c) { return std::isupper(c); }));
      }
    }
  }
}

TEST_CASE("build_vocab orders by frequency then lexicographically") {
  const std::vector<Document> a = {make_doc("1", {{"a", "a", "b"}})};
  const Vocabulary v = build_vocab(a, 6);
  CHECK(v.size() == 6);
  CHECK(v.id("a") == 4);
  CHECK(v.id("b") == 5);

  const std::vector<Document> b = {make_doc("1", {{"y", "x"}})};
  const Vocabulary w = build_vocab(b, 10);
  CHECK(w.id("x") < w.id("y"));

  // Summaries count too.
  const std::vector<Document> c = {make_doc("1", {{"p"}}, {"q", "q"})};
  CHECK(build_vocab(c, 5).id("q") == 4);

  CHECK(code_of([&] { build_vocab(a, 3); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("build_vocab on a Zipf corpus keeps exactly cap-4 tokens") {
  Rng rng(99);
  std::vector<double> cdf;
  double z = 0;
  for (int r = 1; r <= 600; ++r) cdf.push_back(z += 1.0 / r);
  Tokens tokens;
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform() * z;
    const auto r = std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
    tokens.push_back("t" + std::to_string(r));
  }
  const std::vector<Document> corpus = {make_doc("z", {tokens})};
  const Vocabulary v = build_vocab(corpus, 100);

  // Independent count and ranking.
  std::map<std::string, int> counts;
  for (const auto& t : tokens) ++counts[t];
  std::vector<std::pair<int, std::string>> ranked;
  for (const auto& [t, c] : counts) ranked.emplace_back(-c, t);
  std::sort(ranked.begin(), ranked.end());
  REQUIRE(ranked.size() > 96);

  CHECK(v.size() == 100);
  for (size_t i = 0; i < ranked.size(); ++i) {
    const auto& tok = ranked[i].second;
    if (i < 96) {
      CHECK(v.id(tok) == static_cast<int>(i) + kNumSpecials);
    } else {
      CHECK(v.id(tok) == kUnkId);
    }
  }
}

TEST_CASE("vocabulary is a bijection with reserved specials") {
  const auto docs = load_jsonl(XSF_FIXTURE_DIR "/xsum_fixture.jsonl");
  const Vocabulary v = build_vocab(docs, 300);
  CHECK(v.token(kPadId) == "<pad>");
  CHECK(v.token(kBosId) == "<s>");
  CHECK(v.token(kEosId) == "</s>");
  CHECK(v.token(kUnkId) == "<unk>");
  for (int id = 0; id < v.size(); ++id) CHECK(v.id(v.token(id)) == id);
  CHECK(code_of([&] { v.token(v.size()); }) == ErrorCode::kIndexOutOfVocab);
  CHECK(code_of([&] { v.token(-1); }) == ErrorCode::kIndexOutOfVocab);

  const auto path = std::filesystem::temp_directory_path() / "xsf_vocab_test.txt";
  v.save(path.string());
  const Vocabulary back = Vocabulary::load(path.string());
  REQUIRE(back.size() == v.size());
  for (int id = 0; id < v.size(); ++id) CHECK(back.token(id) == v.token(id));
  std::filesystem::remove(path);
}

TEST_CASE("decode(encode(tokens)) replaces only OOV tokens") {
  const auto docs = load_jsonl(XSF_FIXTURE_DIR "/xsum_fixture.jsonl");
  const Vocabulary v = build_vocab(docs, 150);
  for (const auto& d : docs) {
    const Tokens flat = d.flat_tokens();
    const Tokens back = v.decode(v.encode(flat));
    REQUIRE(back.size() == flat.size());
    for (size_t i = 0; i < flat.size(); ++i) {
      CHECK(back[i] == (v.contains(flat[i]) ? flat[i] : std::string("<unk>")));
    }
  }
}

TEST_CASE("encode_pair truncates and terminates") {
  Vocabulary v;
  v.add("w");
  v.add("the");
  Tokens long_doc(500, "w");
  const auto p = encode_pair(make_doc("1", {long_doc}, {"the", "w", "the"}), v);
  CHECK(p.source_ids.size() == 400);
  CHECK(p.source_positions.size() == 400);
  CHECK(p.source_positions.front() == 0);
  CHECK(p.source_positions.back() == 399);
  CHECK(p.target_ids == std::vector<int>{5, 4, 5, kEosId});

  const auto q = encode_pair(make_doc("2", {{"w"}}, {"the", "zebra"}), v);
  CHECK(q.target_ids == std::vector<int>{5, kUnkId, kEosId});

  const auto r = encode_pair(make_doc("3", {{"w"}}, Tokens(200, "w")), v);
  CHECK(r.target_ids.size() == 90);
  CHECK(r.target_ids.back() == kEosId);
  CHECK(std::count(r.target_ids.begin(), r.target_ids.end(), kPadId) == 0);

  CHECK(code_of([&] { encode_pair(make_doc("4", {}), v); }) == ErrorCode::kEmptySource);
  CHECK(code_of([&] { encode_pair(make_doc("5", {{}}), v); }) == ErrorCode::kEmptySource);
}

TEST_CASE("encoded pairs respect the length caps on the fixture corpus") {
  const auto docs = load_jsonl(XSF_FIXTURE_DIR "/xsum_fixture.jsonl");
  const Vocabulary v = build_vocab(docs, 200);
  for (const auto& d : docs) {
    const auto p = encode_pair(d, v);
    CHECK(p.source_ids.size() <= 400);
    CHECK(p.target_ids.size() <= 90);
    CHECK(p.target_ids.back() == kEosId);
    for (int id : p.source_ids) CHECK(id != kPadId);
  }
}

TEST_CASE("split_corpus is a deterministic 90/5/5 partition") {
  const auto docs = load_jsonl(XSF_FIXTURE_DIR "/xsum_fixture.jsonl");
  const auto s = split_corpus(docs, SplitRatios{}, 17);
  CHECK(s.train.size() == 90);
  CHECK(s.validation.size() == 5);
  CHECK(s.test.size() == 5);

  std::multiset<std::string> ids;
  for (const auto* part : {&s.train, &s.validation, &s.test}) {
    for (const auto& d : *part) ids.insert(d.id);
  }
  std::multiset<std::string> expected;
  for (const auto& d : docs) expected.insert(d.id);
  CHECK(ids == expected);

  const auto again = split_corpus(docs, SplitRatios{}, 17);
  for (size_t i = 0; i < s.test.size(); ++i) CHECK(again.test[i].id == s.test[i].id);

  std::vector<Document> reversed(docs.rbegin(), docs.rend());
  const auto rev = split_corpus(reversed, SplitRatios{}, 17);
  for (size_t i = 0; i < s.validation.size(); ++i) {
    CHECK(rev.validation[i].id == s.validation[i].id);
  }

  const auto other = split_corpus(docs, SplitRatios{}, 18);
  bool differs = false;
  for (size_t i = 0; i < s.test.size(); ++i) differs |= other.test[i].id != s.test[i].id;
  CHECK(differs);

  CHECK(code_of([&] { split_corpus(docs, SplitRatios{0.5, 0.2, 0.2}, 1); }) ==
        ErrorCode::kInvalidArgument);
}

TEST_CASE("jsonl round trip preserves documents") {
  const auto docs = load_jsonl(XSF_FIXTURE_DIR "/xsum_fixture.jsonl");
  const auto path = std::filesystem::temp_directory_path() / "xsf_corpus_rt.jsonl";
  save_jsonl(path.string(), docs);
  const auto back = load_jsonl(path.string());
  REQUIRE(back.size() == docs.size());
  for (size_t i = 0; i < docs.size(); ++i) {
    CHECK(back[i].id == docs[i].id);
    CHECK(back[i].sentences == docs[i].sentences);
    CHECK(back[i].summary == docs[i].summary);
  }
  std::filesystem::remove(path);

  const Document d = document_from_json_line(
      R"({"id": 7, "document": "First one. Second one.", "summary": "Short."})");
  CHECK(d.id == "7");
  CHECK(d.sentences.size() == 2);
  CHECK(d.summary == Tokens{"short", "."});
  CHECK(code_of([] { document_from_json_line("{\"id\": 1}"); }) ==
        ErrorCode::kFormatError);
  CHECK(code_of([] { document_from_json_line("not json"); }) == ErrorCode::kFormatError);
}

}  // namespace
}  // namespace xsf
