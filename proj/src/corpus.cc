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

#include "xsumforge/corpus.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <utility>

#include "json.hpp"
#include "xsumforge/common.h"

namespace xsf {

namespace {

constexpr std::string_view kSummaryClass = "story-body__introduction";

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

bool is_punct(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u < 0x80 && !std::isalnum(u) && !is_space(c);
}

char lower(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = lower(c);
  return out;
}

// --- HTML scanning -------------------------------------------------------

struct Tag {
  std::string name;
  std::string attrs;
  bool closing = false;
  bool self_closing = false;
};

bool is_void_element(std::string_view name) {
  static constexpr std::string_view kVoid[] = {
      "area", "base", "br", "col", "embed", "hr", "img", "input",
      "link", "meta", "param", "source", "track", "wbr"};
  return std::find(std::begin(kVoid), std::end(kVoid), name) !=
         std::end(kVoid);
}

bool is_hidden_element(std::string_view name) {
  return name == "script" || name == "style" || name == "head" ||
         name == "title" || name == "noscript" || name == "template";
}

bool is_block_element(std::string_view name) {
  static constexpr std::string_view kBlock[] = {
      "p", "div", "br", "li", "ul", "ol", "h1", "h2", "h3", "h4", "h5",
      "h6", "section", "article", "blockquote", "tr", "table", "figure",
      "figcaption", "header", "footer", "main", "aside", "nav", "pre"};
  return std::find(std::begin(kBlock), std::end(kBlock), name) !=
         std::end(kBlock);
}

void append_utf8(std::string& out, long cp) {
  if (cp > 0 && cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp >= 0x80 && cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp >= 0x800 && cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

long named_entity(std::string_view name) {
  static constexpr std::pair<std::string_view, long> kNamed[] = {
      {"amp", '&'},       {"lt", '<'},        {"gt", '>'},
      {"quot", '"'},      {"apos", '\''},     {"nbsp", ' '},
      {"pound", 0xA3},    {"euro", 0x20AC},   {"copy", 0xA9},
      {"ndash", 0x2013},  {"mdash", 0x2014},  {"lsquo", 0x2018},
      {"rsquo", 0x2019},  {"ldquo", 0x201C},  {"rdquo", 0x201D},
      {"hellip", 0x2026}, {"eacute", 0xE9},   {"deg", 0xB0}};
  for (const auto& [n, cp] : kNamed) {
    if (n == name) return cp;
  }
  return -1;
}

std::string decode_entities(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '&') {
      out.push_back(s[i]);
      continue;
    }
    const size_t semi = s.find(';', i);
    if (semi == std::string_view::npos || semi - i > 10) {
      out.push_back('&');
      continue;
    }
    const std::string_view ent = s.substr(i + 1, semi - i - 1);
    long cp = -1;
    if (!ent.empty() && ent[0] == '#') {
      try {
        cp = (ent.size() > 1 && (ent[1] == 'x' || ent[1] == 'X'))
                 ? std::stol(std::string(ent.substr(2)), nullptr, 16)
                 : std::stol(std::string(ent.substr(1)));
      } catch (...) {
        cp = -1;
      }
    } else {
      cp = named_entity(ent);
    }
    std::string rep;
    append_utf8(rep, cp);
    if (rep.empty()) {
      out.push_back('&');
      continue;
    }
    out += rep;
    i = semi;
  }
  return out;
}

// Parses the tag starting at html[pos] == '<'. Returns the index one past
// '>' or npos when the tag never closes.
size_t parse_tag(std::string_view html, size_t pos, Tag& tag) {
  size_t i = pos + 1;
  tag = Tag{};
  if (i < html.size() && html[i] == '/') {
    tag.closing = true;
    ++i;
  }
  const size_t name_start = i;
  while (i < html.size() && !is_space(html[i]) && html[i] != '>' &&
         html[i] != '/') {
    ++i;
  }
  tag.name = to_lower(html.substr(name_start, i - name_start));
  const size_t attr_start = i;
  char quote = 0;
  for (; i < html.size(); ++i) {
    const char c = html[i];
    if (quote) {
      if (c == quote) quote = 0;
    } else if (c == '"' || c == '\'') {
      quote = c;
    } else if (c == '>') {
      break;
    }
  }
  if (i >= html.size()) return std::string_view::npos;
  std::string_view attrs = html.substr(attr_start, i - attr_start);
  while (!attrs.empty() && is_space(attrs.back())) attrs.remove_suffix(1);
  if (!attrs.empty() && attrs.back() == '/') {
    tag.self_closing = true;
    attrs.remove_suffix(1);
  }
  tag.attrs = std::string(attrs);
  return i + 1;
}

std::string class_attribute(std::string_view attrs) {
  size_t i = 0;
  while (i < attrs.size()) {
    while (i < attrs.size() && is_space(attrs[i])) ++i;
    const size_t name_start = i;
    while (i < attrs.size() && !is_space(attrs[i]) && attrs[i] != '=') ++i;
    const std::string name =
        to_lower(attrs.substr(name_start, i - name_start));
    while (i < attrs.size() && is_space(attrs[i])) ++i;
    std::string value;
    if (i < attrs.size() && attrs[i] == '=') {
      ++i;
      while (i < attrs.size() && is_space(attrs[i])) ++i;
      if (i < attrs.size() && (attrs[i] == '"' || attrs[i] == '\'')) {
        const char q = attrs[i++];
        const size_t end = attrs.find(q, i);
        const size_t stop = end == std::string_view::npos ? attrs.size() : end;
        value = std::string(attrs.substr(i, stop - i));
        i = stop + 1;
      } else {
        const size_t vstart = i;
        while (i < attrs.size() && !is_space(attrs[i])) ++i;
        value = std::string(attrs.substr(vstart, i - vstart));
      }
    }
    if (name == "class") return value;
    if (i == name_start) ++i;
  }
  return {};
}

bool has_summary_class(std::string_view attrs) {
  const std::string cls = class_attribute(attrs);
  std::istringstream in(cls);
  std::string word;
  while (in >> word) {
    if (word == kSummaryClass) return true;
  }
  return false;
}

// Collapses whitespace runs within lines and drops blank lines.
std::string normalize_block_text(std::string_view text) {
  std::string out;
  std::string line;
  auto flush = [&] {
    while (!line.empty() && line.back() == ' ') line.pop_back();
    if (!line.empty()) {
      if (!out.empty()) out.push_back('\n');
      out += line;
    }
    line.clear();
  };
  for (char c : text) {
    if (c == '\n') {
      flush();
    } else if (is_space(c)) {
      if (!line.empty() && line.back() != ' ') line.push_back(' ');
    } else {
      line.push_back(c);
    }
  }
  flush();
  return out;
}

std::string collapse_spaces(std::string_view text) {
  std::string out;
  for (char c : text) {
    if (is_space(c)) {
      if (!out.empty() && out.back() != ' ') out.push_back(' ');
    } else {
      out.push_back(c);
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

}  // namespace

Tokens Document::flat_tokens() const {
  Tokens out;
  out.reserve(num_tokens());
  for (const auto& s : sentences) out.insert(out.end(), s.begin(), s.end());
  return out;
}

size_t Document::num_tokens() const {
  size_t n = 0;
  for (const auto& s : sentences) n += s.size();
  return n;
}

HtmlExtraction extract_summary(std::string_view html) {
  struct Open {
    std::string name;
    bool summary;
    bool hidden;
  };
  std::vector<Open> stack;
  std::vector<std::string> pieces;
  std::string current_summary;
  std::string body;
  int summary_depth = 0;
  int hidden_depth = 0;

  size_t i = 0;
  while (i < html.size()) {
    if (html[i] != '<') {
      const size_t next = std::min(html.find('<', i), html.size());
      const std::string text = decode_entities(html.substr(i, next - i));
      if (hidden_depth == 0) {
        if (summary_depth > 0) {
          current_summary += text;
        } else {
          body += text;
        }
      }
      i = next;
      continue;
    }
    if (html.compare(i, 4, "<!--") == 0) {
      const size_t end = html.find("-->", i + 4);
      i = end == std::string_view::npos ? html.size() : end + 3;
      continue;
    }
    if (i + 1 < html.size() && (html[i + 1] == '!' || html[i + 1] == '?')) {
      const size_t end = html.find('>', i);
      i = end == std::string_view::npos ? html.size() : end + 1;
      continue;
    }
    Tag tag;
    const size_t after = parse_tag(html, i, tag);
    if (after == std::string_view::npos) break;
    i = after;
    if (tag.name.empty()) continue;

    if (!tag.closing) {
      if (is_block_element(tag.name) && summary_depth == 0) body += '\n';
      if (tag.self_closing || is_void_element(tag.name)) continue;
      const bool summary = summary_depth == 0 && has_summary_class(tag.attrs);
      const bool hidden = is_hidden_element(tag.name);
      stack.push_back({tag.name, summary, hidden});
      if (summary) summary_depth = 1;
      else if (summary_depth > 0) ++summary_depth;
      if (hidden) ++hidden_depth;
      continue;
    }

    // Closing tag: pop to the nearest matching open element.
    auto it = std::find_if(stack.rbegin(), stack.rend(),
                           [&](const Open& o) { return o.name == tag.name; });
    if (it == stack.rend()) continue;
    const size_t keep = stack.size() - 1 - (it - stack.rbegin());
    while (stack.size() > keep) {
      const Open top = stack.back();
      stack.pop_back();
      if (top.hidden) --hidden_depth;
      if (summary_depth > 0) {
        --summary_depth;
        if (top.summary) {
          summary_depth = 0;
          const std::string piece = collapse_spaces(current_summary);
          if (!piece.empty()) pieces.push_back(piece);
          current_summary.clear();
        }
      }
    }
    if (is_block_element(tag.name) && summary_depth == 0) body += '\n';
  }
  if (summary_depth > 0) {
    const std::string piece = collapse_spaces(current_summary);
    if (!piece.empty()) pieces.push_back(piece);
  }
  if (pieces.empty()) {
    throw Error(ErrorCode::kMissingSummaryClass,
                "no element with class story-body__introduction");
  }
  HtmlExtraction out;
  for (const auto& p : pieces) {
    if (!out.summary_text.empty()) out.summary_text += ' ';
    out.summary_text += p;
  }
  out.body_text = normalize_block_text(body);
  return out;
}

Tokens tokenize(std::string_view text) {
  Tokens out;
  size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    const size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (start == i) break;
    const std::string_view chunk = text.substr(start, i - start);

    size_t lead = 0;
    while (lead < chunk.size() && is_punct(chunk[lead])) {
      out.emplace_back(1, chunk[lead]);
      ++lead;
    }
    if (lead == chunk.size()) continue;
    size_t trail = chunk.size();
    while (trail > lead && is_punct(chunk[trail - 1])) --trail;
    std::string core = to_lower(chunk.substr(lead, trail - lead));
    if (trail < chunk.size() && chunk[trail] == '.' &&
        core.find('.') != std::string::npos) {
      core.push_back('.');
      ++trail;
    }
    out.push_back(std::move(core));
    for (size_t j = trail; j < chunk.size(); ++j) out.emplace_back(1, chunk[j]);
  }
  return out;
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  auto emit = [&](size_t from, size_t to) {
    const std::string s = collapse_spaces(text.substr(from, to - from));
    if (!s.empty()) out.push_back(s);
  };
  size_t start = 0;
  for (size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '\n') {
      emit(start, i);
      start = i + 1;
      continue;
    }
    if ((c == '.' || c == '?' || c == '!') && i + 1 < text.size() &&
        is_space(text[i + 1]) && text[i + 1] != '\n') {
      size_t j = i + 1;
      while (j < text.size() && is_space(text[j]) && text[j] != '\n') ++j;
      if (j < text.size() && text[j] >= 'A' && text[j] <= 'Z') {
        emit(start, i + 1);
        start = j;
        i = j - 1;
      }
    }
  }
  emit(start, text.size());
  return out;
}

std::vector<Tokens> tokenize_sentences(std::string_view text) {
  std::vector<Tokens> out;
  for (const auto& s : split_sentences(text)) {
    Tokens t = tokenize(s);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

Vocabulary::Vocabulary() {
  for (std::string_view s : {kPadToken, kBosToken, kEosToken, kUnkToken}) {
    add(std::string(s));
  }
}

int Vocabulary::id(std::string_view token) const {
  const auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? kUnkId : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return token_to_id_.count(std::string(token)) > 0;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) {
    throw Error(ErrorCode::kIndexOutOfVocab,
                "token id " + std::to_string(id) + " outside vocabulary");
  }
  return id_to_token_[id];
}

std::vector<int> Vocabulary::encode(const Tokens& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

Tokens Vocabulary::decode(std::span<const int> ids) const {
  Tokens out;
  out.reserve(ids.size());
  for (int i : ids) out.push_back(token(i));
  return out;
}

int Vocabulary::add(const std::string& token) {
  if (const auto it = token_to_id_.find(token); it != token_to_id_.end()) {
    return it->second;
  }
  const int id = size();
  token_to_id_.emplace(token, id);
  id_to_token_.push_back(token);
  return id;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path);
  for (int i = 0; i < size(); ++i) out << id_to_token_[i] << '\t' << i << '\n';
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path);
  Vocabulary v;
  std::string line;
  int expected = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const size_t tab = line.rfind('\t');
    if (tab == std::string::npos) {
      throw Error(ErrorCode::kFormatError, "vocab line without tab: " + line);
    }
    const std::string token = line.substr(0, tab);
    const int id = std::stoi(line.substr(tab + 1));
    if (id != expected) {
      throw Error(ErrorCode::kFormatError,
                  "vocab ids must be dense and ordered at line for " + token);
    }
    ++expected;
    if (id < kNumSpecials) {
      if (v.token(id) != token) {
        throw Error(ErrorCode::kFormatError, "unexpected special " + token);
      }
      continue;
    }
    if (v.add(token) != id) {
      throw Error(ErrorCode::kFormatError, "duplicate vocab token " + token);
    }
  }
  return v;
}

Vocabulary build_vocab(std::span<const Document> corpus, int cap) {
  if (cap < kNumSpecials) {
    throw Error(ErrorCode::kInvalidArgument, "vocab cap must be >= 4");
  }
  std::unordered_map<std::string, int64_t> counts;
  for (const auto& doc : corpus) {
    for (const auto& s : doc.sentences) {
      for (const auto& t : s) ++counts[t];
    }
    for (const auto& t : doc.summary) ++counts[t];
  }
  std::vector<std::pair<std::string, int64_t>> ranked(counts.begin(),
                                                      counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocabulary vocab;
  for (const auto& [token, count] : ranked) {
    if (vocab.size() >= cap) break;
    if (vocab.contains(token)) continue;  // a corpus token spelled like a special
    vocab.add(token);
  }
  return vocab;
}

EncodedPair encode_pair(const Document& doc, const Vocabulary& vocab) {
  EncodedPair pair;
  pair.id = doc.id;
  for (const auto& s : doc.sentences) {
    for (const auto& t : s) {
      if (static_cast<int>(pair.source_ids.size()) == kMaxSourceTokens) break;
      pair.source_ids.push_back(vocab.id(t));
    }
  }
  if (pair.source_ids.empty()) {
    throw Error(ErrorCode::kEmptySource, "document '" + doc.id + "' is empty");
  }
  pair.source_positions.resize(pair.source_ids.size());
  for (size_t i = 0; i < pair.source_positions.size(); ++i) {
    pair.source_positions[i] = static_cast<int>(i);
  }
  for (const auto& t : doc.summary) {
    if (static_cast<int>(pair.target_ids.size()) == kMaxTargetTokens - 1) break;
    pair.target_ids.push_back(vocab.id(t));
  }
  pair.target_ids.push_back(kEosId);
  return pair;
}

CorpusSplit split_corpus(std::span<const Document> docs,
                         const SplitRatios& ratios, uint64_t seed) {
  if (ratios.train < 0 || ratios.validation < 0 || ratios.test < 0 ||
      std::abs(ratios.train + ratios.validation + ratios.test - 1.0) > 1e-9) {
    throw Error(ErrorCode::kInvalidArgument, "split ratios must sum to 1");
  }
  const uint64_t salt = Rng::mix(seed);
  std::vector<std::pair<uint64_t, size_t>> keyed;
  keyed.reserve(docs.size());
  for (size_t i = 0; i < docs.size(); ++i) {
    keyed.emplace_back(Rng::mix(fnv1a(docs[i].id) ^ salt), i);
  }
  std::sort(keyed.begin(), keyed.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return docs[a.second].id < docs[b.second].id;
  });
  const size_t n = docs.size();
  const size_t n_train =
      std::min<size_t>(n, std::llround(ratios.train * static_cast<double>(n)));
  const size_t n_val = std::min<size_t>(
      n - n_train, std::llround(ratios.validation * static_cast<double>(n)));
  CorpusSplit split;
  for (size_t r = 0; r < n; ++r) {
    const Document& d = docs[keyed[r].second];
    if (r < n_train) split.train.push_back(d);
    else if (r < n_train + n_val) split.validation.push_back(d);
    else split.test.push_back(d);
  }
  return split;
}

Document document_from_json_line(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormatError, e.what());
  }
  if (!j.is_object() || !j.contains("id") || !j.contains("document")) {
    throw Error(ErrorCode::kFormatError,
                "corpus record needs \"id\" and \"document\"");
  }
  Document doc;
  doc.id = j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
  const auto& body = j["document"];
  std::string raw;
  if (body.is_array()) {
    for (const auto& s : body) {
      const std::string text = s.get<std::string>();
      if (!raw.empty()) raw += '\n';
      raw += text;
      Tokens t = tokenize(text);
      if (!t.empty()) doc.sentences.push_back(std::move(t));
    }
  } else if (body.is_string()) {
    raw = body.get<std::string>();
    doc.sentences = tokenize_sentences(raw);
  } else {
    throw Error(ErrorCode::kFormatError, "\"document\" must be list or string");
  }
  doc.raw_text = raw;
  if (j.contains("summary") && j["summary"].is_string()) {
    doc.summary = tokenize(j["summary"].get<std::string>());
  }
  return doc;
}

std::string join_tokens(const Tokens& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

std::string document_to_json_line(const Document& doc) {
  nlohmann::json j;
  j["id"] = doc.id;
  nlohmann::json sents = nlohmann::json::array();
  for (const auto& s : doc.sentences) sents.push_back(join_tokens(s));
  j["document"] = std::move(sents);
  j["summary"] = join_tokens(doc.summary);
  return j.dump();
}

std::vector<Document> load_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path);
  std::vector<Document> docs;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      docs.push_back(document_from_json_line(line));
    } catch (const Error& e) {
      throw Error(e.code(), path + ":" + std::to_string(lineno) + ": " +
                                e.what());
    }
  }
  return docs;
}

void save_jsonl(const std::string& path, std::span<const Document> docs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path);
  for (const auto& d : docs) out << document_to_json_line(d) << '\n';
}

}  // namespace xsf
