# Copyright 2026 The XSumForge Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Brute-force corpus statistics, written without reference to the C++ code.

Usage: corpus_stats_oracle.py CORPUS.jsonl > expected.json

Tokenization: split on whitespace; peel ASCII punctuation off both ends one
character at a time; keep a final period on a word that already contains a
period (acronyms such as u.k.); lowercase. Each "document" list entry is one
sentence. Summary sentences are runs closed by . ? or ! plus any trailing
unterminated run. Novelty counts distinct n-grams. ROUGE-1/2 use clipped
n-gram counts, ROUGE-L the longest common subsequence. EXT-ORACLE keeps the
earliest sentence with the best mean of the three F1 scores.
"""

import json
import string
import sys
from collections import Counter

PUNCT = set(string.punctuation)


def tokenize(text):
    out = []
    for chunk in text.split():
        i = 0
        while i < len(chunk) and chunk[i] in PUNCT:
            out.append(chunk[i])
            i += 1
        if i == len(chunk):
            continue
        j = len(chunk)
        while j > i and chunk[j - 1] in PUNCT:
            j -= 1
        core = chunk[i:j].lower()
        if j < len(chunk) and chunk[j] == "." and "." in core:
            core += "."
            j += 1
        out.append(core)
        out.extend(chunk[j:])
    return out


def summary_sentences(tokens):
    n, open_run = 0, False
    for t in tokens:
        if t in (".", "?", "!"):
            n += 1
            open_run = False
        else:
            open_run = True
    return n + (1 if open_run else 0)


def grams(tokens, n):
    return [tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1)]


def novelty(summary, doc):
    out = []
    for n in range(1, 5):
        s = set(grams(summary, n))
        if not s:
            out.append(None)
            continue
        d = set(grams(doc, n))
        out.append(100.0 * len(s - d) / len(s))
    return out


def prf(overlap, c, r):
    p = overlap / c if c else 0.0
    rec = overlap / r if r else 0.0
    f = 2 * p * rec / (p + rec) if p + rec > 0 else 0.0
    return f


def lcs(a, b):
    table = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            if a[i - 1] == b[j - 1]:
                table[i][j] = table[i - 1][j - 1] + 1
            else:
                table[i][j] = max(table[i - 1][j], table[i][j - 1])
    return table[-1][-1]


def rouge_f1(cand, ref):
    scores = []
    for n in (1, 2):
        c, r = Counter(grams(cand, n)), Counter(grams(ref, n))
        overlap = sum(min(v, r[k]) for k, v in c.items())
        scores.append(prf(overlap, max(len(cand) - n + 1, 0),
                          max(len(ref) - n + 1, 0)))
    scores.append(prf(lcs(cand, ref), len(cand), len(ref)))
    return scores


def mean(xs):
    return sum(xs) / len(xs)


def system_row(outputs, refs, docs):
    r = [rouge_f1(outputs[i], refs[i]) for i in outputs]
    nov = [novelty(outputs[i], docs[i]) for i in outputs]
    row = {f"rouge{k}_f1": mean([x[j] for x in r])
           for j, k in enumerate(("1", "2", "L"))}
    row["novel_ngram_pct"] = {}
    for n in range(4):
        vals = [x[n] for x in nov if x[n] is not None]
        row["novel_ngram_pct"][str(n + 1)] = mean(vals) if vals else 0.0
    row["mean_length"] = mean([len(outputs[i]) for i in outputs])
    return row


def main(path):
    docs, refs, lead, oracle = {}, {}, {}, {}
    n_sent, n_tok, s_sent, s_tok = [], [], [], []
    dvocab, svocab = set(), set()
    gold_nov = []
    for line in open(path):
        rec = json.loads(line)
        sents = [t for t in (tokenize(s) for s in rec["document"]) if t]
        flat = [w for s in sents for w in s]
        summ = tokenize(rec["summary"])
        n_sent.append(len(sents))
        n_tok.append(len(flat))
        s_sent.append(summary_sentences(summ))
        s_tok.append(len(summ))
        dvocab.update(flat)
        svocab.update(summ)
        gold_nov.append(novelty(summ, flat))
        docs[rec["id"]], refs[rec["id"]] = flat, summ
        lead[rec["id"]] = sents[0]
        best, best_score = None, -1.0
        for s in sents:
            f = rouge_f1(s, summ)
            score = (f[0] + f[1] + f[2]) / 3.0
            if score > best_score:
                best, best_score = s, score
        oracle[rec["id"]] = best
    gold = {}
    for n in range(4):
        vals = [x[n] for x in gold_nov if x[n] is not None]
        gold[str(n + 1)] = mean(vals)
    out = {
        "documents": len(n_sent),
        "avg_document_sentences": mean(n_sent),
        "avg_document_words": mean(n_tok),
        "avg_summary_sentences": mean(s_sent),
        "avg_summary_words": mean(s_tok),
        "document_vocabulary": len(dvocab),
        "summary_vocabulary": len(svocab),
        "gold_novel_ngram_pct": gold,
        "lead": system_row(lead, refs, docs),
        "ext_oracle": system_row(oracle, refs, docs),
    }
    json.dump(out, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


if __name__ == "__main__":
    main(sys.argv[1])
