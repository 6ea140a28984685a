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

#ifndef XSUMFORGE_COMMON_H_
#define XSUMFORGE_COMMON_H_

#include <cstdint>
#include <cstddef>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace xsf {

enum class ErrorCode {
  kMissingSummaryClass,
  kEmptySource,
  kEmptyCorpus,
  kShapeMismatch,
  kOddWidth,
  kIndexOutOfVocab,
  kDetachedTensor,
  kPositionOverflow,
  kEmptyValidationSet,
  kEmptyReference,
  kEmptyDocument,
  kMissingReference,
  kInvalidArgument,
  kIoError,
  kFormatError,
};

std::string_view error_code_name(ErrorCode code);

// Every failure raised by the library carries one of the codes above so
// callers (and the CLI exit-code mapping) can branch on it.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

// Seeded generator with platform-independent derived distributions. The
// engine's raw sequence is fixed by the standard; the std:: distributions
// are not, so the conversions below are spelled out.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : engine_(mix(seed)) {}

  uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n); n > 0.
  uint64_t uniform_int(uint64_t n) {
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  double normal();

  static uint64_t mix(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// 64-bit FNV-1a.
uint64_t fnv1a(std::string_view s);

// Worker count: XSUMFORGE_THREADS if set and positive, else hardware
// concurrency (at least 1).
int worker_threads();

// Runs fn(i) for i in [0, n) over worker_threads() threads. fn must only
// write to slots owned by index i.
void parallel_for(size_t n, const std::function<void(size_t)>& fn);

}  // namespace xsf

#endif  // XSUMFORGE_COMMON_H_
