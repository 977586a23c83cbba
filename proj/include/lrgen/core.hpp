#pragma once

// Shared plumbing: error taxonomy, deterministic RNG derivation, invariants.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <stdexcept>
#include <string>

namespace lrgen {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InfeasibleInstance : Error { using Error::Error; };
struct MaskedAction : Error { using Error::Error; };
struct InfeasiblePlan : Error { using Error::Error; };
struct MalformedTrace : Error { using Error::Error; };
struct TooLarge : Error { using Error::Error; };
struct ShapeMismatch : Error { using Error::Error; };
struct AllMasked : Error { using Error::Error; };
struct SingularFactor : Error { using Error::Error; };
struct DimensionMismatch : Error { using Error::Error; };
struct UnsupportedDialect : Error { using Error::Error; };

struct ParseError : Error {
  int line = 0;
  int column = 0;
  explicit ParseError(const std::string& msg) : Error(msg) {}
  ParseError(const std::string& msg, int line_, int column_)
      : Error(msg + " (line " + std::to_string(line_) + ", column " +
              std::to_string(column_) + ")"),
        line(line_),
        column(column_) {}
};

// Internal invariant violations are bugs, not user errors: diagnose and abort.
[[noreturn]] inline void invariant_failure(const char* what) {
  std::fprintf(stderr, "internal invariant violated: %s\n", what);
  std::abort();
}

inline void invariant(bool ok, const char* what) {
  if (!ok) invariant_failure(what);
}

// splitmix64 finalizer; decorrelates numerically adjacent seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Independent generator for (seed, stream); streams never collide for a
// fixed seed, and runs are reproducible across platforms.
inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  return std::mt19937_64(mix_seed(seed + mix_seed(stream)));
}

// FNV-1a over raw bytes; used for instance/parameter fingerprints.
inline std::uint64_t fnv1a(const void* data, std::size_t len,
                           std::uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

}  // namespace lrgen
