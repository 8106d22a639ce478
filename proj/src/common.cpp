#include "pupillo/error.hpp"
#include "pupillo/log.hpp"
#include "pupillo/rng.hpp"

#include <atomic>
#include <cmath>
#include <iostream>
#include <mutex>

namespace pupillo {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::RejectedBySolidity: return "RejectedBySolidity";
    case ErrorCode::RejectedByAspect: return "RejectedByAspect";
    case ErrorCode::NonSquareInput: return "NonSquareInput";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
    case ErrorCode::SingularTransform: return "SingularTransform";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::UnsupportedOp: return "UnsupportedOp";
    case ErrorCode::UnknownLabel: return "UnknownLabel";
    case ErrorCode::MissingRegion: return "MissingRegion";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::GeometryViolation: return "GeometryViolation";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::DivergenceDetected: return "DivergenceDetected";
    case ErrorCode::NonMonotoneTime: return "NonMonotoneTime";
    case ErrorCode::NoBaseline: return "NoBaseline";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message,
             std::optional<double> value)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code),
      value_(value) {}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed,
                          std::initializer_list<std::uint64_t> streams) {
  std::uint64_t h = splitmix64(seed);
  for (std::uint64_t s : streams) h = splitmix64(h ^ splitmix64(s + 1));
  return h;
}

double Rng::uniform(double lo, double hi) {
  // 53 random bits -> [0, 1]
  const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

double Rng::normal() {
  constexpr double kTwoPi = 6.283185307179586;
  double u1 = uniform(0.0, 1.0);
  while (u1 <= 0.0) u1 = uniform(0.0, 1.0);
  const double u2 = uniform(0.0, 1.0);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

std::size_t Rng::index(std::size_t n) {
  if (n <= 1) return 0;
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t r = engine_();
  while (r >= limit) r = engine_();
  return static_cast<std::size_t>(r % n);
}

namespace log {
namespace {
std::atomic<Level> g_level{Level::Info};
std::mutex g_mutex;
}  // namespace

void set_level(Level level) { g_level = level; }
Level level() { return g_level; }

void write(Level lvl, std::string_view message) {
  if (lvl < g_level.load() || lvl == Level::Off) return;
  static constexpr const char* kNames[] = {"debug", "info", "warn", "error"};
  const std::lock_guard lock(g_mutex);
  std::cerr << '[' << kNames[static_cast<int>(lvl)] << "] " << message << '\n';
}
}  // namespace log

}  // namespace pupillo
