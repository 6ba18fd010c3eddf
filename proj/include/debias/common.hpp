#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace debias {

/// Raised when caller-supplied input violates a documented precondition:
/// parameter ranges, malformed records, unknown models, bad weight tables.
/// The CLI maps this class to exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a dataset is too small or too degenerate for the requested
/// statistic (e.g. fewer than two labeled records, an empty stratum).
/// The CLI maps this class to exit code 3.
class StatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Number of proxy-only records available to an estimator.  The unlimited
/// regime (an effectively free judge) is a first-class value: analytic
/// formulas take well-defined limits there, so callers never have to fake
/// it with a huge finite count.
class ProxyCount {
 public:
  constexpr ProxyCount(std::uint64_t n) : value_(n), infinite_(false) {}

  static constexpr ProxyCount unlimited() {
    ProxyCount c(0);
    c.infinite_ = true;
    return c;
  }

  constexpr bool is_infinite() const { return infinite_; }

  constexpr std::uint64_t value() const {
    if (infinite_) throw ValidationError("ProxyCount: finite value required");
    return value_;
  }

  /// 1/N; 0 in the unlimited regime.
  constexpr double reciprocal() const {
    if (infinite_) return 0.0;
    if (value_ == 0) return std::numeric_limits<double>::infinity();
    return 1.0 / static_cast<double>(value_);
  }

  /// n/N; 0 in the unlimited regime, +inf when N == 0.
  constexpr double ratio_from(double n) const { return n * reciprocal(); }

 private:
  std::uint64_t value_;
  bool infinite_;
};

/// |a-b| <= tol * max(1, |a|, |b|): absolute near zero, relative elsewhere.
inline bool close(double a, double b, double tol) {
  const double scale = std::max({1.0, std::abs(a), std::abs(b)});
  return std::abs(a - b) <= tol * scale;
}

/// Strictly relative comparison for quantities with meaningful magnitude.
inline bool close_rel(double a, double b, double tol) {
  const double scale = std::max(std::abs(a), std::abs(b));
  if (scale == 0.0) return true;
  return std::abs(a - b) <= tol * scale;
}

inline double require_in(double v, double lo, double hi, const char* name) {
  if (!(v >= lo && v <= hi))
    throw ValidationError(std::string(name) + " must lie in [" +
                          std::to_string(lo) + ", " + std::to_string(hi) +
                          "], got " + std::to_string(v));
  return v;
}

inline double require_in_open(double v, double lo, double hi,
                              const char* name) {
  if (!(v > lo && v < hi))
    throw ValidationError(std::string(name) + " must lie strictly in (" +
                          std::to_string(lo) + ", " + std::to_string(hi) +
                          "), got " + std::to_string(v));
  return v;
}

}  // namespace debias
