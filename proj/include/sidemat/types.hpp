#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace sidemat {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Error hierarchy. Callers that only care about "bad input" can catch
// std::invalid_argument; the CLI maps these onto exit codes.
struct DomainError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct RankError : std::runtime_error {
  RankError(const std::string& what, Index achievable)
      : std::runtime_error(what), achievable_rank(achievable) {}
  Index achievable_rank;
};

struct ConditioningError : std::runtime_error {
  ConditioningError(const std::string& what, double cond)
      : std::runtime_error(what), condition_number(cond) {}
  double condition_number;
};

enum class MaskPattern { full, bernoulli, block, general };

inline const char* to_string(MaskPattern p) {
  switch (p) {
    case MaskPattern::full: return "full";
    case MaskPattern::bernoulli: return "bernoulli";
    case MaskPattern::block: return "block";
    case MaskPattern::general: return "general";
  }
  return "unknown";
}

/// Binary N x T observation indicator. A cell is observed iff its entry is 1.
struct ObservationMask {
  using Cells = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

  Cells cells;
  MaskPattern pattern = MaskPattern::general;

  static ObservationMask all(Index rows, Index cols) {
    return {Cells::Ones(rows, cols), MaskPattern::full};
  }

  Index rows() const { return cells.rows(); }
  Index cols() const { return cells.cols(); }
  bool observed(Index i, Index t) const { return cells(i, t) != 0; }

  Index count() const {
    Index n = 0;
    for (Index t = 0; t < cols(); ++t)
      for (Index i = 0; i < rows(); ++i) n += cells(i, t) != 0;
    return n;
  }

  bool complete() const { return count() == rows() * cols(); }

  /// Omega o Y. Unobserved cells become exactly zero whatever they held
  /// (including NaN), so they can never leak into downstream arithmetic.
  Matrix apply(const Matrix& y) const {
    if (y.rows() != rows() || y.cols() != cols())
      throw DimensionError("mask shape does not match matrix shape");
    Matrix out(y.rows(), y.cols());
    for (Index t = 0; t < cols(); ++t)
      for (Index i = 0; i < rows(); ++i)
        out(i, t) = cells(i, t) != 0 ? y(i, t) : 0.0;
    return out;
  }
};

/// Block-missing layout: rows 0..n0-1 are controls, columns 0..t0-1 are
/// pre-treatment; the cells {i >= n0} x {t >= t0} are the missing block.
struct BlockShape {
  Index n = 0;
  Index t = 0;
  Index n0 = 0;
  Index t0 = 0;

  void validate() const {
    if (!(n0 >= 1 && n0 < n && t0 >= 1 && t0 < t))
      throw DomainError("block shape requires 1 <= N0 < N and 1 <= T0 < T");
  }

  bool in_missing_block(Index i, Index c) const { return i >= n0 && c >= t0; }
};

inline bool all_finite(const Matrix& a) { return a.allFinite(); }

inline void require_finite(const Matrix& a, const char* what) {
  if (!a.allFinite())
    throw DomainError(std::string(what) + " contains non-finite entries");
}

}  // namespace sidemat
