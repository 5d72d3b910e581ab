#include "mmssl/linalg.hpp"

#include <algorithm>
#include <cassert>
#include <charconv>
#include <cmath>
#include <string>

#include "mmssl/error.hpp"

namespace mmssl {

Mat::Mat(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
  if (data_.size() != rows * cols) {
    throw Error(ErrorCode::ShapeMismatch, "matrix " + std::to_string(rows) + "x" +
                                              std::to_string(cols) + " given " +
                                              std::to_string(data_.size()) + " values");
  }
}

Mat Mat::transposed() const {
  Mat t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

Vec l2_normalize(std::span<const double> v) {
  const double n = norm2(v);
  if (!(n > kZeroNormEps)) throw Error(ErrorCode::ZeroVector, "norm " + std::to_string(n));
  Vec out(v.begin(), v.end());
  for (double& x : out) x /= n;
  return out;
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  const double s = dot(u, v);
#ifndef NDEBUG
  assert(std::abs(dot(u, u) - 1.0) < 1e-6 && std::abs(dot(v, v) - 1.0) < 1e-6);
#endif
  return std::clamp(s, -1.0, 1.0);
}

Mat matmul_abt(const Mat& a, const Mat& b) {
  if (a.cols() != b.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "inner dims " + std::to_string(a.cols()) +
                                                  " vs " + std::to_string(b.cols()));
  }
  Mat c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto ai = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const auto bj = b.row(j);
      double s = 0.0;
      for (std::size_t k = 0; k < ai.size(); ++k) s += ai[k] * bj[k];
      c(i, j) = s;
    }
  }
  return c;
}

Mat vstack(std::span<const Mat* const> parts) {
  std::size_t rows = 0;
  const std::size_t cols = parts.empty() ? 0 : parts.front()->cols();
  for (const Mat* p : parts) {
    if (p->cols() != cols) throw Error(ErrorCode::DimensionMismatch, "vstack column count");
    rows += p->rows();
  }
  std::vector<double> values;
  values.reserve(rows * cols);
  for (const Mat* p : parts) values.insert(values.end(), p->values().begin(), p->values().end());
  return Mat(rows, cols, std::move(values));
}

Mat row_slice(const Mat& m, std::size_t first, std::size_t count) {
  if (first + count > m.rows()) throw Error(ErrorCode::IndexOutOfRange, "row slice");
  const auto begin = m.values().begin() + static_cast<std::ptrdiff_t>(first * m.cols());
  return Mat(count, m.cols(),
             std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(count * m.cols())));
}

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general);
  return std::string(buf, res.ptr);
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

std::uint64_t SeededRng::below(std::uint64_t bound) {
  if (bound == 0) return 0;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return x % bound;
}

double SeededRng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // 1 - uniform() lies in (0, 1], so the log is finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

// SplitMix64 finalizer.
std::uint64_t SeededRng::mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace mmssl
