#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace mmssl {

using Vec = std::vector<double>;

/// Dense row-major matrix of doubles.
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Mat(std::size_t rows, std::size_t cols, std::vector<double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& values() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  Mat transposed() const;

  bool operator==(const Mat&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline constexpr double kZeroNormEps = 1e-12;

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> v);

/// Returns v / ||v||. Throws ZeroVector when ||v|| <= 1e-12.
Vec l2_normalize(std::span<const double> v);

/// Dot product of two unit vectors, clamped to [-1, 1].
double cosine_similarity(std::span<const double> u, std::span<const double> v);

/// C = A * B^T  (A: m x k, B: n x k).
Mat matmul_abt(const Mat& a, const Mat& b);

/// Stacks matrices with equal column counts on top of each other.
Mat vstack(std::span<const Mat* const> parts);

/// Copies rows [first, first + count) into a new matrix.
Mat row_slice(const Mat& m, std::size_t first, std::size_t count);

bool all_finite(std::span<const double> v);

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);

/// Deterministic random source. The engine is std::mt19937_64, whose output
/// sequence is fixed by the standard; the distributions below are written out
/// here because the std:: distributions are implementation-defined.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, bound). Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t bound);
  bool bernoulli(double p) { return uniform() < p; }
  /// Standard normal via Box-Muller; one cached spare value.
  double normal();
  double normal(double mean, double sigma) { return mean + sigma * normal(); }

  /// Independent child stream derived from this generator's next output.
  SeededRng split() { return SeededRng(mix(engine_())); }

  static std::uint64_t mix(std::uint64_t x);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

template <typename T>
void shuffle(std::vector<T>& items, SeededRng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace mmssl
