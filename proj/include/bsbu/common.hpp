#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>

namespace bsbu {

// Error taxonomy shared by every module.
struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};
struct RangeError : std::out_of_range {
  using std::out_of_range::out_of_range;
};
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};
struct ConfigurationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SolverError : std::runtime_error {
  SolverError(const std::string& what, double residual)
      : std::runtime_error(what), residual(residual) {}
  double residual;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InternalError : std::logic_error {
  using std::logic_error::logic_error;
};

/// Fixed-capacity vector with inline storage. States and actions are tiny and
/// live on hot paths, so they never touch the heap.
template <class T, std::size_t N>
class SmallVec {
 public:
  using value_type = T;
  using iterator = T*;
  using const_iterator = const T*;

  constexpr SmallVec() = default;
  constexpr SmallVec(std::initializer_list<T> init) {
    if (init.size() > N) throw ValidationError("SmallVec: capacity exceeded");
    for (const T& v : init) data_[size_++] = v;
  }
  explicit SmallVec(std::span<const T> values) {
    if (values.size() > N) throw ValidationError("SmallVec: capacity exceeded");
    for (const T& v : values) data_[size_++] = v;
  }

  constexpr void push_back(const T& v) {
    if (size_ == N) throw ValidationError("SmallVec: capacity exceeded");
    data_[size_++] = v;
  }
  constexpr void clear() { size_ = 0; }

  constexpr std::size_t size() const { return size_; }
  constexpr bool empty() const { return size_ == 0; }
  static constexpr std::size_t capacity() { return N; }

  constexpr T& operator[](std::size_t i) { return data_[i]; }
  constexpr const T& operator[](std::size_t i) const { return data_[i]; }

  constexpr T* begin() { return data_.data(); }
  constexpr T* end() { return data_.data() + size_; }
  constexpr const T* begin() const { return data_.data(); }
  constexpr const T* end() const { return data_.data() + size_; }

  std::span<const T> span() const { return {data_.data(), size_}; }

  friend constexpr bool operator==(const SmallVec& a, const SmallVec& b) {
    return a.size_ == b.size_ && std::equal(a.begin(), a.end(), b.begin());
  }

 private:
  std::array<T, N> data_{};
  std::size_t size_ = 0;
};

inline double positive_part(double v) { return v > 0.0 ? v : 0.0; }

inline bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace bsbu
