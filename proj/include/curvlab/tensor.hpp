#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace curvlab {

/// Dense covariant tensor of fixed rank over a single `dim`-dimensional space.
/// Storage is row-major in the slot order, so the last index varies fastest.
template <int Rank, class T = double>
class Tensor {
  static_assert(Rank >= 1, "rank must be positive");

 public:
  using value_type = T;
  static constexpr int rank = Rank;

  Tensor() = default;
  explicit Tensor(int dim) : dim_(dim), data_(size_for(dim), T(0)) {}

  int dim() const { return dim_; }
  std::size_t size() const { return data_.size(); }

  template <class... I>
  T& operator()(I... idx) {
    static_assert(sizeof...(I) == Rank, "index count must equal rank");
    return data_[offset({static_cast<int>(idx)...})];
  }
  template <class... I>
  const T& operator()(I... idx) const {
    static_assert(sizeof...(I) == Rank, "index count must equal rank");
    return data_[offset({static_cast<int>(idx)...})];
  }

  T& at(const std::array<int, Rank>& idx) { return data_[offset(idx)]; }
  const T& at(const std::array<int, Rank>& idx) const { return data_[offset(idx)]; }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }

  T max_abs() const {
    using std::abs;
    T m(0);
    for (const T& v : data_) {
      T a = abs(v);
      if (a > m) m = a;
    }
    return m;
  }

  Tensor& operator+=(const Tensor& o) {
    check_same(o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  Tensor& operator-=(const Tensor& o) {
    check_same(o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  Tensor& operator*=(const T& s) {
    for (T& v : data_) v *= s;
    return *this;
  }

  friend Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
  friend Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
  friend Tensor operator*(Tensor a, const T& s) { return a *= s; }
  friend Tensor operator*(const T& s, Tensor a) { return a *= s; }
  friend Tensor operator-(Tensor a) { return a *= T(-1); }

  bool operator==(const Tensor& o) const = default;

  /// Visits every multi-index in storage order.
  template <class F>
  void for_each_index(F&& f) const {
    std::array<int, Rank> idx{};
    const std::size_t total = data_.size();
    for (std::size_t flat = 0; flat < total; ++flat) {
      f(idx, data_[flat]);
      for (int s = Rank - 1; s >= 0; --s) {
        if (++idx[s] < dim_) break;
        idx[s] = 0;
      }
    }
  }

  /// Returns t' with t'(i_0, ..., i_{R-1}) = t(i_{perm[0]}, ..., i_{perm[R-1]}).
  Tensor permuted(const std::array<int, Rank>& perm) const {
    Tensor out(dim_);
    std::array<int, Rank> src{};
    out.for_each_index([&](const std::array<int, Rank>& idx, const T&) {
      for (int s = 0; s < Rank; ++s) src[s] = idx[perm[s]];
      out.at(idx) = at(src);
    });
    return out;
  }

  /// Pulls back every slot through the linear map M: t'(.., i, ..) = sum_a M(a, i) t(.., a, ..).
  /// `M` is any callable (row, col) -> T.
  template <class Map>
  Tensor pullback(const Map& M) const {
    Tensor cur = *this;
    for (int slot = 0; slot < Rank; ++slot) cur = cur.pullback_slot(slot, M);
    return cur;
  }

  template <class Map>
  Tensor pullback_slot(int slot, const Map& M) const {
    Tensor out(dim_);
    std::array<int, Rank> src{};
    out.for_each_index([&](const std::array<int, Rank>& idx, const T&) {
      src = idx;
      T acc(0);
      for (int a = 0; a < dim_; ++a) {
        const T m = M(a, idx[slot]);
        if (m == T(0)) continue;
        src[slot] = a;
        acc += m * at(src);
      }
      out.at(idx) = acc;
    });
    return out;
  }

  template <class U>
  Tensor<Rank, U> cast() const {
    Tensor<Rank, U> out(dim_);
    auto dst = out.data();
    for (std::size_t i = 0; i < data_.size(); ++i) dst[i] = static_cast<U>(data_[i]);
    return out;
  }

 private:
  static std::size_t size_for(int dim) {
    if (dim < 0) throw std::invalid_argument("tensor dimension must be non-negative");
    std::size_t s = 1;
    for (int r = 0; r < Rank; ++r) s *= static_cast<std::size_t>(dim);
    return s;
  }

  std::size_t offset(const std::array<int, Rank>& idx) const {
    std::size_t off = 0;
    for (int r = 0; r < Rank; ++r) off = off * static_cast<std::size_t>(dim_) + static_cast<std::size_t>(idx[r]);
    return off;
  }

  void check_same(const Tensor& o) const {
    if (o.dim_ != dim_) throw std::invalid_argument("tensor dimension mismatch");
  }

  int dim_ = 0;
  std::vector<T> data_;
};

}  // namespace curvlab
