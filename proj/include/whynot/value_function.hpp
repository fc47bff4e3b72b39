#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "whynot/types.hpp"

namespace whynot {

/// Dense state-action table, one row per cell index.
template <typename Scalar>
class BasicValueTable {
 public:
  using Values = BasicActionValues<Scalar>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, kActionCount, Eigen::RowMajor>;

  BasicValueTable() = default;
  explicit BasicValueTable(Eigen::Index states, Scalar default_value = Scalar(0))
      : values_(Matrix::Constant(states, kActionCount, default_value)), default_(default_value) {}

  Eigen::Index state_count() const noexcept { return values_.rows(); }
  Scalar default_value() const noexcept { return default_; }

  Values values(StateKey s) const {
    if (!known(s)) return Values::Constant(default_);
    return values_.row(to_index(s));
  }
  Scalar value(StateKey s, Action a) const {
    return known(s) ? values_(to_index(s), to_index(a)) : default_;
  }
  void set(StateKey s, Action a, Scalar v) { values_(to_index(s), to_index(a)) = v; }

  void update_toward(StateKey s, Action a, Scalar target, Scalar alpha) {
    Scalar& q = values_(to_index(s), to_index(a));
    q += alpha * (target - q);
  }

  const Matrix& matrix() const noexcept { return values_; }
  Matrix& matrix() noexcept { return values_; }

  friend bool operator==(const BasicValueTable& a, const BasicValueTable& b) {
    return a.default_ == b.default_ && a.values_.rows() == b.values_.rows() &&
           a.values_ == b.values_;
  }

 private:
  bool known(StateKey s) const noexcept {
    return to_index(s) >= 0 && to_index(s) < values_.rows();
  }

  Matrix values_;
  Scalar default_ = Scalar(0);
};

/// One-hidden-layer network over one-hot (x, y) features, trained by a
/// semi-gradient step on 0.5 * (target - q)^2. States never updated report
/// the default value vector.
template <typename Scalar>
class BasicApproximator {
 public:
  using Values = BasicActionValues<Scalar>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  BasicApproximator() = default;
  BasicApproximator(int width, int height, int hidden, std::uint64_t seed)
      : width_(width),
        height_(height),
        w1_(hidden, width + height),
        b1_(Vector::Zero(hidden)),
        w2_(Matrix::Zero(kActionCount, hidden)),
        b2_(Vector::Zero(kActionCount)),
        visited_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0) {
    std::mt19937_64 rng(seed);
    const Scalar scale = Scalar(1) / std::sqrt(Scalar(2));
    for (Eigen::Index i = 0; i < w1_.size(); ++i) {
      const auto u = static_cast<Scalar>(static_cast<double>(rng() >> 11) * 0x1.0p-53);
      w1_.data()[i] = (Scalar(2) * u - Scalar(1)) * scale;
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int hidden() const noexcept { return static_cast<int>(w1_.rows()); }

  Values values(StateKey s) const {
    if (!visited(s)) return Values::Zero();
    const Vector h = hidden_activation(s);
    return (w2_ * h + b2_).transpose();
  }
  Scalar value(StateKey s, Action a) const { return values(s)(to_index(a)); }

  void update_toward(StateKey s, Action a, Scalar target, Scalar alpha) {
    if (!in_range(s)) return;
    visited_[static_cast<std::size_t>(to_index(s))] = 1;
    const Vector h = hidden_activation(s);
    const int ai = to_index(a);
    const Scalar q = w2_.row(ai).dot(h) + b2_(ai);
    const Scalar err = target - q;
    const Vector dh = (alpha * err * w2_.row(ai).transpose()).cwiseProduct(
        (Vector::Ones(h.size()) - h.cwiseProduct(h)));
    w2_.row(ai) += alpha * err * h.transpose();
    b2_(ai) += alpha * err;
    const auto [x, y] = coords(s);
    w1_.col(x) += dh;
    w1_.col(width_ + y) += dh;
    b1_ += dh;
  }

  const Matrix& w1() const noexcept { return w1_; }
  const Vector& b1() const noexcept { return b1_; }
  const Matrix& w2() const noexcept { return w2_; }
  const Vector& b2() const noexcept { return b2_; }
  const std::vector<std::uint8_t>& visited_mask() const noexcept { return visited_; }

  static BasicApproximator from_parts(int width, int height, Matrix w1, Vector b1, Matrix w2,
                                      Vector b2, std::vector<std::uint8_t> visited) {
    BasicApproximator a;
    a.width_ = width;
    a.height_ = height;
    a.w1_ = std::move(w1);
    a.b1_ = std::move(b1);
    a.w2_ = std::move(w2);
    a.b2_ = std::move(b2);
    a.visited_ = std::move(visited);
    return a;
  }

  friend bool operator==(const BasicApproximator& a, const BasicApproximator& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.w1_ == b.w1_ &&
           a.b1_ == b.b1_ && a.w2_ == b.w2_ && a.b2_ == b.b2_ && a.visited_ == b.visited_;
  }

 private:
  bool in_range(StateKey s) const noexcept {
    return to_index(s) >= 0 && static_cast<std::size_t>(to_index(s)) < visited_.size();
  }
  bool visited(StateKey s) const noexcept {
    return in_range(s) && visited_[static_cast<std::size_t>(to_index(s))] != 0;
  }
  std::pair<int, int> coords(StateKey s) const noexcept {
    return {to_index(s) % width_, to_index(s) / width_};
  }
  Vector hidden_activation(StateKey s) const {
    const auto [x, y] = coords(s);
    return (w1_.col(x) + w1_.col(width_ + y) + b1_).array().tanh().matrix();
  }

  int width_ = 0;
  int height_ = 0;
  Matrix w1_;
  Vector b1_;
  Matrix w2_;
  Vector b2_;
  std::vector<std::uint8_t> visited_;
};

/// State-action value function used both for the agent's Q and for each
/// influence predictor's U_c.
template <typename Scalar>
class BasicValueFunction {
 public:
  using Table = BasicValueTable<Scalar>;
  using Approximator = BasicApproximator<Scalar>;
  using Values = BasicActionValues<Scalar>;

  BasicValueFunction() = default;
  explicit BasicValueFunction(Table t) : backing_(std::move(t)) {}
  explicit BasicValueFunction(Approximator a) : backing_(std::move(a)) {}

  static BasicValueFunction table(Eigen::Index states, Scalar default_value = Scalar(0)) {
    return BasicValueFunction(Table(states, default_value));
  }
  static BasicValueFunction approximator(int width, int height, int hidden, std::uint64_t seed) {
    return BasicValueFunction(Approximator(width, height, hidden, seed));
  }

  Values values(StateKey s) const {
    return std::visit([&](const auto& b) -> Values { return b.values(s); }, backing_);
  }
  Scalar value(StateKey s, Action a) const {
    return std::visit([&](const auto& b) { return b.value(s, a); }, backing_);
  }
  Scalar max_value(StateKey s) const { return values(s).maxCoeff(); }
  Action greedy(StateKey s) const { return greedy_action(values(s)); }

  void update_toward(StateKey s, Action a, Scalar target, Scalar alpha) {
    std::visit([&](auto& b) { b.update_toward(s, a, target, alpha); }, backing_);
  }

  bool is_table() const noexcept { return std::holds_alternative<Table>(backing_); }
  const Table* as_table() const noexcept { return std::get_if<Table>(&backing_); }
  Table* as_table() noexcept { return std::get_if<Table>(&backing_); }
  const Approximator* as_approximator() const noexcept { return std::get_if<Approximator>(&backing_); }

  friend bool operator==(const BasicValueFunction&, const BasicValueFunction&) = default;

 private:
  std::variant<Table, Approximator> backing_;
};

using ValueTable = BasicValueTable<double>;
using Approximator = BasicApproximator<double>;
using ValueFunction = BasicValueFunction<double>;

}  // namespace whynot
