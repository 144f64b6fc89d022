#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cyclet/errors.hpp"

namespace cyclet {

using Shape = std::vector<int>;

inline std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

/// Storage behind a Tensor handle. Values are row-major doubles; grad is the
/// same-length accumulation buffer, zero after creation and after zero_grad.
struct TensorData {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;
  std::uint64_t tape_serial = 0;  // 0 for leaves
  int node = -1;                  // index of the producing op on that tape

  std::int64_t size() const { return static_cast<std::int64_t>(values.size()); }
};

/// Dense N-d tensor with shared storage. Copying a Tensor aliases the data;
/// op outputs are never mutated after creation except for grad accumulation.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape) {
    auto n = shape_numel(shape);
    if (n < 0) throw ShapeError("tensor: negative extent in shape " + shape_str(shape));
    auto d = std::make_shared<TensorData>();
    d->shape = std::move(shape);
    d->values.assign(static_cast<std::size_t>(n), 0.0);
    d->grad.assign(static_cast<std::size_t>(n), 0.0);
    return Tensor(std::move(d));
  }

  static Tensor full(Shape shape, double v) {
    Tensor t = zeros(std::move(shape));
    for (double& x : t.data_->values) x = v;
    return t;
  }

  static Tensor from_values(Shape shape, std::vector<double> values) {
    auto n = shape_numel(shape);
    if (n != static_cast<std::int64_t>(values.size()))
      throw ShapeError("tensor: shape " + shape_str(shape) + " does not match " +
                       std::to_string(values.size()) + " values");
    Tensor t = zeros(std::move(shape));
    t.data_->values = std::move(values);
    return t;
  }

  static Tensor scalar(double v) { return from_values({1}, {v}); }

  bool defined() const { return data_ != nullptr; }
  const Shape& shape() const { return data_->shape; }
  std::int64_t size() const { return data_->size(); }
  bool is_scalar() const { return data_ && data_->size() == 1; }

  std::span<const double> values() const { return data_->values; }
  std::span<double> values_mut() { return data_->values; }
  std::span<const double> grad() const { return data_->grad; }
  std::span<double> grad_mut() { return data_->grad; }

  double item() const {
    if (!is_scalar()) throw ShapeError("item: tensor is not scalar, shape " + shape_str(shape()));
    return data_->values[0];
  }

  void zero_grad() { std::fill(data_->grad.begin(), data_->grad.end(), 0.0); }

  bool is_leaf() const { return data_->tape_serial == 0; }

  /// Leaf copy of the values; no connection to any tape.
  Tensor detach() const {
    Tensor t = zeros(shape());
    t.data_->values = data_->values;
    return t;
  }

  const std::shared_ptr<TensorData>& data() const { return data_; }

 private:
  explicit Tensor(std::shared_ptr<TensorData> d) : data_(std::move(d)) {}
  friend class Tape;

  std::shared_ptr<TensorData> data_;
};

/// Recorded define-by-run computation. A Tape is pushed as the active tape on
/// construction and popped on destruction; ops record onto the innermost
/// active tape, or run value-only when none is active (see NoTape).
///
/// A tensor produced by an earlier, different tape participates in the
/// current tape as a leaf: gradient accumulates into it but does not flow
/// further back. Training code detaches explicitly where that matters.
class Tape {
 public:
  Tape() : serial_(next_serial()) { stack().push_back(this); }
  ~Tape() { stack().pop_back(); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* current() {
    auto& s = stack();
    return s.empty() ? nullptr : s.back();
  }

  void record(const char* op_name, std::vector<std::shared_ptr<TensorData>> inputs,
              const std::shared_ptr<TensorData>& output, std::function<void()> backward) {
    output->tape_serial = serial_;
    output->node = static_cast<int>(nodes_.size());
    nodes_.push_back(Node{std::move(inputs), output, std::move(backward), op_name});
  }

  std::size_t size() const { return nodes_.size(); }

  /// Reverse-mode sweep from a scalar loss recorded on this tape. Visits each
  /// reachable node exactly once, in reverse recording order. Leaf gradients
  /// accumulate additively across backward calls; gradients of intermediate
  /// nodes are reset at the start of each sweep.
  void backward(const Tensor& loss) {
    if (!loss.defined() || !loss.is_scalar())
      throw ShapeError("backward: loss must be a defined scalar tensor");
    const auto& ld = loss.data();
    if (ld->tape_serial != serial_)
      throw ValueError("backward: loss was not produced on this tape");

    std::vector<char> reachable(nodes_.size(), 0);
    reachable[static_cast<std::size_t>(ld->node)] = 1;
    for (int i = ld->node; i >= 0; --i) {
      if (!reachable[static_cast<std::size_t>(i)]) continue;
      for (const auto& in : nodes_[static_cast<std::size_t>(i)].inputs) {
        if (in->tape_serial == serial_) reachable[static_cast<std::size_t>(in->node)] = 1;
      }
    }
    for (int i = 0; i <= ld->node; ++i) {
      if (reachable[static_cast<std::size_t>(i)]) {
        auto& g = nodes_[static_cast<std::size_t>(i)].output->grad;
        std::fill(g.begin(), g.end(), 0.0);
      }
    }
    ld->grad[0] = 1.0;
    for (int i = ld->node; i >= 0; --i) {
      if (reachable[static_cast<std::size_t>(i)] && nodes_[static_cast<std::size_t>(i)].backward)
        nodes_[static_cast<std::size_t>(i)].backward();
    }
  }

 private:
  struct Node {
    std::vector<std::shared_ptr<TensorData>> inputs;
    std::shared_ptr<TensorData> output;
    std::function<void()> backward;
    const char* name;
  };

  static std::vector<Tape*>& stack() {
    thread_local std::vector<Tape*> s;
    return s;
  }
  static std::uint64_t next_serial() {
    static std::atomic<std::uint64_t> c{0};
    return ++c;
  }

  std::uint64_t serial_;
  std::vector<Node> nodes_;

  friend struct NoTape;
};

/// Scope guard that suspends recording: ops inside compute values only.
struct NoTape {
  NoTape() { Tape::stack().push_back(nullptr); }
  ~NoTape() { Tape::stack().pop_back(); }
  NoTape(const NoTape&) = delete;
  NoTape& operator=(const NoTape&) = delete;
};

namespace detail {

inline void check_finite(const char* op, const std::vector<double>& v) {
#ifndef NDEBUG
  for (double x : v) {
    if (!std::isfinite(x)) throw ValueError(std::string(op) + ": non-finite value in forward output");
  }
#else
  (void)op;
  (void)v;
#endif
}

}  // namespace detail

}  // namespace cyclet
