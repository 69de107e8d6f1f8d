#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

namespace poet {

// Element precision of a tensor. Values are always held in double buffers;
// f32 tensors round every produced value (and accumulated gradient) through
// float so a run behaves like genuine 32-bit arithmetic.
enum class DType : std::uint8_t { f64 = 0, f32 = 1 };

DType default_dtype();
void set_default_dtype(DType dtype);

std::string shape_string(std::span<const std::size_t> shape);

namespace detail {

struct TensorImpl {
  std::vector<std::size_t> shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  DType dtype = DType::f64;
  std::uint64_t id = 0;
};

}  // namespace detail

// Dense row-major tensor. Value-semantic handle: copies share the underlying
// buffer. Shapes are lists of positive extents; a scalar is shape [1].
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
  static Tensor full(std::vector<std::size_t> shape, double value,
                     bool requires_grad = false);
  static Tensor from_data(std::vector<std::size_t> shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const std::vector<std::size_t>& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t size() const { return impl_->data.size(); }

  std::span<const double> data() const { return impl_->data; }
  std::span<double> mutable_data() { return impl_->data; }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool value) { impl_->requires_grad = value; }

  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const double> grad() const;
  void zero_grad();

  DType dtype() const { return impl_->dtype; }
  std::uint64_t id() const { return impl_->id; }

  // Scalar access; throws unless size() == 1.
  double item() const;
  double at(std::size_t i) const { return impl_->data[i]; }
  double at(std::size_t i, std::size_t j) const;

  std::shared_ptr<detail::TensorImpl> impl() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}

  std::shared_ptr<detail::TensorImpl> impl_;

  friend Tensor make_tensor(std::vector<std::size_t>, std::vector<double>, bool, DType);
};

Tensor make_tensor(std::vector<std::size_t> shape, std::vector<double> data,
                   bool requires_grad, DType dtype);

// Gradient accumulation entry point used by backward rules; rounds through
// float for f32 tensors.
void accumulate_grad(const std::shared_ptr<detail::TensorImpl>& node,
                     std::span<const double> contribution);

// Records one forward pass. Execution order is topological order by
// construction; backward() replays it in reverse and fires each rule whose
// output has received a gradient. Discard the tape after use.
class Tape {
 public:
  struct Record {
    std::vector<std::uint64_t> input_ids;
    std::shared_ptr<detail::TensorImpl> output;
    std::function<void()> backward;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  ~Tape();

  // Activates the tape on the current thread for its lifetime.
  class Scope {
   public:
    explicit Scope(Tape& tape);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* previous_;
  };

  static Tape* active();

  void record(std::vector<std::uint64_t> input_ids,
              std::shared_ptr<detail::TensorImpl> output,
              std::function<void()> backward);

  // Seeds d(loss)/d(loss) = 1 and accumulates gradients into every reachable
  // requires_grad node. Repeated calls accumulate additively.
  void backward(const Tensor& loss);

  std::size_t size() const { return records_.size(); }
  bool contains_output(std::uint64_t id) const { return output_ids_.count(id) > 0; }

 private:
  std::vector<Record> records_;
  std::unordered_set<std::uint64_t> output_ids_;
};

}  // namespace poet
