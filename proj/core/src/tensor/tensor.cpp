#include "poet/tensor/tensor.hpp"

#include <atomic>
#include <sstream>

#include "poet/error.hpp"

namespace poet {

namespace {

std::atomic<std::uint64_t> g_next_id{1};
thread_local DType g_default_dtype = DType::f64;
thread_local Tape* g_active_tape = nullptr;

std::size_t checked_numel(std::span<const std::size_t> shape) {
  if (shape.empty()) {
    raise(ErrorKind::Dimension, "tensor shape must have at least one dimension");
  }
  std::size_t n = 1;
  for (std::size_t d : shape) {
    if (d == 0) {
      raise(ErrorKind::Dimension,
            "tensor dimensions must be positive, got " + shape_string(shape));
    }
    n *= d;
  }
  return n;
}

}  // namespace

DType default_dtype() { return g_default_dtype; }
void set_default_dtype(DType dtype) { g_default_dtype = dtype; }

std::string shape_string(std::span<const std::size_t> shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor make_tensor(std::vector<std::size_t> shape, std::vector<double> data,
                   bool requires_grad, DType dtype) {
  std::size_t n = checked_numel(shape);
  if (n != data.size()) {
    raise(ErrorKind::Dimension, "tensor data length " + std::to_string(data.size()) +
                                    " does not match shape " + shape_string(shape));
  }
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  impl->requires_grad = requires_grad;
  impl->dtype = dtype;
  impl->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  if (dtype == DType::f32) {
    for (double& v : impl->data) v = static_cast<double>(static_cast<float>(v));
  }
  return Tensor(std::move(impl));
}

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
  std::size_t n = checked_numel(shape);
  return make_tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad,
                     default_dtype());
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value, bool requires_grad) {
  std::size_t n = checked_numel(shape);
  return make_tensor(std::move(shape), std::vector<double>(n, value), requires_grad,
                     default_dtype());
}

Tensor Tensor::from_data(std::vector<std::size_t> shape, std::vector<double> data,
                         bool requires_grad) {
  return make_tensor(std::move(shape), std::move(data), requires_grad, default_dtype());
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return make_tensor({1}, {value}, requires_grad, default_dtype());
}

std::span<const double> Tensor::grad() const {
  if (impl_->grad.empty()) {
    raise(ErrorKind::Contract, "tensor has no gradient (backward not run or unreachable)");
  }
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (!impl_->grad.empty()) {
    std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
  }
}

double Tensor::item() const {
  if (size() != 1) {
    raise(ErrorKind::Contract,
          "item() requires a scalar tensor, got shape " + shape_string(shape()));
  }
  return impl_->data[0];
}

double Tensor::at(std::size_t i, std::size_t j) const {
  return impl_->data[i * impl_->shape[1] + j];
}

void accumulate_grad(const std::shared_ptr<detail::TensorImpl>& node,
                     std::span<const double> contribution) {
  if (node->grad.empty()) {
    node->grad.assign(node->data.size(), 0.0);
  }
  if (node->dtype == DType::f32) {
    for (std::size_t i = 0; i < contribution.size(); ++i) {
      node->grad[i] = static_cast<double>(
          static_cast<float>(node->grad[i] + contribution[i]));
    }
  } else {
    for (std::size_t i = 0; i < contribution.size(); ++i) {
      node->grad[i] += contribution[i];
    }
  }
}

Tape::~Tape() = default;

Tape::Scope::Scope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
Tape::Scope::~Scope() { g_active_tape = previous_; }

Tape* Tape::active() { return g_active_tape; }

void Tape::record(std::vector<std::uint64_t> input_ids,
                  std::shared_ptr<detail::TensorImpl> output,
                  std::function<void()> backward) {
  output_ids_.insert(output->id);
  records_.push_back({std::move(input_ids), std::move(output), std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    raise(ErrorKind::Contract, "backward requires a scalar loss");
  }
  if (!contains_output(loss.id())) {
    raise(ErrorKind::Contract, "loss tensor was not produced on this tape");
  }
  accumulate_grad(loss.impl(), std::vector<double>{1.0});
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    if (!it->output->grad.empty()) {
      it->backward();
    }
  }
}

}  // namespace poet
