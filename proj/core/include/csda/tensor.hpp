#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "csda/rng.hpp"

namespace csda {

using Shape = std::vector<int>;

std::string shape_str(const Shape& s);
std::int64_t shape_numel(const Shape& s);

// Dense N-dimensional array of real values, row-major. A Tensor is a cheap
// shared handle; copying it aliases the same storage. Gradients live next to
// the values and are filled in by Tape::backward for every tensor on the
// differentiation path.
template <class T>
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, T value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<T> values, bool requires_grad = false);
    // Fan-in style uniform init in [-bound, bound].
    static Tensor uniform(Shape shape, T bound, Rng& rng, bool requires_grad = false);

    bool valid() const { return d_ != nullptr; }
    const Shape& shape() const { return d_->shape; }
    std::int64_t numel() const { return static_cast<std::int64_t>(d_->values.size()); }
    int dim(int i) const { return d_->shape[static_cast<std::size_t>(i)]; }
    int rank() const { return static_cast<int>(d_->shape.size()); }
    bool is_scalar() const { return d_->shape.empty(); }

    std::span<T> values() { return d_->values; }
    std::span<const T> values() const { return d_->values; }
    T* data() { return d_->values.data(); }
    const T* data() const { return d_->values.data(); }

    T scalar() const;

    bool requires_grad() const { return d_->requires_grad; }
    // Whether backward will propagate a gradient into this tensor (leaf
    // parameters and anything computed from them on a recording tape).
    bool needs_grad() const { return d_->needs_grad; }
    void mark_needs_grad() { d_->needs_grad = true; }

    bool has_grad() const { return !d_->grad.empty(); }
    // Gradient buffer, allocated (zeroed) on first access.
    std::span<T> grad();
    std::span<const T> grad() const;
    T* grad_data() { return grad().data(); }
    void zero_grad();

    // Stable identity for argument-aliasing checks and maps.
    const void* id() const { return d_.get(); }

private:
    struct Data {
        Shape shape;
        std::vector<T> values;
        std::vector<T> grad;  // empty until touched, then values.size()
        bool requires_grad = false;
        bool needs_grad = false;
    };
    std::shared_ptr<Data> d_;

    explicit Tensor(std::shared_ptr<Data> d) : d_(std::move(d)) {}
    static Tensor make(Shape shape, bool requires_grad);
};

// Tape-based reverse-mode graph: ops executed against a recording tape push
// one node each; backward() replays the nodes in reverse and accumulates
// gradients. One tape per forward pass; backward consumes it.
template <class T>
class Tape {
public:
    // A non-recording tape runs the same ops in pure inference mode.
    explicit Tape(bool recording = true) : recording_(recording) {}

    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    bool recording() const { return recording_; }
    bool consumed() const { return consumed_; }
    std::size_t size() const { return nodes_.size(); }

    void record(std::function<void()> backward_fn) {
        nodes_.push_back(std::move(backward_fn));
    }

    // Seeds d(loss)/d(loss) = 1 and runs every recorded backward rule in
    // reverse order. Throws if loss is not scalar or the tape was already
    // consumed by a previous backward.
    void backward(Tensor<T>& loss);

private:
    std::vector<std::function<void()>> nodes_;
    bool recording_ = true;
    bool consumed_ = false;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

extern template class Tensor<float>;
extern template class Tensor<double>;
extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace csda
