#include "csda/tensor.hpp"

#include <sstream>

namespace csda {

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << ",";
        os << s[i];
    }
    os << ")";
    return os.str();
}

std::int64_t shape_numel(const Shape& s) {
    std::int64_t n = 1;
    for (int e : s) n *= e;
    return n;
}

template <class T>
Tensor<T> Tensor<T>::make(Shape shape, bool requires_grad) {
    for (int e : shape) {
        if (e <= 0)
            throw std::invalid_argument("tensor extent must be positive, got shape " +
                                        shape_str(shape));
    }
    auto d = std::make_shared<Data>();
    d->shape = std::move(shape);
    d->values.resize(static_cast<std::size_t>(shape_numel(d->shape)));
    d->requires_grad = requires_grad;
    d->needs_grad = requires_grad;
    return Tensor(std::move(d));
}

template <class T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
    return make(std::move(shape), requires_grad);
}

template <class T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
    Tensor t = make(std::move(shape), requires_grad);
    for (T& v : t.d_->values) v = value;
    return t;
}

template <class T>
Tensor<T> Tensor<T>::from(Shape shape, std::vector<T> values, bool requires_grad) {
    Tensor t = make(std::move(shape), requires_grad);
    if (values.size() != t.d_->values.size())
        throw std::invalid_argument("value count " + std::to_string(values.size()) +
                                    " does not match shape " + shape_str(t.shape()));
    t.d_->values = std::move(values);
    return t;
}

template <class T>
Tensor<T> Tensor<T>::uniform(Shape shape, T bound, Rng& rng, bool requires_grad) {
    Tensor t = make(std::move(shape), requires_grad);
    for (T& v : t.d_->values)
        v = static_cast<T>(rng.uniform(-static_cast<double>(bound), static_cast<double>(bound)));
    return t;
}

template <class T>
T Tensor<T>::scalar() const {
    if (numel() != 1)
        throw std::invalid_argument("scalar() on tensor of shape " + shape_str(shape()));
    return d_->values[0];
}

template <class T>
std::span<T> Tensor<T>::grad() {
    if (d_->grad.empty()) d_->grad.assign(d_->values.size(), T(0));
    return d_->grad;
}

template <class T>
std::span<const T> Tensor<T>::grad() const {
    if (d_->grad.empty()) d_->grad.assign(d_->values.size(), T(0));
    return d_->grad;
}

template <class T>
void Tensor<T>::zero_grad() {
    if (!d_->grad.empty()) d_->grad.assign(d_->values.size(), T(0));
}

template <class T>
void Tape<T>::backward(Tensor<T>& loss) {
    if (!recording_)
        throw std::invalid_argument("backward on a non-recording tape");
    if (consumed_)
        throw std::invalid_argument("backward called twice on the same tape");
    if (loss.numel() != 1)
        throw std::invalid_argument("backward requires a scalar loss, got shape " +
                                    shape_str(loss.shape()));
    consumed_ = true;
    loss.grad()[0] = T(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace csda
