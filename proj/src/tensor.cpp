#include "cola/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace cola {

std::string to_string(const Shape& s) {
    return std::to_string(s.channels) + "x" + std::to_string(s.height) + "x" + std::to_string(s.width);
}

Tensor::Tensor(int channels, int height, int width, double fill) : Tensor(Shape{channels, height, width}, fill) {}

Tensor::Tensor(Shape shape, double fill) : shape_(shape) {
    if (shape.channels < 0 || shape.height < 0 || shape.width < 0) {
        throw std::invalid_argument("negative tensor dimension: " + to_string(shape));
    }
    data_.assign(shape.size(), fill);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor& Tensor::operator+=(const Tensor& other) {
    require_same_shape(*this, other, "tensor add");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

Tensor& Tensor::operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
}

void Tensor::add_scaled(const Tensor& other, double s) {
    require_same_shape(*this, other, "tensor add_scaled");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += s * other.data_[i];
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (a.shape() != b.shape()) {
        throw std::invalid_argument(std::string(what) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                                    to_string(b.shape()));
    }
}

double dot(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace cola
