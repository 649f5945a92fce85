#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cola {

struct Shape {
    int channels = 0;
    int height = 0;
    int width = 0;

    std::size_t plane() const { return static_cast<std::size_t>(height) * static_cast<std::size_t>(width); }
    std::size_t size() const { return static_cast<std::size_t>(channels) * plane(); }
    friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& s);

/// Dense channel-major (C, H, W) array of doubles; one sample, no batch axis.
class Tensor {
public:
    Tensor() = default;
    Tensor(int channels, int height, int width, double fill = 0.0);
    explicit Tensor(Shape shape, double fill = 0.0);

    const Shape& shape() const { return shape_; }
    int channels() const { return shape_.channels; }
    int height() const { return shape_.height; }
    int width() const { return shape_.width; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& at(int c, int y, int x) { return data_[index(c, y, x)]; }
    double at(int c, int y, int x) const { return data_[index(c, y, x)]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }
    std::span<double> channel(int c) { return {data_.data() + static_cast<std::size_t>(c) * shape_.plane(), shape_.plane()}; }
    std::span<const double> channel(int c) const {
        return {data_.data() + static_cast<std::size_t>(c) * shape_.plane(), shape_.plane()};
    }
    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    void fill(double v);
    Tensor& operator+=(const Tensor& other);
    Tensor& operator*=(double s);
    /// this += s * other
    void add_scaled(const Tensor& other, double s);

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    std::size_t index(int c, int y, int x) const {
        return (static_cast<std::size_t>(c) * static_cast<std::size_t>(shape_.height) + static_cast<std::size_t>(y)) *
                   static_cast<std::size_t>(shape_.width) +
               static_cast<std::size_t>(x);
    }

    Shape shape_{};
    std::vector<double> data_;
};

void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

double dot(const Tensor& a, const Tensor& b);
double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace cola
