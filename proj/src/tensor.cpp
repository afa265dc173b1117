#include "specrec/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace specrec {

std::size_t shape_numel(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d < 1) throw std::invalid_argument("tensor: nonpositive dimension");
        n *= static_cast<std::size_t>(d);
    }
    return shape.empty() ? 0 : n;
}

Tensor::Tensor(std::vector<int> s) : shape(std::move(s)), data(shape_numel(shape), 0.0) {}

Tensor::Tensor(std::vector<int> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != shape_numel(shape)) throw std::invalid_argument("tensor: data does not match shape");
}

void Tensor::fill(double v) {
    for (double& x : data) x = v;
}

bool Tensor::all_finite() const {
    for (double x : data)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace specrec
