#include "qtransfer/tensor.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <numeric>

#include "qtransfer/errors.hpp"

namespace qtransfer {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

Tensor::Tensor(Shape shape, float fill)
    : shape_(std::move(shape)), data_(shape_size(shape_), fill) {
  for (auto d : shape_) {
    if (d == 0) throw ConfigError("tensor dimensions must be positive, got " +
                                  shape_to_string(shape_));
  }
}

Tensor::Tensor(Shape shape, std::span<const float> data)
    : shape_(std::move(shape)), data_(data.begin(), data.end()) {
  if (shape_size(shape_) != data_.size()) {
    throw ConfigError("tensor shape " + shape_to_string(shape_) + " holds " +
                      std::to_string(shape_size(shape_)) + " values, got " +
                      std::to_string(data_.size()));
  }
}

std::size_t Tensor::flat_index(std::initializer_list<std::size_t> index) const {
  if (index.size() != shape_.size()) {
    throw ConfigError("index rank " + std::to_string(index.size()) +
                      " does not match tensor " + shape_to_string(shape_));
  }
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    if (i >= shape_[axis]) {
      throw ConfigError("index out of range for tensor " +
                        shape_to_string(shape_));
    }
    flat = flat * shape_[axis] + i;
    ++axis;
  }
  return flat;
}

float& Tensor::at(std::initializer_list<std::size_t> index) {
  return data_[flat_index(index)];
}

float Tensor::at(std::initializer_list<std::size_t> index) const {
  return data_[flat_index(index)];
}

void Tensor::reshape(Shape shape) {
  if (shape_size(shape) != data_.size()) {
    throw ConfigError("cannot reshape " + shape_to_string(shape_) + " to " +
                      shape_to_string(shape));
  }
  shape_ = std::move(shape);
}

Tensor Tensor::reshaped(Shape shape) const {
  Tensor copy = *this;
  copy.reshape(std::move(shape));
  return copy;
}

void Tensor::fill(float value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const {
  for (float v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::check_finite(const char* what) const {
  if (!all_finite()) {
    throw NumericalError(std::string("non-finite value in ") + what);
  }
}

void require_shape(const Tensor& t, const Shape& expected, const char* what) {
  if (t.shape() != expected) {
    throw ConfigError(std::string(what) + ": expected shape " +
                      shape_to_string(expected) + ", got " +
                      shape_to_string(t.shape()));
  }
}

std::uint64_t tensor_hash(const Tensor& t) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](const void* p, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ull;
    }
  };
  for (auto d : t.shape()) {
    const std::uint64_t d64 = d;
    mix(&d64, sizeof d64);
  }
  mix(t.data(), t.size() * sizeof(float));
  return h;
}

}  // namespace qtransfer
