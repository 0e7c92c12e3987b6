#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace qtransfer {

using Shape = std::vector<std::size_t>;

// Cache-line aligned allocation. The vectorized kernels pick their
// peeling and reduction order from a buffer's alignment, so a fixed
// alignment is what makes results bit-reproducible from run to run.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlignment{64};

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), kAlignment));
  }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlignment); }

  template <class U>
  bool operator==(const AlignedAllocator<U>&) const { return true; }
};

using FloatBuffer = std::vector<float, AlignedAllocator<float>>;

std::size_t shape_size(const Shape& shape);
std::string shape_to_string(const Shape& shape);

// Dense row-major float32 array. The only numeric container in the project:
// frames, activations, parameters and gradients all live in Tensors.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::span<const float> data);
  Tensor(Shape shape, const std::vector<float>& data)
      : Tensor(std::move(shape), std::span<const float>(data)) {}

  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  std::span<float> values() { return data_; }
  std::span<const float> values() const { return data_; }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  float& at(std::initializer_list<std::size_t> index);
  float at(std::initializer_list<std::size_t> index) const;

  // Reinterprets the buffer; the element count must not change.
  void reshape(Shape shape);
  Tensor reshaped(Shape shape) const;

  void fill(float value);
  bool all_finite() const;

  // Throws NumericalError naming `what` when any element is NaN or Inf.
  void check_finite(const char* what) const;

  bool operator==(const Tensor& other) const = default;

 private:
  std::size_t flat_index(std::initializer_list<std::size_t> index) const;

  Shape shape_;
  FloatBuffer data_;
};

// Throws ConfigError with both shapes in the message when they differ.
void require_shape(const Tensor& t, const Shape& expected, const char* what);

// Stable 64-bit FNV-1a hash over the shape and raw bytes.
std::uint64_t tensor_hash(const Tensor& t);

}  // namespace qtransfer
