#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace xlt {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

/// A named dense tensor of rank 1 or 2. Rank-1 tensors are stored as a
/// single row so every tensor can be addressed as a row-major matrix.
struct Tensor {
  Matrix value;
  bool is_vector = false;

  std::vector<std::size_t> shape() const;
  std::size_t numel() const { return static_cast<std::size_t>(value.size()); }
  double* data() { return value.data(); }
  const double* data() const { return value.data(); }
};

/// Ordered name -> tensor map. Model parameters, gradients and optimizer
/// moments all use this type, so they share names and iteration order.
class TensorMap {
 public:
  using Storage = std::map<std::string, Tensor, std::less<>>;

  Tensor& add_matrix(const std::string& name, std::size_t rows, std::size_t cols);
  Tensor& add_vector(const std::string& name, std::size_t size);

  bool contains(std::string_view name) const { return tensors_.find(name) != tensors_.end(); }
  Tensor& tensor(std::string_view name);
  const Tensor& tensor(std::string_view name) const;
  Matrix& operator[](std::string_view name) { return tensor(name).value; }
  const Matrix& operator[](std::string_view name) const { return tensor(name).value; }

  std::size_t size() const { return tensors_.size(); }
  std::size_t numel() const;
  std::vector<std::string> names() const;

  /// Same names and shapes, all values zero.
  TensorMap zeros_like() const;
  void set_zero();
  bool same_layout(const TensorMap& other) const;

  /// FNV-1a over names, shapes and the raw bytes of every value.
  std::uint64_t checksum() const;

  auto begin() { return tensors_.begin(); }
  auto end() { return tensors_.end(); }
  auto begin() const { return tensors_.begin(); }
  auto end() const { return tensors_.end(); }

 private:
  Storage tensors_;
};

using Parameters = TensorMap;
using Gradients = TensorMap;

bool has_prefix(std::string_view name, const std::vector<std::string>& prefixes);

}  // namespace xlt
