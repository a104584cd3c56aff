#include "xlt/tensor.hpp"

#include "xlt/errors.hpp"

#include <cstring>

namespace xlt {

std::vector<std::size_t> Tensor::shape() const {
  if (is_vector) return {static_cast<std::size_t>(value.cols())};
  return {static_cast<std::size_t>(value.rows()), static_cast<std::size_t>(value.cols())};
}

Tensor& TensorMap::add_matrix(const std::string& name, std::size_t rows, std::size_t cols) {
  auto [it, inserted] = tensors_.try_emplace(name);
  if (!inserted) throw ConfigError("duplicate tensor name: " + name);
  it->second.value = Matrix::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  it->second.is_vector = false;
  return it->second;
}

Tensor& TensorMap::add_vector(const std::string& name, std::size_t size) {
  auto [it, inserted] = tensors_.try_emplace(name);
  if (!inserted) throw ConfigError("duplicate tensor name: " + name);
  it->second.value = Matrix::Zero(1, static_cast<Eigen::Index>(size));
  it->second.is_vector = true;
  return it->second;
}

Tensor& TensorMap::tensor(std::string_view name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ConfigError("unknown tensor: " + std::string(name));
  return it->second;
}

const Tensor& TensorMap::tensor(std::string_view name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ConfigError("unknown tensor: " + std::string(name));
  return it->second;
}

std::size_t TensorMap::numel() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors_) n += t.numel();
  return n;
}

std::vector<std::string> TensorMap::names() const {
  std::vector<std::string> out;
  out.reserve(tensors_.size());
  for (const auto& [name, t] : tensors_) out.push_back(name);
  return out;
}

TensorMap TensorMap::zeros_like() const {
  TensorMap out;
  for (const auto& [name, t] : tensors_) {
    Tensor z;
    z.value = Matrix::Zero(t.value.rows(), t.value.cols());
    z.is_vector = t.is_vector;
    out.tensors_.emplace(name, std::move(z));
  }
  return out;
}

void TensorMap::set_zero() {
  for (auto& [name, t] : tensors_) t.value.setZero();
}

bool TensorMap::same_layout(const TensorMap& other) const {
  if (tensors_.size() != other.tensors_.size()) return false;
  auto a = tensors_.begin();
  auto b = other.tensors_.begin();
  for (; a != tensors_.end(); ++a, ++b) {
    if (a->first != b->first || a->second.shape() != b->second.shape()) return false;
  }
  return true;
}

std::uint64_t TensorMap::checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const void* bytes, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& [name, t] : tensors_) {
    feed(name.data(), name.size());
    for (auto dim : t.shape()) {
      const auto d = static_cast<std::uint64_t>(dim);
      feed(&d, sizeof d);
    }
    feed(t.data(), t.numel() * sizeof(double));
  }
  return h;
}

bool has_prefix(std::string_view name, const std::vector<std::string>& prefixes) {
  for (const auto& p : prefixes) {
    if (!p.empty() && name.substr(0, p.size()) == p) return true;
  }
  return false;
}

}  // namespace xlt
