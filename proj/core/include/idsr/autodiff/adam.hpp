#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "idsr/autodiff/tensor.hpp"

namespace idsr::ad {

/// Ordered name -> tensor registry. Order is insertion order, which fixes
/// the layout of checkpoints and optimizer state.
template <class T>
class ParamSet {
 public:
  /// Throws on duplicate names.
  Tensor<T>& add(const std::string& name, Tensor<T> tensor);
  Tensor<T>& get(const std::string& name);
  const Tensor<T>& get(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t parameter_count() const;
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  void zero_grad();
  /// Euclidean norm over every trainable gradient.
  double grad_norm() const;
  /// Rescales gradients so their global norm is at most max_norm; returns
  /// the norm before clipping.
  double clip_grad_norm(double max_norm);

 private:
  std::vector<std::pair<std::string, Tensor<T>>> entries_;
};

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <class T>
struct AdamState {
  AdamConfig config;
  std::int64_t step = 0;
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;

  /// Zeroed moments shaped like the trainable parameters.
  void init(const ParamSet<T>& params);
};

/// One bias-corrected Adam update of every trainable parameter.
template <class T>
void adam_step(ParamSet<T>& params, AdamState<T>& state);

extern template class ParamSet<float>;
extern template class ParamSet<double>;

}  // namespace idsr::ad
