#include "idsr/autodiff/adam.hpp"

#include <algorithm>
#include <cmath>

#include "idsr/error.hpp"

namespace idsr::ad {

template <class T>
Tensor<T>& ParamSet<T>::add(const std::string& name, Tensor<T> tensor) {
  require(!contains(name), Errc::invalid_argument, "duplicate parameter name '" + name + "'");
  require(tensor.defined(), Errc::invalid_argument, "parameter '" + name + "' is undefined");
  entries_.emplace_back(name, std::move(tensor));
  return entries_.back().second;
}

template <class T>
Tensor<T>& ParamSet<T>::get(const std::string& name) {
  for (auto& [n, t] : entries_)
    if (n == name) return t;
  fail(Errc::invalid_argument, "unknown parameter '" + name + "'");
}

template <class T>
const Tensor<T>& ParamSet<T>::get(const std::string& name) const {
  for (const auto& [n, t] : entries_)
    if (n == name) return t;
  fail(Errc::invalid_argument, "unknown parameter '" + name + "'");
}

template <class T>
bool ParamSet<T>::contains(const std::string& name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.first == name; });
}

template <class T>
std::size_t ParamSet<T>::parameter_count() const {
  std::size_t total = 0;
  for (const auto& e : entries_)
    if (e.second.requires_grad()) total += e.second.numel();
  return total;
}

template <class T>
void ParamSet<T>::zero_grad() {
  for (auto& e : entries_) e.second.zero_grad();
}

template <class T>
double ParamSet<T>::grad_norm() const {
  double sq = 0.0;
  for (const auto& e : entries_)
    for (T g : e.second.grad()) sq += static_cast<double>(g) * static_cast<double>(g);
  return std::sqrt(sq);
}

template <class T>
double ParamSet<T>::clip_grad_norm(double max_norm) {
  const double norm = grad_norm();
  if (norm > max_norm && norm > 0.0) {
    const T f = static_cast<T>(max_norm / norm);
    for (auto& e : entries_)
      for (T& g : e.second.grad()) g *= f;
  }
  return norm;
}

template <class T>
void AdamState<T>::init(const ParamSet<T>& params) {
  step = 0;
  m.clear();
  v.clear();
  for (const auto& e : params) {
    const std::size_t n = e.second.requires_grad() ? e.second.numel() : 0;
    m.emplace_back(n, T(0));
    v.emplace_back(n, T(0));
  }
}

template <class T>
void adam_step(ParamSet<T>& params, AdamState<T>& state) {
  require(state.m.size() == params.size() && state.v.size() == params.size(), Errc::shape_mismatch,
          "Adam state does not match the parameter set");
  ++state.step;
  const AdamConfig& c = state.config;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  std::size_t k = 0;
  for (auto& [name, p] : params) {
    auto& m = state.m[k];
    auto& v = state.v[k];
    ++k;
    if (!p.requires_grad()) continue;
    require(m.size() == p.numel() && v.size() == p.numel(), Errc::shape_mismatch,
            "Adam moments do not match parameter '" + name + "'");
    auto w = p.data();
    auto g = p.grad();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g[i];
      const double mi = c.beta1 * m[i] + (1.0 - c.beta1) * gi;
      const double vi = c.beta2 * v[i] + (1.0 - c.beta2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double update = c.lr * (mi / bc1) / (std::sqrt(vi / bc2) + c.eps);
      w[i] = static_cast<T>(w[i] - update);
    }
  }
}

template class ParamSet<float>;
template class ParamSet<double>;
template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step<float>(ParamSet<float>&, AdamState<float>&);
template void adam_step<double>(ParamSet<double>&, AdamState<double>&);

}  // namespace idsr::ad
