#pragma once

#include <array>
#include <string>
#include <vector>

#include "idsr/dataset.hpp"
#include "idsr/image.hpp"
#include "idsr/nets.hpp"

namespace idsr::ablation {

/// Per-level MSE of the Gaussian stack and DoG stack of an output's
/// luminance against the clean image's, in 8-bit units (255^2 scale).
struct StackErrors {
  std::array<double, 5> gaussian{};
  std::array<double, 4> dog{};

  double gaussian_mean() const;
  double dog_mean() const;
};

StackErrors stack_errors(const Image& output, const Image& clean);

/// A pipeline variant: DoG errors come from `detector`'s output, Gaussian
/// errors from `describer`'s (the same model for single-network variants).
struct Variant {
  std::string label;
  const nets::Model<float>* detector = nullptr;
  const nets::Model<float>* describer = nullptr;
};

/// Errors averaged over every pair of the set.
StackErrors evaluate_variant(const Variant& v, const PairDataset& test);

enum class TableKind { gaussian, dog };

struct Table {
  TableKind kind = TableKind::gaussian;
  std::vector<std::string> labels;
  std::vector<StackErrors> errors;

  /// Rows are stack levels plus a final "mean" row; one column per variant.
  std::string csv() const;
  double mean(std::size_t variant) const;
};

Table compare(TableKind kind, const std::vector<Variant>& variants, const PairDataset& test);

}  // namespace idsr::ablation
