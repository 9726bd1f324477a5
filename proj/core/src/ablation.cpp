#include "idsr/ablation.hpp"

#include <cstdio>

#include "idsr/error.hpp"
#include "idsr/scalespace.hpp"

namespace idsr::ablation {

namespace {

constexpr double kScale255 = 255.0 * 255.0;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string scale_label(double s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", s);
  return buf;
}

}  // namespace

double StackErrors::gaussian_mean() const {
  double s = 0.0;
  for (double v : gaussian) s += v;
  return s / static_cast<double>(gaussian.size());
}

double StackErrors::dog_mean() const {
  double s = 0.0;
  for (double v : dog) s += v;
  return s / static_cast<double>(dog.size());
}

StackErrors stack_errors(const Image& output, const Image& clean) {
  require(output.same_shape(clean), Errc::dimension_mismatch, "stack_errors: images differ in shape");
  const auto a = scalespace::build_scale_stack(luminance(output));
  const auto b = scalespace::build_scale_stack(luminance(clean));
  const auto da = scalespace::build_dog(a);
  const auto db = scalespace::build_dog(b);
  StackErrors e;
  for (std::size_t j = 0; j < 5; ++j) e.gaussian[j] = kScale255 * mean_squared_error(a.levels[j], b.levels[j]);
  for (std::size_t j = 0; j < 4; ++j) e.dog[j] = kScale255 * mean_squared_error(da.diffs[j], db.diffs[j]);
  return e;
}

StackErrors evaluate_variant(const Variant& v, const PairDataset& test) {
  require(v.detector && v.describer, Errc::invalid_argument, "variant '" + v.label + "' is missing a model");
  require(!test.empty(), Errc::invalid_argument, "ablation test set is empty");
  StackErrors total;
  for (const auto& pair : test.pairs) {
    const Image det = clamp01(nets::derain(*v.detector, pair.rainy));
    const Image des = v.describer == v.detector ? det : clamp01(nets::derain(*v.describer, pair.rainy));
    const auto ed = stack_errors(det, pair.clean);
    const auto eg = stack_errors(des, pair.clean);
    for (std::size_t j = 0; j < 5; ++j) total.gaussian[j] += eg.gaussian[j];
    for (std::size_t j = 0; j < 4; ++j) total.dog[j] += ed.dog[j];
  }
  const double n = static_cast<double>(test.size());
  for (double& x : total.gaussian) x /= n;
  for (double& x : total.dog) x /= n;
  return total;
}

Table compare(TableKind kind, const std::vector<Variant>& variants, const PairDataset& test) {
  Table t;
  t.kind = kind;
  for (const auto& v : variants) {
    t.labels.push_back(v.label);
    t.errors.push_back(evaluate_variant(v, test));
  }
  return t;
}

double Table::mean(std::size_t variant) const {
  return kind == TableKind::gaussian ? errors.at(variant).gaussian_mean() : errors.at(variant).dog_mean();
}

std::string Table::csv() const {
  std::string out = "level";
  for (const auto& l : labels) out += "," + l;
  out += "\n";
  const auto& scales = scalespace::kStackScales;
  if (kind == TableKind::gaussian) {
    for (std::size_t j = 0; j < 5; ++j) {
      out += "G_{" + scale_label(scales[j]) + "}";
      for (const auto& e : errors) out += "," + fmt(e.gaussian[j]);
      out += "\n";
    }
  } else {
    for (std::size_t j = 0; j < 4; ++j) {
      out += "\"DoG_{" + scale_label(scales[j]) + "," + scale_label(scales[j + 1]) + "}\"";
      for (const auto& e : errors) out += "," + fmt(e.dog[j]);
      out += "\n";
    }
  }
  out += "mean";
  for (std::size_t i = 0; i < errors.size(); ++i) out += "," + fmt(mean(i));
  out += "\n";
  return out;
}

}  // namespace idsr::ablation
