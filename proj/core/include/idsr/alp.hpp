#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "idsr/image.hpp"
#include "idsr/scalespace.hpp"

namespace idsr::alp {

inline constexpr std::array<double, 4> kDefaultXi = {1.6000, 2.2627, 3.2000, 4.5255};
inline constexpr int kDefaultHalfWidth = 14;
inline constexpr int kDefaultGridPoints = 33;
/// Target reconstruction error for a well-conditioned basis.
inline constexpr double kTargetFitResidual = 0.05;
/// Construction-time ceiling. A cubic in xi cannot reach the target over
/// [1.6, 4.5255] with point-sampled kernels (the two-stage fit lands near
/// 0.107), so construction only rejects clearly broken fits.
inline constexpr double kMaxFitResidual = 0.15;

/// Scale-normalized LoG xi^2 * lap(G_xi) sampled on [-w, w]^2 and then
/// mean-subtracted so it sums to zero.
scalespace::Kernel2D log_kernel(double xi, int half_width);

/// Four LoG kernels at fixed scales plus cubic models of the interpolation
/// weights: h(xi) ~= sum_k gamma_k(xi) h(xi_k), gamma_k(xi) = a xi^3 + b xi^2
/// + c xi + d. Immutable once fitted.
struct AlpBasis {
  std::array<double, 4> xi{};
  int half_width = 0;
  std::array<scalespace::Kernel2D, 4> kernels;
  /// cubic[k] = {a_k, b_k, c_k, d_k}
  std::array<std::array<double, 4>, 4> cubic{};
  std::vector<double> fit_grid;
  /// max over the grid of |h(xi) - sum_k gamma_k(xi) h(xi_k)| / |h(xi)|
  double fit_residual = 0.0;

  std::array<double, 4> gamma(double scale) const;
  scalespace::Kernel2D reconstruct(double scale) const;
  /// Weight of L_k in eta_j, j = 0..3 (eta_3 uses a_k, eta_0 uses d_k).
  double eta_weight(int j, int k) const { return cubic[static_cast<std::size_t>(k)][static_cast<std::size_t>(3 - j)]; }
};

std::vector<double> uniform_grid(double lo, double hi, int points);

/// Least-squares projection of h(xi) onto the four basis kernels at every
/// grid scale, then a cubic least-squares fit of each weight curve.
/// Throws rank_deficient for degenerate scales, invalid_argument for an
/// empty grid and numeric_failure if the residual exceeds max_residual.
AlpBasis fit_basis(const std::array<double, 4>& xi, int half_width,
                   const std::vector<double>& grid, double max_residual = kMaxFitResidual);

/// fit_basis with the default scales, w = 14 and a 33-point grid.
const AlpBasis& default_basis();

/// Per-pixel coefficients of the scale-space response polynomial
/// SSR(xi) = eta3 xi^3 + eta2 xi^2 + eta1 xi + eta0.
struct EtaMaps {
  Image eta0, eta1, eta2, eta3;

  const Image& operator[](int j) const;
};

/// Same maps in double precision, row-major.
struct EtaField {
  int height = 0;
  int width = 0;
  std::array<std::vector<double>, 4> eta;

  double at(int j, int u, int v) const {
    return eta[static_cast<std::size_t>(j)][static_cast<std::size_t>(u) * width + v];
  }
};

EtaField eta_field(const Image& gray, const AlpBasis& basis);
EtaMaps eta_maps(const Image& gray, const AlpBasis& basis);

struct ScaleExtremum {
  double xi_star = 0.0;
  double response = 0.0;
};

/// Root of 3 eta3 xi^2 + 2 eta2 xi + eta1 = 0 inside [lo, hi] with a
/// non-vanishing second derivative; the larger |SSR| wins when two roots
/// qualify.
std::optional<ScaleExtremum> extremum_scale(double eta3, double eta2, double eta1, double eta0,
                                            double lo, double hi);
std::optional<ScaleExtremum> extremum_scale(const EtaMaps& eta, int u, int v,
                                            const AlpBasis& basis);

struct AlpKeypoint {
  int u = 0;  ///< row
  int v = 0;  ///< column
  double xi_star = 0.0;
  double response = 0.0;
};

inline constexpr double kDefaultResponseThreshold = 0.1;

/// Pixels with a valid extremum scale, |response| >= threshold and |response|
/// strictly above all eight neighbours. Sorted by (u, v).
std::vector<AlpKeypoint> alp_detect(const Image& gray, const AlpBasis& basis,
                                    double response_threshold = kDefaultResponseThreshold);

/// sum_{u,v} sum_{j=1..3} |eta_j(clean) - eta_j(derained)| / (H W).
/// include_eta0 adds the j = 0 term.
double alp_loss(const Image& clean, const Image& derained, const AlpBasis& basis,
                bool include_eta0 = false);

std::string basis_to_json(const AlpBasis& basis);
AlpBasis basis_from_json(const std::string& text);
void save_basis(const AlpBasis& basis, const std::filesystem::path& path);
AlpBasis load_basis(const std::filesystem::path& path);
/// 64-bit FNV-1a of the canonical JSON text, hex encoded.
std::string basis_hash(const AlpBasis& basis);

}  // namespace idsr::alp
