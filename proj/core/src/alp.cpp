#include "idsr/alp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "idsr/error.hpp"
#include "json.hpp"

namespace idsr::alp {

using nlohmann::json;
using scalespace::Kernel2D;

namespace {

Eigen::VectorXd as_vector(const Kernel2D& k) {
  return Eigen::Map<const Eigen::VectorXd>(k.values.data(), static_cast<Eigen::Index>(k.values.size()));
}

double ssr(double eta3, double eta2, double eta1, double eta0, double xi) {
  return ((eta3 * xi + eta2) * xi + eta1) * xi + eta0;
}

void require_gray(const Image& img, const char* what) {
  require(img.channels() == 1, Errc::invalid_argument, std::string(what) + " expects a grayscale image");
}

}  // namespace

Kernel2D log_kernel(double xi, int half_width) {
  require(xi > 0.0 && std::isfinite(xi), Errc::invalid_argument, "LoG scale must be positive");
  require(half_width >= 1, Errc::invalid_argument, "LoG half width must be >= 1");
  Kernel2D k;
  k.radius = half_width;
  const int size = k.size();
  k.values.resize(static_cast<std::size_t>(size * size));
  const double s2 = xi * xi;
  const double norm = 1.0 / (2.0 * std::numbers::pi * s2 * s2);
  double total = 0.0;
  for (int m = -half_width; m <= half_width; ++m)
    for (int n = -half_width; n <= half_width; ++n) {
      const double r2 = static_cast<double>(m * m + n * n);
      const double v = (r2 - 2.0 * s2) * norm * std::exp(-r2 / (2.0 * s2));
      k.values[static_cast<std::size_t>((m + half_width) * size + (n + half_width))] = v;
      total += v;
    }
  const double mean = total / static_cast<double>(k.values.size());
  for (double& v : k.values) v -= mean;
  return k;
}

std::array<double, 4> AlpBasis::gamma(double scale) const {
  std::array<double, 4> g{};
  for (std::size_t k = 0; k < 4; ++k) {
    const auto& c = cubic[k];
    g[k] = ((c[0] * scale + c[1]) * scale + c[2]) * scale + c[3];
  }
  return g;
}

Kernel2D AlpBasis::reconstruct(double scale) const {
  const std::array<double, 4> g = gamma(scale);
  Kernel2D out;
  out.radius = half_width;
  out.values.assign(kernels[0].values.size(), 0.0);
  for (std::size_t k = 0; k < 4; ++k)
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += g[k] * kernels[k].values[i];
  return out;
}

std::vector<double> uniform_grid(double lo, double hi, int points) {
  require(points >= 2 && hi > lo, Errc::invalid_argument, "uniform_grid needs hi > lo and >= 2 points");
  std::vector<double> grid(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i)
    grid[static_cast<std::size_t>(i)] = i + 1 == points ? hi : lo + (hi - lo) * i / (points - 1);
  return grid;
}

AlpBasis fit_basis(const std::array<double, 4>& xi, int half_width, const std::vector<double>& grid,
                   double max_residual) {
  for (double s : xi)
    require(s > 0.0 && std::isfinite(s), Errc::invalid_argument, "basis scales must be positive");
  require(!grid.empty(), Errc::invalid_argument, "fit grid is empty");
  require(grid.size() >= 16, Errc::invalid_argument, "fit grid needs at least 16 samples");

  AlpBasis basis;
  basis.xi = xi;
  basis.half_width = half_width;
  const Eigen::Index dim = static_cast<Eigen::Index>((2 * half_width + 1) * (2 * half_width + 1));
  Eigen::MatrixXd A(dim, 4);
  for (std::size_t k = 0; k < 4; ++k) {
    basis.kernels[k] = log_kernel(xi[k], half_width);
    A.col(static_cast<Eigen::Index>(k)) = as_vector(basis.kernels[k]);
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  qr.setThreshold(1e-8);
  require(qr.rank() == 4, Errc::rank_deficient,
          "basis kernels are linearly dependent (rank " + std::to_string(qr.rank()) + ")");
  for (std::size_t k = 1; k < 4; ++k)
    require(xi[k] > xi[k - 1], Errc::invalid_argument, "basis scales must be strictly increasing");
  const double tol = 1e-9 * xi[3];
  for (double s : grid)
    require(s >= xi[0] - tol && s <= xi[3] + tol, Errc::invalid_argument,
            "fit grid must lie inside [xi_1, xi_4]");

  // exact projection weights at every grid scale
  const Eigen::Index g = static_cast<Eigen::Index>(grid.size());
  Eigen::MatrixXd weights(g, 4);
  std::vector<Eigen::VectorXd> targets;
  targets.reserve(grid.size());
  for (Eigen::Index i = 0; i < g; ++i) {
    targets.push_back(as_vector(log_kernel(grid[static_cast<std::size_t>(i)], half_width)));
    weights.row(i) = qr.solve(targets.back()).transpose();
  }

  // cubic in scale for each weight curve
  Eigen::MatrixXd vander(g, 4);
  for (Eigen::Index i = 0; i < g; ++i) {
    const double s = grid[static_cast<std::size_t>(i)];
    vander.row(i) << s * s * s, s * s, s, 1.0;
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> vqr(vander);
  for (Eigen::Index k = 0; k < 4; ++k) {
    const Eigen::Vector4d c = vqr.solve(weights.col(k));
    basis.cubic[static_cast<std::size_t>(k)] = {c[0], c[1], c[2], c[3]};
  }

  basis.fit_grid = grid;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < g; ++i) {
    const std::array<double, 4> gam = basis.gamma(grid[static_cast<std::size_t>(i)]);
    const Eigen::Vector4d gv(gam[0], gam[1], gam[2], gam[3]);
    const Eigen::VectorXd approx = A * gv;
    const Eigen::VectorXd& exact = targets[static_cast<std::size_t>(i)];
    worst = std::max(worst, (approx - exact).norm() / exact.norm());
  }
  basis.fit_residual = worst;
  require(worst <= max_residual, Errc::numeric_failure,
          "basis fit residual " + std::to_string(worst) + " exceeds " + std::to_string(max_residual));
  return basis;
}

const AlpBasis& default_basis() {
  static const AlpBasis basis =
      fit_basis(kDefaultXi, kDefaultHalfWidth, uniform_grid(kDefaultXi[0], kDefaultXi[3], kDefaultGridPoints));
  return basis;
}

const Image& EtaMaps::operator[](int j) const {
  switch (j) {
    case 0: return eta0;
    case 1: return eta1;
    case 2: return eta2;
    case 3: return eta3;
  }
  fail(Errc::invalid_argument, "eta index must be 0..3");
}

EtaField eta_field(const Image& gray, const AlpBasis& basis) {
  require_gray(gray, "eta_maps");
  EtaField field;
  field.height = gray.height();
  field.width = gray.width();
  const std::size_t n = gray.pixel_count();
  for (auto& e : field.eta) e.assign(n, 0.0);
  for (int k = 0; k < 4; ++k) {
    const std::vector<double> response =
        scalespace::correlate_to_double(gray, basis.kernels[static_cast<std::size_t>(k)]);
    for (int j = 0; j < 4; ++j) {
      const double w = basis.eta_weight(j, k);
      auto& dst = field.eta[static_cast<std::size_t>(j)];
      for (std::size_t i = 0; i < n; ++i) dst[i] += w * response[i];
    }
  }
  return field;
}

EtaMaps eta_maps(const Image& gray, const AlpBasis& basis) {
  const EtaField field = eta_field(gray, basis);
  auto to_image = [&](int j) {
    Image img(field.height, field.width, 1);
    const auto& src = field.eta[static_cast<std::size_t>(j)];
    std::transform(src.begin(), src.end(), img.data().begin(), [](double v) { return static_cast<float>(v); });
    return img;
  };
  return EtaMaps{to_image(0), to_image(1), to_image(2), to_image(3)};
}

std::optional<ScaleExtremum> extremum_scale(double eta3, double eta2, double eta1, double eta0,
                                            double lo, double hi) {
  // derivative: A xi^2 + B xi + C
  const double a = 3.0 * eta3, b = 2.0 * eta2, c = eta1;
  std::array<double, 2> roots{};
  int count = 0;
  const double scale = std::max({std::abs(a) * hi * hi, std::abs(b) * hi, std::abs(c)});
  if (scale == 0.0) return std::nullopt;
  if (std::abs(a) * hi * hi <= 1e-12 * scale) {
    if (b == 0.0) return std::nullopt;
    roots[count++] = -c / b;
  } else {
    const double disc = b * b - 4.0 * a * c;
    if (disc < 0.0) return std::nullopt;
    // numerically stable pair
    const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
    if (q != 0.0) {
      roots[count++] = q / a;
      roots[count++] = c / q;
    } else {
      roots[count++] = 0.0;
    }
  }

  std::optional<ScaleExtremum> best;
  for (int i = 0; i < count; ++i) {
    const double s = roots[static_cast<std::size_t>(i)];
    if (!(s >= lo && s <= hi)) continue;
    const double curvature = 6.0 * eta3 * s + 2.0 * eta2;
    if (curvature == 0.0) continue;
    const double r = ssr(eta3, eta2, eta1, eta0, s);
    if (!best || std::abs(r) > std::abs(best->response)) best = ScaleExtremum{s, r};
  }
  return best;
}

std::optional<ScaleExtremum> extremum_scale(const EtaMaps& eta, int u, int v, const AlpBasis& basis) {
  require(u >= 0 && v >= 0 && u < eta.eta0.height() && v < eta.eta0.width(), Errc::invalid_argument,
          "extremum_scale: pixel out of bounds");
  return extremum_scale(eta.eta3.at(u, v), eta.eta2.at(u, v), eta.eta1.at(u, v), eta.eta0.at(u, v),
                        basis.xi[0], basis.xi[3]);
}

std::vector<AlpKeypoint> alp_detect(const Image& gray, const AlpBasis& basis, double response_threshold) {
  const EtaField field = eta_field(gray, basis);
  const int h = field.height, w = field.width;
  std::vector<double> strength(gray.pixel_count(), 0.0);
  std::vector<ScaleExtremum> extrema(gray.pixel_count());
  for (int u = 0; u < h; ++u)
    for (int v = 0; v < w; ++v) {
      const auto e = extremum_scale(field.at(3, u, v), field.at(2, u, v), field.at(1, u, v),
                                    field.at(0, u, v), basis.xi[0], basis.xi[3]);
      if (!e) continue;
      const std::size_t i = static_cast<std::size_t>(u) * w + v;
      extrema[i] = *e;
      strength[i] = std::abs(e->response);
    }

  std::vector<AlpKeypoint> out;
  for (int u = 1; u + 1 < h; ++u)
    for (int v = 1; v + 1 < w; ++v) {
      const std::size_t i = static_cast<std::size_t>(u) * w + v;
      const double s = strength[i];
      if (!(s >= response_threshold) || s == 0.0) continue;
      bool is_max = true;
      for (int du = -1; du <= 1 && is_max; ++du)
        for (int dv = -1; dv <= 1; ++dv) {
          if (du == 0 && dv == 0) continue;
          if (strength[static_cast<std::size_t>(u + du) * w + (v + dv)] >= s) {
            is_max = false;
            break;
          }
        }
      if (is_max) out.push_back({u, v, extrema[i].xi_star, extrema[i].response});
    }
  return out;
}

double alp_loss(const Image& clean, const Image& derained, const AlpBasis& basis, bool include_eta0) {
  require(clean.same_shape(derained), Errc::dimension_mismatch, "alp_loss: image sizes differ");
  const EtaField a = eta_field(clean, basis);
  const EtaField b = eta_field(derained, basis);
  double total = 0.0;
  for (int j = include_eta0 ? 0 : 1; j <= 3; ++j) {
    const auto& ea = a.eta[static_cast<std::size_t>(j)];
    const auto& eb = b.eta[static_cast<std::size_t>(j)];
    for (std::size_t i = 0; i < ea.size(); ++i) total += std::abs(ea[i] - eb[i]);
  }
  return total / static_cast<double>(clean.pixel_count());
}

std::string basis_to_json(const AlpBasis& basis) {
  json doc;
  doc["xi"] = basis.xi;
  doc["half_width"] = basis.half_width;
  doc["cubic"] = basis.cubic;
  doc["fit_grid"] = basis.fit_grid;
  doc["fit_residual"] = basis.fit_residual;
  return doc.dump(2);
}

AlpBasis basis_from_json(const std::string& text) {
  AlpBasis basis;
  try {
    const json doc = json::parse(text);
    basis.xi = doc.at("xi").get<std::array<double, 4>>();
    basis.half_width = doc.at("half_width").get<int>();
    basis.cubic = doc.at("cubic").get<std::array<std::array<double, 4>, 4>>();
    basis.fit_grid = doc.at("fit_grid").get<std::vector<double>>();
    basis.fit_residual = doc.at("fit_residual").get<double>();
  } catch (const json::exception& e) {
    fail(Errc::corrupt_data, std::string("basis JSON: ") + e.what());
  }
  for (std::size_t k = 0; k < 4; ++k) basis.kernels[k] = log_kernel(basis.xi[k], basis.half_width);
  return basis;
}

void save_basis(const AlpBasis& basis, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  require(static_cast<bool>(out), Errc::io_failure, "cannot write " + path.string());
  out << basis_to_json(basis) << '\n';
}

AlpBasis load_basis(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), Errc::missing_file, path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return basis_from_json(buffer.str());
}

std::string basis_hash(const AlpBasis& basis) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : basis_to_json(basis)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace idsr::alp
