#include "boxoverlap/box.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "boxoverlap/error.hpp"

namespace boxoverlap {

namespace {

void check_same_dim(std::size_t a, std::size_t b) {
  if (a != b) {
    throw ConfigError("box dimension mismatch: " + std::to_string(a) + " vs " +
                      std::to_string(b));
  }
}

// sigma'(v) / sigma(v), stable for very negative v.
double log_sigma_slope(double v, double rho) {
  const double u = v / rho;
  if (u > 0.0) {
    const double s = rho * (u + std::log1p(std::exp(-u)));
    return logistic(u) / s;
  }
  const double e = std::exp(u);
  if (e == 0.0) return 1.0 / rho;
  return e / ((1.0 + e) * rho * std::log1p(e));
}

}  // namespace

void SmoothingConfig::validate() const {
  if (!(rho >= 0.0) || !std::isfinite(rho)) {
    throw ConfigError("smoothing rho must be finite and >= 0");
  }
}

double softplus(double v) { return std::max(0.0, v) + std::log1p(std::exp(-std::abs(v))); }

double logistic(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

double sigma(double v, const SmoothingConfig& cfg) {
  if (cfg.is_hard()) return std::max(0.0, v);
  if (!(cfg.rho > 0.0)) cfg.validate();
  return std::max(0.0, v) + cfg.rho * std::log1p(std::exp(-std::abs(v) / cfg.rho));
}

double sigma_derivative(double v, const SmoothingConfig& cfg) {
  if (cfg.is_hard()) return v > 0.0 ? 1.0 : 0.0;
  return logistic(v / cfg.rho);
}

double intersection_volume(const BoxEmbedding& bx, const BoxEmbedding& by,
                           const SmoothingConfig& cfg) {
  check_same_dim(bx.dim(), by.dim());
  double vol = 1.0;
  for (std::size_t d = 0; d < bx.dim(); ++d) {
    const double ov = std::min(bx.upper[d], by.upper[d]) - std::max(bx.lower[d], by.lower[d]);
    vol *= sigma(ov, cfg);
  }
  return vol;
}

double volume(const BoxEmbedding& b, const SmoothingConfig& cfg) {
  double vol = 1.0;
  for (std::size_t d = 0; d < b.dim(); ++d) vol *= sigma(b.upper[d] - b.lower[d], cfg);
  return vol;
}

double nbo(const BoxEmbedding& bx, const BoxEmbedding& by, const SmoothingConfig& cfg) {
  check_same_dim(bx.dim(), by.dim());
  double ratio = 1.0;
  for (std::size_t d = 0; d < bx.dim(); ++d) {
    const double extent = sigma(bx.upper[d] - bx.lower[d], cfg);
    if (!(extent > 0.0)) throw GeometryError("degenerate box");
    const double ov = std::min(bx.upper[d], by.upper[d]) - std::max(bx.lower[d], by.lower[d]);
    ratio *= sigma(ov, cfg) / extent;
  }
  return ratio;
}

BoxEmbedding params_to_box(const BoxParams& p) {
  check_same_dim(p.center.size(), p.size_raw.size());
  BoxEmbedding b;
  b.lower.resize(p.dim());
  b.upper.resize(p.dim());
  for (std::size_t d = 0; d < p.dim(); ++d) {
    const double half = 0.5 * softplus(p.size_raw[d]);
    b.lower[d] = p.center[d] - half;
    b.upper[d] = p.center[d] + half;
  }
  return b;
}

double nbo_with_gradient(std::span<const double> px, std::span<const double> py,
                         const SmoothingConfig& cfg, double scale,
                         std::span<double> grad_x, std::span<double> grad_y) {
  if (cfg.is_hard()) throw ConfigError("box gradients require rho > 0");
  check_same_dim(px.size(), py.size());
  check_same_dim(px.size(), grad_x.size());
  check_same_dim(py.size(), grad_y.size());
  const std::size_t dim = px.size() / 2;
  const double rho = cfg.rho;

  struct DimTerms {
    double d_upper_x, d_lower_x, d_upper_y, d_lower_y;
  };
  std::vector<DimTerms> terms(dim);

  double value = 1.0;
  for (std::size_t d = 0; d < dim; ++d) {
    const double half_x = 0.5 * softplus(px[dim + d]);
    const double half_y = 0.5 * softplus(py[dim + d]);
    const double lo_x = px[d] - half_x, hi_x = px[d] + half_x;
    const double lo_y = py[d] - half_y, hi_y = py[d] + half_y;

    const double extent = hi_x - lo_x;
    const double ov = std::min(hi_x, hi_y) - std::max(lo_x, lo_y);
    value *= sigma(ov, cfg) / sigma(extent, cfg);

    // Partial derivatives of log(nbo) with respect to the box bounds.
    const double g_ov = log_sigma_slope(ov, rho);
    const double g_ext = log_sigma_slope(extent, rho);
    const bool x_upper_wins = hi_x <= hi_y;
    const bool x_lower_wins = lo_x >= lo_y;
    terms[d] = {(x_upper_wins ? g_ov : 0.0) - g_ext, (x_lower_wins ? -g_ov : 0.0) + g_ext,
                x_upper_wins ? 0.0 : g_ov, x_lower_wins ? 0.0 : -g_ov};
  }

  const double k = scale * value;
  for (std::size_t d = 0; d < dim; ++d) {
    const DimTerms& t = terms[d];
    grad_x[d] += k * (t.d_upper_x + t.d_lower_x);
    grad_x[dim + d] += k * 0.5 * (t.d_upper_x - t.d_lower_x) * logistic(px[dim + d]);
    grad_y[d] += k * (t.d_upper_y + t.d_lower_y);
    grad_y[dim + d] += k * 0.5 * (t.d_upper_y - t.d_lower_y) * logistic(py[dim + d]);
  }
  return value;
}

std::pair<BoxGradient, BoxGradient> nbo_gradient(const BoxParams& px, const BoxParams& py,
                                                 const SmoothingConfig& cfg) {
  check_same_dim(px.dim(), py.dim());
  const std::size_t dim = px.dim();
  std::vector<double> fx(2 * dim), fy(2 * dim), gx(2 * dim, 0.0), gy(2 * dim, 0.0);
  std::copy(px.center.begin(), px.center.end(), fx.begin());
  std::copy(px.size_raw.begin(), px.size_raw.end(), fx.begin() + dim);
  std::copy(py.center.begin(), py.center.end(), fy.begin());
  std::copy(py.size_raw.begin(), py.size_raw.end(), fy.begin() + dim);
  nbo_with_gradient(fx, fy, cfg, 1.0, gx, gy);

  auto split = [dim](const std::vector<double>& g) {
    return BoxGradient{{g.begin(), g.begin() + dim}, {g.begin() + dim, g.end()}};
  };
  return {split(gx), split(gy)};
}

}  // namespace boxoverlap
