#pragma once

#include <span>
#include <utility>
#include <vector>

namespace boxoverlap {

// Axis-aligned box in embedding space; upper[d] >= lower[d].
struct BoxEmbedding {
  std::vector<double> lower;
  std::vector<double> upper;

  std::size_t dim() const { return lower.size(); }
};

// Trainable box parameters: extent = softplus(size_raw).
struct BoxParams {
  std::vector<double> center;
  std::vector<double> size_raw;

  std::size_t dim() const { return center.size(); }
};

// rho > 0 selects the softplus-smoothed overlap, rho == 0 the hard max(0, v).
struct SmoothingConfig {
  double rho = 5.0;

  static SmoothingConfig hard() { return {0.0}; }
  bool is_hard() const { return rho == 0.0; }
  void validate() const;
};

double softplus(double v);
double logistic(double v);

// max(0, v) in hard mode, rho * ln(1 + exp(v / rho)) otherwise.
double sigma(double v, const SmoothingConfig& cfg);
// d sigma / dv (hard mode: 1 for v > 0, else 0).
double sigma_derivative(double v, const SmoothingConfig& cfg);

double intersection_volume(const BoxEmbedding& bx, const BoxEmbedding& by,
                           const SmoothingConfig& cfg);
double volume(const BoxEmbedding& b, const SmoothingConfig& cfg);

// Normalized box overlap: intersection_volume(bx, by) / volume(bx), evaluated
// as a product of per-dimension ratios so large D neither overflows nor
// underflows. Asymmetric. Throws GeometryError("degenerate box") when a hard
// source extent is zero.
double nbo(const BoxEmbedding& bx, const BoxEmbedding& by, const SmoothingConfig& cfg);

BoxEmbedding params_to_box(const BoxParams& p);

struct BoxGradient {
  std::vector<double> d_center;
  std::vector<double> d_size_raw;
};

// Gradient of nbo(params_to_box(px), params_to_box(py)) with respect to the
// raw parameters of both boxes. Ties in min/max go to the first argument.
// Requires rho > 0.
std::pair<BoxGradient, BoxGradient> nbo_gradient(const BoxParams& px, const BoxParams& py,
                                                 const SmoothingConfig& cfg);

// Same gradient over flat [center..., size_raw...] parameter blocks of length
// 2*dim; the result is accumulated into grad_x / grad_y scaled by `scale`.
// Returns the nbo value.
double nbo_with_gradient(std::span<const double> px, std::span<const double> py,
                         const SmoothingConfig& cfg, double scale,
                         std::span<double> grad_x, std::span<double> grad_y);

}  // namespace boxoverlap
