#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace neckface {

inline constexpr int kMiniRocketKernels = 84;    // all 3-of-9 positions
inline constexpr int kMiniRocketKernelLength = 9;

/// The 84 index triples (lexicographic) where the kernel weight is 2 instead of -1.
const std::array<std::array<int, 3>, kMiniRocketKernels>& minirocket_kernel_indices();

/// Features actually produced for a requested count: a whole number per kernel.
constexpr int minirocket_feature_count(int requested) noexcept {
  return kMiniRocketKernels * (requested / kMiniRocketKernels);
}

/// Dilations spaced exponentially up to (L - 1) / 8 and the feature count each one receives.
std::pair<std::vector<int>, std::vector<int>> minirocket_dilations(int length, int num_features,
                                                                   int max_dilations_per_kernel);

/// Low-discrepancy quantile sequence frac(i * golden ratio), i = 1..n.
std::vector<float> minirocket_quantiles(int n);

struct MiniRocketOptions {
  int num_features = 10000;
  int max_dilations_per_kernel = 32;
  std::uint64_t seed = 0;
};

/// Fitted kernel parameters of the multivariate transform.
struct MiniRocketParams {
  int channels = 0;
  int length = 0;
  std::vector<int> dilations;
  std::vector<int> features_per_dilation;
  std::vector<int> channels_per_combination;  // one entry per (dilation, kernel)
  std::vector<int> channel_indices;           // concatenated channel subsets
  std::vector<float> biases;

  int num_features() const noexcept { return static_cast<int>(biases.size()); }
};

/// `x` holds n series, each channels x length, row-major. Biases come from quantiles of the
/// convolution output of randomly chosen training series.
MiniRocketParams minirocket_fit(std::span<const float> x, int n, int channels, int length,
                                const MiniRocketOptions& options);

/// n x num_features proportion-of-positive-values features.
Eigen::MatrixXf minirocket_transform(const MiniRocketParams& params, std::span<const float> x, int n);

/// Per-feature standardization fitted on training features.
struct FeatureScaler {
  Eigen::VectorXf mean;
  Eigen::VectorXf scale;
};
FeatureScaler fit_scaler(const Eigen::MatrixXf& features);
Eigen::MatrixXf apply_scaler(const FeatureScaler& scaler, const Eigen::MatrixXf& features);

/// Linear decision function over +-1 targets with an unpenalized intercept.
struct RidgeClassifier {
  Eigen::VectorXd coef;
  double intercept = 0.0;
  double alpha = 0.0;
  std::vector<double> loo_errors;  // mean squared leave-one-out residual per candidate alpha
};

/// Ridge regression onto +-1 labels with alpha chosen by exact leave-one-out error, computed
/// from one eigendecomposition of the Gram matrix. Above `dual_limit` rows alpha is chosen on
/// a seeded subsample of that size and the full fit is solved by conjugate gradients.
RidgeClassifier fit_ridge_classifier_cv(const Eigen::MatrixXf& features, std::span<const int> labels,
                                        std::span<const double> alphas, int dual_limit = 8000,
                                        std::uint64_t seed = 0);

Eigen::VectorXd ridge_decision(const RidgeClassifier& model, const Eigen::MatrixXf& features);

}  // namespace neckface
