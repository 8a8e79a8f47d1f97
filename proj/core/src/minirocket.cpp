#include "neckface/minirocket.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "neckface/error.hpp"
#include "neckface/rng.hpp"

namespace neckface {

namespace {

constexpr int kCenter = kMiniRocketKernelLength / 2;

/// Per-channel shifted copies of -x (summed) and 3x for one series at one dilation.
struct ShiftBuffers {
  int channels = 0;
  int length = 0;
  std::vector<float> alpha;  // channels x length
  std::vector<float> gamma;  // 9 x channels x length

  void compute(const float* series, int c, int l, int dilation) {
    channels = c;
    length = l;
    alpha.assign(static_cast<std::size_t>(c) * l, 0.0F);
    gamma.assign(static_cast<std::size_t>(kMiniRocketKernelLength) * c * l, 0.0F);
    for (int ch = 0; ch < c; ++ch) {
      const float* x = series + static_cast<std::size_t>(ch) * l;
      float* a = alpha.data() + static_cast<std::size_t>(ch) * l;
      for (int g = 0; g < kMiniRocketKernelLength; ++g) {
        const int shift = (g - kCenter) * dilation;
        float* gm = gamma.data() + (static_cast<std::size_t>(g) * c + ch) * l;
        const int t0 = std::max(0, -shift);
        const int t1 = std::min(l, l - shift);
        for (int t = t0; t < t1; ++t) {
          const float v = x[t + shift];
          a[t] -= v;
          gm[t] = 3.0F * v;
        }
      }
    }
  }

  const float* alpha_row(int ch) const { return alpha.data() + static_cast<std::size_t>(ch) * length; }
  const float* gamma_row(int g, int ch) const {
    return gamma.data() + (static_cast<std::size_t>(g) * channels + ch) * length;
  }
};

void convolve(const ShiftBuffers& buf, std::span<const int> channels, const std::array<int, 3>& idx,
              std::vector<float>& out) {
  out.assign(static_cast<std::size_t>(buf.length), 0.0F);
  for (int ch : channels) {
    const float* a = buf.alpha_row(ch);
    const float* g0 = buf.gamma_row(idx[0], ch);
    const float* g1 = buf.gamma_row(idx[1], ch);
    const float* g2 = buf.gamma_row(idx[2], ch);
    for (int t = 0; t < buf.length; ++t) out[static_cast<std::size_t>(t)] += a[t] + g0[t] + g1[t] + g2[t];
  }
}

float quantile_linear(std::vector<float> values, float q) {
  std::sort(values.begin(), values.end());
  const double pos = static_cast<double>(q) * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return static_cast<float>(values[lo] + frac * (static_cast<double>(values[hi]) - values[lo]));
}

void check_shape(std::span<const float> x, int n, int channels, int length) {
  if (n < 1 || channels < 1) throw InvalidArgument("minirocket needs at least one series and channel");
  if (length < kMiniRocketKernelLength) {
    throw InvalidArgument("minirocket needs series of at least 9 samples, got " + std::to_string(length));
  }
  if (x.size() != static_cast<std::size_t>(n) * channels * length) {
    throw InvalidArgument("minirocket input size does not match n x channels x length");
  }
}

}  // namespace

const std::array<std::array<int, 3>, kMiniRocketKernels>& minirocket_kernel_indices() {
  static const auto table = [] {
    std::array<std::array<int, 3>, kMiniRocketKernels> t{};
    std::size_t k = 0;
    for (int a = 0; a < 9; ++a)
      for (int b = a + 1; b < 9; ++b)
        for (int c = b + 1; c < 9; ++c) t[k++] = {a, b, c};
    return t;
  }();
  return table;
}

std::pair<std::vector<int>, std::vector<int>> minirocket_dilations(int length, int num_features,
                                                                   int max_dilations_per_kernel) {
  if (length < kMiniRocketKernelLength) throw InvalidArgument("minirocket needs series of at least 9 samples");
  if (num_features < kMiniRocketKernels) throw InvalidArgument("minirocket needs at least 84 features");
  if (max_dilations_per_kernel < 1) throw InvalidArgument("max_dilations_per_kernel must be positive");
  const int per_kernel = num_features / kMiniRocketKernels;
  const int true_max = std::min(per_kernel, max_dilations_per_kernel);
  const double multiplier = static_cast<double>(per_kernel) / true_max;
  const double max_exponent = std::log2((length - 1) / static_cast<double>(kMiniRocketKernelLength - 1));

  std::vector<int> raw;
  for (int i = 0; i < true_max; ++i) {
    const double e = (i == true_max - 1 && true_max > 1)
                         ? max_exponent
                         : (true_max > 1 ? max_exponent * i / (true_max - 1) : 0.0);
    raw.push_back(static_cast<int>(std::pow(2.0, e)));
  }
  std::vector<int> dilations;
  std::vector<int> counts;
  for (int d : raw) {  // already nondecreasing
    if (dilations.empty() || dilations.back() != d) {
      dilations.push_back(d);
      counts.push_back(0);
    }
    ++counts.back();
  }
  std::vector<int> per_dilation;
  int total = 0;
  for (int c : counts) {
    per_dilation.push_back(static_cast<int>(c * multiplier));
    total += per_dilation.back();
  }
  for (std::size_t i = 0; total < per_kernel; i = (i + 1) % per_dilation.size()) {
    ++per_dilation[i];
    ++total;
  }
  return {dilations, per_dilation};
}

std::vector<float> minirocket_quantiles(int n) {
  const double phi = (std::sqrt(5.0) + 1.0) / 2.0;
  std::vector<float> q(static_cast<std::size_t>(n));
  for (int i = 1; i <= n; ++i) q[static_cast<std::size_t>(i - 1)] = static_cast<float>(std::fmod(i * phi, 1.0));
  return q;
}

MiniRocketParams minirocket_fit(std::span<const float> x, int n, int channels, int length,
                                const MiniRocketOptions& options) {
  check_shape(x, n, channels, length);
  MiniRocketParams p;
  p.channels = channels;
  p.length = length;
  std::tie(p.dilations, p.features_per_dilation) =
      minirocket_dilations(length, options.num_features, options.max_dilations_per_kernel);
  const int per_kernel = std::accumulate(p.features_per_dilation.begin(), p.features_per_dilation.end(), 0);
  const auto quantiles = minirocket_quantiles(kMiniRocketKernels * per_kernel);

  Rng rng(derive_seed(options.seed, "minirocket"));
  const int combinations = kMiniRocketKernels * static_cast<int>(p.dilations.size());
  const int max_ch = std::min(channels, 9);
  const double max_exp = std::log2(max_ch + 1.0);
  std::vector<int> pool(static_cast<std::size_t>(channels));
  for (int c = 0; c < combinations; ++c) {
    const int k = std::clamp(static_cast<int>(std::pow(2.0, uniform(rng, 0.0, max_exp))), 1, max_ch);
    p.channels_per_combination.push_back(k);
    std::iota(pool.begin(), pool.end(), 0);
    for (int i = 0; i < k; ++i) {
      std::uniform_int_distribution<int> pick(i, channels - 1);
      std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(rng))]);
      p.channel_indices.push_back(pool[static_cast<std::size_t>(i)]);
    }
  }

  const auto& idx = minirocket_kernel_indices();
  const std::size_t stride = static_cast<std::size_t>(channels) * length;
  std::uniform_int_distribution<int> pick_example(0, n - 1);
  ShiftBuffers buf;
  std::vector<float> conv;
  std::size_t feature = 0;
  std::size_t combo = 0;
  std::size_t ch_start = 0;
  for (std::size_t d = 0; d < p.dilations.size(); ++d) {
    const int nf = p.features_per_dilation[d];
    for (int k = 0; k < kMiniRocketKernels; ++k, ++combo) {
      const int nch = p.channels_per_combination[combo];
      const std::span<const int> chans(p.channel_indices.data() + ch_start, static_cast<std::size_t>(nch));
      ch_start += static_cast<std::size_t>(nch);
      const int example = pick_example(rng);
      buf.compute(x.data() + stride * static_cast<std::size_t>(example), channels, length, p.dilations[d]);
      convolve(buf, chans, idx[static_cast<std::size_t>(k)], conv);
      for (int f = 0; f < nf; ++f, ++feature) p.biases.push_back(quantile_linear(conv, quantiles[feature]));
    }
  }
  return p;
}

Eigen::MatrixXf minirocket_transform(const MiniRocketParams& p, std::span<const float> x, int n) {
  check_shape(x, n, p.channels, p.length);
  const auto& idx = minirocket_kernel_indices();
  const std::size_t stride = static_cast<std::size_t>(p.channels) * p.length;
  Eigen::MatrixXf out(n, p.num_features());
  ShiftBuffers buf;
  std::vector<float> conv;
  for (int e = 0; e < n; ++e) {
    const float* series = x.data() + stride * static_cast<std::size_t>(e);
    std::size_t feature = 0;
    std::size_t combo = 0;
    std::size_t ch_start = 0;
    for (std::size_t d = 0; d < p.dilations.size(); ++d) {
      const int dilation = p.dilations[d];
      const int padding = ((kMiniRocketKernelLength - 1) * dilation) / 2;
      const int nf = p.features_per_dilation[d];
      buf.compute(series, p.channels, p.length, dilation);
      for (int k = 0; k < kMiniRocketKernels; ++k, ++combo) {
        const int nch = p.channels_per_combination[combo];
        const std::span<const int> chans(p.channel_indices.data() + ch_start, static_cast<std::size_t>(nch));
        ch_start += static_cast<std::size_t>(nch);
        convolve(buf, chans, idx[static_cast<std::size_t>(k)], conv);
        // Alternate between the full output and the part not touched by zero padding.
        const bool interior = (static_cast<int>(d) + k) % 2 == 1;
        const int t0 = interior ? padding : 0;
        const int t1 = interior ? p.length - padding : p.length;
        const float inv = 1.0F / static_cast<float>(t1 - t0);
        for (int f = 0; f < nf; ++f, ++feature) {
          const float b = p.biases[feature];
          int positive = 0;
          for (int t = t0; t < t1; ++t) positive += conv[static_cast<std::size_t>(t)] > b ? 1 : 0;
          out(e, static_cast<Eigen::Index>(feature)) = static_cast<float>(positive) * inv;
        }
      }
    }
  }
  return out;
}

FeatureScaler fit_scaler(const Eigen::MatrixXf& features) {
  if (features.rows() < 1) throw InvalidArgument("cannot fit a scaler on zero rows");
  FeatureScaler s;
  const Eigen::VectorXd mean = features.cast<double>().colwise().mean().transpose();
  Eigen::VectorXd var = Eigen::VectorXd::Zero(features.cols());
  for (Eigen::Index j = 0; j < features.cols(); ++j) {
    var(j) = (features.col(j).cast<double>().array() - mean(j)).square().mean();
  }
  s.mean = mean.cast<float>();
  s.scale = var.cwiseSqrt().unaryExpr([](double v) { return v > 1e-12 ? v : 1.0; }).cast<float>();
  return s;
}

Eigen::MatrixXf apply_scaler(const FeatureScaler& s, const Eigen::MatrixXf& features) {
  if (features.cols() != s.mean.size()) throw InvalidArgument("scaler width does not match features");
  return ((features.rowwise() - s.mean.transpose()).array().rowwise() / s.scale.transpose().array()).matrix();
}

namespace {

struct DualFit {
  Eigen::VectorXd dual;  // c, such that coef = Xc^T c
  double alpha = 0.0;
  std::vector<double> errors;
};

Eigen::MatrixXd centered_gram(const Eigen::MatrixXf& x, const Eigen::VectorXd& mean) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n, n);
  constexpr Eigen::Index kBlock = 1024;
  for (Eigen::Index j = 0; j < x.cols(); j += kBlock) {
    const Eigen::Index w = std::min(kBlock, x.cols() - j);
    Eigen::MatrixXd block = x.middleCols(j, w).cast<double>();
    block.rowwise() -= mean.segment(j, w).transpose();
    k.selfadjointView<Eigen::Lower>().rankUpdate(block);
  }
  return k.selfadjointView<Eigen::Lower>();
}

DualFit loo_dual(const Eigen::MatrixXf& x, const Eigen::VectorXd& mean, const Eigen::VectorXd& yc,
                 std::span<const double> alphas) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd k = centered_gram(x, mean);
  k.array() += 1.0;  // unpenalized intercept direction
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(k);
  if (eig.info() != Eigen::Success) throw TrainingError("ridge eigendecomposition failed");
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  const Eigen::MatrixXd& q = eig.eigenvectors();
  Eigen::Index intercept_dim = 0;
  (q.transpose() * Eigen::VectorXd::Constant(n, 1.0 / std::sqrt(static_cast<double>(n))))
      .cwiseAbs()
      .maxCoeff(&intercept_dim);
  const Eigen::VectorXd qty = q.transpose() * yc;
  const Eigen::MatrixXd q2 = q.array().square().matrix();

  DualFit best;
  double best_err = std::numeric_limits<double>::infinity();
  for (double alpha : alphas) {
    Eigen::VectorXd w = (lambda.array() + alpha).inverse().matrix();
    w(intercept_dim) = 0.0;
    const Eigen::VectorXd c = q * w.cwiseProduct(qty);
    const Eigen::VectorXd g = q2 * w;
    const double err = (c.array() / g.array()).square().mean();
    best.errors.push_back(err);
    if (err < best_err) {
      best_err = err;
      best.alpha = alpha;
      best.dual = c;
    }
  }
  return best;
}

Eigen::VectorXd centered_times(const Eigen::MatrixXf& x, const Eigen::VectorXd& mean, const Eigen::VectorXd& v) {
  Eigen::VectorXd u = (x * v.cast<float>()).cast<double>();
  u.array() -= mean.dot(v);
  return u;
}

Eigen::VectorXd centered_transpose_times(const Eigen::MatrixXf& x, const Eigen::VectorXd& mean,
                                         const Eigen::VectorXd& u) {
  Eigen::VectorXd r = (x.transpose() * u.cast<float>()).cast<double>();
  r -= mean * u.sum();
  return r;
}

}  // namespace

RidgeClassifier fit_ridge_classifier_cv(const Eigen::MatrixXf& features, std::span<const int> labels,
                                        std::span<const double> alphas, int dual_limit, std::uint64_t seed) {
  const Eigen::Index n = features.rows();
  if (n < 2 || static_cast<std::size_t>(n) != labels.size()) {
    throw InvalidArgument("ridge fit needs at least two rows with one label each");
  }
  if (alphas.empty()) throw InvalidArgument("ridge fit needs candidate alphas");
  for (double a : alphas) {
    if (!(a > 0.0)) throw InvalidArgument("ridge alphas must be positive");
  }
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y(i) = labels[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0;
  if (y.cwiseAbs().sum() == std::abs(y.sum())) throw DegenerateLabels("ridge fit received a single class");

  const Eigen::VectorXd mean = features.cast<double>().colwise().mean().transpose();
  const double ymean = y.mean();
  const Eigen::VectorXd yc = y.array() - ymean;

  RidgeClassifier model;
  if (n <= dual_limit) {
    auto fit = loo_dual(features, mean, yc, alphas);
    model.alpha = fit.alpha;
    model.loo_errors = std::move(fit.errors);
    model.coef = centered_transpose_times(features, mean, fit.dual);
  } else {
    std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
    std::iota(rows.begin(), rows.end(), Eigen::Index{0});
    Rng rng(derive_seed(seed, "ridge-subsample"));
    std::shuffle(rows.begin(), rows.end(), rng);
    rows.resize(static_cast<std::size_t>(dual_limit));
    std::sort(rows.begin(), rows.end());
    Eigen::MatrixXf sub(dual_limit, features.cols());
    Eigen::VectorXd ysub(dual_limit);
    for (int i = 0; i < dual_limit; ++i) {
      sub.row(i) = features.row(rows[static_cast<std::size_t>(i)]);
      ysub(i) = y(rows[static_cast<std::size_t>(i)]);
    }
    const Eigen::VectorXd sub_mean = sub.cast<double>().colwise().mean().transpose();
    auto fit = loo_dual(sub, sub_mean, ysub.array() - ysub.mean(), alphas);
    model.alpha = fit.alpha;
    model.loo_errors = std::move(fit.errors);

    // (Xc^T Xc + alpha I) w = Xc^T yc by conjugate gradients.
    const Eigen::VectorXd b = centered_transpose_times(features, mean, yc);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(features.cols());
    Eigen::VectorXd r = b;
    Eigen::VectorXd p = r;
    double rr = r.squaredNorm();
    const double tol = 1e-10 * b.squaredNorm();
    for (int it = 0; it < 1000 && rr > tol; ++it) {
      const Eigen::VectorXd ap =
          centered_transpose_times(features, mean, centered_times(features, mean, p)) + model.alpha * p;
      const double step = rr / p.dot(ap);
      w += step * p;
      r -= step * ap;
      const double rr_next = r.squaredNorm();
      p = r + (rr_next / rr) * p;
      rr = rr_next;
    }
    model.coef = w;
  }
  model.intercept = ymean - mean.dot(model.coef);
  return model;
}

Eigen::VectorXd ridge_decision(const RidgeClassifier& model, const Eigen::MatrixXf& features) {
  if (features.cols() != model.coef.size()) throw InvalidArgument("ridge input width does not match the fit");
  Eigen::VectorXd d = (features * model.coef.cast<float>()).cast<double>();
  d.array() += model.intercept;
  return d;
}

}  // namespace neckface
