#pragma once

// Independent reference computations shared by the unit and acceptance tests.

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "scripta/mlp.hpp"
#include "scripta/srs_lbp.hpp"

namespace scripta::testing {

/// Brute-force Otsu: exact rational between-class variance w0*w1*(mu0-mu1)^2 for every split,
/// smallest maximiser; the single occupied bin when no split has two non-empty classes.
inline int otsu_oracle(std::span<const std::uint64_t> hist) {
  using boost::multiprecision::cpp_rational;
  std::uint64_t total = 0, weighted = 0;
  for (std::size_t i = 0; i < hist.size(); ++i) {
    total += hist[i];
    weighted += i * hist[i];
  }
  int best = -1;
  cpp_rational best_var = -1;
  std::uint64_t n0 = 0, s0 = 0;
  for (int t = 0; t + 1 < static_cast<int>(hist.size()); ++t) {
    n0 += hist[t];
    s0 += static_cast<std::uint64_t>(t) * hist[t];
    const std::uint64_t n1 = total - n0, s1 = weighted - s0;
    if (n0 == 0 || n1 == 0) continue;
    const cpp_rational w0(n0, total), w1(n1, total);
    const cpp_rational diff = cpp_rational(s0, n0) - cpp_rational(s1, n1);
    const cpp_rational var = w0 * w1 * diff * diff;
    if (var > best_var) {
      best_var = var;
      best = t;
    }
  }
  if (best < 0) {
    for (int i = 0; i < static_cast<int>(hist.size()); ++i)
      if (hist[i] != 0) return i;
  }
  return best;
}

/// Random histogram with a mix of sparse, peaked and dense shapes.
inline Histogram256 random_histogram(std::mt19937_64& rng) {
  Histogram256 h{};
  std::uniform_int_distribution<int> shape(0, 3);
  std::uniform_int_distribution<int> bin(0, 255);
  switch (shape(rng)) {
    case 0:
      for (auto& c : h) c = std::uniform_int_distribution<std::uint64_t>(0, 1000)(rng);
      break;
    case 1:
      for (int i = 0, n = std::uniform_int_distribution<int>(1, 6)(rng); i < n; ++i)
        h[bin(rng)] += std::uniform_int_distribution<std::uint64_t>(1, 50)(rng);
      break;
    case 2: {
      const double m1 = bin(rng), m2 = bin(rng);
      const double s1 = 5 + bin(rng) / 8.0, s2 = 5 + bin(rng) / 8.0;
      for (int i = 0; i < 256; ++i) {
        h[i] = static_cast<std::uint64_t>(500 * std::exp(-(i - m1) * (i - m1) / (2 * s1 * s1)) +
                                          300 * std::exp(-(i - m2) * (i - m2) / (2 * s2 * s2)));
      }
      h[bin(rng)] += 1;
      break;
    }
    default:
      for (auto& c : h) c = std::uniform_int_distribution<int>(0, 9)(rng) == 0 ? std::uniform_int_distribution<std::uint64_t>(0, 3)(rng) : 0;
      h[bin(rng)] += 1;
  }
  return h;
}

/// Labels by exhaustive distance computation: sort all rows by (distance, index), vote among the
/// first k, tie to the class of the nearest voter.
inline std::uint32_t knn_oracle(const std::vector<std::vector<double>>& gallery, const std::vector<std::uint32_t>& labels,
                                const std::vector<double>& query, std::size_t k, std::size_t n_classes) {
  std::vector<std::pair<double, std::size_t>> d;
  for (std::size_t i = 0; i < gallery.size(); ++i) {
    double s = 0;
    for (std::size_t j = 0; j < query.size(); ++j) s += (gallery[i][j] - query[j]) * (gallery[i][j] - query[j]);
    d.emplace_back(s, i);
  }
  std::sort(d.begin(), d.end());
  std::vector<std::size_t> votes(n_classes);
  for (std::size_t j = 0; j < k; ++j) ++votes[labels[d[j].second]];
  const auto top = *std::max_element(votes.begin(), votes.end());
  for (std::size_t j = 0; j < k; ++j)
    if (votes[labels[d[j].second]] == top) return labels[d[j].second];
  return 0;
}

/// Max relative error between backward() and central finite differences of the loss,
/// |g - fd| / max(1e-6, |g| + |fd|) over every parameter.
inline double gradient_check(const BasicMlp<double>& model, std::span<const double> x, std::uint32_t target, double h = 1e-5) {
  const auto grads = model.backward(x, target);
  BasicMlp<double> probe = model;
  double worst = 0.0;
  auto loss = [&] { return cross_entropy(probe.forward(x).out, target); };
  auto check = [&](double& param, double analytic) {
    const double keep = param;
    param = keep + h;
    const double up = loss();
    param = keep - h;
    const double down = loss();
    param = keep;
    const double fd = (up - down) / (2 * h);
    worst = std::max(worst, std::abs(analytic - fd) / std::max(1e-6, std::abs(analytic) + std::abs(fd)));
  };
  for (std::size_t l = 0; l < 3; ++l) {
    auto& layer = probe.layers()[l];
    for (Eigen::Index i = 0; i < layer.weights.rows(); ++i)
      for (Eigen::Index j = 0; j < layer.weights.cols(); ++j) check(layer.weights(i, j), grads[l].weights(i, j));
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) check(layer.bias(i), grads[l].bias(i));
  }
  return worst;
}

/// Random small model for gradient checks: input <= 32, hidden <= [8, 6], classes <= 5.
inline BasicMlp<double> random_small_model(std::mt19937_64& rng, OutputActivation output) {
  MlpArchitecture arch;
  arch.input_dim = std::uniform_int_distribution<std::size_t>(1, 32)(rng);
  arch.hidden1 = std::uniform_int_distribution<std::size_t>(1, 8)(rng);
  arch.hidden2 = std::uniform_int_distribution<std::size_t>(1, 6)(rng);
  arch.n_classes = std::uniform_int_distribution<std::size_t>(2, 5)(rng);
  arch.output = output;
  auto model = BasicMlp<double>::init(arch, rng());
  std::normal_distribution<double> bias(0.0, 0.3);
  for (auto& l : model.layers())
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = bias(rng);
  return model;
}

}  // namespace scripta::testing
