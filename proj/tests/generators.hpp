#pragma once

// Hand-rolled random instance generators shared by the unit and acceptance tests.

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "neckface/face_state.hpp"
#include "neckface/reaction_dataset.hpp"

namespace gen {

inline std::vector<int> labels(std::mt19937_64& rng, std::size_t n, double p1) {
  std::bernoulli_distribution b(p1);
  std::vector<int> v(n);
  for (auto& x : v) x = b(rng) ? 1 : 0;
  return v;
}

inline neckface::FaceState state(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> bs(0, 1000), ang(-90, 90);
  neckface::FaceState s;
  for (auto& b : s.blendshapes) b = bs(rng);
  s.yaw = ang(rng);
  s.pitch = ang(rng);
  s.roll = ang(rng);
  return s;
}

// Segment ids that step up at random points.
inline std::vector<std::size_t> segments(std::mt19937_64& rng, std::size_t n) {
  std::vector<std::size_t> seg(n);
  std::size_t id = 0;
  for (auto& s : seg) {
    if (rng() % 7 == 0) ++id;
    s = id;
  }
  return seg;
}

inline neckface::ReactionSequence sequence(std::mt19937_64& rng, std::size_t t, int f) {
  neckface::ReactionSequence s;
  s.participant_id = "P01";
  s.stimulus_id = "hum_01";
  std::uniform_real_distribution<double> u(-1, 1);
  s.features.resize(static_cast<Eigen::Index>(t), f);
  for (Eigen::Index i = 0; i < s.features.size(); ++i) s.features.data()[i] = u(rng);
  s.labels.resize(t);
  for (auto& l : s.labels) l = static_cast<int>(rng() % 2);
  for (std::size_t i = 0; i < t; ++i) s.timestamps.push_back(static_cast<double>(i) / 12.0);
  return s;
}

// Rows drawn from a random mixing of independent Gaussians with decaying scales.
inline Eigen::MatrixXd mixed_rows(std::mt19937_64& rng, int n, int f, double decay = 0.3) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd mix(f, f);
  for (int i = 0; i < f; ++i)
    for (int j = 0; j < f; ++j) mix(i, j) = g(rng) * std::pow(decay, j);
  Eigen::MatrixXd rows(n, f);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < f; ++c) rows(r, c) = g(rng);
  return rows * mix.transpose();
}

}  // namespace gen
