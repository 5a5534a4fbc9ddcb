#pragma once

#include <cmath>
#include <cstdint>

#include "xkgat/model.hpp"

namespace xkgat {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  Matrix<double> m_entities, v_entities;
  Matrix<double> m_relations, v_relations;
  std::int64_t step = 0;

  static AdamState zeros_like(const Parameters<double>& params) {
    const auto& e = params.entities;
    const auto& r = params.relations;
    return {Matrix<double>::Zero(e.rows(), e.cols()), Matrix<double>::Zero(e.rows(), e.cols()),
            Matrix<double>::Zero(r.rows(), r.cols()), Matrix<double>::Zero(r.rows(), r.cols()), 0};
  }
};

/// Bias-corrected Adam update of one tensor at step `step` (1-based).
template <typename P, typename G, typename M, typename V>
void adam_update(Eigen::MatrixBase<P>& param, const Eigen::MatrixBase<G>& grad,
                 Eigen::MatrixBase<M>& first, Eigen::MatrixBase<V>& second, std::int64_t step,
                 const AdamConfig& config) {
  first = config.beta1 * first + (1.0 - config.beta1) * grad;
  second = config.beta2 * second + (1.0 - config.beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
  param -= (config.learning_rate * (first / c1).array() /
            ((second / c2).array().sqrt() + config.epsilon))
               .matrix();
}

/// One Adam step over both embedding tables. Only canonical relation rows
/// exist, so inverse lookups stay tied.
void adam_step(Parameters<double>& params, const Gradients<double>& grads, AdamState& state,
               const AdamConfig& config);

}  // namespace xkgat
