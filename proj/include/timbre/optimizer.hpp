#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "timbre/errors.hpp"

namespace timbre {

/// Adam with bias correction. Moments are kept per parameter tensor; a step
/// with any non-finite gradient is skipped entirely and counted.
template <class S>
struct AdamState {
  using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long step_count = 0;
  long skipped_steps = 0;
  std::vector<Matrix> m, v;

  void init(const std::vector<Matrix*>& params) {
    m.clear();
    v.clear();
    for (const Matrix* p : params) {
      m.push_back(Matrix::Zero(p->rows(), p->cols()));
      v.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
    step_count = 0;
    skipped_steps = 0;
  }

  /// Returns false when the step was skipped because of a non-finite
  /// gradient. step_count still advances so schedules stay aligned.
  bool step(const std::vector<Matrix*>& params,
            const std::vector<Matrix>& grads) {
    if (params.size() != grads.size() || params.size() != m.size())
      throw ShapeError("optimizer state does not match parameter list");
    ++step_count;
    for (const Matrix& g : grads)
      if (!g.allFinite()) {
        ++skipped_steps;
        return false;
      }
    const S bc1 = S(1.0 - std::pow(beta1, double(step_count)));
    const S bc2 = S(1.0 - std::pow(beta2, double(step_count)));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m[i] = S(beta1) * m[i] + S(1.0 - beta1) * grads[i];
      v[i] = S(beta2) * v[i].array().matrix() +
             S(1.0 - beta2) * grads[i].cwiseProduct(grads[i]);
      const auto m_hat = m[i].array() / bc1;
      const auto v_hat = v[i].array() / bc2;
      params[i]->array() -=
          S(learning_rate) * m_hat / (v_hat.sqrt() + S(epsilon));
    }
    return true;
  }
};

}  // namespace timbre
