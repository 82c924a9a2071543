#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "contratopic/diffcore.hpp"

namespace contratopic {

struct AdamConfig {
  double lr = 0.0005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <class T>
struct AdamMoments {
  diff::Matrix<T> m;
  diff::Matrix<T> v;
};

/// Bias-corrected Adam update of one parameter in place. `step` is the
/// 1-based step number after increment.
template <class T>
void adam_step(diff::Matrix<T>& param, const diff::Matrix<T>& grad, AdamMoments<T>& state, std::uint64_t step,
               const AdamConfig& cfg) {
  if (param.rows() != grad.rows() || param.cols() != grad.cols())
    throw ShapeError("adam_step: parameter " + diff::shape_str(param) + " and gradient " + diff::shape_str(grad) +
                     " differ");
  if (state.m.size() == 0) {
    state.m.setZero(param.rows(), param.cols());
    state.v.setZero(param.rows(), param.cols());
  }
  const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
  state.m = b1 * state.m + (T(1) - b1) * grad;
  state.v = b2 * state.v + (T(1) - b2) * grad.cwiseAbs2();
  const T c1 = static_cast<T>(1.0 - std::pow(cfg.beta1, static_cast<double>(step)));
  const T c2 = static_cast<T>(1.0 - std::pow(cfg.beta2, static_cast<double>(step)));
  const T lr = static_cast<T>(cfg.lr), eps = static_cast<T>(cfg.eps);
  param.array() -= lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + eps);
}

/// Adam over a fixed, ordered list of parameters. Frozen parameters are
/// skipped and keep their moments empty.
template <class T>
class Adam {
 public:
  Adam() = default;
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

  void step(std::span<diff::Parameter<T>* const> params) {
    if (moments_.size() != params.size()) moments_.resize(params.size());
    ++step_;
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto* p = params[i];
      if (!p->requires_grad) continue;
      adam_step(p->value, p->grad, moments_[i], step_, cfg_);
    }
  }

  const AdamConfig& config() const { return cfg_; }
  std::uint64_t step_count() const { return step_; }
  std::vector<AdamMoments<T>>& moments() { return moments_; }
  const std::vector<AdamMoments<T>>& moments() const { return moments_; }
  void restore(std::uint64_t step, std::vector<AdamMoments<T>> moments) {
    step_ = step;
    moments_ = std::move(moments);
  }

 private:
  AdamConfig cfg_;
  std::uint64_t step_ = 0;
  std::vector<AdamMoments<T>> moments_;
};

}  // namespace contratopic
