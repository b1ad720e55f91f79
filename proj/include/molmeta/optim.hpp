#pragma once

#include <cmath>
#include <optional>

#include "molmeta/errors.hpp"
#include "molmeta/params.hpp"

namespace molmeta {

class Sgd {
 public:
  explicit Sgd(double lr) : lr_(lr) {}

  void step(ParamSet& params, const ParamSet& grad) { params.axpy(-lr_, grad); }
  double lr() const { return lr_; }

 private:
  double lr_;
};

// Adam with bias correction.
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ParamSet& params, const ParamSet& grad) {
    if (!params.same_structure(grad)) throw DimensionError("Adam: gradient structure mismatch");
    if (!m_) {
      m_ = params.zeros_like();
      v_ = params.zeros_like();
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto p = params[i].value.data();
      auto g = grad[i].value.data();
      auto m = (*m_)[i].value.data();
      auto v = (*v_)[i].value.data();
      for (std::size_t j = 0; j < p.size(); ++j) {
        m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
        v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
        p[j] -= lr_ * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps_);
      }
    }
  }

  double lr() const { return lr_; }
  long steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::optional<ParamSet> m_, v_;
};

enum class OptimizerKind { kAdam, kSgd };

// Either optimizer behind one call site.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double lr) : kind_(kind), sgd_(lr), adam_(lr) {}

  void step(ParamSet& params, const ParamSet& grad) {
    if (kind_ == OptimizerKind::kAdam) {
      adam_.step(params, grad);
    } else {
      sgd_.step(params, grad);
    }
  }
  OptimizerKind kind() const { return kind_; }

 private:
  OptimizerKind kind_;
  Sgd sgd_;
  Adam adam_;
};

}  // namespace molmeta
