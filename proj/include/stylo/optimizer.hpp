#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace stylo {

// Adaptive-moment optimizer with decoupled weight decay. Moment slots are
// keyed by parameter name so they can be checkpointed and restored exactly.
class AdamW {
 public:
  struct Slot {
    Eigen::MatrixXd m;
    Eigen::MatrixXd v;
  };

  AdamW(double beta1, double beta2, double epsilon, double weight_decay)
      : beta1_(beta1), beta2_(beta2), epsilon_(epsilon), weight_decay_(weight_decay) {
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
      throw std::invalid_argument("AdamW: momenta must lie in [0,1)");
    }
  }

  void begin_step() { ++step_count_; }

  void update(const std::string& name, Eigen::MatrixXd& param,
              const Eigen::MatrixXd& grad, double lr, bool apply_decay) {
    if (param.rows() != grad.rows() || param.cols() != grad.cols()) {
      throw std::invalid_argument("AdamW: shape mismatch for " + name);
    }
    auto [it, inserted] = slots_.try_emplace(name);
    Slot& slot = it->second;
    if (inserted) {
      slot.m = Eigen::MatrixXd::Zero(param.rows(), param.cols());
      slot.v = Eigen::MatrixXd::Zero(param.rows(), param.cols());
    }

    slot.m = beta1_ * slot.m + (1.0 - beta1_) * grad;
    slot.v.array() = beta2_ * slot.v.array() + (1.0 - beta2_) * grad.array().square();

    const double t = static_cast<double>(step_count_);
    const double bias1 = 1.0 - std::pow(beta1_, t);
    const double bias2 = 1.0 - std::pow(beta2_, t);

    param.array() -=
        lr * (slot.m.array() / bias1) /
        ((slot.v.array() / bias2).sqrt() + epsilon_);
    if (apply_decay && weight_decay_ != 0.0) {
      param.array() -= lr * weight_decay_ * param.array();
    }
  }

  std::int64_t step_count() const { return step_count_; }
  void set_step_count(std::int64_t value) { step_count_ = value; }

  const std::map<std::string, Slot>& slots() const { return slots_; }
  void restore_slot(const std::string& name, Eigen::MatrixXd m, Eigen::MatrixXd v) {
    slots_[name] = Slot{std::move(m), std::move(v)};
  }

 private:
  double beta1_;
  double beta2_;
  double epsilon_;
  double weight_decay_;
  std::int64_t step_count_ = 0;
  std::map<std::string, Slot> slots_;
};

}  // namespace stylo
