#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace pfsplat {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam over one flat parameter group.
class Adam {
 public:
  Adam() = default;
  Adam(size_t size, AdamOptions options) : options_(options), m_(size, 0.0), v_(size, 0.0) {}

  /// One bias-corrected update with learning rate options.lr * lr_scale.
  void step(std::span<double> params, std::span<const double> grads, double lr_scale = 1.0);

  [[nodiscard]] std::int64_t steps() const { return t_; }
  [[nodiscard]] const AdamOptions& options() const { return options_; }
  [[nodiscard]] std::span<const double> first_moment() const { return m_; }
  [[nodiscard]] std::span<const double> second_moment() const { return v_; }

 private:
  AdamOptions options_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::int64_t t_ = 0;
};

}  // namespace pfsplat
