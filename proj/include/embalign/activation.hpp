#pragma once

#include <cstdint>
#include <cmath>
#include <string>

namespace embalign {

/// Element-wise activation. Every supported kind is 1-Lipschitz and fixes 0.
class Activation {
 public:
  enum class Kind : std::uint8_t { ReLU = 0, LeakyReLU = 1, Tanh = 2 };

  static Activation relu() { return Activation(Kind::ReLU, 0.0); }
  /// slope must lie in (0, 1).
  static Activation leaky_relu(double slope);
  static Activation tanh() { return Activation(Kind::Tanh, 0.0); }

  /// Parses "relu", "leaky_relu[:slope]", "tanh".
  static Activation parse(const std::string& name);

  Kind kind() const { return kind_; }
  double slope() const { return slope_; }
  std::string name() const;

  double apply(double z) const {
    switch (kind_) {
      case Kind::ReLU: return z > 0.0 ? z : 0.0;
      case Kind::LeakyReLU: return z > 0.0 ? z : slope_ * z;
      case Kind::Tanh: return std::tanh(z);
    }
    return z;
  }

  /// Derivative at the pre-activation z; 0 at the ReLU kink.
  double derivative(double z) const {
    switch (kind_) {
      case Kind::ReLU: return z > 0.0 ? 1.0 : 0.0;
      case Kind::LeakyReLU: return z > 0.0 ? 1.0 : slope_;
      case Kind::Tanh: {
        const double t = std::tanh(z);
        return 1.0 - t * t;
      }
    }
    return 1.0;
  }

  bool operator==(const Activation&) const = default;

 private:
  Activation(Kind kind, double slope) : kind_(kind), slope_(slope) {}

  Kind kind_;
  double slope_;
};

}  // namespace embalign
