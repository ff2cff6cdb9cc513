#include "embalign/activation.hpp"

#include "embalign/error.hpp"

#include <sstream>

namespace embalign {

Activation Activation::leaky_relu(double slope) {
  if (!(slope > 0.0 && slope < 1.0)) {
    throw_domain("leaky_relu slope must lie in (0, 1), got " + std::to_string(slope));
  }
  return Activation(Kind::LeakyReLU, slope);
}

Activation Activation::parse(const std::string& name) {
  if (name == "relu") return relu();
  if (name == "tanh") return tanh();
  if (name == "leaky_relu") return leaky_relu(0.01);
  const std::string prefix = "leaky_relu:";
  if (name.rfind(prefix, 0) == 0) {
    try {
      return leaky_relu(std::stod(name.substr(prefix.size())));
    } catch (const std::invalid_argument&) {
      throw_domain("bad leaky_relu slope in '" + name + "'");
    }
  }
  throw_domain("unknown activation '" + name + "'");
}

std::string Activation::name() const {
  switch (kind_) {
    case Kind::ReLU: return "relu";
    case Kind::Tanh: return "tanh";
    case Kind::LeakyReLU: {
      std::ostringstream os;
      os.precision(17);
      os << "leaky_relu:" << slope_;
      return os.str();
    }
  }
  return "relu";
}

}  // namespace embalign
