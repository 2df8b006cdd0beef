#include "dance/costfn.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace dance {

void CostFunctionSpec::validate() const {
  if (kind == Kind::EDAP) return;
  if (lambda_l < 0 || lambda_e < 0 || lambda_a < 0)
    throw std::invalid_argument("CostFunctionSpec: linear weights must be >= 0");
  if (lambda_l == 0 && lambda_e == 0 && lambda_a == 0)
    throw std::invalid_argument("CostFunctionSpec: linear weights must not all be zero");
}

CostFunctionSpec CostFunctionSpec::edap() { return CostFunctionSpec{}; }

CostFunctionSpec CostFunctionSpec::linear(double l, double e, double a) {
  CostFunctionSpec spec;
  spec.kind = Kind::Linear;
  spec.lambda_l = l;
  spec.lambda_e = e;
  spec.lambda_a = a;
  spec.validate();
  return spec;
}

CostFunctionSpec CostFunctionSpec::latency_oriented() { return linear(3.3, 0.8, 1.0); }
CostFunctionSpec CostFunctionSpec::energy_oriented() { return linear(0.2, 2.8, 1.0); }
CostFunctionSpec CostFunctionSpec::balanced() { return linear(0.6, 0.5, 1.0); }

CostFunctionSpec CostFunctionSpec::parse(const std::string& text) {
  if (text == "edap") return edap();
  if (text == "latency") return latency_oriented();
  if (text == "energy") return energy_oriented();
  if (text == "balanced") return balanced();
  if (text.rfind("linear:", 0) == 0) {
    double l = 0, e = 0, a = 0;
    if (std::sscanf(text.c_str() + 7, "%lf,%lf,%lf", &l, &e, &a) != 3)
      throw std::invalid_argument("cost function: expected linear:L,E,A, got " + text);
    return linear(l, e, a);
  }
  throw std::invalid_argument("unknown cost function: " + text);
}

std::string CostFunctionSpec::to_string() const {
  if (kind == Kind::EDAP) return "edap";
  std::ostringstream ss;
  ss << "linear:" << lambda_l << ',' << lambda_e << ',' << lambda_a;
  return ss.str();
}

double cost_hw(const CostMetrics& metrics, const CostFunctionSpec& spec) {
  if (spec.kind == CostFunctionSpec::Kind::EDAP)
    return metrics.latency_ms * metrics.energy_mj * metrics.area_um2;
  return spec.lambda_l * metrics.latency_ms + spec.lambda_e * metrics.energy_mj +
         spec.lambda_a * metrics.area_um2;
}

}  // namespace dance
