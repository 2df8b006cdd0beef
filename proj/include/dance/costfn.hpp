#ifndef DANCE_COSTFN_HPP
#define DANCE_COSTFN_HPP

#include <string>

#include "dance/costmodel.hpp"

namespace dance {

// Scalar objective over the three cost metrics. Linear takes explicit
// weights per metric (ms/mJ/um^2 units); EDAP is the unitless
// energy * latency * area product.
struct CostFunctionSpec {
  enum class Kind { Linear, EDAP } kind = Kind::EDAP;
  double lambda_l = 0.0;
  double lambda_e = 0.0;
  double lambda_a = 0.0;

  void validate() const;  // linear weights >= 0 and not all zero

  static CostFunctionSpec edap();
  static CostFunctionSpec linear(double l, double e, double a);
  // presets
  static CostFunctionSpec latency_oriented();  // 3.3 / 0.8 / 1.0
  static CostFunctionSpec energy_oriented();   // 0.2 / 2.8 / 1.0
  static CostFunctionSpec balanced();          // 0.6 / 0.5 / 1.0

  // "edap" | "linear:L,E,A" | preset names
  static CostFunctionSpec parse(const std::string& text);
  std::string to_string() const;
};

double cost_hw(const CostMetrics& metrics, const CostFunctionSpec& spec);

}  // namespace dance

#endif
