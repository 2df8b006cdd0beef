#ifndef DANCE_ORACLE_HPP
#define DANCE_ORACLE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "dance/costfn.hpp"
#include "dance/costmodel.hpp"
#include "dance/workload.hpp"

namespace dance {

inline constexpr int kNumDataflows = 3;
inline constexpr int kNumPeValues = 17;  // 8..24
inline constexpr int kNumRfValues = 5;   // {4,8,16,32,64}
inline constexpr int kPeMin = 8;

// The hardware search space: 3 dataflows x 17 x 17 PE counts x 5 RF sizes.
struct HwSpace {
  std::vector<Dataflow> dataflows = {Dataflow::WS, Dataflow::OS, Dataflow::RS};
  int pe_min = kPeMin;
  int pe_max = 24;
  std::vector<int> rf_values = {4, 8, 16, 32, 64};

  std::int64_t cardinality() const {
    return std::int64_t(dataflows.size()) * (pe_max - pe_min + 1) * (pe_max - pe_min + 1) *
           std::int64_t(rf_values.size());
  }
};

// One-hot index helpers; the dataset file and both evaluator heads use them.
int dataflow_index(Dataflow df);
int pe_index(int pe);
int rf_index(int rf);
Dataflow dataflow_from_index(int idx);
int pe_from_index(int idx);
int rf_from_index(int idx);

// All configs in lexicographic (dataflow, pe_x, pe_y, rf) order.
std::vector<AcceleratorConfig> enumerate_space(const HwSpace& space);

struct OracleResult {
  AcceleratorConfig config;
  CostMetrics metrics;
  double cost = 0.0;
};

// Exhaustive argmin of cost_fn over the space; ties go to the earliest
// config in enumeration order regardless of thread count. Throws on an
// empty layer list.
OracleResult optimal_hw(const std::vector<ConvLayerSpec>& layers, const CostFunctionSpec& cost_fn,
                        const HwSpace& space, const CostModelConstants& constants);

struct DatasetRecord {
  std::int64_t net_id = 0;
  bool optimal = false;  // kind column: opt vs rand
  std::vector<double> arch_onehot;
  AcceleratorConfig config;
  CostMetrics costs;
};

struct DatasetGenConfig {
  std::int64_t n_networks = 20000;
  int random_configs_per_network = 8;
  std::uint64_t seed = 1;
};

// For every sampled network: one `opt` row (the oracle optimum and its
// costs) plus m `rand` rows (uniform configs with their own costs).
// Deterministic for a given seed at any thread count.
std::vector<DatasetRecord> generate_dataset(const DatasetGenConfig& gen, const HwSpace& space,
                                            const ArchSpace& arch_space,
                                            const CostFunctionSpec& cost_fn,
                                            const CostModelConstants& constants);

}  // namespace dance

#endif
