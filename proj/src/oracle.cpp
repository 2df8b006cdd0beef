#include "dance/oracle.hpp"

#include <stdexcept>

#include "dance/util.hpp"

namespace dance {

int dataflow_index(Dataflow df) { return static_cast<int>(df); }

int pe_index(int pe) {
  if (pe < kPeMin || pe >= kPeMin + kNumPeValues) throw std::invalid_argument("PE count out of range");
  return pe - kPeMin;
}

int rf_index(int rf) {
  switch (rf) {
    case 4: return 0;
    case 8: return 1;
    case 16: return 2;
    case 32: return 3;
    case 64: return 4;
  }
  throw std::invalid_argument("RF size out of range");
}

Dataflow dataflow_from_index(int idx) {
  if (idx < 0 || idx >= kNumDataflows) throw std::invalid_argument("dataflow index out of range");
  return static_cast<Dataflow>(idx);
}

int pe_from_index(int idx) {
  if (idx < 0 || idx >= kNumPeValues) throw std::invalid_argument("PE index out of range");
  return kPeMin + idx;
}

int rf_from_index(int idx) {
  static const int values[] = {4, 8, 16, 32, 64};
  if (idx < 0 || idx >= kNumRfValues) throw std::invalid_argument("RF index out of range");
  return values[idx];
}

std::vector<AcceleratorConfig> enumerate_space(const HwSpace& space) {
  std::vector<AcceleratorConfig> configs;
  configs.reserve(space.cardinality());
  for (Dataflow df : space.dataflows)
    for (int px = space.pe_min; px <= space.pe_max; ++px)
      for (int py = space.pe_min; py <= space.pe_max; ++py)
        for (int rf : space.rf_values) configs.push_back({df, px, py, rf});
  return configs;
}

OracleResult optimal_hw(const std::vector<ConvLayerSpec>& layers, const CostFunctionSpec& cost_fn,
                        const HwSpace& space, const CostModelConstants& constants) {
  if (layers.empty())
    throw std::invalid_argument("optimal_hw: empty layer list (cost would be area-only)");
  cost_fn.validate();

  const auto configs = enumerate_space(space);
  const std::int64_t n = static_cast<std::int64_t>(configs.size());

  std::vector<double> costs(n);
  parallel_for(n, [&](std::int64_t i) {
    costs[i] = cost_hw(evaluate_network(layers, configs[i], constants), cost_fn);
  });

  // Reduce in enumeration order so ties resolve identically at any thread count.
  std::int64_t best = 0;
  for (std::int64_t i = 1; i < n; ++i)
    if (costs[i] < costs[best]) best = i;

  OracleResult result;
  result.config = configs[best];
  result.metrics = evaluate_network(layers, configs[best], constants);
  result.cost = costs[best];
  return result;
}

std::vector<DatasetRecord> generate_dataset(const DatasetGenConfig& gen, const HwSpace& space,
                                            const ArchSpace& arch_space,
                                            const CostFunctionSpec& cost_fn,
                                            const CostModelConstants& constants) {
  if (gen.n_networks < 1) throw std::invalid_argument("generate_dataset: n_networks must be >= 1");
  if (gen.random_configs_per_network < 0)
    throw std::invalid_argument("generate_dataset: random config count must be >= 0");

  const int rows_per_net = 1 + gen.random_configs_per_network;
  std::vector<DatasetRecord> records(gen.n_networks * rows_per_net);

  const auto configs = enumerate_space(space);

  parallel_for(gen.n_networks, [&](std::int64_t net_id) {
    // one rng per network keeps the output independent of scheduling
    Rng rng(mix_seed(gen.seed, static_cast<std::uint64_t>(net_id)));
    const Architecture arch = sample_random_network(arch_space, rng);
    const auto layers = network_layers(arch, arch_space);
    const auto arch_flat = encode_network(arch, arch_space).flatten();

    // sequential sweep here: networks are already the parallel unit
    std::int64_t best = 0;
    std::vector<double> cost_of(configs.size());
    for (std::size_t i = 0; i < configs.size(); ++i) {
      cost_of[i] = cost_hw(evaluate_network(layers, configs[i], constants), cost_fn);
      if (cost_of[i] < cost_of[best]) best = static_cast<std::int64_t>(i);
    }

    DatasetRecord& opt = records[net_id * rows_per_net];
    opt.net_id = net_id;
    opt.optimal = true;
    opt.arch_onehot = arch_flat;
    opt.config = configs[best];
    opt.costs = evaluate_network(layers, configs[best], constants);

    for (int j = 0; j < gen.random_configs_per_network; ++j) {
      DatasetRecord& rec = records[net_id * rows_per_net + 1 + j];
      rec.net_id = net_id;
      rec.optimal = false;
      rec.arch_onehot = arch_flat;
      rec.config = configs[rng.next_int(0, static_cast<std::int64_t>(configs.size()) - 1)];
      rec.costs = evaluate_network(layers, rec.config, constants);
    }
  });

  return records;
}

}  // namespace dance
