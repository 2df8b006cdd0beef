#ifndef DANCE_COSTMODEL_HPP
#define DANCE_COSTMODEL_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "dance/workload.hpp"

namespace dance {

enum class Dataflow : int { WS = 0, OS = 1, RS = 2 };

std::string dataflow_name(Dataflow df);
Dataflow dataflow_from_name(const std::string& name);

// One point in the hardware space: dataflow, PE array geometry, register
// file entries per PE.
struct AcceleratorConfig {
  Dataflow dataflow = Dataflow::WS;
  int pe_x = 8;
  int pe_y = 8;
  int rf_size = 4;

  bool operator==(const AcceleratorConfig&) const = default;
  void validate() const;  // bounds: pe in [8,24], rf in {4,8,16,32,64}
  std::string to_string() const;
};

struct CostMetrics {
  double latency_ms = 0.0;
  double energy_mj = 0.0;
  double area_um2 = 0.0;
};

struct AccessCounts {
  std::int64_t macs = 0;
  std::int64_t rf = 0;      // register-file accesses, always 3 per MAC
  std::int64_t gb_w = 0;    // global-buffer accesses for weights
  std::int64_t gb_i = 0;    // ... input activations
  std::int64_t gb_o = 0;    // ... output activations / partial sums
  std::int64_t dram = 0;

  std::int64_t gb_total() const { return gb_w + gb_i + gb_o; }
};

// Energy per access tier, leakage, geometry and areas. Relative magnitudes
// follow the usual RF < GB << DRAM ordering; absolute values set the scale
// of every reported metric.
struct CostModelConstants {
  double e_mac_pj = 1.0;
  double e_rf_pj = 1.0;
  double e_gb_pj = 6.0;
  double e_dram_pj = 200.0;
  double p_leak_per_pe_mw = 0.01;
  double clock_ghz = 1.0;
  double dram_bw_gbps = 128.0;
  std::int64_t gb_capacity = 131072;  // elements
  std::int64_t element_size = 1;      // bytes
  double a_pe_base_um2 = 2000.0;
  double a_rf_entry_um2 = 50.0;
  double a_gb_um2 = 500000.0;

  void validate() const;  // all strictly positive
};

std::int64_t macs(const ConvLayerSpec& layer);

AccessCounts access_counts(const ConvLayerSpec& layer, const AcceleratorConfig& accel,
                           const CostModelConstants& constants);

double accelerator_area_um2(const AcceleratorConfig& accel, const CostModelConstants& constants);

CostMetrics evaluate_layer(const ConvLayerSpec& layer, const AcceleratorConfig& accel,
                           const CostModelConstants& constants);

// Latency and energy sum over layers; area is the accelerator's, once.
CostMetrics evaluate_network(const std::vector<ConvLayerSpec>& layers,
                             const AcceleratorConfig& accel, const CostModelConstants& constants);

// Per-layer breakdown row for the cost CSV export.
std::string cost_csv_header();
std::string cost_csv_row(int layer_idx, const ConvLayerSpec& layer, const AcceleratorConfig& accel,
                         const CostModelConstants& constants);

}  // namespace dance

#endif
