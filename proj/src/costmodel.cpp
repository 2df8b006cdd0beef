#include "dance/costmodel.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include "dance/util.hpp"

namespace dance {

namespace {

inline std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

}  // namespace

std::string dataflow_name(Dataflow df) {
  switch (df) {
    case Dataflow::WS: return "WS";
    case Dataflow::OS: return "OS";
    case Dataflow::RS: return "RS";
  }
  throw std::invalid_argument("unknown dataflow");
}

Dataflow dataflow_from_name(const std::string& name) {
  if (name == "WS") return Dataflow::WS;
  if (name == "OS") return Dataflow::OS;
  if (name == "RS") return Dataflow::RS;
  throw std::invalid_argument("unknown dataflow name: " + name);
}

void AcceleratorConfig::validate() const {
  if (pe_x < 8 || pe_x > 24 || pe_y < 8 || pe_y > 24)
    throw std::invalid_argument("AcceleratorConfig: PE counts must be in [8, 24]");
  if (rf_size != 4 && rf_size != 8 && rf_size != 16 && rf_size != 32 && rf_size != 64)
    throw std::invalid_argument("AcceleratorConfig: RF size must be in {4,8,16,32,64}");
}

std::string AcceleratorConfig::to_string() const {
  std::ostringstream ss;
  ss << dataflow_name(dataflow) << "/" << pe_x << "x" << pe_y << "/rf" << rf_size;
  return ss.str();
}

void CostModelConstants::validate() const {
  const double vals[] = {e_mac_pj,     e_rf_pj,       e_gb_pj,
                         e_dram_pj,    p_leak_per_pe_mw, clock_ghz,
                         dram_bw_gbps, a_pe_base_um2, a_rf_entry_um2,
                         a_gb_um2,     double(gb_capacity), double(element_size)};
  for (double v : vals)
    if (!(v > 0)) throw std::invalid_argument("CostModelConstants: all constants must be > 0");
}

std::int64_t macs(const ConvLayerSpec& layer) {
  const std::int64_t p = layer.out_h();
  const std::int64_t q = layer.out_w();
  std::int64_t m = layer.n * layer.k * p * q * layer.r * layer.s;
  if (!layer.depthwise) m *= layer.c;
  return m;
}

AccessCounts access_counts(const ConvLayerSpec& layer, const AcceleratorConfig& accel,
                           const CostModelConstants& constants) {
  const std::int64_t p = layer.out_h();
  const std::int64_t q = layer.out_w();
  const std::int64_t tiles_k = ceil_div(layer.k, accel.pe_x);
  const std::int64_t tiles_s = ceil_div(p * q, accel.pe_y);
  const std::int64_t f = accel.rf_size;

  const std::int64_t uniq_w = layer.depthwise ? layer.k * layer.r * layer.s
                                              : layer.k * layer.c * layer.r * layer.s;
  const std::int64_t uniq_i = layer.n * layer.c * layer.h * layer.w;
  const std::int64_t uniq_o = layer.n * layer.k * p * q;

  AccessCounts out;
  out.macs = macs(layer);
  out.rf = 3 * out.macs;

  switch (accel.dataflow) {
    case Dataflow::WS: {
      out.gb_w = uniq_w;
      out.gb_i = uniq_i * tiles_k;
      const std::int64_t reuse = layer.depthwise ? layer.r * layer.s : layer.c * layer.r * layer.s;
      out.gb_o = 2 * uniq_o * ceil_div(reuse, f);
      break;
    }
    case Dataflow::OS: {
      out.gb_w = uniq_w * tiles_s;
      out.gb_i = uniq_i * ceil_div(tiles_k, std::min(f, tiles_k));
      out.gb_o = uniq_o;
      break;
    }
    case Dataflow::RS: {
      out.gb_w = uniq_w * ceil_div(tiles_s, std::min(f, tiles_s));
      out.gb_i = uniq_i;
      out.gb_o = layer.depthwise ? 2 * uniq_o : 2 * uniq_o * ceil_div(layer.c, f);
      break;
    }
  }

  const std::int64_t uniq_total = uniq_w + uniq_i + uniq_o;
  out.dram = uniq_total * ceil_div(uniq_total, constants.gb_capacity);
  return out;
}

double accelerator_area_um2(const AcceleratorConfig& accel, const CostModelConstants& constants) {
  return double(accel.pe_x) * double(accel.pe_y) *
             (constants.a_pe_base_um2 + constants.a_rf_entry_um2 * accel.rf_size) +
         constants.a_gb_um2;
}

CostMetrics evaluate_layer(const ConvLayerSpec& layer, const AcceleratorConfig& accel,
                           const CostModelConstants& constants) {
  const AccessCounts acc = access_counts(layer, accel, constants);

  const std::int64_t tiles_k = ceil_div(layer.k, accel.pe_x);
  const std::int64_t tiles_s = ceil_div(layer.out_h() * layer.out_w(), accel.pe_y);
  std::int64_t compute_cycles = layer.n * tiles_k * tiles_s * layer.r * layer.s;
  if (!layer.depthwise) compute_cycles *= layer.c;

  // PE_X spreads output channels, PE_Y spreads output pixels; the NoC moves
  // 2*(pe_x+pe_y) elements per cycle between GB and the array.
  const double cycle_ns = 1.0 / constants.clock_ghz;
  const double compute_ns = double(compute_cycles) * cycle_ns;
  const double noc_ns =
      double(acc.gb_total()) / (2.0 * (accel.pe_x + accel.pe_y)) * cycle_ns;
  const double dram_s =
      double(acc.dram) * double(constants.element_size) / (constants.dram_bw_gbps * 1e9);

  CostMetrics m;
  m.latency_ms = std::max({compute_ns * 1e-6, noc_ns * 1e-6, dram_s * 1e3});

  const double dynamic_pj = constants.e_mac_pj * double(acc.macs) +
                            constants.e_rf_pj * double(acc.rf) +
                            constants.e_gb_pj * double(acc.gb_total()) +
                            constants.e_dram_pj * double(acc.dram);
  const double leak_mj =
      constants.p_leak_per_pe_mw * double(accel.pe_x) * double(accel.pe_y) * m.latency_ms * 1e-3;
  m.energy_mj = dynamic_pj * 1e-9 + leak_mj;
  m.area_um2 = accelerator_area_um2(accel, constants);
  return m;
}

CostMetrics evaluate_network(const std::vector<ConvLayerSpec>& layers,
                             const AcceleratorConfig& accel, const CostModelConstants& constants) {
  CostMetrics total;
  total.area_um2 = accelerator_area_um2(accel, constants);
  for (const auto& layer : layers) {
    const CostMetrics m = evaluate_layer(layer, accel, constants);
    total.latency_ms += m.latency_ms;
    total.energy_mj += m.energy_mj;
  }
  return total;
}

std::string cost_csv_header() {
  return "layer_idx,dataflow,pe_x,pe_y,rf,macs,rf_acc,gb_acc,dram_acc,latency_ms,energy_mj,area_um2";
}

std::string cost_csv_row(int layer_idx, const ConvLayerSpec& layer, const AcceleratorConfig& accel,
                         const CostModelConstants& constants) {
  const AccessCounts acc = access_counts(layer, accel, constants);
  const CostMetrics m = evaluate_layer(layer, accel, constants);
  std::ostringstream ss;
  ss << layer_idx << ',' << dataflow_name(accel.dataflow) << ',' << accel.pe_x << ','
     << accel.pe_y << ',' << accel.rf_size << ',' << acc.macs << ',' << acc.rf << ','
     << acc.gb_total() << ',' << acc.dram << ',' << format_g9(m.latency_ms) << ','
     << format_g9(m.energy_mj) << ',' << format_g9(m.area_um2);
  return ss.str();
}

}  // namespace dance
