#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dance/costfn.hpp"
#include "dance/costmodel.hpp"
#include "dance/oracle.hpp"
#include "dance/util.hpp"
#include "dance/workload.hpp"

using namespace dance;

namespace {

ConvLayerSpec unit_layer() { return ConvLayerSpec{1, 1, 1, 1, 1, 1, 1, 1, false}; }

ConvLayerSpec random_layer(Rng& rng) {
  ConvLayerSpec l;
  l.n = 1;
  l.c = rng.next_int(1, 64);
  l.h = l.w = rng.next_int(4, 32);
  l.depthwise = rng.next_double() < 0.3;
  l.k = l.depthwise ? l.c : rng.next_int(1, 64);
  const std::int64_t kk = 1 + 2 * rng.next_int(0, 3);  // 1,3,5,7
  l.r = l.s = std::min(kk, l.h);
  l.stride = 1;
  return l;
}

AcceleratorConfig random_config(Rng& rng) {
  AcceleratorConfig cfg;
  cfg.dataflow = static_cast<Dataflow>(rng.next_int(0, 2));
  cfg.pe_x = static_cast<int>(rng.next_int(8, 24));
  cfg.pe_y = static_cast<int>(rng.next_int(8, 24));
  cfg.rf_size = rf_from_index(static_cast<int>(rng.next_int(0, 4)));
  return cfg;
}

}  // namespace

TEST_CASE("macs: hand-checked values") {
  CHECK(macs(unit_layer()) == 1);

  ConvLayerSpec conv{1, 8, 16, 16, 16, 3, 3, 1, false};
  CHECK(macs(conv) == 294912);  // 16*256*8*9

  ConvLayerSpec dw{1, 24, 24, 8, 8, 3, 3, 1, true};
  CHECK(macs(dw) == 13824);  // 24*64*9
}

TEST_CASE("macs: depthwise is exactly 1/c of the standard conv") {
  Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    ConvLayerSpec l = random_layer(rng);
    l.depthwise = false;
    l.k = l.c;
    ConvLayerSpec dw = l;
    dw.depthwise = true;
    CHECK(macs(l) == macs(dw) * l.c);
  }
}

TEST_CASE("access_counts: unit layer on (WS,8,8,4), hand evaluation") {
  const CostModelConstants constants;
  const AcceleratorConfig cfg{Dataflow::WS, 8, 8, 4};
  const AccessCounts acc = access_counts(unit_layer(), cfg, constants);
  CHECK(acc.macs == 1);
  CHECK(acc.gb_w == 1);
  CHECK(acc.gb_i == 1);
  CHECK(acc.gb_o == 2);
  CHECK(acc.rf == 3);
  CHECK(acc.dram == 3);
}

TEST_CASE("access_counts: RS input accesses equal the unique input count") {
  const CostModelConstants constants;
  Rng rng(2);
  for (int t = 0; t < 100; ++t) {
    const ConvLayerSpec l = random_layer(rng);
    AcceleratorConfig cfg = random_config(rng);
    cfg.dataflow = Dataflow::RS;
    const AccessCounts acc = access_counts(l, cfg, constants);
    CHECK(acc.gb_i == l.n * l.c * l.h * l.w);
  }
}

TEST_CASE("access_counts: rf accesses are always 3 per MAC") {
  const CostModelConstants constants;
  Rng rng(3);
  for (int t = 0; t < 100; ++t) {
    const ConvLayerSpec l = random_layer(rng);
    const AcceleratorConfig cfg = random_config(rng);
    const AccessCounts acc = access_counts(l, cfg, constants);
    CHECK(acc.rf == 3 * acc.macs);
  }
}

TEST_CASE("access_counts: total GB traffic non-increasing in RF size") {
  const CostModelConstants constants;
  Rng rng(4);
  for (int t = 0; t < 200; ++t) {
    const ConvLayerSpec l = random_layer(rng);
    AcceleratorConfig small = random_config(rng);
    small.rf_size = 4;
    AcceleratorConfig big = small;
    big.rf_size = 64;
    CHECK(access_counts(l, big, constants).gb_total() <=
          access_counts(l, small, constants).gb_total());
  }
}

TEST_CASE("evaluate_layer: unit layer latency is one cycle") {
  const CostModelConstants constants;
  const AcceleratorConfig cfg{Dataflow::WS, 8, 8, 4};
  const CostMetrics m = evaluate_layer(unit_layer(), cfg, constants);
  CHECK(m.latency_ms == doctest::Approx(1e-6).epsilon(1e-12));  // 1ns
}

TEST_CASE("evaluate_layer: area formula") {
  const CostModelConstants constants;
  for (Dataflow df : {Dataflow::WS, Dataflow::OS, Dataflow::RS}) {
    const CostMetrics m = evaluate_layer(unit_layer(), {df, 8, 8, 4}, constants);
    CHECK(m.area_um2 == doctest::Approx(640800.0));  // 64*(2000+200) + 500000
  }
  const CostMetrics big = evaluate_layer(unit_layer(), {Dataflow::WS, 24, 24, 64}, constants);
  CHECK(big.area_um2 > 640800.0);
}

TEST_CASE("evaluate_network: empty, single and permutation cases") {
  const CostModelConstants constants;
  const AcceleratorConfig cfg{Dataflow::OS, 12, 16, 8};

  const CostMetrics empty = evaluate_network({}, cfg, constants);
  CHECK(empty.latency_ms == 0.0);
  CHECK(empty.energy_mj == 0.0);
  CHECK(empty.area_um2 == accelerator_area_um2(cfg, constants));

  Rng rng(5);
  const ConvLayerSpec a = random_layer(rng);
  const ConvLayerSpec b = random_layer(rng);
  const ConvLayerSpec c = random_layer(rng);

  const CostMetrics single = evaluate_network({a}, cfg, constants);
  const CostMetrics direct = evaluate_layer(a, cfg, constants);
  CHECK(single.latency_ms == direct.latency_ms);
  CHECK(single.energy_mj == direct.energy_mj);

  const CostMetrics abc = evaluate_network({a, b, c}, cfg, constants);
  const CostMetrics cba = evaluate_network({c, b, a}, cfg, constants);
  CHECK(abc.latency_ms == doctest::Approx(cba.latency_ms).epsilon(1e-12));
  CHECK(abc.energy_mj == doctest::Approx(cba.energy_mj).epsilon(1e-12));
}

TEST_CASE("oracle invariants over random layer/config pairs") {
  const CostModelConstants constants;
  Rng rng(6);
  for (int t = 0; t < 300; ++t) {
    const ConvLayerSpec l = random_layer(rng);
    const AcceleratorConfig cfg = random_config(rng);

    // latency non-increasing in pe_x and pe_y
    if (cfg.pe_x < 24) {
      AcceleratorConfig wider = cfg;
      wider.pe_x++;
      CHECK(evaluate_layer(l, wider, constants).latency_ms <=
            evaluate_layer(l, cfg, constants).latency_ms);
    }
    if (cfg.pe_y < 24) {
      AcceleratorConfig taller = cfg;
      taller.pe_y++;
      CHECK(evaluate_layer(l, taller, constants).latency_ms <=
            evaluate_layer(l, cfg, constants).latency_ms);
    }

    // energy floor
    const CostMetrics m = evaluate_layer(l, cfg, constants);
    CHECK(m.energy_mj >= constants.e_mac_pj * double(macs(l)) * 1e-9);

    // strictly increasing area
    if (cfg.rf_size < 64) {
      AcceleratorConfig more_rf = cfg;
      more_rf.rf_size *= 2;
      CHECK(accelerator_area_um2(more_rf, constants) > accelerator_area_um2(cfg, constants));
    }

    // finite and deterministic
    CHECK(std::isfinite(m.latency_ms));
    CHECK(std::isfinite(m.energy_mj));
    const CostMetrics again = evaluate_layer(l, cfg, constants);
    CHECK(again.latency_ms == m.latency_ms);
    CHECK(again.energy_mj == m.energy_mj);
  }
}

TEST_CASE("cost_hw: linear and EDAP forms") {
  const CostMetrics m{2.0, 3.0, 5.0};
  CHECK(cost_hw(m, CostFunctionSpec::latency_oriented()) == doctest::Approx(14.0));
  CHECK(cost_hw(CostMetrics{0.0, 3.0, 5.0}, CostFunctionSpec::edap()) == 0.0);

  const CostFunctionSpec energy = CostFunctionSpec::energy_oriented();
  CHECK(energy.lambda_l == doctest::Approx(0.2));
  CHECK(energy.lambda_e == doctest::Approx(2.8));
  const CostFunctionSpec balanced = CostFunctionSpec::balanced();
  CHECK(balanced.lambda_l == doctest::Approx(0.6));
  CHECK(balanced.lambda_e == doctest::Approx(0.5));
  CHECK(balanced.lambda_a == doctest::Approx(1.0));
}

TEST_CASE("cost_hw: parse round trip and validation") {
  CHECK(CostFunctionSpec::parse("edap").kind == CostFunctionSpec::Kind::EDAP);
  const auto lin = CostFunctionSpec::parse("linear:1.5,0,2");
  CHECK(lin.lambda_l == doctest::Approx(1.5));
  CHECK(lin.lambda_a == doctest::Approx(2.0));
  CHECK_THROWS_AS(CostFunctionSpec::parse("linear:0,0,0"), std::invalid_argument);
  CHECK_THROWS_AS(CostFunctionSpec::parse("nonsense"), std::invalid_argument);
}

TEST_CASE("config validation bounds") {
  AcceleratorConfig cfg{Dataflow::WS, 7, 8, 4};
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.pe_x = 8;
  cfg.rf_size = 5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.rf_size = 64;
  CHECK_NOTHROW(cfg.validate());

  CostModelConstants constants;
  constants.e_gb_pj = 0.0;
  CHECK_THROWS_AS(constants.validate(), std::invalid_argument);
}

TEST_CASE("cost csv row shape") {
  const CostModelConstants constants;
  const std::string header = cost_csv_header();
  CHECK(header.find("latency_ms") != std::string::npos);
  const std::string row = cost_csv_row(0, unit_layer(), {Dataflow::RS, 9, 10, 16}, constants);
  CHECK(std::count(row.begin(), row.end(), ',') ==
        std::count(header.begin(), header.end(), ','));
  CHECK(row.find("RS") != std::string::npos);
}
