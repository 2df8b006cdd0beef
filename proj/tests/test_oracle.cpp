#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <set>

#include "dance/dataset.hpp"
#include "dance/oracle.hpp"
#include "dance/util.hpp"

using namespace dance;

namespace {

std::vector<ConvLayerSpec> random_network_layers(std::uint64_t seed, const ArchSpace& space) {
  Rng rng(seed);
  Architecture arch = sample_random_network(space, rng);
  if (is_all_zero(arch)) arch[0] = CandidateOp::MB3e3;
  return network_layers(arch, space);
}

}  // namespace

TEST_CASE("enumerate_space: 4335 unique configs, lexicographic order") {
  const HwSpace space;
  const auto configs = enumerate_space(space);
  REQUIRE(configs.size() == 4335);
  CHECK(space.cardinality() == 4335);

  CHECK(configs.front().dataflow == Dataflow::WS);
  CHECK(configs.front().pe_x == 8);
  CHECK(configs.front().pe_y == 8);
  CHECK(configs.front().rf_size == 4);

  std::set<std::tuple<int, int, int, int>> seen;
  for (const auto& c : configs)
    seen.insert({static_cast<int>(c.dataflow), c.pe_x, c.pe_y, c.rf_size});
  CHECK(seen.size() == configs.size());
}

TEST_CASE("optimal_hw: area-only objective picks the smallest array") {
  const HwSpace space;
  const CostModelConstants constants;
  const auto layers = random_network_layers(11, ArchSpace{});

  const auto result = optimal_hw(layers, CostFunctionSpec::linear(0, 0, 1), space, constants);
  CHECK(result.config.pe_x == 8);
  CHECK(result.config.pe_y == 8);
  CHECK(result.config.rf_size == 4);
  CHECK(result.config.dataflow == Dataflow::WS);  // tie broken by enumeration order
  CHECK(result.metrics.area_um2 == doctest::Approx(640800.0));
  CHECK(result.cost == doctest::Approx(640800.0));
}

TEST_CASE("optimal_hw: latency-only objective maxes channel parallelism") {
  const HwSpace space;
  const CostModelConstants constants;
  const ConvLayerSpec pointwise{1, 64, 512, 16, 16, 1, 1, 1, false};

  const auto result =
      optimal_hw({pointwise}, CostFunctionSpec::linear(1, 0, 0), space, constants);
  CHECK(result.config.pe_x == 24);
}

TEST_CASE("optimal_hw: rejects an empty network") {
  const HwSpace space;
  const CostModelConstants constants;
  CHECK_THROWS_AS(optimal_hw({}, CostFunctionSpec::edap(), space, constants),
                  std::invalid_argument);
}

TEST_CASE("optimal_hw: dominates random configs, any cost function") {
  const HwSpace space;
  const CostModelConstants constants;
  const ArchSpace arch_space;
  Rng rng(21);

  const CostFunctionSpec specs[] = {CostFunctionSpec::edap(),
                                    CostFunctionSpec::latency_oriented(),
                                    CostFunctionSpec::balanced()};
  const auto configs = enumerate_space(space);

  for (int net = 0; net < 20; ++net) {
    const auto layers = random_network_layers(100 + net, arch_space);
    const auto& cost_fn = specs[net % 3];
    const auto best = optimal_hw(layers, cost_fn, space, constants);
    for (int t = 0; t < 50; ++t) {
      const auto& probe = configs[rng.next_int(0, static_cast<std::int64_t>(configs.size()) - 1)];
      CHECK(best.cost <= cost_hw(evaluate_network(layers, probe, constants), cost_fn));
    }
  }
}

TEST_CASE("optimal_hw: invariant under layer permutation") {
  const HwSpace space;
  const CostModelConstants constants;
  auto layers = random_network_layers(33, ArchSpace{});
  const auto fwd = optimal_hw(layers, CostFunctionSpec::edap(), space, constants);
  std::reverse(layers.begin(), layers.end());
  const auto rev = optimal_hw(layers, CostFunctionSpec::edap(), space, constants);
  CHECK(fwd.config == rev.config);
  CHECK(fwd.cost == doctest::Approx(rev.cost).epsilon(1e-12));
}

TEST_CASE("optimal_hw: argmin invariant under positive rescaling of the objective") {
  const HwSpace space;
  const CostModelConstants constants;
  const auto layers = random_network_layers(44, ArchSpace{});
  const auto one = optimal_hw(layers, CostFunctionSpec::linear(1, 0, 0), space, constants);
  const auto two = optimal_hw(layers, CostFunctionSpec::linear(2, 0, 0), space, constants);
  CHECK(one.config == two.config);
}

TEST_CASE("optimal_hw: parallel evaluation matches sequential argmin") {
  const HwSpace space;
  const CostModelConstants constants;
  const auto layers = random_network_layers(55, ArchSpace{});

  const int saved = threads();
  set_threads(1);
  const auto seq = optimal_hw(layers, CostFunctionSpec::edap(), space, constants);
  set_threads(4);
  const auto par = optimal_hw(layers, CostFunctionSpec::edap(), space, constants);
  set_threads(saved);

  CHECK(seq.config == par.config);
  CHECK(seq.cost == par.cost);
}

TEST_CASE("generate_dataset: row counts and optimality recheck") {
  const HwSpace space;
  const CostModelConstants constants;
  const ArchSpace arch_space;

  DatasetGenConfig gen;
  gen.n_networks = 1;
  gen.random_configs_per_network = 8;
  gen.seed = 3;
  const auto records = generate_dataset(gen, space, arch_space, CostFunctionSpec::edap(), constants);
  REQUIRE(records.size() == 9);

  int n_opt = 0, n_rand = 0;
  for (const auto& r : records) (r.optimal ? n_opt : n_rand)++;
  CHECK(n_opt == 1);
  CHECK(n_rand == 8);

  const auto& opt = records[0];
  REQUIRE(opt.optimal);
  const double opt_cost = cost_hw(opt.costs, CostFunctionSpec::edap());
  for (const auto& r : records)
    if (!r.optimal) CHECK(opt_cost <= cost_hw(r.costs, CostFunctionSpec::edap()));
}

TEST_CASE("generate_dataset: stored costs match a re-run of the cost model") {
  const HwSpace space;
  const CostModelConstants constants;
  const ArchSpace arch_space;

  DatasetGenConfig gen;
  gen.n_networks = 4;
  gen.random_configs_per_network = 3;
  gen.seed = 17;
  const auto records = generate_dataset(gen, space, arch_space, CostFunctionSpec::edap(), constants);
  for (const auto& rec : records) {
    const Architecture arch = decode_encoding(ArchEncoding::from_flat(rec.arch_onehot));
    const auto metrics = evaluate_network(network_layers(arch, arch_space), rec.config, constants);
    CHECK(metrics.latency_ms == rec.costs.latency_ms);
    CHECK(metrics.energy_mj == rec.costs.energy_mj);
    CHECK(metrics.area_um2 == rec.costs.area_um2);
  }
}

TEST_CASE("dataset csv: identical bytes for identical seeds, round trip parses") {
  const HwSpace space;
  const CostModelConstants constants;
  const ArchSpace arch_space;

  DatasetGenConfig gen;
  gen.n_networks = 6;
  gen.random_configs_per_network = 2;
  gen.seed = 99;

  const auto a = generate_dataset(gen, space, arch_space, CostFunctionSpec::edap(), constants);
  const auto b = generate_dataset(gen, space, arch_space, CostFunctionSpec::edap(), constants);

  const std::string pa = "test_oracle_a.csv";
  const std::string pb = "test_oracle_b.csv";
  write_dataset_csv(pa, a, arch_space.positions);
  write_dataset_csv(pb, b, arch_space.positions);
  CHECK(read_text_file(pa) == read_text_file(pb));

  const Dataset ds = read_dataset_csv(pa);
  CHECK(ds.positions == arch_space.positions);
  REQUIRE(ds.records.size() == a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(ds.records[i].net_id == a[i].net_id);
    CHECK(ds.records[i].optimal == a[i].optimal);
    CHECK(ds.records[i].config == a[i].config);
    CHECK(ds.records[i].costs.latency_ms ==
          doctest::Approx(a[i].costs.latency_ms).epsilon(1e-8));
  }
  std::remove(pa.c_str());
  std::remove(pb.c_str());
}

TEST_CASE("generate_dataset: schedule independence") {
  const HwSpace space;
  const CostModelConstants constants;
  const ArchSpace arch_space;

  DatasetGenConfig gen;
  gen.n_networks = 5;
  gen.random_configs_per_network = 2;
  gen.seed = 123;

  const int saved = threads();
  set_threads(1);
  const auto seq = generate_dataset(gen, space, arch_space, CostFunctionSpec::edap(), constants);
  set_threads(3);
  const auto par = generate_dataset(gen, space, arch_space, CostFunctionSpec::edap(), constants);
  set_threads(saved);

  REQUIRE(seq.size() == par.size());
  for (std::size_t i = 0; i < seq.size(); ++i) {
    CHECK(seq[i].config == par[i].config);
    CHECK(seq[i].costs.latency_ms == par[i].costs.latency_ms);
    CHECK(seq[i].arch_onehot == par[i].arch_onehot);
  }
}

TEST_CASE("split_by_network: disjoint, network-aligned, seeded") {
  const HwSpace space;
  const CostModelConstants constants;
  const ArchSpace arch_space;

  DatasetGenConfig gen;
  gen.n_networks = 20;
  gen.random_configs_per_network = 2;
  gen.seed = 7;
  Dataset ds;
  ds.positions = arch_space.positions;
  ds.records = generate_dataset(gen, space, arch_space, CostFunctionSpec::edap(), constants);

  const DatasetSplit split = split_by_network(ds, 0.2, 42);
  CHECK(split.val_ids.size() == 4);
  CHECK(split.train_ids.size() == 16);
  for (std::int64_t id : split.val_ids)
    CHECK(std::find(split.train_ids.begin(), split.train_ids.end(), id) ==
          split.train_ids.end());

  const DatasetSplit again = split_by_network(ds, 0.2, 42);
  CHECK(again.val_ids == split.val_ids);
  const DatasetSplit other = split_by_network(ds, 0.2, 43);
  CHECK(other.val_ids != split.val_ids);
}
