#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "dance/costmodel.hpp"
#include "dance/workload.hpp"

using namespace dance;

namespace {
ArchSpace default_space() { return ArchSpace{}; }
}  // namespace

TEST_CASE("expand_op: Zero removes the layer") {
  CHECK(expand_op(CandidateOp::Zero, 8, 16, 16, 1).empty());
  CHECK(expand_op(CandidateOp::Zero, 1, 1, 1, 1).empty());
}

TEST_CASE("expand_op: MB3e3 8->16 produces the expand/depthwise/project triplet") {
  const auto layers = expand_op(CandidateOp::MB3e3, 8, 16, 16, 1);
  REQUIRE(layers.size() == 3);

  CHECK(layers[0].c == 8);
  CHECK(layers[0].k == 24);
  CHECK(layers[0].r == 1);
  CHECK(layers[0].s == 1);
  CHECK_FALSE(layers[0].depthwise);

  CHECK(layers[1].c == 24);
  CHECK(layers[1].k == 24);
  CHECK(layers[1].r == 3);
  CHECK(layers[1].s == 3);
  CHECK(layers[1].depthwise);

  CHECK(layers[2].c == 24);
  CHECK(layers[2].k == 16);
  CHECK(layers[2].r == 1);
  CHECK_FALSE(layers[2].depthwise);
}

TEST_CASE("expand_op: MB7e6 middle layer is a 7x7 depthwise at 24 channels") {
  const auto layers = expand_op(CandidateOp::MB7e6, 4, 4, 8, 1);
  REQUIRE(layers.size() == 3);
  CHECK(layers[1].r == 7);
  CHECK(layers[1].s == 7);
  CHECK(layers[1].c == 24);
  CHECK(layers[1].k == 24);
  CHECK(layers[1].depthwise);
}

TEST_CASE("expand_op: channel chaining holds for every op") {
  for (CandidateOp op : all_candidate_ops()) {
    const auto layers = expand_op(op, 8, 32, 16, 1);
    for (std::size_t i = 0; i + 1 < layers.size(); ++i) CHECK(layers[i].k == layers[i + 1].c);
    for (const auto& l : layers) CHECK_NOTHROW(l.validate());
  }
}

TEST_CASE("encode_network: one-hot rows in canonical order") {
  ArchSpace space = default_space();
  space.positions = 2;

  const auto zz = encode_network({CandidateOp::Zero, CandidateOp::Zero}, space);
  for (const auto& row : zz.rows) {
    for (int j = 0; j < 6; ++j) CHECK(row[j] == 0.0);
    CHECK(row[6] == 1.0);
  }

  const auto enc = encode_network({CandidateOp::MB3e3, CandidateOp::MB7e6}, space);
  CHECK(enc.rows[0][0] == 1.0);
  CHECK(enc.rows[1][5] == 1.0);
  double sum0 = 0;
  for (double v : enc.rows[0]) sum0 += v;
  CHECK(sum0 == 1.0);

  CHECK_THROWS_AS(encode_network({CandidateOp::Zero}, space), std::invalid_argument);
}

TEST_CASE("encode/decode round trip over random architectures") {
  ArchSpace space = default_space();
  Rng rng(12345);
  for (int trial = 0; trial < 100; ++trial) {
    const Architecture arch = sample_random_network(space, rng);
    CHECK(decode_encoding(encode_network(arch, space)) == arch);
  }
}

TEST_CASE("sample_random_network: deterministic per seed, varies across seeds") {
  ArchSpace space = default_space();
  {
    Rng a(42), b(42);
    CHECK(sample_random_network(space, a) == sample_random_network(space, b));
  }
  bool any_differ = false;
  Architecture first;
  for (int seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const Architecture arch = sample_random_network(space, rng);
    if (seed == 0)
      first = arch;
    else
      any_differ = any_differ || (arch != first);
  }
  CHECK(any_differ);
}

TEST_CASE("sample_random_network: per-position frequencies are near uniform") {
  ArchSpace space = default_space();
  const int n = 7000;
  std::vector<std::array<int, kNumCandidateOps>> counts(space.positions);
  for (auto& c : counts) c.fill(0);

  Rng rng(777);
  for (int i = 0; i < n; ++i) {
    const Architecture arch = sample_random_network(space, rng);
    for (int p = 0; p < space.positions; ++p) counts[p][static_cast<int>(arch[p])]++;
  }
  for (int p = 0; p < space.positions; ++p)
    for (int o = 0; o < kNumCandidateOps; ++o) {
      const double freq = double(counts[p][o]) / n;
      CHECK(freq > 1.0 / 7 - 0.02);
      CHECK(freq < 1.0 / 7 + 0.02);
    }
}

TEST_CASE("network_layers: stem plus three layers per non-Zero position") {
  ArchSpace space = default_space();

  const Architecture all_zero(space.positions, CandidateOp::Zero);
  const auto stem_only = network_layers(all_zero, space);
  REQUIRE(stem_only.size() == 1);
  CHECK(stem_only[0].c == 3);
  CHECK(stem_only[0].k == space.stem_width);
  CHECK(stem_only[0].r == 3);

  ArchSpace one_pos = space;
  one_pos.positions = 1;
  const auto four = network_layers({CandidateOp::MB3e3}, one_pos);
  CHECK(four.size() == 4);

  // identical inputs give identical outputs
  const auto again = network_layers({CandidateOp::MB3e3}, one_pos);
  REQUIRE(again.size() == four.size());
  for (std::size_t i = 0; i < four.size(); ++i) {
    CHECK(again[i].c == four[i].c);
    CHECK(again[i].k == four[i].k);
    CHECK(again[i].r == four[i].r);
  }
}

TEST_CASE("network_layers: all-Zero has the smallest total MAC count") {
  ArchSpace space = default_space();
  const Architecture all_zero(space.positions, CandidateOp::Zero);
  std::int64_t zero_macs = 0;
  for (const auto& l : network_layers(all_zero, space)) zero_macs += macs(l);

  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    Architecture arch = sample_random_network(space, rng);
    if (is_all_zero(arch)) arch[0] = CandidateOp::MB3e3;
    std::int64_t total = 0;
    for (const auto& l : network_layers(arch, space)) total += macs(l);
    CHECK(total > zero_macs);
  }
}

TEST_CASE("channel schedule doubles every two positions and chains") {
  ArchSpace space = default_space();
  const auto sched = space.channel_schedule();
  REQUIRE(static_cast<int>(sched.size()) == space.positions);
  CHECK(sched[0].in_channels == space.stem_width);
  for (std::size_t i = 0; i + 1 < sched.size(); ++i)
    CHECK(sched[i].out_channels == sched[i + 1].in_channels);
  CHECK(sched.back().out_channels == space.stem_width * 4);  // 6 positions, doubling every 2
}

TEST_CASE("architecture json round trip") {
  ArchSpace space = default_space();
  Rng rng(9);
  const Architecture arch = sample_random_network(space, rng);
  const std::string text = arch_to_json(arch, space);

  Architecture parsed;
  ArchSpace parsed_space;
  arch_from_json(text, parsed, parsed_space);
  CHECK(parsed == arch);
  CHECK(parsed_space.positions == space.positions);
  CHECK(parsed_space.stem_width == space.stem_width);
}

TEST_CASE("ConvLayerSpec validation") {
  ConvLayerSpec bad;
  bad.c = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  ConvLayerSpec dw;
  dw.c = 8;
  dw.k = 16;
  dw.h = dw.w = 8;
  dw.depthwise = true;
  CHECK_THROWS_AS(dw.validate(), std::invalid_argument);

  ConvLayerSpec ok;
  ok.c = ok.k = 8;
  ok.h = ok.w = 8;
  ok.r = ok.s = 3;
  ok.depthwise = true;
  CHECK_NOTHROW(ok.validate());
}
