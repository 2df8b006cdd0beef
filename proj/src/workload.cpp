#include "dance/workload.hpp"

#include <stdexcept>

#include <json.hpp>

namespace dance {

void ConvLayerSpec::validate() const {
  if (n < 1 || c < 1 || k < 1 || h < 1 || w < 1 || r < 1 || s < 1 || stride < 1)
    throw std::invalid_argument("ConvLayerSpec: all dimensions must be >= 1");
  if (r > h || s > w)
    throw std::invalid_argument("ConvLayerSpec: kernel larger than padded input");
  if (depthwise && c != k)
    throw std::invalid_argument("ConvLayerSpec: depthwise requires c == k");
}

const std::array<CandidateOp, kNumCandidateOps>& all_candidate_ops() {
  static const std::array<CandidateOp, kNumCandidateOps> ops = {
      CandidateOp::MB3e3, CandidateOp::MB3e6, CandidateOp::MB5e3, CandidateOp::MB5e6,
      CandidateOp::MB7e3, CandidateOp::MB7e6, CandidateOp::Zero};
  return ops;
}

std::string op_name(CandidateOp op) {
  switch (op) {
    case CandidateOp::MB3e3: return "MB3e3";
    case CandidateOp::MB3e6: return "MB3e6";
    case CandidateOp::MB5e3: return "MB5e3";
    case CandidateOp::MB5e6: return "MB5e6";
    case CandidateOp::MB7e3: return "MB7e3";
    case CandidateOp::MB7e6: return "MB7e6";
    case CandidateOp::Zero: return "Zero";
  }
  throw std::invalid_argument("unknown CandidateOp");
}

CandidateOp op_from_name(const std::string& name) {
  for (CandidateOp op : all_candidate_ops())
    if (op_name(op) == name) return op;
  throw std::invalid_argument("unknown op name: " + name);
}

int op_kernel(CandidateOp op) {
  switch (op) {
    case CandidateOp::MB3e3:
    case CandidateOp::MB3e6: return 3;
    case CandidateOp::MB5e3:
    case CandidateOp::MB5e6: return 5;
    case CandidateOp::MB7e3:
    case CandidateOp::MB7e6: return 7;
    case CandidateOp::Zero: break;
  }
  throw std::invalid_argument("Zero op has no kernel");
}

int op_expand(CandidateOp op) {
  switch (op) {
    case CandidateOp::MB3e3:
    case CandidateOp::MB5e3:
    case CandidateOp::MB7e3: return 3;
    case CandidateOp::MB3e6:
    case CandidateOp::MB5e6:
    case CandidateOp::MB7e6: return 6;
    case CandidateOp::Zero: break;
  }
  throw std::invalid_argument("Zero op has no expansion factor");
}

std::vector<PositionShape> ArchSpace::channel_schedule() const {
  std::vector<PositionShape> sched(positions);
  std::int64_t in_ch = stem_width;
  for (int i = 0; i < positions; ++i) {
    const std::int64_t out_ch = stem_width << (i / double_every);
    sched[i] = PositionShape{in_ch, out_ch, input_h};
    in_ch = out_ch;
  }
  return sched;
}

ConvLayerSpec ArchSpace::stem_layer() const {
  ConvLayerSpec stem;
  stem.n = batch;
  stem.c = input_c;
  stem.k = stem_width;
  stem.h = input_h;
  stem.w = input_w;
  stem.r = 3;
  stem.s = 3;
  stem.stride = 1;
  stem.depthwise = false;
  return stem;
}

std::vector<double> ArchEncoding::flatten() const {
  std::vector<double> flat;
  flat.reserve(rows.size() * kNumCandidateOps);
  for (const auto& row : rows)
    for (double v : row) flat.push_back(v);
  return flat;
}

ArchEncoding ArchEncoding::from_flat(const std::vector<double>& flat) {
  if (flat.size() % kNumCandidateOps != 0)
    throw std::invalid_argument("flat encoding length not a multiple of 7");
  ArchEncoding enc;
  enc.rows.resize(flat.size() / kNumCandidateOps);
  for (std::size_t i = 0; i < enc.rows.size(); ++i)
    for (int j = 0; j < kNumCandidateOps; ++j) enc.rows[i][j] = flat[i * kNumCandidateOps + j];
  return enc;
}

std::vector<ConvLayerSpec> expand_op(CandidateOp op, std::int64_t in_ch, std::int64_t out_ch,
                                     std::int64_t spatial, std::int64_t batch) {
  if (in_ch < 1 || out_ch < 1 || spatial < 1 || batch < 1)
    throw std::invalid_argument("expand_op: dimensions must be >= 1");
  if (op == CandidateOp::Zero) return {};

  const std::int64_t mid = in_ch * op_expand(op);
  const std::int64_t kk = op_kernel(op);

  ConvLayerSpec pw_expand{batch, in_ch, mid, spatial, spatial, 1, 1, 1, false};
  ConvLayerSpec dw{batch, mid, mid, spatial, spatial, kk, kk, 1, true};
  ConvLayerSpec pw_project{batch, mid, out_ch, spatial, spatial, 1, 1, 1, false};
  return {pw_expand, dw, pw_project};
}

ArchEncoding encode_network(const Architecture& arch, const ArchSpace& space) {
  if (static_cast<int>(arch.size()) != space.positions)
    throw std::invalid_argument("encode_network: architecture length != space positions");
  ArchEncoding enc;
  enc.rows.assign(arch.size(), {});
  for (std::size_t i = 0; i < arch.size(); ++i) {
    enc.rows[i].fill(0.0);
    enc.rows[i][static_cast<int>(arch[i])] = 1.0;
  }
  return enc;
}

Architecture decode_encoding(const ArchEncoding& enc) {
  Architecture arch(enc.rows.size());
  for (std::size_t i = 0; i < enc.rows.size(); ++i) {
    int best = 0;
    for (int j = 1; j < kNumCandidateOps; ++j)
      if (enc.rows[i][j] > enc.rows[i][best]) best = j;
    arch[i] = static_cast<CandidateOp>(best);
  }
  return arch;
}

Architecture sample_random_network(const ArchSpace& space, Rng& rng) {
  Architecture arch(space.positions);
  for (auto& op : arch) op = static_cast<CandidateOp>(rng.next_int(0, kNumCandidateOps - 1));
  return arch;
}

std::vector<ConvLayerSpec> network_layers(const Architecture& arch, const ArchSpace& space) {
  if (static_cast<int>(arch.size()) != space.positions)
    throw std::invalid_argument("network_layers: architecture length != space positions");
  std::vector<ConvLayerSpec> layers;
  layers.push_back(space.stem_layer());
  const auto sched = space.channel_schedule();
  for (std::size_t i = 0; i < arch.size(); ++i) {
    auto expanded = expand_op(arch[i], sched[i].in_channels, sched[i].out_channels,
                              sched[i].spatial, space.batch);
    layers.insert(layers.end(), expanded.begin(), expanded.end());
  }
  for (const auto& l : layers) l.validate();
  return layers;
}

bool is_all_zero(const Architecture& arch) {
  for (CandidateOp op : arch)
    if (op != CandidateOp::Zero) return false;
  return true;
}

std::string arch_to_json(const Architecture& arch, const ArchSpace& space) {
  nlohmann::json j;
  j["positions"] = nlohmann::json::array();
  for (CandidateOp op : arch) j["positions"].push_back({{"op", op_name(op)}});
  j["space"] = {{"positions", space.positions},   {"stem_width", space.stem_width},
                {"input_c", space.input_c},       {"input_h", space.input_h},
                {"input_w", space.input_w},       {"batch", space.batch},
                {"double_every", space.double_every}};
  return j.dump(2) + "\n";
}

void arch_from_json(const std::string& json_text, Architecture& arch, ArchSpace& space) {
  const auto j = nlohmann::json::parse(json_text);
  arch.clear();
  for (const auto& p : j.at("positions")) arch.push_back(op_from_name(p.at("op").get<std::string>()));
  const auto& s = j.at("space");
  space.positions = s.at("positions").get<int>();
  space.stem_width = s.at("stem_width").get<std::int64_t>();
  space.input_c = s.at("input_c").get<std::int64_t>();
  space.input_h = s.at("input_h").get<std::int64_t>();
  space.input_w = s.at("input_w").get<std::int64_t>();
  space.batch = s.at("batch").get<std::int64_t>();
  space.double_every = s.at("double_every").get<int>();
  if (static_cast<int>(arch.size()) != space.positions)
    throw std::invalid_argument("architecture file: positions length mismatch");
}

}  // namespace dance
