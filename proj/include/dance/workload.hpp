#ifndef DANCE_WORKLOAD_HPP
#define DANCE_WORKLOAD_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dance/util.hpp"

namespace dance {

// One convolution workload. Layers are emitted "same"-padded, so the output
// spatial extents are ceil(h/stride) x ceil(w/stride).
struct ConvLayerSpec {
  std::int64_t n = 1;  // batch
  std::int64_t c = 1;  // input channels
  std::int64_t k = 1;  // output channels
  std::int64_t h = 1;  // input height
  std::int64_t w = 1;  // input width
  std::int64_t r = 1;  // kernel height
  std::int64_t s = 1;  // kernel width
  std::int64_t stride = 1;
  bool depthwise = false;

  std::int64_t out_h() const { return (h + stride - 1) / stride; }
  std::int64_t out_w() const { return (w + stride - 1) / stride; }

  // Throws std::invalid_argument on dimension violations (including
  // depthwise with c != k).
  void validate() const;
};

// Candidate operations, in the canonical encoding order. Keep this order
// stable: dataset files, evaluator inputs and search logits all index by it.
enum class CandidateOp : int {
  MB3e3 = 0,
  MB3e6 = 1,
  MB5e3 = 2,
  MB5e6 = 3,
  MB7e3 = 4,
  MB7e6 = 5,
  Zero = 6,
};

inline constexpr int kNumCandidateOps = 7;

const std::array<CandidateOp, kNumCandidateOps>& all_candidate_ops();
std::string op_name(CandidateOp op);
CandidateOp op_from_name(const std::string& name);
// kernel extent / expansion factor; Zero has neither and throws.
int op_kernel(CandidateOp op);
int op_expand(CandidateOp op);

struct PositionShape {
  std::int64_t in_channels = 0;
  std::int64_t out_channels = 0;
  std::int64_t spatial = 0;  // square feature maps throughout the toy space
};

// The searchable network space: L positions, each choosing one CandidateOp,
// on top of a fixed stem convolution.
struct ArchSpace {
  int positions = 6;
  std::int64_t stem_width = 8;
  std::int64_t input_c = 3;
  std::int64_t input_h = 16;
  std::int64_t input_w = 16;
  std::int64_t batch = 1;
  int double_every = 2;  // output width doubles every this many positions

  std::vector<PositionShape> channel_schedule() const;
  ConvLayerSpec stem_layer() const;
  int encoding_width() const { return positions * kNumCandidateOps; }
};

// Per-position distribution over the candidate ops. Rows sum to 1; one-hot
// in discrete mode, any simplex point when relaxed.
struct ArchEncoding {
  // row-major [positions][kNumCandidateOps]
  std::vector<std::array<double, kNumCandidateOps>> rows;

  std::vector<double> flatten() const;
  static ArchEncoding from_flat(const std::vector<double>& flat);
};

using Architecture = std::vector<CandidateOp>;

// MBConv(k, e): pointwise expand, depthwise k x k, pointwise project.
// Zero yields no layers.
std::vector<ConvLayerSpec> expand_op(CandidateOp op, std::int64_t in_ch, std::int64_t out_ch,
                                     std::int64_t spatial, std::int64_t batch);

// One-hot encoding in the canonical op order. Throws on length mismatch.
ArchEncoding encode_network(const Architecture& arch, const ArchSpace& space);
// argmax per position; inverse of encode_network on one-hot rows.
Architecture decode_encoding(const ArchEncoding& enc);

Architecture sample_random_network(const ArchSpace& space, Rng& rng);

// Fixed stem layer followed by the expansion of every non-Zero position.
std::vector<ConvLayerSpec> network_layers(const Architecture& arch, const ArchSpace& space);

bool is_all_zero(const Architecture& arch);

// JSON round trip for the architecture file schema:
// {"positions":[{"op":"MB3e3"},...],"space":{...}}
std::string arch_to_json(const Architecture& arch, const ArchSpace& space);
void arch_from_json(const std::string& json_text, Architecture& arch, ArchSpace& space);

}  // namespace dance

#endif
