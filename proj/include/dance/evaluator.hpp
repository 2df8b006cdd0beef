#ifndef DANCE_EVALUATOR_HPP
#define DANCE_EVALUATOR_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dance/dataset.hpp"
#include "dance/nn/graph.hpp"
#include "dance/nn/layers.hpp"
#include "dance/workload.hpp"

namespace dance {

// Five-layer perceptron over the architecture encoding with residual
// connections bridging the equal-width hidden layers (1->3, 2->4); four
// categorical heads, one per hardware parameter.
struct HwGenNet {
  std::vector<nn::DenseLayer> trunk;
  nn::DenseLayer head_df, head_pex, head_pey, head_rf;

  HwGenNet() = default;
  HwGenNet(int input_dim, int width, Rng& rng);

  struct Heads {
    nn::Var df, pex, pey, rf;
  };
  // raw logits per head; frozen registers weights as constants so backward
  // skips their gradient work
  Heads forward(nn::Graph& g, nn::Var x, bool frozen = false);
  std::vector<nn::Param*> params();
  int input_dim() const { return trunk.empty() ? 0 : trunk.front().fan_in(); }
};

// Five-layer regression trunk (batch norm + ReLU each layer, same skip
// pattern) predicting log-costs; exp keeps the three metrics positive.
struct CostEstNet {
  std::vector<nn::DenseLayer> trunk;
  std::vector<nn::BatchNormLayer> bn;
  nn::DenseLayer out;

  CostEstNet() = default;
  CostEstNet(int input_dim, int width, Rng& rng);

  // [B x 3] strictly positive metric predictions
  nn::Var forward(nn::Graph& g, nn::Var x, bool training, bool frozen = false);
  std::vector<nn::Param*> params();
  void set_bn_stat_updates(bool enabled);
  int input_dim() const { return trunk.empty() ? 0 : trunk.front().fan_in(); }
};

struct HwGenTrainConfig {
  int epochs = 200;
  int batch_size = 128;
  double lr0 = 0.001;
  double lr_decay_gamma = 0.1;
  int lr_decay_every = 50;
  double momentum = 0.9;
  double tau_start = 5.0;
  double tau_end = 0.5;
  int width = 128;
  bool verbose = false;
};

struct CostEstTrainConfig {
  int epochs = 200;
  int batch_size = 256;
  double lr = 0.0001;
  double lr_decay_gamma = 1.0;  // multiplied in every lr_decay_every epochs; 0 disables
  int lr_decay_every = 0;
  int width = 256;
  bool feature_forwarding = true;
  bool verbose = false;
};

struct EvaluatorTrainConfig {
  HwGenTrainConfig hwgen;
  CostEstTrainConfig costest;
  // also fit the opposite-forwarding cost net so one model can report the
  // full four-row accuracy table including the ablation
  bool train_ablation = true;
  double val_fraction = 0.2;
  std::uint64_t seed = 1;
};

// Accuracy table mirroring the four-row layout: per-parameter exact-match
// for hardware generation, per-metric (1 - mean relative error) for the
// regression rows.
struct AccuracyReport {
  std::array<double, 4> hwgen_pct{};        // pe_x, pe_y, rf, dataflow
  std::array<double, 3> costest_fwd_pct{};  // latency, energy, area
  std::array<double, 3> costest_nofwd_pct{};
  std::array<double, 3> overall_pct{};
  bool has_nofwd = false;

  double hwgen_mean() const;
  double costest_fwd_mean() const;
  double costest_nofwd_mean() const;
  double overall_mean() const;
  std::string to_csv() const;  // 4 data rows
  nlohmann::json to_json() const;
};

struct EvaluatorModel {
  HwGenNet hwgen;
  CostEstNet costest;  // forwarding per feature_forwarding
  std::optional<CostEstNet> ablation_costest;  // opposite forwarding, report only
  bool feature_forwarding = true;
  double tau_inference = 0.5;
  int positions = 0;
  nlohmann::json metadata;  // training config, dataset fingerprint, accuracy

  int encoding_width() const { return positions * kNumCandidateOps; }
};

// Trains the hardware-generation net on the `opt` rows and the
// cost-estimation net on every (arch, hw, costs) row of the training
// networks; without forwarding the cost net sees the architecture only and
// fits the optimal-config costs. The returned model is frozen (BN stats
// pinned) and carries its own accuracy report in metadata.
EvaluatorModel train_evaluator(const Dataset& dataset, const std::string& dataset_fingerprint,
                               const EvaluatorTrainConfig& config);

// hwgen -> Gumbel one-hot relaxation -> (optionally) concatenation with the
// architecture -> cost estimation. arch may require gradients; the model is
// used frozen. Returns the [B x 3] metrics node.
nn::Var evaluator_metrics_path(nn::Graph& g, EvaluatorModel& model, nn::Var arch, Rng& noise_rng);

// Same path but the dataflow/RF head outputs are pinned to fixed one-hots,
// leaving only the PE heads visible to the caller's gradients.
nn::Var evaluator_metrics_path_pe_only(nn::Graph& g, EvaluatorModel& model, nn::Var arch,
                                       Rng& noise_rng, Dataflow fixed_df, int fixed_rf);

// Graph-free forward for frozen inference; arithmetic mirrors the graph
// path exactly (same operation order), so results are bit-identical.
nn::Mat evaluator_infer_metrics(const EvaluatorModel& model, const nn::Mat& arch_rows,
                                Rng& noise_rng);

CostMetrics evaluate_end_to_end(EvaluatorModel& model, const ArchEncoding& encoding,
                                Rng& noise_rng);
std::vector<CostMetrics> evaluate_end_to_end_batch(EvaluatorModel& model,
                                                   const std::vector<ArchEncoding>& encodings,
                                                   Rng& noise_rng);

// Hardware parameters the (noise-free) generation heads pick for an
// architecture.
AcceleratorConfig predict_hw(EvaluatorModel& model, const ArchEncoding& encoding);

// Recomputes the validation accuracies of a trained model on its own
// held-out split. The dataset fingerprint must match the one recorded at
// training time; explicit ids overlapping the training networks are an
// error.
AccuracyReport accuracy_report(EvaluatorModel& model, const Dataset& dataset,
                               const std::string& dataset_fingerprint,
                               const std::optional<std::vector<std::int64_t>>& explicit_val_ids =
                                   std::nullopt);

void save_evaluator(const EvaluatorModel& model, const std::string& path);
EvaluatorModel load_evaluator(const std::string& path);

}  // namespace dance

#endif
