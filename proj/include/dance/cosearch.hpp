#ifndef DANCE_COSEARCH_HPP
#define DANCE_COSEARCH_HPP

#include <optional>
#include <string>
#include <vector>

#include "dance/evaluator.hpp"
#include "dance/oracle.hpp"
#include "dance/toytask.hpp"

namespace dance {

enum class RelaxMode { Soft, StraightThrough };
enum class LossVariant { Dance, NoPenalty, EddOriginal, EddFixed };

std::string loss_variant_name(LossVariant v);
LossVariant loss_variant_from_name(const std::string& name);

// Relaxed supernet over the toy task. Architecture logits alpha live as a
// single [1 x 7L] row; each candidate op owns a small residual MLP block on
// a fixed random-projection featurization, with capacity scaled by the op's
// kernel * expand so heavier candidates buy accuracy. Zero is the identity.
struct SuperNet {
  nn::Param alpha;                                    // [1 x 7L] logits
  nn::Mat projection;                                 // fixed [feat_dim x input_dim]
  struct OpBlock {
    bool identity = false;
    nn::DenseLayer fc1, fc2;
  };
  std::vector<std::array<OpBlock, kNumCandidateOps>> blocks;  // [L][op]
  nn::DenseLayer classifier;
  int feat_dim = 0;
  int positions = 0;

  SuperNet() = default;
  SuperNet(const ArchSpace& space, int input_dim, int classes, int feat_dim, Rng& rng);

  // fixed featurization, computed outside the graph
  nn::Mat featurize(const nn::Mat& x) const;
  // per-position relaxed mixture rows, each [1 x 7]
  std::vector<nn::Var> relax_alpha(nn::Graph& g, double tau, RelaxMode mode, Rng& rng,
                                   bool frozen_alpha);
  // argmax one-hot rows, constants
  std::vector<nn::Var> one_hot_alpha(nn::Graph& g, const Architecture& arch) const;
  // classifier logits for featurized batch z under mixture rows p
  nn::Var task_logits(nn::Graph& g, nn::Var z, const std::vector<nn::Var>& mixture,
                      bool frozen_weights);
  // evaluator-facing encoding: concatenation of the mixture rows, [1 x 7L]
  nn::Var encoding_from_mixture(nn::Graph& g, const std::vector<nn::Var>& mixture);

  std::vector<nn::Param*> task_params();
  Architecture argmax_arch() const;
  double sum_squares_task_params() const;
};

struct WarmupConfig {
  bool enabled = true;
  int epochs_small = 0;      // 0: derive as epochs / 3
  double lambda2_small = 0.0;
  bool ramp = false;         // false: step at epochs_small, true: linear ramp
};

struct SearchConfig {
  int epochs = 30;
  int batch_size = 64;
  double w_lr = 0.025;
  double w_momentum = 0.9;
  bool nesterov = false;
  double alpha_lr = 0.05;
  double lambda1 = 0.00004;
  double lambda2 = 0.0;
  double label_smoothing = 0.0;
  WarmupConfig warmup;
  LossVariant variant = LossVariant::Dance;
  RelaxMode relax = RelaxMode::Soft;
  double tau_start = 5.0;
  double tau_end = 0.5;
  int feat_dim = 32;
  // edd_fixed pins these during search and completes them afterwards
  Dataflow edd_fixed_df = Dataflow::WS;
  int edd_fixed_rf = 4;
  std::uint64_t seed = 1;
  bool verbose = false;

  void validate() const;
};

double warmup_lambda2(int epoch, const SearchConfig& config);

struct TraceRow {
  int epoch = 0;
  double ce = 0.0;
  double cost_hw = 0.0;
  double lambda2 = 0.0;
  Architecture argmax;
  std::vector<double> alpha;  // logits snapshot, flattened [7L]
};

struct SearchResult {
  Architecture final_arch;
  std::vector<TraceRow> trace;
  double final_val_accuracy_pct = 0.0;
  ArchSpace space;
  LossVariant variant = LossVariant::Dance;
  CostFunctionSpec cost_spec;

  std::string trace_csv() const;        // epoch, ce, cost_hw, lambda2, per-position argmax
  std::string alpha_trace_csv() const;  // epoch, raw alpha logits
};

// Alternating updates: one task-weight step per train batch, one
// architecture step on a cycled validation batch. The evaluator stays
// frozen and is the only bridge from alpha to the hardware cost. Throws on
// divergence (non-finite loss).
SearchResult search(const ToyTask& task, const ArchSpace& space, EvaluatorModel& evaluator,
                    const CostFunctionSpec& cost_spec, const SearchConfig& config);

struct FinalizeResult {
  Architecture arch;
  AcceleratorConfig config;
  CostMetrics oracle_metrics;      // exact metrics of (arch, config)
  CostMetrics surrogate_metrics;   // frozen evaluator prediction for arch
  std::array<double, 3> rel_gap{}; // |1 - surrogate/oracle| per metric
  double cost = 0.0;               // cost_hw(oracle_metrics, cost_spec)
  std::string provenance;          // "oracle" or "search_pe+oracle_dfrf"

  nlohmann::json to_json(double val_accuracy_pct) const;
};

// One-time exact hardware generation for the searched architecture. For
// EddFixed runs, PE counts come from the generation heads and only
// dataflow/RF are swept. Throws on an all-Zero architecture.
FinalizeResult finalize(const Architecture& arch, const ArchSpace& space,
                        EvaluatorModel& evaluator, const CostFunctionSpec& cost_spec,
                        const HwSpace& hw_space, const CostModelConstants& constants,
                        LossVariant variant, std::uint64_t noise_seed);

// Discrete-architecture validation accuracy with the searched weights.
double discrete_val_accuracy_pct(SuperNet& net, const ToyTask& task, const Architecture& arch);

nn::Var cost_hw_var(nn::Graph& g, nn::Var metrics, const CostFunctionSpec& spec);

// One loss construction, shared by the search loop and the invariants
// tests. z is the featurized batch. The cost branch is built only when the
// variant needs it and lambda2 != 0.
struct LossBuildContext {
  double tau = 0.5;
  RelaxMode mode = RelaxMode::Soft;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double label_smoothing = 0.0;
  LossVariant variant = LossVariant::Dance;
  Dataflow edd_fixed_df = Dataflow::WS;
  int edd_fixed_rf = 4;
  bool frozen_alpha = false;
  bool frozen_weights = false;
};

struct CombinedLossParts {
  nn::Var total;
  nn::Var ce;
  std::optional<nn::Var> cost;  // cost_hw of the evaluator's predicted metrics
};

CombinedLossParts build_combined_loss(nn::Graph& g, SuperNet& net, EvaluatorModel& evaluator,
                                      const nn::Mat& z, const std::vector<int>& labels,
                                      const CostFunctionSpec& cost_spec,
                                      const LossBuildContext& ctx, Rng& gumbel_rng,
                                      Rng& eval_noise_rng);

}  // namespace dance

#endif
