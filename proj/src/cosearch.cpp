#include "dance/cosearch.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "dance/nn/optim.hpp"

namespace dance {

using nn::Graph;
using nn::Mat;
using nn::Var;

std::string loss_variant_name(LossVariant v) {
  switch (v) {
    case LossVariant::Dance: return "dance";
    case LossVariant::NoPenalty: return "no_penalty";
    case LossVariant::EddOriginal: return "edd_original";
    case LossVariant::EddFixed: return "edd_fixed";
  }
  throw std::invalid_argument("unknown loss variant");
}

LossVariant loss_variant_from_name(const std::string& name) {
  if (name == "dance") return LossVariant::Dance;
  if (name == "no_penalty") return LossVariant::NoPenalty;
  if (name == "edd_original") return LossVariant::EddOriginal;
  if (name == "edd_fixed") return LossVariant::EddFixed;
  throw std::invalid_argument("unknown loss variant: " + name);
}

SuperNet::SuperNet(const ArchSpace& space, int input_dim, int classes, int feat_dim_, Rng& rng) {
  positions = space.positions;
  feat_dim = feat_dim_;
  alpha = nn::Param(Mat::Zero(1, positions * kNumCandidateOps));

  projection.resize(feat_dim, input_dim);
  const double scale = 1.0 / std::sqrt(double(input_dim));
  for (int r = 0; r < feat_dim; ++r)
    for (int c = 0; c < input_dim; ++c) projection(r, c) = scale * rng.next_normal();

  blocks.resize(positions);
  for (int i = 0; i < positions; ++i) {
    for (CandidateOp op : all_candidate_ops()) {
      OpBlock& block = blocks[i][static_cast<int>(op)];
      if (op == CandidateOp::Zero) {
        block.identity = true;
        continue;
      }
      // capacity follows the op's compute footprint
      const int hidden = op_kernel(op) * op_expand(op);
      block.fc1 = nn::DenseLayer(feat_dim, hidden, rng);
      block.fc2 = nn::DenseLayer(hidden, feat_dim, rng);
    }
  }
  classifier = nn::DenseLayer(feat_dim, classes, rng);
}

Mat SuperNet::featurize(const Mat& x) const {
  return (x * projection.transpose()).array().tanh().matrix();
}

std::vector<Var> SuperNet::relax_alpha(Graph& g, double tau, RelaxMode mode, Rng& rng,
                                       bool frozen_alpha) {
  const Var alpha_var = frozen_alpha ? g.input(alpha.value) : g.param(alpha);
  std::vector<Var> rows;
  rows.reserve(positions);
  for (int i = 0; i < positions; ++i) {
    Mat noise(1, kNumCandidateOps);
    for (int o = 0; o < kNumCandidateOps; ++o) noise(0, o) = rng.next_gumbel();
    const Var logits = g.slice_cols(alpha_var, i * kNumCandidateOps, kNumCandidateOps);
    rows.push_back(
        g.gumbel_softmax_rows(logits, tau, noise, mode == RelaxMode::StraightThrough));
  }
  return rows;
}

std::vector<Var> SuperNet::one_hot_alpha(Graph& g, const Architecture& arch) const {
  if (static_cast<int>(arch.size()) != positions)
    throw std::invalid_argument("one_hot_alpha: architecture length mismatch");
  std::vector<Var> rows;
  rows.reserve(positions);
  for (int i = 0; i < positions; ++i) {
    Mat row = Mat::Zero(1, kNumCandidateOps);
    row(0, static_cast<int>(arch[i])) = 1.0;
    rows.push_back(g.input(std::move(row)));
  }
  return rows;
}

Var SuperNet::task_logits(Graph& g, Var z, const std::vector<Var>& mixture, bool frozen_weights) {
  if (static_cast<int>(mixture.size()) != positions)
    throw std::invalid_argument("task_logits: one mixture row per position required");
  Var h = z;
  for (int i = 0; i < positions; ++i) {
    std::optional<Var> mixed;
    for (int o = 0; o < kNumCandidateOps; ++o) {
      OpBlock& block = blocks[i][o];
      Var fo = h;
      if (!block.identity) {
        Var inner = g.relu(block.fc1.forward(g, h, frozen_weights));
        fo = g.add(g.relu(block.fc2.forward(g, inner, frozen_weights)), h);
      }
      const Var weight = g.elem(mixture[i], 0, o);
      const Var term = g.scale_by(fo, weight);
      mixed = mixed ? g.add(*mixed, term) : term;
    }
    h = *mixed;
  }
  return classifier.forward(g, h, frozen_weights);
}

Var SuperNet::encoding_from_mixture(Graph& g, const std::vector<Var>& mixture) {
  Var enc = mixture.at(0);
  for (std::size_t i = 1; i < mixture.size(); ++i) enc = g.concat_cols(enc, mixture[i]);
  return enc;
}

std::vector<nn::Param*> SuperNet::task_params() {
  std::vector<nn::Param*> params;
  for (auto& position : blocks)
    for (auto& block : position) {
      if (block.identity) continue;
      for (nn::Param* p : block.fc1.params()) params.push_back(p);
      for (nn::Param* p : block.fc2.params()) params.push_back(p);
    }
  for (nn::Param* p : classifier.params()) params.push_back(p);
  return params;
}

Architecture SuperNet::argmax_arch() const {
  Architecture arch(positions);
  for (int i = 0; i < positions; ++i) {
    int best = 0;
    for (int o = 1; o < kNumCandidateOps; ++o)
      if (alpha.value(0, i * kNumCandidateOps + o) > alpha.value(0, i * kNumCandidateOps + best))
        best = o;
    arch[i] = static_cast<CandidateOp>(best);
  }
  return arch;
}

double SuperNet::sum_squares_task_params() const {
  double total = 0.0;
  for (const auto& position : blocks)
    for (const auto& block : position) {
      if (block.identity) continue;
      total += block.fc1.weight.value.squaredNorm() + block.fc1.bias.value.squaredNorm();
      total += block.fc2.weight.value.squaredNorm() + block.fc2.bias.value.squaredNorm();
    }
  total += classifier.weight.value.squaredNorm() + classifier.bias.value.squaredNorm();
  return total;
}

void SearchConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("search: epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("search: batch size must be >= 1");
  if (lambda2 < 0) throw std::invalid_argument("search: lambda2 must be >= 0");
  if (warmup.enabled) {
    const int small = warmup.epochs_small > 0 ? warmup.epochs_small : epochs / 3;
    if (small >= epochs) throw std::invalid_argument("search: warm-up must end before the run");
    if (warmup.lambda2_small > lambda2)
      throw std::invalid_argument("search: warm-up lambda2 must not exceed the target");
  }
  if (!(tau_start > 0) || !(tau_end > 0))
    throw std::invalid_argument("search: temperatures must be > 0");
}

double warmup_lambda2(int epoch, const SearchConfig& config) {
  if (!config.warmup.enabled) return config.lambda2;
  const int small = config.warmup.epochs_small > 0 ? config.warmup.epochs_small : config.epochs / 3;
  if (config.warmup.ramp) {
    const double t = std::min(1.0, double(epoch) / double(small > 0 ? small : 1));
    return config.warmup.lambda2_small + (config.lambda2 - config.warmup.lambda2_small) * t;
  }
  return epoch < small ? config.warmup.lambda2_small : config.lambda2;
}

Var cost_hw_var(Graph& g, Var metrics, const CostFunctionSpec& spec) {
  const Var lat = g.elem(metrics, 0, 0);
  const Var en = g.elem(metrics, 0, 1);
  const Var area = g.elem(metrics, 0, 2);
  if (spec.kind == CostFunctionSpec::Kind::EDAP) return g.mul(g.mul(lat, en), area);
  return g.add(g.add(g.scale(lat, spec.lambda_l), g.scale(en, spec.lambda_e)),
               g.scale(area, spec.lambda_a));
}

CombinedLossParts build_combined_loss(Graph& g, SuperNet& net, EvaluatorModel& evaluator,
                                      const Mat& z, const std::vector<int>& labels,
                                      const CostFunctionSpec& cost_spec,
                                      const LossBuildContext& ctx, Rng& gumbel_rng,
                                      Rng& eval_noise_rng) {
  const auto mixture = net.relax_alpha(g, ctx.tau, ctx.mode, gumbel_rng, ctx.frozen_alpha);
  const Var logits = net.task_logits(g, g.input(z), mixture, ctx.frozen_weights);
  const Var ce = g.ce_with_logits(logits, labels, ctx.label_smoothing);

  CombinedLossParts parts{ce, ce, std::nullopt};

  Var total = ce;
  if (ctx.lambda1 != 0.0 && !ctx.frozen_weights) {
    std::optional<Var> l2;
    for (nn::Param* p : net.task_params()) {
      const Var sq = g.sum_squares(g.param(*p));
      l2 = l2 ? g.add(*l2, sq) : sq;
    }
    total = g.add(total, g.scale(*l2, ctx.lambda1));
  }

  const bool needs_cost = (ctx.variant == LossVariant::Dance && ctx.lambda2 != 0.0) ||
                          ctx.variant == LossVariant::EddOriginal ||
                          (ctx.variant == LossVariant::EddFixed && ctx.lambda2 != 0.0);
  if (needs_cost) {
    const Var enc = net.encoding_from_mixture(g, mixture);
    Var metrics = ctx.variant == LossVariant::EddFixed
                      ? evaluator_metrics_path_pe_only(g, evaluator, enc, eval_noise_rng,
                                                       ctx.edd_fixed_df, ctx.edd_fixed_rf)
                      : evaluator_metrics_path(g, evaluator, enc, eval_noise_rng);
    if (ctx.variant == LossVariant::EddOriginal) {
      // multiplicative form: lambda2 * CE * latency
      const Var latency = g.elem(metrics, 0, 0);
      parts.cost = latency;
      total = g.scale(g.mul(ce, latency), ctx.lambda2);
    } else {
      const Var cost = cost_hw_var(g, metrics, cost_spec);
      parts.cost = cost;
      total = g.add(total, g.scale(cost, ctx.lambda2));
    }
  }
  parts.total = total;
  return parts;
}

namespace {

std::vector<int> shuffled_indices(int n, Rng& rng) {
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  for (int i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.next_int(0, i - 1)]);
  return idx;
}

double anneal(double start, double end, int epoch, int total) {
  if (total <= 1) return end;
  return start + (end - start) * double(epoch) / double(total - 1);
}

}  // namespace

SearchResult search(const ToyTask& task, const ArchSpace& space, EvaluatorModel& evaluator,
                    const CostFunctionSpec& cost_spec, const SearchConfig& config) {
  config.validate();
  cost_spec.validate();
  if (evaluator.positions != space.positions)
    throw std::invalid_argument("search: evaluator was trained for a different space");

  Rng init_rng(mix_seed(config.seed, 1));
  Rng shuffle_rng(mix_seed(config.seed, 2));
  Rng gumbel_rng(mix_seed(config.seed, 3));
  Rng noise_rng(mix_seed(config.seed, 4));

  SuperNet net(space, task.input_dim, task.classes, config.feat_dim, init_rng);
  nn::SgdOptimizer w_opt(net.task_params(),
                         nn::SgdConfig{config.w_lr, config.w_momentum, 0.0, config.nesterov});
  nn::AdamOptimizer a_opt({&net.alpha}, nn::AdamConfig{config.alpha_lr});

  const Mat z_train = net.featurize(task.train_x);
  const Mat z_val = net.featurize(task.val_x);
  const int n_train = static_cast<int>(z_train.rows());
  const int n_val = static_cast<int>(z_val.rows());

  SearchResult result;
  result.space = space;
  result.variant = config.variant;
  result.cost_spec = cost_spec;

  int val_cursor = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double tau = anneal(config.tau_start, config.tau_end, epoch, config.epochs);
    const double lambda2 =
        config.variant == LossVariant::NoPenalty ? 0.0 : warmup_lambda2(epoch, config);
    w_opt.set_lr(nn::cosine_lr(config.w_lr, epoch, config.epochs));

    const std::vector<int> order = shuffled_indices(n_train, shuffle_rng);
    double ce_sum = 0.0;
    double cost_sum = 0.0;
    int steps = 0, cost_steps = 0;

    for (int start = 0; start < n_train; start += config.batch_size) {
      const int b = std::min(config.batch_size, n_train - start);
      Mat zb(b, net.feat_dim);
      std::vector<int> yb(b);
      for (int i = 0; i < b; ++i) {
        zb.row(i) = z_train.row(order[start + i]);
        yb[i] = task.train_y[order[start + i]];
      }

      // task-weight step on the training batch
      {
        LossBuildContext ctx;
        ctx.tau = tau;
        ctx.mode = config.relax;
        ctx.lambda1 = config.lambda1;
        ctx.lambda2 = 0.0;  // hardware term has zero task-weight gradient
        ctx.label_smoothing = config.label_smoothing;
        ctx.variant = LossVariant::NoPenalty;
        ctx.frozen_alpha = true;
        ctx.frozen_weights = false;

        w_opt.zero_grad();
        Graph g;
        const auto parts =
            build_combined_loss(g, net, evaluator, zb, yb, cost_spec, ctx, gumbel_rng, noise_rng);
        g.backward(parts.total);
        w_opt.step();
        ce_sum += parts.ce.value()(0, 0);
        ++steps;
      }

      // architecture step on the next held-out batch
      {
        const int vb = std::min(config.batch_size, n_val);
        Mat zv(vb, net.feat_dim);
        std::vector<int> yv(vb);
        for (int i = 0; i < vb; ++i) {
          const int row = (val_cursor + i) % n_val;
          zv.row(i) = z_val.row(row);
          yv[i] = task.val_y[row];
        }
        val_cursor = (val_cursor + vb) % n_val;

        LossBuildContext ctx;
        ctx.tau = tau;
        ctx.mode = config.relax;
        ctx.lambda1 = config.lambda1;
        ctx.lambda2 = lambda2;
        ctx.label_smoothing = config.label_smoothing;
        ctx.variant = config.variant;
        ctx.edd_fixed_df = config.edd_fixed_df;
        ctx.edd_fixed_rf = config.edd_fixed_rf;
        ctx.frozen_alpha = false;
        ctx.frozen_weights = true;

        a_opt.zero_grad();
        Graph g;
        const auto parts =
            build_combined_loss(g, net, evaluator, zv, yv, cost_spec, ctx, gumbel_rng, noise_rng);
        g.backward(parts.total);
        a_opt.step();
        if (parts.cost) {
          cost_sum += parts.cost->value()(0, 0);
          ++cost_steps;
        }
      }
    }

    TraceRow row;
    row.epoch = epoch;
    row.ce = ce_sum / std::max(1, steps);
    row.cost_hw = cost_steps > 0 ? cost_sum / cost_steps : 0.0;
    row.lambda2 = lambda2;
    row.argmax = net.argmax_arch();
    row.alpha.assign(net.alpha.value.data(), net.alpha.value.data() + net.alpha.value.size());
    if (!net.alpha.value.allFinite()) throw std::runtime_error("search: alpha diverged");
    result.trace.push_back(row);

    if (config.verbose)
      std::printf("  search epoch %3d  ce %.4f  cost %.3e  lambda2 %.3e\n", epoch, row.ce,
                  row.cost_hw, lambda2);
  }

  result.final_arch = net.argmax_arch();
  result.final_val_accuracy_pct = discrete_val_accuracy_pct(net, task, result.final_arch);
  return result;
}

double discrete_val_accuracy_pct(SuperNet& net, const ToyTask& task, const Architecture& arch) {
  const Mat z = net.featurize(task.val_x);
  const int n = static_cast<int>(z.rows());
  int hits = 0;
  const int batch = 256;
  for (int start = 0; start < n; start += batch) {
    const int b = std::min(batch, n - start);
    Graph g;
    const auto mixture = net.one_hot_alpha(g, arch);
    const Var logits = net.task_logits(g, g.input(z.middleRows(start, b)), mixture, true);
    for (int i = 0; i < b; ++i) {
      Eigen::Index argmax = 0;
      logits.value().row(i).maxCoeff(&argmax);
      hits += (static_cast<int>(argmax) == task.val_y[start + i]);
    }
  }
  return 100.0 * hits / n;
}

std::string SearchResult::trace_csv() const {
  std::ostringstream ss;
  ss << "epoch,ce,cost_hw,lambda2";
  for (int i = 0; i < space.positions; ++i) ss << ",pos_" << i;
  ss << "\n";
  for (const auto& row : trace) {
    ss << row.epoch << ',' << format_g9(row.ce) << ',' << format_g9(row.cost_hw) << ','
       << format_g9(row.lambda2);
    for (CandidateOp op : row.argmax) ss << ',' << op_name(op);
    ss << "\n";
  }
  return ss.str();
}

std::string SearchResult::alpha_trace_csv() const {
  std::ostringstream ss;
  ss << "epoch";
  for (int i = 0; i < space.positions; ++i)
    for (CandidateOp op : all_candidate_ops()) ss << ",a" << i << "_" << op_name(op);
  ss << "\n";
  for (const auto& row : trace) {
    ss << row.epoch;
    for (double v : row.alpha) ss << ',' << format_g9(v);
    ss << "\n";
  }
  return ss.str();
}

FinalizeResult finalize(const Architecture& arch, const ArchSpace& space,
                        EvaluatorModel& evaluator, const CostFunctionSpec& cost_spec,
                        const HwSpace& hw_space, const CostModelConstants& constants,
                        LossVariant variant, std::uint64_t noise_seed) {
  if (is_all_zero(arch))
    throw std::invalid_argument(
        "finalize: the searched architecture is all-Zero (only the stem remains); raise the "
        "warm-up length or lower lambda2 and search again");

  const auto layers = network_layers(arch, space);
  const ArchEncoding enc = encode_network(arch, space);

  FinalizeResult result;
  result.arch = arch;

  if (variant == LossVariant::EddFixed) {
    // PE counts were the only searched hardware parameters; complete the
    // remaining two by a restricted sweep
    const AcceleratorConfig picked = predict_hw(evaluator, enc);
    double best_cost = 0.0;
    bool first = true;
    for (Dataflow df : hw_space.dataflows)
      for (int rf : hw_space.rf_values) {
        const AcceleratorConfig cfg{df, picked.pe_x, picked.pe_y, rf};
        const double cost = cost_hw(evaluate_network(layers, cfg, constants), cost_spec);
        if (first || cost < best_cost) {
          best_cost = cost;
          result.config = cfg;
          first = false;
        }
      }
    result.provenance = "search_pe+oracle_dfrf";
  } else {
    const OracleResult oracle = optimal_hw(layers, cost_spec, hw_space, constants);
    result.config = oracle.config;
    result.provenance = "oracle";
  }

  result.oracle_metrics = evaluate_network(layers, result.config, constants);
  result.cost = cost_hw(result.oracle_metrics, cost_spec);

  Rng noise_rng(mix_seed(noise_seed, 0xF1));
  result.surrogate_metrics = evaluate_end_to_end(evaluator, enc, noise_rng);
  const double oracle_vals[] = {result.oracle_metrics.latency_ms, result.oracle_metrics.energy_mj,
                                result.oracle_metrics.area_um2};
  const double pred_vals[] = {result.surrogate_metrics.latency_ms,
                              result.surrogate_metrics.energy_mj,
                              result.surrogate_metrics.area_um2};
  for (int i = 0; i < 3; ++i) result.rel_gap[i] = std::abs(1.0 - pred_vals[i] / oracle_vals[i]);
  return result;
}

nlohmann::json FinalizeResult::to_json(double val_accuracy_pct) const {
  nlohmann::json ops = nlohmann::json::array();
  for (CandidateOp op : arch) ops.push_back(op_name(op));
  return nlohmann::json{
      {"arch", ops},
      {"accelerator",
       {{"dataflow", dataflow_name(config.dataflow)},
        {"pe_x", config.pe_x},
        {"pe_y", config.pe_y},
        {"rf_size", config.rf_size}}},
      {"oracle_metrics",
       {{"latency_ms", oracle_metrics.latency_ms},
        {"energy_mj", oracle_metrics.energy_mj},
        {"area_um2", oracle_metrics.area_um2},
        {"edap", oracle_metrics.latency_ms * oracle_metrics.energy_mj * oracle_metrics.area_um2}}},
      {"surrogate_metrics",
       {{"latency_ms", surrogate_metrics.latency_ms},
        {"energy_mj", surrogate_metrics.energy_mj},
        {"area_um2", surrogate_metrics.area_um2}}},
      {"rel_gap", {rel_gap[0], rel_gap[1], rel_gap[2]}},
      {"cost", cost},
      {"provenance", provenance},
      {"val_accuracy_pct", val_accuracy_pct}};
}

}  // namespace dance
