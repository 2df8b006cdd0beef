#include "dance/evaluator.hpp"

#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <stdexcept>

#include "dance/nn/checkpoint.hpp"
#include "dance/nn/optim.hpp"
#include "dance/oracle.hpp"

namespace dance {

using nn::Graph;
using nn::Mat;
using nn::Var;

namespace {

constexpr int kHwWidth = kNumDataflows + 2 * kNumPeValues + kNumRfValues;  // 42

// trunk with skips 1->3 and 2->4; first and last stay skip-free
Var trunk_forward(Graph& g, std::vector<nn::DenseLayer>& layers, Var x, bool frozen) {
  Var h1 = g.relu(layers[0].forward(g, x, frozen));
  Var h2 = g.relu(layers[1].forward(g, h1, frozen));
  Var h3 = g.add(g.relu(layers[2].forward(g, h2, frozen)), h1);
  Var h4 = g.add(g.relu(layers[3].forward(g, h3, frozen)), h2);
  return g.relu(layers[4].forward(g, h4, frozen));
}

Mat hw_onehot_row(const AcceleratorConfig& cfg) {
  Mat row = Mat::Zero(1, kHwWidth);
  row(0, dataflow_index(cfg.dataflow)) = 1.0;
  row(0, kNumDataflows + pe_index(cfg.pe_x)) = 1.0;
  row(0, kNumDataflows + kNumPeValues + pe_index(cfg.pe_y)) = 1.0;
  row(0, kNumDataflows + 2 * kNumPeValues + rf_index(cfg.rf_size)) = 1.0;
  return row;
}

struct RowTensors {
  Mat arch;  // [n x 7L]
  Mat hw;    // [n x 42]
  Mat costs; // [n x 3]
  // labels in head order: df, pe_x, pe_y, rf
  std::array<std::vector<int>, 4> labels;
  int count = 0;
};

RowTensors gather_rows(const Dataset& ds, const std::vector<std::int64_t>& ids, bool opt_only) {
  const std::set<std::int64_t> wanted(ids.begin(), ids.end());
  std::vector<const DatasetRecord*> rows;
  for (const auto& rec : ds.records)
    if ((rec.optimal || !opt_only) && wanted.count(rec.net_id)) rows.push_back(&rec);

  RowTensors out;
  out.count = static_cast<int>(rows.size());
  const int arch_width = ds.positions * kNumCandidateOps;
  out.arch.resize(out.count, arch_width);
  out.hw.resize(out.count, kHwWidth);
  out.costs.resize(out.count, 3);
  for (auto& l : out.labels) l.resize(out.count);

  for (int i = 0; i < out.count; ++i) {
    const DatasetRecord& rec = *rows[i];
    for (int j = 0; j < arch_width; ++j) out.arch(i, j) = rec.arch_onehot[j];
    out.hw.row(i) = hw_onehot_row(rec.config).row(0);
    out.costs(i, 0) = rec.costs.latency_ms;
    out.costs(i, 1) = rec.costs.energy_mj;
    out.costs(i, 2) = rec.costs.area_um2;
    out.labels[0][i] = dataflow_index(rec.config.dataflow);
    out.labels[1][i] = pe_index(rec.config.pe_x);
    out.labels[2][i] = pe_index(rec.config.pe_y);
    out.labels[3][i] = rf_index(rec.config.rf_size);
  }
  return out;
}

std::vector<int> shuffled_indices(int n, Rng& rng) {
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  for (int i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.next_int(0, i - 1)]);
  return idx;
}

Mat gumbel_noise(int rows, int cols, Rng& rng) {
  // vectorized -log(-log(u)); consumes exactly one uniform per element in
  // row-major order
  Mat u(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) u(r, c) = rng.next_double();
  return (-(-u.array().max(1e-12).min(1.0 - 1e-12).log()).log()).matrix();
}

double anneal(double start, double end, int epoch, int total) {
  if (total <= 1) return end;
  const double t = double(epoch) / double(total - 1);
  return start + (end - start) * t;
}

HwGenNet train_hwgen(const RowTensors& train, const HwGenTrainConfig& cfg, int input_dim,
                     Rng& rng) {
  HwGenNet net(input_dim, cfg.width, rng);
  std::vector<nn::Param*> params = net.params();
  nn::SgdOptimizer opt(params, nn::SgdConfig{cfg.lr0, cfg.momentum, 0.0, false});

  const int n = train.count;
  if (n == 0) throw std::invalid_argument("train_hwgen: empty dataset");

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    opt.set_lr(nn::step_decay_lr(cfg.lr0, cfg.lr_decay_gamma, cfg.lr_decay_every, epoch));
    const double tau = anneal(cfg.tau_start, cfg.tau_end, epoch, cfg.epochs);
    const std::vector<int> order = shuffled_indices(n, rng);

    double epoch_loss = 0.0;
    int batches = 0;
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int b = std::min(cfg.batch_size, n - start);
      Mat x(b, input_dim);
      std::array<std::vector<int>, 4> labels;
      for (auto& l : labels) l.resize(b);
      for (int i = 0; i < b; ++i) {
        const int row = order[start + i];
        x.row(i) = train.arch.row(row);
        for (int h = 0; h < 4; ++h) labels[h][i] = train.labels[h][row];
      }

      opt.zero_grad();
      Graph g;
      const auto heads = net.forward(g, g.input(std::move(x)));
      const Var sizes[] = {heads.df, heads.pex, heads.pey, heads.rf};
      Var loss = g.input(Mat::Zero(1, 1));
      for (int h = 0; h < 4; ++h) {
        const int width = static_cast<int>(sizes[h].value().cols());
        Var p = g.gumbel_softmax_rows(sizes[h], tau, gumbel_noise(b, width, rng), false);
        loss = g.add(loss, g.nll_rows(p, labels[h]));
      }
      g.backward(loss);
      opt.step();
      epoch_loss += loss.value()(0, 0);
      ++batches;
    }
    if (cfg.verbose && (epoch % 10 == 0 || epoch + 1 == cfg.epochs))
      std::printf("  hwgen epoch %3d  loss %.4f  lr %.2e  tau %.2f\n", epoch,
                  epoch_loss / batches, opt.lr(), tau);
  }
  return net;
}

CostEstNet train_costest(const RowTensors& train, const CostEstTrainConfig& cfg, int arch_width,
                         Rng& rng) {
  const int input_dim = cfg.feature_forwarding ? arch_width + kHwWidth : arch_width;
  CostEstNet net(input_dim, cfg.width, rng);

  const int n = train.count;
  if (n == 0) throw std::invalid_argument("train_costest: empty dataset");

  // start the log-cost head at the mean log target of each metric
  for (int m = 0; m < 3; ++m) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += std::log(train.costs(i, m));
    net.out.bias.value(0, m) = acc / n;
  }

  nn::AdamOptimizer opt(net.params(), nn::AdamConfig{cfg.lr});

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.lr_decay_every > 0)
      opt.set_lr(nn::step_decay_lr(cfg.lr, cfg.lr_decay_gamma, cfg.lr_decay_every, epoch));
    const std::vector<int> order = shuffled_indices(n, rng);
    double epoch_loss = 0.0;
    int batches = 0;
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int b = std::min(cfg.batch_size, n - start);
      Mat x(b, input_dim);
      Mat y(b, 3);
      for (int i = 0; i < b; ++i) {
        const int row = order[start + i];
        if (cfg.feature_forwarding) {
          x.block(i, 0, 1, arch_width) = train.arch.row(row);
          x.block(i, arch_width, 1, kHwWidth) = train.hw.row(row);
        } else {
          x.row(i) = train.arch.row(row);
        }
        y.row(i) = train.costs.row(row);
      }

      opt.zero_grad();
      Graph g;
      Var yhat = net.forward(g, g.input(std::move(x)), /*training=*/true);
      Var loss = g.msre(yhat, y);
      g.backward(loss);
      opt.step();
      epoch_loss += loss.value()(0, 0);
      ++batches;
    }
    if (cfg.verbose && (epoch % 10 == 0 || epoch + 1 == cfg.epochs))
      std::printf("  costest%s epoch %3d  msre %.5f\n",
                  cfg.feature_forwarding ? "" : " (no fwd)", epoch, epoch_loss / batches);
  }
  net.set_bn_stat_updates(false);
  return net;
}

// (1 - mean |1 - yhat/y|) * 100, per metric column
std::array<double, 3> regression_accuracy(const Mat& yhat, const Mat& y) {
  std::array<double, 3> acc{};
  for (int m = 0; m < 3; ++m) {
    double err = 0.0;
    for (Eigen::Index i = 0; i < y.rows(); ++i)
      err += std::abs(1.0 - yhat(i, m) / y(i, m));
    acc[m] = (1.0 - err / double(y.rows())) * 100.0;
  }
  return acc;
}

Mat costest_predict(CostEstNet& net, const Mat& input) {
  Mat out(input.rows(), 3);
  const int batch = 1024;
  for (Eigen::Index start = 0; start < input.rows(); start += batch) {
    const auto b = std::min<Eigen::Index>(batch, input.rows() - start);
    Graph g;
    Var yhat = net.forward(g, g.input(input.middleRows(start, b)), false, true);
    out.middleRows(start, b) = yhat.value();
  }
  return out;
}

}  // namespace

HwGenNet::HwGenNet(int input_dim, int width, Rng& rng) {
  trunk.emplace_back(input_dim, width, rng);
  for (int i = 1; i < 5; ++i) trunk.emplace_back(width, width, rng);
  head_df = nn::DenseLayer(width, kNumDataflows, rng);
  head_pex = nn::DenseLayer(width, kNumPeValues, rng);
  head_pey = nn::DenseLayer(width, kNumPeValues, rng);
  head_rf = nn::DenseLayer(width, kNumRfValues, rng);
}

HwGenNet::Heads HwGenNet::forward(Graph& g, Var x, bool frozen) {
  Var h = trunk_forward(g, trunk, x, frozen);
  return Heads{head_df.forward(g, h, frozen), head_pex.forward(g, h, frozen),
               head_pey.forward(g, h, frozen), head_rf.forward(g, h, frozen)};
}

std::vector<nn::Param*> HwGenNet::params() {
  std::vector<nn::Param*> out;
  for (auto& layer : trunk)
    for (nn::Param* p : layer.params()) out.push_back(p);
  for (nn::DenseLayer* head : {&head_df, &head_pex, &head_pey, &head_rf})
    for (nn::Param* p : head->params()) out.push_back(p);
  return out;
}

CostEstNet::CostEstNet(int input_dim, int width, Rng& rng) {
  trunk.emplace_back(input_dim, width, rng);
  for (int i = 1; i < 5; ++i) trunk.emplace_back(width, width, rng);
  for (int i = 0; i < 5; ++i) bn.emplace_back(width);
  out = nn::DenseLayer(width, 3, rng);
}

Var CostEstNet::forward(Graph& g, Var x, bool training, bool frozen) {
  auto block = [&](int i, Var in) {
    return g.relu(bn[i].forward(g, trunk[i].forward(g, in, frozen), training, frozen));
  };
  Var h1 = block(0, x);
  Var h2 = block(1, h1);
  Var h3 = g.add(block(2, h2), h1);
  Var h4 = g.add(block(3, h3), h2);
  Var h5 = block(4, h4);
  return g.exp(out.forward(g, h5, frozen));
}

std::vector<nn::Param*> CostEstNet::params() {
  std::vector<nn::Param*> list;
  for (auto& layer : trunk)
    for (nn::Param* p : layer.params()) list.push_back(p);
  for (auto& b : bn)
    for (nn::Param* p : b.params()) list.push_back(p);
  for (nn::Param* p : out.params()) list.push_back(p);
  return list;
}

void CostEstNet::set_bn_stat_updates(bool enabled) {
  for (auto& b : bn) b.update_running_stats = enabled;
}

double AccuracyReport::hwgen_mean() const {
  return (hwgen_pct[0] + hwgen_pct[1] + hwgen_pct[2] + hwgen_pct[3]) / 4.0;
}
double AccuracyReport::costest_fwd_mean() const {
  return (costest_fwd_pct[0] + costest_fwd_pct[1] + costest_fwd_pct[2]) / 3.0;
}
double AccuracyReport::costest_nofwd_mean() const {
  return (costest_nofwd_pct[0] + costest_nofwd_pct[1] + costest_nofwd_pct[2]) / 3.0;
}
double AccuracyReport::overall_mean() const {
  return (overall_pct[0] + overall_pct[1] + overall_pct[2]) / 3.0;
}

std::string AccuracyReport::to_csv() const {
  std::ostringstream ss;
  ss << "section,c1,v1,c2,v2,c3,v3,c4,v4\n";
  ss << "hardware_generation,pe_x," << format_g9(hwgen_pct[0]) << ",pe_y,"
     << format_g9(hwgen_pct[1]) << ",rf," << format_g9(hwgen_pct[2]) << ",dataflow,"
     << format_g9(hwgen_pct[3]) << "\n";
  auto metric_row = [&](const char* name, const std::array<double, 3>& v, bool present) {
    ss << name;
    const char* cols[] = {"latency", "energy", "area"};
    for (int i = 0; i < 3; ++i) {
      ss << ',' << cols[i] << ',';
      if (present) ss << format_g9(v[i]);
    }
    ss << ",,\n";
  };
  metric_row("cost_estimation_no_forwarding", costest_nofwd_pct, has_nofwd);
  metric_row("cost_estimation_forwarding", costest_fwd_pct, true);
  metric_row("overall_evaluator", overall_pct, true);
  return ss.str();
}

nlohmann::json AccuracyReport::to_json() const {
  return nlohmann::json{
      {"hwgen", {{"pe_x", hwgen_pct[0]}, {"pe_y", hwgen_pct[1]}, {"rf", hwgen_pct[2]}, {"dataflow", hwgen_pct[3]}}},
      {"costest_forwarding",
       {{"latency", costest_fwd_pct[0]}, {"energy", costest_fwd_pct[1]}, {"area", costest_fwd_pct[2]}}},
      {"costest_no_forwarding",
       {{"latency", costest_nofwd_pct[0]}, {"energy", costest_nofwd_pct[1]}, {"area", costest_nofwd_pct[2]}}},
      {"overall",
       {{"latency", overall_pct[0]}, {"energy", overall_pct[1]}, {"area", overall_pct[2]}}},
      {"has_no_forwarding", has_nofwd}};
}

namespace {

AccuracyReport measure_accuracy(EvaluatorModel& model, const Dataset& ds,
                                const std::vector<std::int64_t>& val_ids, Rng& noise_rng) {
  AccuracyReport report;
  const RowTensors val_opt = gather_rows(ds, val_ids, /*opt_only=*/true);
  const RowTensors val_all = gather_rows(ds, val_ids, /*opt_only=*/false);
  if (val_opt.count == 0) throw std::invalid_argument("accuracy: empty validation split");

  // hardware generation heads: exact match of the noise-free argmax
  {
    Graph g;
    const auto heads = model.hwgen.forward(g, g.input(val_opt.arch), true);
    const Var head_vars[] = {heads.df, heads.pex, heads.pey, heads.rf};
    std::array<double, 4> by_head{};  // df, pe_x, pe_y, rf
    for (int h = 0; h < 4; ++h) {
      int hits = 0;
      const Mat& logits = head_vars[h].value();
      for (int i = 0; i < val_opt.count; ++i) {
        Eigen::Index arg = 0;
        logits.row(i).maxCoeff(&arg);
        hits += (static_cast<int>(arg) == val_opt.labels[h][i]);
      }
      by_head[h] = 100.0 * hits / val_opt.count;
    }
    report.hwgen_pct = {by_head[1], by_head[2], by_head[3], by_head[0]};  // pe_x, pe_y, rf, df
  }

  CostEstNet* fwd_net = nullptr;
  CostEstNet* nofwd_net = nullptr;
  if (model.feature_forwarding) {
    fwd_net = &model.costest;
    if (model.ablation_costest) nofwd_net = &*model.ablation_costest;
  } else {
    nofwd_net = &model.costest;
    if (model.ablation_costest) fwd_net = &*model.ablation_costest;
  }

  if (fwd_net) {
    Mat input(val_all.count, val_all.arch.cols() + kHwWidth);
    input << val_all.arch, val_all.hw;
    report.costest_fwd_pct = regression_accuracy(costest_predict(*fwd_net, input), val_all.costs);
  }
  if (nofwd_net) {
    report.costest_nofwd_pct =
        regression_accuracy(costest_predict(*nofwd_net, val_opt.arch), val_opt.costs);
    report.has_nofwd = true;
  }

  // full cascade against the oracle-optimal costs
  {
    Mat yhat(val_opt.count, 3);
    const int batch = 1024;
    for (int start = 0; start < val_opt.count; start += batch) {
      const int b = std::min(batch, val_opt.count - start);
      yhat.middleRows(start, b) =
          evaluator_infer_metrics(model, val_opt.arch.middleRows(start, b), noise_rng);
    }
    report.overall_pct = regression_accuracy(yhat, val_opt.costs);
  }

  if (!fwd_net) report.costest_fwd_pct = report.costest_nofwd_pct;  // arch-only model
  return report;
}

}  // namespace

EvaluatorModel train_evaluator(const Dataset& dataset, const std::string& dataset_fingerprint,
                               const EvaluatorTrainConfig& config) {
  if (dataset.records.empty()) throw std::invalid_argument("train_evaluator: empty dataset");
  const int arch_width = dataset.positions * kNumCandidateOps;

  const DatasetSplit split = split_by_network(dataset, config.val_fraction, config.seed);
  const RowTensors train_opt = gather_rows(dataset, split.train_ids, true);
  const RowTensors train_all = gather_rows(dataset, split.train_ids, false);

  EvaluatorModel model;
  model.positions = dataset.positions;
  model.feature_forwarding = config.costest.feature_forwarding;

  Rng hw_rng(mix_seed(config.seed, 0xB1));
  model.hwgen = train_hwgen(train_opt, config.hwgen, arch_width, hw_rng);

  Rng cost_rng(mix_seed(config.seed, 0xC1));
  model.costest = train_costest(config.costest.feature_forwarding ? train_all : train_opt,
                                config.costest, arch_width, cost_rng);

  if (config.train_ablation) {
    CostEstTrainConfig ab = config.costest;
    ab.feature_forwarding = !ab.feature_forwarding;
    Rng ab_rng(mix_seed(config.seed, 0xAB1));
    model.ablation_costest =
        train_costest(ab.feature_forwarding ? train_all : train_opt, ab, arch_width, ab_rng);
  }

  model.tau_inference = config.hwgen.tau_end;

  Rng noise_rng(mix_seed(config.seed, 0xE2E));
  const AccuracyReport accuracy = measure_accuracy(model, dataset, split.val_ids, noise_rng);

  model.metadata = nlohmann::json{
      {"format_version", 1},
      {"positions", dataset.positions},
      {"dataset_fingerprint", dataset_fingerprint},
      {"split_seed", config.seed},
      {"val_fraction", config.val_fraction},
      {"feature_forwarding", config.costest.feature_forwarding},
      {"tau_inference", model.tau_inference},
      {"hwgen_config",
       {{"epochs", config.hwgen.epochs},
        {"batch_size", config.hwgen.batch_size},
        {"lr0", config.hwgen.lr0},
        {"momentum", config.hwgen.momentum},
        {"width", config.hwgen.width}}},
      {"costest_config",
       {{"epochs", config.costest.epochs},
        {"batch_size", config.costest.batch_size},
        {"lr", config.costest.lr},
        {"width", config.costest.width}}},
      {"accuracy", accuracy.to_json()}};
  return model;
}

Var evaluator_metrics_path(Graph& g, EvaluatorModel& model, Var arch, Rng& noise_rng) {
  if (arch.value().cols() != model.encoding_width())
    throw std::invalid_argument("evaluator: encoding width mismatch");
  if (!model.feature_forwarding)
    return model.costest.forward(g, arch, false, true);

  const auto heads = model.hwgen.forward(g, arch, true);
  const int b = static_cast<int>(arch.value().rows());
  const double tau = model.tau_inference;
  Var pdf = g.gumbel_softmax_rows(heads.df, tau, gumbel_noise(b, kNumDataflows, noise_rng), false);
  Var ppex = g.gumbel_softmax_rows(heads.pex, tau, gumbel_noise(b, kNumPeValues, noise_rng), false);
  Var ppey = g.gumbel_softmax_rows(heads.pey, tau, gumbel_noise(b, kNumPeValues, noise_rng), false);
  Var prf = g.gumbel_softmax_rows(heads.rf, tau, gumbel_noise(b, kNumRfValues, noise_rng), false);
  Var hw = g.concat_cols(g.concat_cols(pdf, ppex), g.concat_cols(ppey, prf));
  return model.costest.forward(g, g.concat_cols(arch, hw), false, true);
}

Var evaluator_metrics_path_pe_only(Graph& g, EvaluatorModel& model, Var arch, Rng& noise_rng,
                                   Dataflow fixed_df, int fixed_rf) {
  if (!model.feature_forwarding)
    throw std::invalid_argument("pe-only path requires a feature-forwarding model");
  if (arch.value().cols() != model.encoding_width())
    throw std::invalid_argument("evaluator: encoding width mismatch");

  const auto heads = model.hwgen.forward(g, arch, true);
  const int b = static_cast<int>(arch.value().rows());
  const double tau = model.tau_inference;

  Mat df_row = Mat::Zero(b, kNumDataflows);
  Mat rf_row = Mat::Zero(b, kNumRfValues);
  for (int i = 0; i < b; ++i) {
    df_row(i, dataflow_index(fixed_df)) = 1.0;
    rf_row(i, rf_index(fixed_rf)) = 1.0;
  }
  Var pdf = g.input(std::move(df_row));
  Var prf = g.input(std::move(rf_row));
  Var ppex = g.gumbel_softmax_rows(heads.pex, tau, gumbel_noise(b, kNumPeValues, noise_rng), false);
  Var ppey = g.gumbel_softmax_rows(heads.pey, tau, gumbel_noise(b, kNumPeValues, noise_rng), false);
  Var hw = g.concat_cols(g.concat_cols(pdf, ppex), g.concat_cols(ppey, prf));
  return model.costest.forward(g, g.concat_cols(arch, hw), false, true);
}

namespace {

Mat dense_eval(const nn::DenseLayer& layer, const Mat& x) {
  Mat y = x * layer.weight.value.transpose();
  y.rowwise() += layer.bias.value.row(0);
  return y;
}

Mat bn_eval(const nn::BatchNormLayer& bn, const Mat& x) {
  const Mat inv_std = (bn.running_var.array() + bn.eps).sqrt().inverse().matrix();
  const Mat scale = (bn.gamma.value.array() * inv_std.array()).matrix();
  const Mat shift = bn.beta.value - (bn.running_mean.array() * scale.array()).matrix();
  Mat y = x.array().rowwise() * scale.row(0).array();
  y.rowwise() += shift.row(0);
  return y;
}

Mat softmax_eval(Mat p) {
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    const double mx = p.row(r).maxCoeff();
    p.row(r) = (p.row(r).array() - mx).exp();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

Mat gumbel_eval(const Mat& logits, double tau, Rng& rng) {
  return softmax_eval((logits + gumbel_noise(static_cast<int>(logits.rows()),
                                             static_cast<int>(logits.cols()), rng)) /
                      tau);
}

}  // namespace

Mat evaluator_infer_metrics(const EvaluatorModel& model, const Mat& arch_rows, Rng& noise_rng) {
  if (arch_rows.cols() != model.encoding_width())
    throw std::invalid_argument("evaluator: encoding width mismatch");

  auto trunk_eval = [](const std::vector<nn::DenseLayer>& layers, const Mat& x) {
    const Mat h1 = dense_eval(layers[0], x).cwiseMax(0.0);
    const Mat h2 = dense_eval(layers[1], h1).cwiseMax(0.0);
    const Mat h3 = dense_eval(layers[2], h2).cwiseMax(0.0) + h1;
    const Mat h4 = dense_eval(layers[3], h3).cwiseMax(0.0) + h2;
    return Mat(dense_eval(layers[4], h4).cwiseMax(0.0));
  };

  Mat input;
  if (model.feature_forwarding) {
    const Mat h = trunk_eval(model.hwgen.trunk, arch_rows);
    const double tau = model.tau_inference;
    const Mat pdf = gumbel_eval(dense_eval(model.hwgen.head_df, h), tau, noise_rng);
    const Mat ppex = gumbel_eval(dense_eval(model.hwgen.head_pex, h), tau, noise_rng);
    const Mat ppey = gumbel_eval(dense_eval(model.hwgen.head_pey, h), tau, noise_rng);
    const Mat prf = gumbel_eval(dense_eval(model.hwgen.head_rf, h), tau, noise_rng);
    input.resize(arch_rows.rows(), arch_rows.cols() + kHwWidth);
    input << arch_rows, pdf, ppex, ppey, prf;
  } else {
    input = arch_rows;
  }

  const auto& net = model.costest;
  const Mat h1 = (bn_eval(net.bn[0], dense_eval(net.trunk[0], input))).cwiseMax(0.0);
  const Mat h2 = (bn_eval(net.bn[1], dense_eval(net.trunk[1], h1))).cwiseMax(0.0);
  const Mat h3 = Mat((bn_eval(net.bn[2], dense_eval(net.trunk[2], h2))).cwiseMax(0.0)) + h1;
  const Mat h4 = Mat((bn_eval(net.bn[3], dense_eval(net.trunk[3], h3))).cwiseMax(0.0)) + h2;
  const Mat h5 = (bn_eval(net.bn[4], dense_eval(net.trunk[4], h4))).cwiseMax(0.0);
  return dense_eval(net.out, h5).array().exp().matrix();
}

CostMetrics evaluate_end_to_end(EvaluatorModel& model, const ArchEncoding& encoding,
                                Rng& noise_rng) {
  const auto flat = encoding.flatten();
  if (static_cast<int>(flat.size()) != model.encoding_width())
    throw std::invalid_argument("evaluate_end_to_end: encoding length mismatch");
  Mat x(1, flat.size());
  for (std::size_t i = 0; i < flat.size(); ++i) x(0, i) = flat[i];
  const Mat metrics = evaluator_infer_metrics(model, x, noise_rng);
  return CostMetrics{metrics(0, 0), metrics(0, 1), metrics(0, 2)};
}

std::vector<CostMetrics> evaluate_end_to_end_batch(EvaluatorModel& model,
                                                   const std::vector<ArchEncoding>& encodings,
                                                   Rng& noise_rng) {
  if (encodings.empty()) return {};
  const int width = model.encoding_width();
  Mat x(encodings.size(), width);
  for (std::size_t i = 0; i < encodings.size(); ++i) {
    const auto flat = encodings[i].flatten();
    if (static_cast<int>(flat.size()) != width)
      throw std::invalid_argument("evaluate_end_to_end_batch: encoding length mismatch");
    for (int j = 0; j < width; ++j) x(i, j) = flat[j];
  }
  const Mat metrics = evaluator_infer_metrics(model, x, noise_rng);
  std::vector<CostMetrics> out(encodings.size());
  for (std::size_t i = 0; i < encodings.size(); ++i)
    out[i] = CostMetrics{metrics(i, 0), metrics(i, 1), metrics(i, 2)};
  return out;
}

AcceleratorConfig predict_hw(EvaluatorModel& model, const ArchEncoding& encoding) {
  const auto flat = encoding.flatten();
  if (static_cast<int>(flat.size()) != model.encoding_width())
    throw std::invalid_argument("predict_hw: encoding length mismatch");
  Mat x(1, flat.size());
  for (std::size_t i = 0; i < flat.size(); ++i) x(0, i) = flat[i];

  Graph g;
  const auto heads = model.hwgen.forward(g, g.input(std::move(x)), true);
  auto argmax = [](const Var& v) {
    Eigen::Index arg = 0;
    v.value().row(0).maxCoeff(&arg);
    return static_cast<int>(arg);
  };
  AcceleratorConfig cfg;
  cfg.dataflow = dataflow_from_index(argmax(heads.df));
  cfg.pe_x = pe_from_index(argmax(heads.pex));
  cfg.pe_y = pe_from_index(argmax(heads.pey));
  cfg.rf_size = rf_from_index(argmax(heads.rf));
  return cfg;
}

AccuracyReport accuracy_report(EvaluatorModel& model, const Dataset& dataset,
                               const std::string& dataset_fingerprint,
                               const std::optional<std::vector<std::int64_t>>& explicit_val_ids) {
  const std::string trained_on = model.metadata.value("dataset_fingerprint", "");
  if (trained_on != dataset_fingerprint)
    throw std::invalid_argument(
        "accuracy_report: dataset fingerprint does not match the training dataset");

  const DatasetSplit split = split_by_network(dataset, model.metadata.at("val_fraction").get<double>(),
                                              model.metadata.at("split_seed").get<std::uint64_t>());
  std::vector<std::int64_t> val_ids = split.val_ids;
  if (explicit_val_ids) {
    const std::set<std::int64_t> train_set(split.train_ids.begin(), split.train_ids.end());
    for (std::int64_t id : *explicit_val_ids)
      if (train_set.count(id))
        throw std::invalid_argument("accuracy_report: validation ids overlap the training split");
    val_ids = *explicit_val_ids;
  }

  Rng noise_rng(mix_seed(model.metadata.at("split_seed").get<std::uint64_t>(), 0xE2E));
  return measure_accuracy(model, dataset, val_ids, noise_rng);
}

namespace {

void store_dense(nn::TensorStore& store, const std::string& prefix, const nn::DenseLayer& layer) {
  store.put(prefix + ".w", layer.weight.value);
  store.put(prefix + ".b", layer.bias.value);
}

nn::DenseLayer load_dense(const nn::TensorStore& store, const std::string& prefix) {
  nn::DenseLayer layer;
  layer.weight = nn::Param(store.get(prefix + ".w"));
  layer.bias = nn::Param(store.get(prefix + ".b"));
  return layer;
}

void store_costest(nn::TensorStore& store, const std::string& prefix, const CostEstNet& net) {
  for (std::size_t i = 0; i < net.trunk.size(); ++i)
    store_dense(store, prefix + ".trunk" + std::to_string(i), net.trunk[i]);
  for (std::size_t i = 0; i < net.bn.size(); ++i) {
    const std::string p = prefix + ".bn" + std::to_string(i);
    store.put(p + ".gamma", net.bn[i].gamma.value);
    store.put(p + ".beta", net.bn[i].beta.value);
    store.put(p + ".rmean", net.bn[i].running_mean);
    store.put(p + ".rvar", net.bn[i].running_var);
  }
  store_dense(store, prefix + ".out", net.out);
}

CostEstNet load_costest(const nn::TensorStore& store, const std::string& prefix) {
  CostEstNet net;
  for (int i = 0; i < 5; ++i)
    net.trunk.push_back(load_dense(store, prefix + ".trunk" + std::to_string(i)));
  for (int i = 0; i < 5; ++i) {
    const std::string p = prefix + ".bn" + std::to_string(i);
    nn::BatchNormLayer bn(static_cast<int>(store.get(p + ".gamma").cols()));
    bn.gamma = nn::Param(store.get(p + ".gamma"));
    bn.beta = nn::Param(store.get(p + ".beta"));
    bn.running_mean = store.get(p + ".rmean");
    bn.running_var = store.get(p + ".rvar");
    bn.update_running_stats = false;
    net.bn.push_back(std::move(bn));
  }
  net.out = load_dense(store, prefix + ".out");
  return net;
}

}  // namespace

void save_evaluator(const EvaluatorModel& model, const std::string& path) {
  nn::TensorStore store;
  for (std::size_t i = 0; i < model.hwgen.trunk.size(); ++i)
    store_dense(store, "hwgen.trunk" + std::to_string(i), model.hwgen.trunk[i]);
  store_dense(store, "hwgen.df", model.hwgen.head_df);
  store_dense(store, "hwgen.pex", model.hwgen.head_pex);
  store_dense(store, "hwgen.pey", model.hwgen.head_pey);
  store_dense(store, "hwgen.rf", model.hwgen.head_rf);
  store_costest(store, "costest", model.costest);
  if (model.ablation_costest) store_costest(store, "ablation", *model.ablation_costest);
  store.put_string("meta", model.metadata.dump());
  store.save(path);
}

EvaluatorModel load_evaluator(const std::string& path) {
  const nn::TensorStore store = nn::TensorStore::load(path);
  EvaluatorModel model;
  model.metadata = nlohmann::json::parse(store.get_string("meta"));
  model.positions = model.metadata.at("positions").get<int>();
  model.feature_forwarding = model.metadata.at("feature_forwarding").get<bool>();
  model.tau_inference = model.metadata.at("tau_inference").get<double>();

  for (int i = 0; i < 5; ++i)
    model.hwgen.trunk.push_back(load_dense(store, "hwgen.trunk" + std::to_string(i)));
  model.hwgen.head_df = load_dense(store, "hwgen.df");
  model.hwgen.head_pex = load_dense(store, "hwgen.pex");
  model.hwgen.head_pey = load_dense(store, "hwgen.pey");
  model.hwgen.head_rf = load_dense(store, "hwgen.rf");
  model.costest = load_costest(store, "costest");
  if (store.has("ablation.out.w")) model.ablation_costest = load_costest(store, "ablation");
  return model;
}

}  // namespace dance
