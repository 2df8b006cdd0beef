#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dance/config.hpp"
#include "dance/cosearch.hpp"
#include "dance/dataset.hpp"
#include "dance/evaluator.hpp"
#include "dance/manifest.hpp"
#include "dance/report.hpp"
#include "dance/util.hpp"

namespace fs = std::filesystem;
using namespace dance;

namespace {

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> overrides;
  int threads = 0;
  bool force = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "JSON config file")->check(CLI::ExistingFile);
  cmd->add_option("--set", opts.overrides, "override a config field, section.key=value");
  cmd->add_option("--threads", opts.threads, "worker cap (default: DANCE_THREADS or all cores)");
  cmd->add_flag("--force", opts.force, "overwrite existing outputs");
}

void apply_threads(const CommonOpts& opts) {
  if (opts.threads > 0) {
    set_threads(opts.threads);
    return;
  }
  if (const char* env = std::getenv("DANCE_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) set_threads(n);
  }
}

void ensure_fresh_dir(const std::string& dir, bool force) {
  if (fs::exists(dir) && !fs::is_empty(dir) && !force)
    throw std::runtime_error("output directory exists and is not empty (use --force): " + dir);
  fs::create_directories(dir);
}

void ensure_fresh_file(const std::string& path, bool force) {
  if (fs::exists(path) && !force)
    throw std::runtime_error("output file exists (use --force): " + path);
  if (!fs::path(path).parent_path().empty())
    fs::create_directories(fs::path(path).parent_path());
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void print_accuracy(const AccuracyReport& report) {
  std::printf("validation accuracy (%%):\n");
  std::printf("  hardware generation   pe_x %.2f  pe_y %.2f  rf %.2f  dataflow %.2f\n",
              report.hwgen_pct[0], report.hwgen_pct[1], report.hwgen_pct[2],
              report.hwgen_pct[3]);
  if (report.has_nofwd)
    std::printf("  cost est (no fwd)     latency %.2f  energy %.2f  area %.2f\n",
                report.costest_nofwd_pct[0], report.costest_nofwd_pct[1],
                report.costest_nofwd_pct[2]);
  std::printf("  cost est (fwd)        latency %.2f  energy %.2f  area %.2f\n",
              report.costest_fwd_pct[0], report.costest_fwd_pct[1], report.costest_fwd_pct[2]);
  std::printf("  overall evaluator     latency %.2f  energy %.2f  area %.2f\n",
              report.overall_pct[0], report.overall_pct[1], report.overall_pct[2]);
}

// ---------------------------------------------------------------------------

int cmd_gen_dataset(const ToolConfig& cfg, const nlohmann::json& snapshot,
                    const std::string& out_dir, bool force) {
  ensure_fresh_dir(out_dir, force);
  PhaseTimer timer;
  const auto records = generate_dataset(cfg.dataset, cfg.hw_space, cfg.arch_space,
                                        CostFunctionSpec::parse(cfg.dataset_cost_fn),
                                        cfg.cost_model);
  const double gen_sec = timer.seconds();
  write_dataset_csv(join_path(out_dir, "dataset.csv"), records, cfg.arch_space.positions);

  RunManifest manifest;
  manifest.command = "gen-dataset";
  manifest.config_snapshot = snapshot;
  manifest.seed = cfg.dataset.seed;
  manifest.timings_sec["generate"] = gen_sec;
  manifest.timings_sec["write"] = timer.seconds() - gen_sec;
  manifest.write(out_dir);

  std::int64_t n_opt = 0;
  for (const auto& r : records) n_opt += r.optimal;
  std::printf("gen-dataset: %zu rows (%lld opt, %lld rand) in %.1fs -> %s\n", records.size(),
              static_cast<long long>(n_opt), static_cast<long long>(records.size() - n_opt),
              timer.seconds(), join_path(out_dir, "dataset.csv").c_str());
  return 0;
}

int cmd_train_evaluator(ToolConfig cfg, const nlohmann::json& snapshot,
                        const std::string& dataset_path, const std::string& out_path,
                        bool no_forwarding, bool no_ablation, bool force) {
  ensure_fresh_file(out_path, force);
  cfg.evaluator.costest.feature_forwarding = !no_forwarding;
  cfg.evaluator.train_ablation = !no_ablation;
  cfg.evaluator.hwgen.verbose = true;
  cfg.evaluator.costest.verbose = true;

  PhaseTimer timer;
  const Dataset ds = read_dataset_csv(dataset_path);
  const std::string fingerprint = hash_file(dataset_path);
  EvaluatorModel model = train_evaluator(ds, fingerprint, cfg.evaluator);
  save_evaluator(model, out_path);

  RunManifest manifest;
  manifest.command = "train-evaluator";
  manifest.config_snapshot = snapshot;
  manifest.seed = cfg.evaluator.seed;
  manifest.input_hashes["dataset"] = fingerprint;
  manifest.timings_sec["train"] = timer.seconds();
  write_text_file(out_path + ".manifest.json", manifest.to_json().dump(2) + "\n");

  const AccuracyReport report{
      [&] {
        AccuracyReport r;
        const auto& acc = model.metadata.at("accuracy");
        r.hwgen_pct = {acc.at("hwgen").at("pe_x").get<double>(),
                       acc.at("hwgen").at("pe_y").get<double>(),
                       acc.at("hwgen").at("rf").get<double>(),
                       acc.at("hwgen").at("dataflow").get<double>()};
        r.costest_fwd_pct = {acc.at("costest_forwarding").at("latency").get<double>(),
                             acc.at("costest_forwarding").at("energy").get<double>(),
                             acc.at("costest_forwarding").at("area").get<double>()};
        r.costest_nofwd_pct = {acc.at("costest_no_forwarding").at("latency").get<double>(),
                               acc.at("costest_no_forwarding").at("energy").get<double>(),
                               acc.at("costest_no_forwarding").at("area").get<double>()};
        r.overall_pct = {acc.at("overall").at("latency").get<double>(),
                         acc.at("overall").at("energy").get<double>(),
                         acc.at("overall").at("area").get<double>()};
        r.has_nofwd = acc.at("has_no_forwarding").get<bool>();
        return r;
      }()};
  std::printf("train-evaluator: done in %.1fs -> %s\n", timer.seconds(), out_path.c_str());
  print_accuracy(report);
  return 0;
}

int cmd_eval_evaluator(const std::string& model_path, const std::string& dataset_path,
                       const std::string& report_path, bool force) {
  ensure_fresh_file(report_path, force);
  EvaluatorModel model = load_evaluator(model_path);
  const Dataset ds = read_dataset_csv(dataset_path);
  const AccuracyReport report = accuracy_report(model, ds, hash_file(dataset_path));
  write_text_file(report_path, report.to_csv());
  print_accuracy(report);
  std::printf("eval-evaluator: report -> %s\n", report_path.c_str());
  return 0;
}

int cmd_search(ToolConfig cfg, const nlohmann::json& snapshot, const std::string& evaluator_path,
               const std::string& out_dir, const std::string& cost_text, bool force) {
  ensure_fresh_dir(out_dir, force);
  cfg.search.verbose = true;
  const CostFunctionSpec cost_spec = CostFunctionSpec::parse(cost_text);

  PhaseTimer timer;
  EvaluatorModel model = load_evaluator(evaluator_path);
  const ToyTask task = make_toy_task(cfg.toy_task);
  const SearchResult result = search(task, cfg.arch_space, model, cost_spec, cfg.search);

  write_text_file(join_path(out_dir, "arch.json"),
                  arch_to_json(result.final_arch, cfg.arch_space));
  write_text_file(join_path(out_dir, "trace.csv"), result.trace_csv());
  write_text_file(join_path(out_dir, "alpha_trace.csv"), result.alpha_trace_csv());
  write_text_file(join_path(out_dir, "search_result.json"),
                  nlohmann::json{{"val_accuracy_pct", result.final_val_accuracy_pct},
                                 {"evaluator_path", fs::absolute(evaluator_path).string()},
                                 {"cost", cost_spec.to_string()},
                                 {"variant", loss_variant_name(cfg.search.variant)},
                                 {"lambda2", cfg.search.lambda2},
                                 {"seed", cfg.search.seed}}
                          .dump(2) +
                      "\n");

  RunManifest manifest;
  manifest.command = "search";
  manifest.config_snapshot = snapshot;
  manifest.seed = cfg.search.seed;
  manifest.input_hashes["evaluator"] = hash_file(evaluator_path);
  manifest.timings_sec["search"] = timer.seconds();
  manifest.write(out_dir);

  std::string arch_names;
  for (CandidateOp op : result.final_arch) arch_names += op_name(op) + " ";
  std::printf("search: [%s] val acc %.2f%% in %.1fs -> %s\n", arch_names.c_str(),
              result.final_val_accuracy_pct, timer.seconds(), out_dir.c_str());
  return 0;
}

int cmd_finalize(const ToolConfig& cfg, const std::string& run_dir,
                 const std::string& evaluator_override, const std::string& cost_override,
                 bool force) {
  const std::string final_path = join_path(run_dir, "final.json");
  if (fs::exists(final_path) && !force)
    throw std::runtime_error("final.json exists (use --force): " + final_path);

  Architecture arch;
  ArchSpace space;
  arch_from_json(read_text_file(join_path(run_dir, "arch.json")), arch, space);
  const auto meta = nlohmann::json::parse(read_text_file(join_path(run_dir, "search_result.json")));

  const std::string evaluator_path =
      evaluator_override.empty() ? meta.at("evaluator_path").get<std::string>()
                                 : evaluator_override;
  const std::string cost_text =
      cost_override.empty() ? meta.at("cost").get<std::string>() : cost_override;
  const LossVariant variant = loss_variant_from_name(meta.at("variant").get<std::string>());

  PhaseTimer timer;
  EvaluatorModel model = load_evaluator(evaluator_path);
  const FinalizeResult fin =
      finalize(arch, space, model, CostFunctionSpec::parse(cost_text), cfg.hw_space,
               cfg.cost_model, variant, meta.at("seed").get<std::uint64_t>());

  nlohmann::json out = fin.to_json(meta.at("val_accuracy_pct").get<double>());
  out["variant"] = meta.at("variant");
  out["cost_spec"] = cost_text;
  write_text_file(final_path, out.dump(2) + "\n");

  // per-layer breakdown of the finalized design
  std::string layers_csv = cost_csv_header() + "\n";
  const auto layers = network_layers(arch, space);
  for (std::size_t i = 0; i < layers.size(); ++i)
    layers_csv += cost_csv_row(static_cast<int>(i), layers[i], fin.config, cfg.cost_model) + "\n";
  write_text_file(join_path(run_dir, "layers.csv"), layers_csv);

  std::printf("finalize: %s  %s  cost %.6e  (surrogate gap lat %.1f%% en %.1f%% area %.1f%%) in %.1fs\n",
              run_dir.c_str(), fin.config.to_string().c_str(), fin.cost, 100 * fin.rel_gap[0],
              100 * fin.rel_gap[1], 100 * fin.rel_gap[2], timer.seconds());
  return 0;
}

int cmd_report(const std::string& out_dir, const std::vector<std::string>& run_dirs, bool force) {
  ensure_fresh_dir(out_dir, force);
  std::vector<std::string> skipped;
  const auto rows = collect_report_rows(run_dirs, skipped);
  write_text_file(join_path(out_dir, "report.csv"), report_csv(rows));
  write_text_file(join_path(out_dir, "scatter.svg"), scatter_svg(rows));
  for (const auto& dir : skipped)
    std::fprintf(stderr, "warning: skipping %s (no final.json)\n", dir.c_str());
  std::printf("report: %zu rows (%zu skipped) -> %s\n", rows.size(), skipped.size(),
              out_dir.c_str());
  return 0;
}

// ---------------------------------------------------------------------------

struct PipelinePhase {
  std::string name;
  std::string dir;
  std::function<void()> run;
};

int cmd_pipeline(ToolConfig cfg, nlohmann::json snapshot, const std::string& preset,
                 std::uint64_t seed, const std::string& out_dir, bool resume, bool force) {
  if (!preset.empty() && preset != "smoke" && preset != "desk")
    throw std::runtime_error("unknown preset: " + preset);

  if (preset == "smoke") {
    cfg.dataset.n_networks = 200;
    cfg.evaluator.hwgen.epochs = 20;
    cfg.evaluator.hwgen.lr0 = 0.02;
    cfg.evaluator.hwgen.lr_decay_every = 10;
    cfg.evaluator.costest.epochs = 20;
    cfg.evaluator.costest.lr = 0.002;
    cfg.search.epochs = 10;
    cfg.toy_task.n_train = 1024;
    cfg.toy_task.n_val = 256;
  } else if (preset == "desk") {
    cfg.dataset.n_networks = 20000;
    cfg.evaluator.hwgen.epochs = 60;
    cfg.evaluator.hwgen.lr0 = 0.02;
    cfg.evaluator.hwgen.lr_decay_every = 25;
    cfg.evaluator.costest.epochs = 40;
    cfg.evaluator.costest.lr = 0.001;
    cfg.search.epochs = 32;
  }

  // one seed drives every phase
  cfg.dataset.seed = mix_seed(seed, 101);
  cfg.evaluator.seed = mix_seed(seed, 102);
  cfg.toy_task.seed = mix_seed(seed, 103);
  cfg.search.seed = mix_seed(seed, 104);
  snapshot = config_to_json(cfg);
  snapshot["pipeline_preset"] = preset.empty() ? "custom" : preset;
  snapshot["pipeline_seed"] = seed;

  if (!resume) ensure_fresh_dir(out_dir, force);
  fs::create_directories(out_dir);

  const CostFunctionSpec pipeline_cost = CostFunctionSpec::parse(cfg.pipeline.cost_fn);

  auto phase_done = [&](const std::string& dir, const RunManifest& expected) {
    if (!resume) return false;
    const auto existing = RunManifest::read(dir);
    return existing && existing->fingerprint() == expected.fingerprint();
  };
  auto make_manifest = [&](const std::string& command, std::uint64_t phase_seed,
                           std::map<std::string, std::string> hashes) {
    RunManifest m;
    m.command = command;
    m.config_snapshot = snapshot;
    m.seed = phase_seed;
    m.input_hashes = std::move(hashes);
    return m;
  };

  // phase: dataset ----------------------------------------------------------
  const std::string dataset_dir = join_path(out_dir, "dataset");
  const std::string dataset_csv = join_path(dataset_dir, "dataset.csv");
  {
    RunManifest expected = make_manifest("gen-dataset", cfg.dataset.seed, {});
    if (phase_done(dataset_dir, expected) && fs::exists(dataset_csv)) {
      std::printf("[pipeline] dataset: resumed\n");
    } else {
      std::printf("[pipeline] dataset: %lld networks\n",
                  static_cast<long long>(cfg.dataset.n_networks));
      fs::create_directories(dataset_dir);
      PhaseTimer timer;
      const auto records = generate_dataset(cfg.dataset, cfg.hw_space, cfg.arch_space,
                                            CostFunctionSpec::parse(cfg.dataset_cost_fn),
                                            cfg.cost_model);
      write_dataset_csv(dataset_csv, records, cfg.arch_space.positions);
      expected.timings_sec["generate"] = timer.seconds();
      expected.write(dataset_dir);
    }
  }

  // phase: evaluator ---------------------------------------------------------
  const std::string evaluator_dir = join_path(out_dir, "evaluator");
  const std::string model_path = join_path(evaluator_dir, "model.bin");
  const std::string dataset_hash = hash_file(dataset_csv);
  {
    RunManifest expected =
        make_manifest("train-evaluator", cfg.evaluator.seed, {{"dataset", dataset_hash}});
    if (phase_done(evaluator_dir, expected) && fs::exists(model_path)) {
      std::printf("[pipeline] evaluator: resumed\n");
    } else {
      std::printf("[pipeline] evaluator: training\n");
      fs::create_directories(evaluator_dir);
      PhaseTimer timer;
      ToolConfig train_cfg = cfg;
      train_cfg.evaluator.hwgen.verbose = true;
      train_cfg.evaluator.costest.verbose = true;
      const Dataset ds = read_dataset_csv(dataset_csv);
      EvaluatorModel model = train_evaluator(ds, dataset_hash, train_cfg.evaluator);
      save_evaluator(model, model_path);
      const AccuracyReport report = accuracy_report(model, ds, dataset_hash);
      write_text_file(join_path(evaluator_dir, "accuracy.csv"), report.to_csv());
      print_accuracy(report);
      expected.timings_sec["train"] = timer.seconds();
      expected.write(evaluator_dir);
    }
  }

  // reference cost scales the relative lambda2 grid
  EvaluatorModel model = load_evaluator(model_path);
  const Architecture ref_arch(cfg.arch_space.positions, CandidateOp::MB3e3);
  const auto ref_layers = network_layers(ref_arch, cfg.arch_space);
  const OracleResult ref =
      optimal_hw(ref_layers, pipeline_cost, cfg.hw_space, cfg.cost_model);
  const double ref_cost = ref.cost;
  const double ref_latency = ref.metrics.latency_ms;

  struct RunSpec {
    std::string name;
    LossVariant variant;
    double lambda2;
  };
  std::vector<RunSpec> runs;
  for (std::size_t i = 0; i < cfg.pipeline.lambda2_rel_grid.size(); ++i) {
    const double rel = cfg.pipeline.lambda2_rel_grid[i];
    if (rel == 0.0)
      runs.push_back({"no_penalty", LossVariant::NoPenalty, 0.0});
    else
      runs.push_back({"dance_" + std::string(1, char('a' + i - 1)), LossVariant::Dance,
                      rel / ref_cost});
  }
  runs.push_back({"edd_original", LossVariant::EddOriginal,
                  cfg.pipeline.edd_lambda2_rel / ref_latency});

  const ToyTask task = make_toy_task(cfg.toy_task);

  std::vector<std::string> run_dirs;
  for (const auto& spec : runs) {
    const std::string run_dir = join_path(join_path(out_dir, "runs"), spec.name);
    run_dirs.push_back(run_dir);

    ToolConfig run_cfg = cfg;
    run_cfg.search.variant = spec.variant;
    run_cfg.search.lambda2 = spec.lambda2;
    run_cfg.search.verbose = false;
    // the multiplicative baseline is reproduced as-is, without warm-up
    if (spec.variant == LossVariant::EddOriginal) run_cfg.search.warmup.enabled = false;

    RunManifest expected = make_manifest("search", run_cfg.search.seed,
                                         {{"evaluator", hash_file(model_path)}});
    expected.config_snapshot["run"] = {{"name", spec.name},
                                       {"variant", loss_variant_name(spec.variant)},
                                       {"lambda2", spec.lambda2}};
    if (phase_done(run_dir, expected) && fs::exists(join_path(run_dir, "final.json"))) {
      std::printf("[pipeline] run %s: resumed\n", spec.name.c_str());
      continue;
    }

    std::printf("[pipeline] run %s: lambda2 %.3e\n", spec.name.c_str(), spec.lambda2);
    fs::create_directories(run_dir);
    PhaseTimer timer;
    const SearchResult result =
        search(task, cfg.arch_space, model, pipeline_cost, run_cfg.search);
    write_text_file(join_path(run_dir, "arch.json"),
                    arch_to_json(result.final_arch, cfg.arch_space));
    write_text_file(join_path(run_dir, "trace.csv"), result.trace_csv());
    write_text_file(join_path(run_dir, "alpha_trace.csv"), result.alpha_trace_csv());

    try {
      const FinalizeResult fin =
          finalize(result.final_arch, cfg.arch_space, model, pipeline_cost, cfg.hw_space,
                   cfg.cost_model, spec.variant, run_cfg.search.seed);
      nlohmann::json out = fin.to_json(result.final_val_accuracy_pct);
      out["variant"] = loss_variant_name(spec.variant);
      out["cost_spec"] = pipeline_cost.to_string();
      write_text_file(join_path(run_dir, "final.json"), out.dump(2) + "\n");
      std::string layers_csv = cost_csv_header() + "\n";
      const auto net_layers = network_layers(result.final_arch, cfg.arch_space);
      for (std::size_t li = 0; li < net_layers.size(); ++li)
        layers_csv +=
            cost_csv_row(static_cast<int>(li), net_layers[li], fin.config, cfg.cost_model) + "\n";
      write_text_file(join_path(run_dir, "layers.csv"), layers_csv);
      std::printf("  %s: val acc %.2f%%  cost %.6e  %s\n", spec.name.c_str(),
                  result.final_val_accuracy_pct, fin.cost, fin.config.to_string().c_str());
    } catch (const std::invalid_argument& e) {
      write_text_file(join_path(run_dir, "final_error.json"),
                      nlohmann::json{{"error", e.what()},
                                     {"variant", loss_variant_name(spec.variant)},
                                     {"val_accuracy_pct", result.final_val_accuracy_pct}}
                              .dump(2) +
                          "\n");
      std::printf("  %s: finalize failed (%s)\n", spec.name.c_str(), e.what());
    }
    expected.timings_sec["run"] = timer.seconds();
    expected.write(run_dir);
  }

  // phase: report ------------------------------------------------------------
  std::vector<std::string> skipped;
  const auto rows = collect_report_rows(run_dirs, skipped);
  write_text_file(join_path(out_dir, "report.csv"), report_csv(rows));
  write_text_file(join_path(out_dir, "scatter.svg"), scatter_svg(rows));
  for (const auto& dir : skipped)
    std::fprintf(stderr, "warning: run skipped in report (no final.json): %s\n", dir.c_str());

  RunManifest pipeline_manifest = make_manifest("pipeline", seed, {{"dataset", dataset_hash}});
  pipeline_manifest.write(out_dir);
  std::printf("[pipeline] report -> %s\n", join_path(out_dir, "report.csv").c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"differentiable network/accelerator co-exploration toolkit"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  std::function<int()> action;

  // gen-dataset
  {
    auto* cmd = app.add_subcommand("gen-dataset", "generate the oracle ground-truth dataset");
    auto opts = std::make_shared<CommonOpts>();
    auto networks = std::make_shared<std::int64_t>(-1);
    auto rand_per_net = std::make_shared<int>(-1);
    auto cost = std::make_shared<std::string>("");
    auto seed = std::make_shared<std::uint64_t>(0);
    auto has_seed = std::make_shared<bool>(false);
    auto out = std::make_shared<std::string>();
    add_common(cmd, *opts);
    cmd->add_option("--networks", *networks, "networks to sample")
        ->check(CLI::Range(std::int64_t{1}, std::int64_t{100000000}));
    cmd->add_option("--rand-per-net", *rand_per_net, "random configs per network")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--cost", *cost, "oracle objective: edap | linear:L,E,A | presets");
    cmd->add_option("--seed", *seed, "dataset seed")->each([has_seed](const std::string&) {
      *has_seed = true;
    });
    cmd->add_option("--out", *out, "output directory")->required();
    cmd->callback([=, &action] {
      action = [=] {
        apply_threads(*opts);
        ToolConfig cfg = resolve_config(opts->config_path, opts->overrides);
        if (*networks > 0) cfg.dataset.n_networks = *networks;
        if (*rand_per_net >= 0) cfg.dataset.random_configs_per_network = *rand_per_net;
        if (!cost->empty()) cfg.dataset_cost_fn = *cost;
        if (*has_seed) cfg.dataset.seed = *seed;
        return cmd_gen_dataset(cfg, config_to_json(cfg), *out, opts->force);
      };
    });
  }

  // train-evaluator
  {
    auto* cmd = app.add_subcommand("train-evaluator", "fit the differentiable evaluator");
    auto opts = std::make_shared<CommonOpts>();
    auto dataset = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto seed = std::make_shared<std::uint64_t>(0);
    auto has_seed = std::make_shared<bool>(false);
    auto no_fwd = std::make_shared<bool>(false);
    auto no_ablation = std::make_shared<bool>(false);
    add_common(cmd, *opts);
    cmd->add_option("--dataset", *dataset, "dataset csv")->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", *out, "model output path")->required();
    cmd->add_option("--seed", *seed, "training seed")->each([has_seed](const std::string&) {
      *has_seed = true;
    });
    cmd->add_flag("--no-forwarding", *no_fwd, "train the primary cost net without forwarding");
    cmd->add_flag("--no-ablation", *no_ablation, "skip the opposite-forwarding ablation net");
    cmd->callback([=, &action] {
      action = [=] {
        apply_threads(*opts);
        ToolConfig cfg = resolve_config(opts->config_path, opts->overrides);
        if (*has_seed) cfg.evaluator.seed = *seed;
        return cmd_train_evaluator(cfg, config_to_json(cfg), *dataset, *out, *no_fwd,
                                   *no_ablation, opts->force);
      };
    });
  }

  // eval-evaluator
  {
    auto* cmd = app.add_subcommand("eval-evaluator", "recompute validation accuracy");
    auto opts = std::make_shared<CommonOpts>();
    auto model = std::make_shared<std::string>();
    auto dataset = std::make_shared<std::string>();
    auto report = std::make_shared<std::string>();
    add_common(cmd, *opts);
    cmd->add_option("--model", *model, "model file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--dataset", *dataset, "dataset csv")->required()->check(CLI::ExistingFile);
    cmd->add_option("--report", *report, "output csv")->required();
    cmd->callback([=, &action] {
      action = [=] {
        apply_threads(*opts);
        return cmd_eval_evaluator(*model, *dataset, *report, opts->force);
      };
    });
  }

  // search
  {
    auto* cmd = app.add_subcommand("search", "differentiable co-exploration run");
    auto opts = std::make_shared<CommonOpts>();
    auto evaluator = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto cost = std::make_shared<std::string>("edap");
    auto lambda2 = std::make_shared<double>(-1.0);
    auto warmup = std::make_shared<std::string>("");
    auto no_warmup = std::make_shared<bool>(false);
    auto epochs = std::make_shared<int>(-1);
    auto seed = std::make_shared<std::uint64_t>(0);
    auto has_seed = std::make_shared<bool>(false);
    auto variant = std::make_shared<std::string>("");
    add_common(cmd, *opts);
    cmd->add_option("--evaluator", *evaluator, "trained model")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", *out, "run directory")->required();
    cmd->add_option("--cost", *cost, "hardware cost: edap | linear:L,E,A | presets");
    cmd->add_option("--lambda2", *lambda2, "hardware loss weight")->check(CLI::NonNegativeNumber);
    cmd->add_option("--warmup", *warmup, "warm-up as epochs,lambda2_small");
    cmd->add_flag("--no-warmup", *no_warmup, "disable the warm-up schedule");
    cmd->add_option("--epochs", *epochs, "search epochs")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", *seed, "search seed")->each([has_seed](const std::string&) {
      *has_seed = true;
    });
    cmd->add_option("--loss", *variant, "dance | no_penalty | edd_original | edd_fixed");
    cmd->callback([=, &action] {
      action = [=] {
        apply_threads(*opts);
        ToolConfig cfg = resolve_config(opts->config_path, opts->overrides);
        if (*lambda2 >= 0) cfg.search.lambda2 = *lambda2;
        if (*epochs > 0) cfg.search.epochs = *epochs;
        if (*has_seed) cfg.search.seed = *seed;
        if (!variant->empty()) cfg.search.variant = loss_variant_from_name(*variant);
        if (*no_warmup) cfg.search.warmup.enabled = false;
        if (!warmup->empty()) {
          int e = 0;
          double small = 0.0;
          if (std::sscanf(warmup->c_str(), "%d,%lf", &e, &small) != 2)
            throw CLI::ValidationError("--warmup", "expected epochs,lambda2_small");
          cfg.search.warmup.enabled = true;
          cfg.search.warmup.epochs_small = e;
          cfg.search.warmup.lambda2_small = small;
        }
        return cmd_search(cfg, config_to_json(cfg), *evaluator, *out, *cost, opts->force);
      };
    });
  }

  // finalize
  {
    auto* cmd = app.add_subcommand("finalize", "exact hardware generation for a finished run");
    auto opts = std::make_shared<CommonOpts>();
    auto run = std::make_shared<std::string>();
    auto evaluator = std::make_shared<std::string>("");
    auto cost = std::make_shared<std::string>("");
    add_common(cmd, *opts);
    cmd->add_option("--run", *run, "run directory with arch.json")
        ->required()
        ->check(CLI::ExistingDirectory);
    cmd->add_option("--evaluator", *evaluator, "override the recorded evaluator path");
    cmd->add_option("--cost", *cost, "override the recorded cost function");
    cmd->callback([=, &action] {
      action = [=] {
        apply_threads(*opts);
        const ToolConfig cfg = resolve_config(opts->config_path, opts->overrides);
        return cmd_finalize(cfg, *run, *evaluator, *cost, opts->force);
      };
    });
  }

  // report
  {
    auto* cmd = app.add_subcommand("report", "aggregate finalized runs into csv + svg");
    auto opts = std::make_shared<CommonOpts>();
    auto out = std::make_shared<std::string>();
    auto runs = std::make_shared<std::vector<std::string>>();
    add_common(cmd, *opts);
    cmd->add_option("--out", *out, "report directory")->required();
    cmd->add_option("runs", *runs, "run directories")->required();
    cmd->callback([=, &action] {
      action = [=] { return cmd_report(*out, *runs, opts->force); };
    });
  }

  // pipeline
  {
    auto* cmd = app.add_subcommand("pipeline", "dataset -> evaluator -> searches -> report");
    auto opts = std::make_shared<CommonOpts>();
    auto preset = std::make_shared<std::string>("");
    auto seed = std::make_shared<std::uint64_t>(1);
    auto out = std::make_shared<std::string>();
    auto resume = std::make_shared<bool>(false);
    add_common(cmd, *opts);
    cmd->add_option("--preset", *preset, "smoke | desk");
    cmd->add_option("--seed", *seed, "pipeline seed");
    cmd->add_option("--out", *out, "pipeline directory")->required();
    cmd->add_flag("--resume", *resume, "skip phases whose manifests already match");
    cmd->callback([=, &action] {
      action = [=] {
        apply_threads(*opts);
        ToolConfig cfg = resolve_config(opts->config_path, opts->overrides);
        return cmd_pipeline(cfg, config_to_json(cfg), *preset, *seed, *out, *resume,
                            opts->force);
      };
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    return action ? action() : 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
