#include "dance/config.hpp"

#include <stdexcept>

#include "dance/util.hpp"

namespace dance {

nlohmann::json config_to_json(const ToolConfig& c) {
  nlohmann::json j;
  j["arch_space"] = {{"positions", c.arch_space.positions},
                     {"stem_width", c.arch_space.stem_width},
                     {"input_c", c.arch_space.input_c},
                     {"input_h", c.arch_space.input_h},
                     {"input_w", c.arch_space.input_w},
                     {"batch", c.arch_space.batch},
                     {"double_every", c.arch_space.double_every}};
  j["cost_model"] = {{"e_mac_pj", c.cost_model.e_mac_pj},
                     {"e_rf_pj", c.cost_model.e_rf_pj},
                     {"e_gb_pj", c.cost_model.e_gb_pj},
                     {"e_dram_pj", c.cost_model.e_dram_pj},
                     {"p_leak_per_pe_mw", c.cost_model.p_leak_per_pe_mw},
                     {"clock_ghz", c.cost_model.clock_ghz},
                     {"dram_bw_gbps", c.cost_model.dram_bw_gbps},
                     {"gb_capacity", c.cost_model.gb_capacity},
                     {"element_size", c.cost_model.element_size},
                     {"a_pe_base_um2", c.cost_model.a_pe_base_um2},
                     {"a_rf_entry_um2", c.cost_model.a_rf_entry_um2},
                     {"a_gb_um2", c.cost_model.a_gb_um2}};
  j["hw_space"] = {{"pe_min", c.hw_space.pe_min},
                   {"pe_max", c.hw_space.pe_max},
                   {"rf_values", c.hw_space.rf_values}};
  j["dataset"] = {{"networks", c.dataset.n_networks},
                  {"random_configs_per_network", c.dataset.random_configs_per_network},
                  {"seed", c.dataset.seed},
                  {"cost_fn", c.dataset_cost_fn}};
  j["evaluator"] = {{"seed", c.evaluator.seed},
                    {"val_fraction", c.evaluator.val_fraction},
                    {"train_ablation", c.evaluator.train_ablation},
                    {"hwgen",
                     {{"epochs", c.evaluator.hwgen.epochs},
                      {"batch_size", c.evaluator.hwgen.batch_size},
                      {"lr0", c.evaluator.hwgen.lr0},
                      {"lr_decay_gamma", c.evaluator.hwgen.lr_decay_gamma},
                      {"lr_decay_every", c.evaluator.hwgen.lr_decay_every},
                      {"momentum", c.evaluator.hwgen.momentum},
                      {"tau_start", c.evaluator.hwgen.tau_start},
                      {"tau_end", c.evaluator.hwgen.tau_end},
                      {"width", c.evaluator.hwgen.width}}},
                    {"costest",
                     {{"epochs", c.evaluator.costest.epochs},
                      {"batch_size", c.evaluator.costest.batch_size},
                      {"lr", c.evaluator.costest.lr},
                      {"width", c.evaluator.costest.width},
                      {"feature_forwarding", c.evaluator.costest.feature_forwarding}}}};
  j["search"] = {{"epochs", c.search.epochs},
                 {"batch_size", c.search.batch_size},
                 {"w_lr", c.search.w_lr},
                 {"w_momentum", c.search.w_momentum},
                 {"nesterov", c.search.nesterov},
                 {"alpha_lr", c.search.alpha_lr},
                 {"lambda1", c.search.lambda1},
                 {"lambda2", c.search.lambda2},
                 {"label_smoothing", c.search.label_smoothing},
                 {"variant", loss_variant_name(c.search.variant)},
                 {"relax", c.search.relax == RelaxMode::Soft ? "soft" : "straight_through"},
                 {"tau_start", c.search.tau_start},
                 {"tau_end", c.search.tau_end},
                 {"feat_dim", c.search.feat_dim},
                 {"edd_fixed_df", dataflow_name(c.search.edd_fixed_df)},
                 {"edd_fixed_rf", c.search.edd_fixed_rf},
                 {"seed", c.search.seed},
                 {"warmup",
                  {{"enabled", c.search.warmup.enabled},
                   {"epochs_small", c.search.warmup.epochs_small},
                   {"lambda2_small", c.search.warmup.lambda2_small},
                   {"ramp", c.search.warmup.ramp}}}};
  j["toy_task"] = {{"n_train", c.toy_task.n_train},
                   {"n_val", c.toy_task.n_val},
                   {"noise", c.toy_task.noise},
                   {"seed", c.toy_task.seed}};
  j["pipeline"] = {{"lambda2_rel_grid", c.pipeline.lambda2_rel_grid},
                   {"edd_lambda2_rel", c.pipeline.edd_lambda2_rel},
                   {"cost_fn", c.pipeline.cost_fn}};
  return j;
}

ToolConfig config_from_json(const nlohmann::json& j) {
  ToolConfig c;
  const auto& a = j.at("arch_space");
  c.arch_space.positions = a.at("positions").get<int>();
  c.arch_space.stem_width = a.at("stem_width").get<std::int64_t>();
  c.arch_space.input_c = a.at("input_c").get<std::int64_t>();
  c.arch_space.input_h = a.at("input_h").get<std::int64_t>();
  c.arch_space.input_w = a.at("input_w").get<std::int64_t>();
  c.arch_space.batch = a.at("batch").get<std::int64_t>();
  c.arch_space.double_every = a.at("double_every").get<int>();

  const auto& m = j.at("cost_model");
  c.cost_model.e_mac_pj = m.at("e_mac_pj").get<double>();
  c.cost_model.e_rf_pj = m.at("e_rf_pj").get<double>();
  c.cost_model.e_gb_pj = m.at("e_gb_pj").get<double>();
  c.cost_model.e_dram_pj = m.at("e_dram_pj").get<double>();
  c.cost_model.p_leak_per_pe_mw = m.at("p_leak_per_pe_mw").get<double>();
  c.cost_model.clock_ghz = m.at("clock_ghz").get<double>();
  c.cost_model.dram_bw_gbps = m.at("dram_bw_gbps").get<double>();
  c.cost_model.gb_capacity = m.at("gb_capacity").get<std::int64_t>();
  c.cost_model.element_size = m.at("element_size").get<std::int64_t>();
  c.cost_model.a_pe_base_um2 = m.at("a_pe_base_um2").get<double>();
  c.cost_model.a_rf_entry_um2 = m.at("a_rf_entry_um2").get<double>();
  c.cost_model.a_gb_um2 = m.at("a_gb_um2").get<double>();
  c.cost_model.validate();

  const auto& h = j.at("hw_space");
  c.hw_space.pe_min = h.at("pe_min").get<int>();
  c.hw_space.pe_max = h.at("pe_max").get<int>();
  c.hw_space.rf_values = h.at("rf_values").get<std::vector<int>>();
  if (c.hw_space.pe_min != kPeMin || c.hw_space.pe_max != kPeMin + kNumPeValues - 1 ||
      static_cast<int>(c.hw_space.rf_values.size()) != kNumRfValues)
    throw std::invalid_argument(
        "hw_space dimensions are wired into the one-hot encodings and cannot be resized");

  const auto& d = j.at("dataset");
  c.dataset.n_networks = d.at("networks").get<std::int64_t>();
  c.dataset.random_configs_per_network = d.at("random_configs_per_network").get<int>();
  c.dataset.seed = d.at("seed").get<std::uint64_t>();
  c.dataset_cost_fn = d.at("cost_fn").get<std::string>();
  CostFunctionSpec::parse(c.dataset_cost_fn);

  const auto& e = j.at("evaluator");
  c.evaluator.seed = e.at("seed").get<std::uint64_t>();
  c.evaluator.val_fraction = e.at("val_fraction").get<double>();
  c.evaluator.train_ablation = e.at("train_ablation").get<bool>();
  const auto& hg = e.at("hwgen");
  c.evaluator.hwgen.epochs = hg.at("epochs").get<int>();
  c.evaluator.hwgen.batch_size = hg.at("batch_size").get<int>();
  c.evaluator.hwgen.lr0 = hg.at("lr0").get<double>();
  c.evaluator.hwgen.lr_decay_gamma = hg.at("lr_decay_gamma").get<double>();
  c.evaluator.hwgen.lr_decay_every = hg.at("lr_decay_every").get<int>();
  c.evaluator.hwgen.momentum = hg.at("momentum").get<double>();
  c.evaluator.hwgen.tau_start = hg.at("tau_start").get<double>();
  c.evaluator.hwgen.tau_end = hg.at("tau_end").get<double>();
  c.evaluator.hwgen.width = hg.at("width").get<int>();
  const auto& ce = e.at("costest");
  c.evaluator.costest.epochs = ce.at("epochs").get<int>();
  c.evaluator.costest.batch_size = ce.at("batch_size").get<int>();
  c.evaluator.costest.lr = ce.at("lr").get<double>();
  c.evaluator.costest.width = ce.at("width").get<int>();
  c.evaluator.costest.feature_forwarding = ce.at("feature_forwarding").get<bool>();

  const auto& s = j.at("search");
  c.search.epochs = s.at("epochs").get<int>();
  c.search.batch_size = s.at("batch_size").get<int>();
  c.search.w_lr = s.at("w_lr").get<double>();
  c.search.w_momentum = s.at("w_momentum").get<double>();
  c.search.nesterov = s.at("nesterov").get<bool>();
  c.search.alpha_lr = s.at("alpha_lr").get<double>();
  c.search.lambda1 = s.at("lambda1").get<double>();
  c.search.lambda2 = s.at("lambda2").get<double>();
  c.search.label_smoothing = s.at("label_smoothing").get<double>();
  c.search.variant = loss_variant_from_name(s.at("variant").get<std::string>());
  const std::string relax = s.at("relax").get<std::string>();
  if (relax == "soft")
    c.search.relax = RelaxMode::Soft;
  else if (relax == "straight_through")
    c.search.relax = RelaxMode::StraightThrough;
  else
    throw std::invalid_argument("search.relax must be soft or straight_through");
  c.search.tau_start = s.at("tau_start").get<double>();
  c.search.tau_end = s.at("tau_end").get<double>();
  c.search.feat_dim = s.at("feat_dim").get<int>();
  c.search.edd_fixed_df = dataflow_from_name(s.at("edd_fixed_df").get<std::string>());
  c.search.edd_fixed_rf = s.at("edd_fixed_rf").get<int>();
  c.search.seed = s.at("seed").get<std::uint64_t>();
  const auto& w = s.at("warmup");
  c.search.warmup.enabled = w.at("enabled").get<bool>();
  c.search.warmup.epochs_small = w.at("epochs_small").get<int>();
  c.search.warmup.lambda2_small = w.at("lambda2_small").get<double>();
  c.search.warmup.ramp = w.at("ramp").get<bool>();

  const auto& t = j.at("toy_task");
  c.toy_task.n_train = t.at("n_train").get<int>();
  c.toy_task.n_val = t.at("n_val").get<int>();
  c.toy_task.noise = t.at("noise").get<double>();
  c.toy_task.seed = t.at("seed").get<std::uint64_t>();

  const auto& p = j.at("pipeline");
  c.pipeline.lambda2_rel_grid = p.at("lambda2_rel_grid").get<std::vector<double>>();
  c.pipeline.edd_lambda2_rel = p.at("edd_lambda2_rel").get<double>();
  c.pipeline.cost_fn = p.at("cost_fn").get<std::string>();
  CostFunctionSpec::parse(c.pipeline.cost_fn);
  return c;
}

void deep_merge(nlohmann::json& base, const nlohmann::json& patch) {
  if (!patch.is_object() || !base.is_object()) {
    base = patch;
    return;
  }
  for (const auto& [key, value] : patch.items()) {
    if (base.contains(key) && base[key].is_object() && value.is_object())
      deep_merge(base[key], value);
    else
      base[key] = value;
  }
}

void apply_dotted_override(nlohmann::json& j, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos)
    throw std::invalid_argument("override must look like section.key=value: " + assignment);
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);

  nlohmann::json* node = &j;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos
                                                                        : dot - start);
    if (key.empty()) throw std::invalid_argument("bad override path: " + path);
    if (dot == std::string::npos) {
      nlohmann::json parsed = nlohmann::json::parse(raw, nullptr, false);
      (*node)[key] = parsed.is_discarded() ? nlohmann::json(raw) : parsed;
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

ToolConfig resolve_config(const std::string& config_path,
                          const std::vector<std::string>& overrides) {
  nlohmann::json j = config_to_json(ToolConfig{});
  if (!config_path.empty()) {
    const auto file = nlohmann::json::parse(read_text_file(config_path));
    deep_merge(j, file);
  }
  for (const auto& assignment : overrides) apply_dotted_override(j, assignment);
  return config_from_json(j);
}

}  // namespace dance
