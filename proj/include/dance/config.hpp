#ifndef DANCE_CONFIG_HPP
#define DANCE_CONFIG_HPP

#include <string>

#include <json.hpp>

#include "dance/cosearch.hpp"
#include "dance/evaluator.hpp"
#include "dance/oracle.hpp"
#include "dance/toytask.hpp"

namespace dance {

// One JSON document with sections arch_space, cost_model, hw_space, dataset,
// evaluator, search, toy_task, pipeline. Flags override fields by dotted
// path ("evaluator.costest.epochs=40").
struct PipelineConfig {
  // grid entries are multiples of 1 / Cost_HW(reference arch); the pipeline
  // rescales them against the oracle cost of the all-MB3e3 network. 0 runs
  // the no-penalty baseline.
  std::vector<double> lambda2_rel_grid = {0.0, 0.125, 4.0};
  double edd_lambda2_rel = 1.0;
  std::string cost_fn = "edap";
};

struct ToolConfig {
  ArchSpace arch_space;
  CostModelConstants cost_model;
  HwSpace hw_space;
  DatasetGenConfig dataset;
  std::string dataset_cost_fn = "edap";
  EvaluatorTrainConfig evaluator;
  SearchConfig search;
  ToyTaskConfig toy_task;
  PipelineConfig pipeline;
};

nlohmann::json config_to_json(const ToolConfig& config);
ToolConfig config_from_json(const nlohmann::json& j);

// defaults <- file (if any) <- dotted overrides, then parsed and validated
ToolConfig resolve_config(const std::string& config_path,
                          const std::vector<std::string>& overrides);

void deep_merge(nlohmann::json& base, const nlohmann::json& patch);
void apply_dotted_override(nlohmann::json& j, const std::string& assignment);

}  // namespace dance

#endif
