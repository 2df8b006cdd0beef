#include "dance/nn/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

#include "dance/util.hpp"

namespace dance::nn {

GradcheckReport gradcheck(const std::function<double()>& loss_fn,
                          const std::vector<std::pair<std::string, Param*>>& params,
                          const std::function<double()>& compute_grads,
                          const GradcheckOptions& options) {
  GradcheckReport report;

  const double base = compute_grads();
  if (!std::isfinite(base)) throw std::runtime_error("gradcheck: loss is not finite");

  std::vector<Mat> analytic;
  analytic.reserve(params.size());
  for (const auto& [name, p] : params) {
    (void)name;
    if (!p->grad.allFinite()) throw std::runtime_error("gradcheck: analytic gradient not finite");
    analytic.push_back(p->grad);
  }

  Rng rng(options.sample_seed);
  for (std::size_t b = 0; b < params.size(); ++b) {
    Param& p = *params[b].second;
    GradcheckBlock block;
    block.name = params[b].first;

    const auto total = static_cast<std::int64_t>(p.value.size());
    std::vector<std::int64_t> picks;
    if (total <= options.max_entries_per_block) {
      picks.resize(total);
      for (std::int64_t i = 0; i < total; ++i) picks[i] = i;
    } else {
      picks.resize(options.max_entries_per_block);
      for (auto& idx : picks) idx = rng.next_int(0, total - 1);
    }

    for (std::int64_t idx : picks) {
      double* slot = p.value.data() + idx;
      const double saved = *slot;

      *slot = saved + options.h;
      const double f_plus = loss_fn();
      *slot = saved - options.h;
      const double f_minus = loss_fn();
      *slot = saved;

      if (!std::isfinite(f_plus) || !std::isfinite(f_minus))
        throw std::runtime_error("gradcheck: perturbed loss is not finite");

      const double numeric = (f_plus - f_minus) / (2.0 * options.h);
      const double exact = analytic[b].data()[idx];
      const double rel =
          std::abs(exact - numeric) / std::max({1.0, std::abs(exact), std::abs(numeric)});
      block.max_rel_err = std::max(block.max_rel_err, rel);
      ++block.entries_checked;
    }

    report.max_rel_err = std::max(report.max_rel_err, block.max_rel_err);
    report.blocks.push_back(std::move(block));
  }

  (void)base;
  return report;
}

}  // namespace dance::nn
