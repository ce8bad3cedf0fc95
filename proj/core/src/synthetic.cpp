#include "lranker/synthetic.hpp"

#include <cmath>
#include <random>

#include "lranker/errors.hpp"
#include "lranker/objectives.hpp"

namespace lranker {

Dataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.queries < 1 || spec.responses_per_query < 1 || spec.d_model < 1) {
    throw ContractViolation("synthetic: queries, responses_per_query and d_model must be positive");
  }
  if (!(spec.min_positive_rate >= 0.0 && spec.min_positive_rate <= spec.max_positive_rate &&
        spec.max_positive_rate <= 1.0)) {
    throw ContractViolation("synthetic: positive rates must satisfy 0 <= min <= max <= 1");
  }
  const std::size_t d = spec.d_model;
  const double root_d = std::sqrt(static_cast<double>(d));

  Dataset ds;
  ds.meta.d_model = spec.d_model;
  ds.meta.label_mode = spec.label_mode;
  ds.meta.source_model = "synthetic";
  ds.meta.sampling.num_samples = static_cast<std::int64_t>(spec.responses_per_query);
  ds.records.reserve(spec.queries);

  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> u(d);
  for (std::size_t q = 0; q < spec.queries; ++q) {
    FeatureRecord rec;
    rec.query_id = spec.first_query_id + q;
    std::mt19937_64 rng(derive_seed(spec.seed, rec.query_id));

    double norm = 0.0;
    for (auto& x : u) {
      x = normal(rng);
      norm += x * x;
    }
    norm = std::sqrt(norm);
    for (auto& x : u) x /= norm;

    rec.instruction.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
      rec.instruction[j] = static_cast<float>(spec.instruction_signal * root_d * u[j] + normal(rng));
    }

    const double rate = spec.min_positive_rate + (spec.max_positive_rate - spec.min_positive_rate) * unit(rng);
    rec.responses.resize(spec.responses_per_query);
    for (auto& resp : rec.responses) {
      const double sign = unit(rng) < rate ? 1.0 : -1.0;
      const double magnitude = 0.5 + unit(rng);
      resp.feature.resize(d);
      double along = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const float v = static_cast<float>(sign * spec.response_signal * root_d * magnitude * u[j] + normal(rng));
        resp.feature[j] = v;
        along += u[j] * static_cast<double>(v);
      }
      if (spec.label_mode == LabelMode::classification) {
        resp.label = along > 0.0 ? 1.0f : 0.0f;
      } else {
        resp.label = static_cast<float>(logistic(spec.label_sharpness * along / root_d));
      }
    }
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

}  // namespace lranker
