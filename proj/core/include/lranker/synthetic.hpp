#pragma once

#include <cstddef>
#include <cstdint>

#include "lranker/feature_store.hpp"

namespace lranker {

/// Parameters of the planted-rule feature generator.
///
/// Each query q draws a unit direction u_q. The instruction feature is
/// instruction_signal·√d·u_q + N(0, I) and every response is
/// s·response_signal·√d·m·u_q + N(0, I) with s = ±1 and m ~ U[0.5, 1.5].
/// The label is the planted linear rule [⟨u_q, r⟩ > 0]; in regression mode it
/// is logistic(⟨u_q, r⟩ / √d · label_sharpness) instead.
struct SyntheticSpec {
  std::size_t queries = 500;
  std::size_t responses_per_query = 32;
  std::uint32_t d_model = 256;
  LabelMode label_mode = LabelMode::classification;
  double instruction_signal = 1.0;
  double response_signal = 1.0;
  /// Per-query positive rate is drawn from U[min_positive_rate, max_positive_rate].
  double min_positive_rate = 0.1;
  double max_positive_rate = 0.6;
  double label_sharpness = 4.0;
  std::uint64_t first_query_id = 0;
  std::uint64_t seed = 7;
};

/// Deterministic per seed. Metadata is stamped with source_model "synthetic".
Dataset generate_synthetic(const SyntheticSpec& spec);

}  // namespace lranker
