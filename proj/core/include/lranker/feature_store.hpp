#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lranker {

enum class LabelMode : std::uint8_t { classification, regression };

std::string to_string(LabelMode mode);
LabelMode parse_label_mode(std::string_view text);

struct ResponseFeature {
  std::vector<float> feature;
  float label = 0.0f;

  friend bool operator==(const ResponseFeature&, const ResponseFeature&) = default;
};

/// One query: the instruction's final-token hidden state and every sampled
/// response's final-token hidden state with its label.
struct FeatureRecord {
  std::uint64_t query_id = 0;
  std::vector<float> instruction;
  std::vector<ResponseFeature> responses;

  friend bool operator==(const FeatureRecord&, const FeatureRecord&) = default;
};

struct SamplingSettings {
  double temperature = 1.5;
  std::int64_t max_new_tokens = 1024;
  std::int64_t num_samples = 100;

  friend bool operator==(const SamplingSettings&, const SamplingSettings&) = default;
};

struct DatasetMeta {
  std::uint32_t d_model = 0;
  LabelMode label_mode = LabelMode::classification;
  std::optional<std::int64_t> layer_index;
  std::optional<double> layer_fraction;
  std::optional<std::int64_t> num_layers;
  std::string source_model;
  SamplingSettings sampling;
  /// Where in the selected layer the hidden state was captured.
  std::string hidden_state_position = "post_block";

  friend bool operator==(const DatasetMeta&, const DatasetMeta&) = default;
};

struct Dataset {
  std::vector<FeatureRecord> records;
  DatasetMeta meta;
};

inline constexpr char kDatasetMagic[4] = {'L', 'R', 'F', 'D'};
inline constexpr std::uint32_t kDatasetVersion = 1;
inline constexpr std::uint32_t kRegressionFlag = 1u;

/// Throws ContractViolation when the metadata is self-inconsistent.
void validate_meta(const DatasetMeta& meta);
/// Throws ContractViolation naming the query_id when a record breaks an invariant.
void validate_record(const FeatureRecord& record, const DatasetMeta& meta);

std::filesystem::path sidecar_path(const std::filesystem::path& dataset_path);

/// Writes the LRFD file and its `<path>.meta.json` sidecar (both atomically).
void write_dataset(std::span<const FeatureRecord> records, const DatasetMeta& meta,
                   const std::filesystem::path& path);

struct LoadOptions {
  /// Per-dimension z-scoring computed over the loaded dataset. Off by default.
  bool standardize = false;
};

/// Reads and validates an LRFD file. A missing sidecar is tolerated (fields
/// not stored in the binary header keep their defaults); a present sidecar
/// must agree with the header.
Dataset read_dataset(const std::filesystem::path& path, LoadOptions options = {});

/// Exact byte size of an LRFD file for the given records.
std::uint64_t encoded_size(std::span<const FeatureRecord> records, std::uint32_t d_model);

/// Stable content hash of a file ("fnv1a64:<hex>").
std::string file_fingerprint(const std::filesystem::path& path);

std::string meta_to_json(const DatasetMeta& meta);
DatasetMeta meta_from_json(std::string_view json);

struct Standardization {
  std::vector<double> mean;
  std::vector<double> inv_std;
};
Standardization compute_standardization(std::span<const FeatureRecord> records);
void apply_standardization(std::vector<FeatureRecord>& records, const Standardization& stats);

// ---- candidate groups -------------------------------------------------------

struct Candidate {
  std::span<const float> feature;
  float label = 0.0f;
  /// Index of the response inside its FeatureRecord.
  std::size_t response_index = 0;
};

/// K candidates of one query. Views into the FeatureRecords it was built
/// from, which must outlive the group.
struct CandidateGroup {
  std::uint64_t query_id = 0;
  std::span<const float> instruction;
  std::vector<Candidate> candidates;

  std::size_t size() const noexcept { return candidates.size(); }
  bool has_positive() const noexcept;
  bool has_negative() const noexcept;
};

CandidateGroup make_group(const FeatureRecord& record, std::span<const std::size_t> response_indices);

enum class GroupFilter : std::uint8_t {
  /// Classification groups must hold both a positive and a negative label.
  /// Regression groups are never filtered.
  mixed_labels,
  none,
};

struct GroupSampling {
  std::vector<CandidateGroup> groups;
  /// Records with fewer than K responses.
  std::size_t skipped_records = 0;
  /// Queries that produced fewer than N groups within the retry budget.
  std::size_t short_queries = 0;
};

inline constexpr std::size_t kDefaultGroupsPerQuery = 16;
inline constexpr std::size_t kRetryBudgetFactor = 10;

/// Draws up to `groups_per_query` groups of `k` distinct responses per record.
/// Each query uses its own RNG stream derived from (seed, query_id).
GroupSampling sample_groups(std::span<const FeatureRecord> records, std::size_t k,
                            std::size_t groups_per_query, LabelMode mode, std::uint64_t seed,
                            GroupFilter filter = GroupFilter::mixed_labels);

/// Mixes a query id into a seed (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace lranker
