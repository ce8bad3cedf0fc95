#include "lranker/feature_store.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <json.hpp>

#include "binary_io.hpp"
#include "lranker/errors.hpp"

namespace lranker {
namespace {

using nlohmann::json;

constexpr std::size_t kHeaderBytes = 4 + 4 + 4 + 4 + 8;

bool is_positive(float label) { return label >= 0.5f; }

[[noreturn]] void record_error(std::uint64_t query_id, const std::string& what) {
  throw ContractViolation("record query_id=" + std::to_string(query_id) + ": " + what);
}

void check_vector(std::uint64_t query_id, std::span<const float> v, std::uint32_t d_model,
                  const std::string& what) {
  if (v.size() != d_model) {
    record_error(query_id, what + " has " + std::to_string(v.size()) + " entries, expected d_model=" +
                               std::to_string(d_model));
  }
  for (float x : v) {
    if (!std::isfinite(x)) record_error(query_id, what + " contains a non-finite value");
  }
}

}  // namespace

std::string to_string(LabelMode mode) {
  return mode == LabelMode::classification ? "classification" : "regression";
}

LabelMode parse_label_mode(std::string_view text) {
  if (text == "classification" || text == "cls") return LabelMode::classification;
  if (text == "regression" || text == "reg") return LabelMode::regression;
  throw ContractViolation("unknown label mode '" + std::string(text) + "'");
}

void validate_meta(const DatasetMeta& meta) {
  if (meta.d_model == 0) throw ContractViolation("dataset meta: d_model must be positive");
  if (meta.sampling.num_samples < 1) throw ContractViolation("dataset meta: num_samples must be >= 1");
  if (meta.layer_fraction) {
    const double f = *meta.layer_fraction;
    if (!(f > 0.0 && f <= 1.0)) throw ContractViolation("dataset meta: layer_fraction must lie in (0, 1]");
    if (meta.layer_index && meta.num_layers) {
      const auto expected =
          static_cast<std::int64_t>(std::floor(f * static_cast<double>(*meta.num_layers)));
      if (*meta.layer_index != expected) {
        throw ContractViolation("dataset meta: layer_index " + std::to_string(*meta.layer_index) +
                                " != floor(layer_fraction x num_layers) = " + std::to_string(expected));
      }
    }
  }
}

void validate_record(const FeatureRecord& record, const DatasetMeta& meta) {
  check_vector(record.query_id, record.instruction, meta.d_model, "instruction feature");
  if (record.responses.empty()) record_error(record.query_id, "no responses");
  for (std::size_t k = 0; k < record.responses.size(); ++k) {
    const auto& r = record.responses[k];
    check_vector(record.query_id, r.feature, meta.d_model, "response " + std::to_string(k) + " feature");
    if (!std::isfinite(r.label)) record_error(record.query_id, "response " + std::to_string(k) + " label is non-finite");
    if (meta.label_mode == LabelMode::classification && r.label != 0.0f && r.label != 1.0f) {
      record_error(record.query_id, "classification label " + std::to_string(r.label) + " is not 0 or 1");
    }
  }
}

std::filesystem::path sidecar_path(const std::filesystem::path& dataset_path) {
  std::filesystem::path p = dataset_path;
  p += ".meta.json";
  return p;
}

std::uint64_t encoded_size(std::span<const FeatureRecord> records, std::uint32_t d_model) {
  std::uint64_t n = kHeaderBytes;
  for (const auto& r : records) {
    n += 8 + 4 + 4ull * d_model + r.responses.size() * (4 + 4ull * d_model);
  }
  return n;
}

std::string meta_to_json(const DatasetMeta& meta) {
  json j;
  j["d_model"] = meta.d_model;
  j["label_mode"] = to_string(meta.label_mode);
  j["layer_index"] = meta.layer_index ? json(*meta.layer_index) : json(nullptr);
  j["layer_fraction"] = meta.layer_fraction ? json(*meta.layer_fraction) : json(nullptr);
  j["num_layers"] = meta.num_layers ? json(*meta.num_layers) : json(nullptr);
  j["source_model"] = meta.source_model;
  j["sampling"] = {{"temperature", meta.sampling.temperature},
                   {"max_new_tokens", meta.sampling.max_new_tokens},
                   {"num_samples", meta.sampling.num_samples}};
  j["hidden_state_position"] = meta.hidden_state_position;
  return j.dump(2);
}

DatasetMeta meta_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("dataset sidecar is not valid JSON: ") + e.what());
  }
  try {
    DatasetMeta m;
    m.d_model = j.at("d_model").get<std::uint32_t>();
    m.label_mode = parse_label_mode(j.at("label_mode").get<std::string>());
    auto opt_int = [&](const char* key) -> std::optional<std::int64_t> {
      if (!j.contains(key) || j[key].is_null()) return std::nullopt;
      return j[key].get<std::int64_t>();
    };
    m.layer_index = opt_int("layer_index");
    m.num_layers = opt_int("num_layers");
    if (j.contains("layer_fraction") && !j["layer_fraction"].is_null()) {
      m.layer_fraction = j["layer_fraction"].get<double>();
    }
    m.source_model = j.value("source_model", std::string{});
    if (j.contains("sampling")) {
      const auto& s = j["sampling"];
      m.sampling.temperature = s.value("temperature", m.sampling.temperature);
      m.sampling.max_new_tokens = s.value("max_new_tokens", m.sampling.max_new_tokens);
      m.sampling.num_samples = s.value("num_samples", m.sampling.num_samples);
    }
    m.hidden_state_position = j.value("hidden_state_position", m.hidden_state_position);
    return m;
  } catch (const json::exception& e) {
    throw FormatError(std::string("dataset sidecar has a malformed field: ") + e.what());
  } catch (const ContractViolation& e) {
    throw FormatError(std::string("dataset sidecar: ") + e.what());
  }
}

void write_dataset(std::span<const FeatureRecord> records, const DatasetMeta& meta,
                   const std::filesystem::path& path) {
  validate_meta(meta);
  for (const auto& r : records) validate_record(r, meta);

  detail::ByteWriter w;
  w.bytes(kDatasetMagic, 4);
  w.u32(kDatasetVersion);
  w.u32(meta.d_model);
  w.u32(meta.label_mode == LabelMode::regression ? kRegressionFlag : 0u);
  w.u64(records.size());
  for (const auto& r : records) {
    w.u64(r.query_id);
    w.u32(static_cast<std::uint32_t>(r.responses.size()));
    w.f32s(r.instruction);
    for (const auto& resp : r.responses) {
      w.f32(resp.label);
      w.f32s(resp.feature);
    }
  }
  detail::write_file_atomic(path, w.buffer());

  const std::string sidecar = meta_to_json(meta);
  detail::write_file_atomic(
      sidecar_path(path),
      std::span(reinterpret_cast<const std::uint8_t*>(sidecar.data()), sidecar.size()));
}

Dataset read_dataset(const std::filesystem::path& path, LoadOptions options) {
  if (!std::filesystem::exists(path)) throw IoError("dataset '" + path.string() + "' does not exist");
  const auto bytes = detail::read_file(path);
  detail::ByteReader in(bytes);

  char magic[4];
  in.bytes(magic, 4, "magic");
  if (!std::equal(magic, magic + 4, kDatasetMagic)) {
    throw FormatError("'" + path.string() + "' is not an LRFD dataset (bad magic)");
  }
  const std::uint32_t version = in.u32("version");
  if (version != kDatasetVersion) {
    throw FormatError("unsupported LRFD version " + std::to_string(version));
  }

  Dataset ds;
  ds.meta.d_model = in.u32("d_model");
  const std::uint32_t flags = in.u32("flags");
  ds.meta.label_mode = (flags & kRegressionFlag) ? LabelMode::regression : LabelMode::classification;
  const std::uint64_t count = in.u64("record count");
  if (ds.meta.d_model == 0) throw CorruptionError("d_model is zero", 8);

  const std::uint64_t min_record = 8 + 4 + 4ull * ds.meta.d_model;
  if (count > in.remaining() / min_record) {
    throw CorruptionError("record count " + std::to_string(count) + " exceeds file size", 16);
  }
  ds.records.resize(count);
  for (auto& r : ds.records) {
    r.query_id = in.u64("query_id");
    const std::uint32_t k = in.u32("response count");
    r.instruction.resize(ds.meta.d_model);
    in.f32s(r.instruction, "instruction feature");
    in.need(static_cast<std::size_t>(k) * (4 + 4ull * ds.meta.d_model), "responses");
    r.responses.resize(k);
    for (auto& resp : r.responses) {
      resp.label = in.f32("label");
      resp.feature.resize(ds.meta.d_model);
      in.f32s(resp.feature, "response feature");
    }
  }
  if (in.remaining() != 0) {
    throw CorruptionError(std::to_string(in.remaining()) + " trailing bytes after last record", in.offset());
  }

  const auto side = sidecar_path(path);
  if (std::filesystem::exists(side)) {
    const auto raw = detail::read_file(side);
    DatasetMeta m = meta_from_json(std::string_view(reinterpret_cast<const char*>(raw.data()), raw.size()));
    if (m.d_model != ds.meta.d_model || m.label_mode != ds.meta.label_mode) {
      throw FormatError("sidecar metadata disagrees with LRFD header (d_model " + std::to_string(m.d_model) +
                        " vs " + std::to_string(ds.meta.d_model) + ")");
    }
    ds.meta = std::move(m);
  }

  try {
    validate_meta(ds.meta);
    for (const auto& r : ds.records) validate_record(r, ds.meta);
  } catch (const ContractViolation& e) {
    throw FormatError(std::string("invalid dataset content: ") + e.what());
  }

  if (options.standardize) apply_standardization(ds.records, compute_standardization(ds.records));
  return ds;
}

std::string file_fingerprint(const std::filesystem::path& path) {
  return "fnv1a64:" + detail::hex64(detail::fnv1a64(detail::read_file(path)));
}

Standardization compute_standardization(std::span<const FeatureRecord> records) {
  Standardization s;
  if (records.empty()) return s;
  const std::size_t d = records.front().instruction.size();
  s.mean.assign(d, 0.0);
  std::vector<double> sq(d, 0.0);
  std::size_t n = 0;
  auto visit = [&](std::span<const float> v) {
    for (std::size_t j = 0; j < d; ++j) {
      s.mean[j] += v[j];
      sq[j] += static_cast<double>(v[j]) * v[j];
    }
    ++n;
  };
  for (const auto& r : records) {
    visit(r.instruction);
    for (const auto& resp : r.responses) visit(resp.feature);
  }
  s.inv_std.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    s.mean[j] /= static_cast<double>(n);
    const double var = std::max(0.0, sq[j] / static_cast<double>(n) - s.mean[j] * s.mean[j]);
    s.inv_std[j] = var > 1e-12 ? 1.0 / std::sqrt(var) : 1.0;
  }
  return s;
}

void apply_standardization(std::vector<FeatureRecord>& records, const Standardization& stats) {
  auto apply = [&](std::vector<float>& v) {
    if (v.size() != stats.mean.size()) throw ContractViolation("standardization dimension mismatch");
    for (std::size_t j = 0; j < v.size(); ++j) {
      v[j] = static_cast<float>((v[j] - stats.mean[j]) * stats.inv_std[j]);
    }
  };
  for (auto& r : records) {
    apply(r.instruction);
    for (auto& resp : r.responses) apply(resp.feature);
  }
}

// ---- groups -----------------------------------------------------------------

bool CandidateGroup::has_positive() const noexcept {
  return std::any_of(candidates.begin(), candidates.end(), [](const Candidate& c) { return is_positive(c.label); });
}

bool CandidateGroup::has_negative() const noexcept {
  return std::any_of(candidates.begin(), candidates.end(), [](const Candidate& c) { return !is_positive(c.label); });
}

CandidateGroup make_group(const FeatureRecord& record, std::span<const std::size_t> response_indices) {
  CandidateGroup g;
  g.query_id = record.query_id;
  g.instruction = record.instruction;
  g.candidates.reserve(response_indices.size());
  for (std::size_t idx : response_indices) {
    if (idx >= record.responses.size()) {
      throw ContractViolation("make_group: response index " + std::to_string(idx) + " out of range for query_id=" +
                              std::to_string(record.query_id));
    }
    const auto& r = record.responses[idx];
    g.candidates.push_back(Candidate{r.feature, r.label, idx});
  }
  return g;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

GroupSampling sample_groups(std::span<const FeatureRecord> records, std::size_t k, std::size_t groups_per_query,
                            LabelMode mode, std::uint64_t seed, GroupFilter filter) {
  if (k < 2) throw ContractViolation("sample_groups: K must be >= 2, got " + std::to_string(k));
  if (groups_per_query < 1) throw ContractViolation("sample_groups: N must be >= 1");

  const bool filtering = filter == GroupFilter::mixed_labels && mode == LabelMode::classification;
  GroupSampling out;
  std::vector<std::size_t> pool;
  for (const auto& record : records) {
    const std::size_t m = record.responses.size();
    if (m < k) {
      ++out.skipped_records;
      continue;
    }
    if (filtering) {
      const auto positives = static_cast<std::size_t>(std::count_if(
          record.responses.begin(), record.responses.end(), [](const ResponseFeature& r) { return is_positive(r.label); }));
      // No draw can be mixed; skip the retry loop.
      if (positives == 0 || positives == m) {
        ++out.short_queries;
        continue;
      }
    }

    std::mt19937_64 rng(derive_seed(seed, record.query_id));
    pool.resize(m);
    std::size_t produced = 0;
    const std::size_t budget = kRetryBudgetFactor * groups_per_query;
    for (std::size_t attempt = 0; attempt < budget && produced < groups_per_query; ++attempt) {
      std::iota(pool.begin(), pool.end(), std::size_t{0});
      for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, m - 1);
        std::swap(pool[i], pool[pick(rng)]);
      }
      CandidateGroup g = make_group(record, std::span(pool.data(), k));
      if (filtering && !(g.has_positive() && g.has_negative())) continue;
      out.groups.push_back(std::move(g));
      ++produced;
    }
    if (produced < groups_per_query) ++out.short_queries;
  }
  return out;
}

}  // namespace lranker
