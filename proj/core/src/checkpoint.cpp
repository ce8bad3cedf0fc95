#include "lranker/checkpoint.hpp"

#include <algorithm>
#include <set>

#include <json.hpp>

#include "binary_io.hpp"
#include "lranker/errors.hpp"

namespace lranker {
namespace {

using nlohmann::json;

constexpr std::uint32_t kTensorRank = 2;
// Guards against allocating absurd sizes from a corrupted header.
constexpr std::uint32_t kMaxNameLength = 4096;
constexpr std::uint32_t kMaxTensors = 1u << 16;

std::uint32_t narrow_u32(std::size_t v, const char* what) {
  if (v > 0xFFFFFFFFu) throw ContractViolation(std::string(what) + " does not fit in 32 bits");
  return static_cast<std::uint32_t>(v);
}

RankerKind decode_ranker_kind(std::uint32_t v, std::uint64_t offset) {
  if (v > 1) throw FormatError("checkpoint: unknown ranker_kind " + std::to_string(v) +
                               " at byte offset " + std::to_string(offset));
  return static_cast<RankerKind>(v);
}

RelevanceKind decode_relevance_kind(std::uint32_t v, std::uint64_t offset) {
  if (v > 1) throw FormatError("checkpoint: unknown relevance_kind " + std::to_string(v) +
                               " at byte offset " + std::to_string(offset));
  return static_cast<RelevanceKind>(v);
}

// Reports every discrepancy between the stored tensors and the set implied by the header.
void check_tensor_set(const RankerShape& shape, const num::ParamSet& stored) {
  const auto expected = parameter_shapes(shape);
  std::set<std::string> expected_names;
  std::vector<std::string> missing;
  std::vector<std::string> misshapen;
  for (const auto& s : expected) {
    expected_names.insert(s.name);
    if (!stored.contains(s.name)) {
      missing.push_back(s.name);
      continue;
    }
    const auto& t = stored.at(s.name);
    if (t.rows() != s.rows || t.cols() != s.cols) {
      misshapen.push_back(s.name + " " + t.shape_string() + " != " + num::shape_string(s.rows, s.cols));
    }
  }
  std::vector<std::string> unexpected;
  for (const auto& nt : stored) {
    if (!expected_names.contains(nt.name)) unexpected.push_back(nt.name);
  }
  if (missing.empty() && misshapen.empty() && unexpected.empty()) return;

  auto join = [](const std::vector<std::string>& v) {
    std::string out;
    for (const auto& s : v) out += (out.empty() ? "" : ", ") + s;
    return out;
  };
  std::string msg = "checkpoint: tensor set does not match " + to_string(shape.kind) + "/" +
                    to_string(shape.relevance) + " header";
  if (!missing.empty()) msg += "; missing: " + join(missing);
  if (!unexpected.empty()) msg += "; unexpected: " + join(unexpected);
  if (!misshapen.empty()) msg += "; wrong shape: " + join(misshapen);
  throw FormatError(msg);
}

}  // namespace

Checkpoint Checkpoint::from_ranker(const Ranker& ranker, std::string config_json, std::string dataset_fingerprint) {
  Checkpoint ck;
  ck.shape = ranker.shape();
  ck.params = ranker.params();
  for (auto& nt : ck.params) {
    for (auto& x : nt.value.flat()) x = static_cast<double>(static_cast<float>(x));
  }
  ck.config_json = std::move(config_json);
  ck.dataset_fingerprint = std::move(dataset_fingerprint);
  return ck;
}

Ranker Checkpoint::ranker() const { return Ranker(shape, params); }

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  const RankerShape shape = normalized(ck.shape);
  check_tensor_set(shape, ck.params);

  detail::ByteWriter w;
  w.bytes(kCheckpointMagic, 4);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(shape.kind));
  w.u32(static_cast<std::uint32_t>(shape.relevance));
  w.u32(narrow_u32(shape.d_model, "d_model"));
  w.u32(narrow_u32(shape.d_proj, "d_proj"));
  w.u32(narrow_u32(shape.d_hidden, "d_hidden"));
  w.u32(narrow_u32(shape.blocks, "block_count"));
  w.u32(narrow_u32(ck.params.tensor_count(), "n_tensors"));
  for (const auto& nt : ck.params) {
    w.u32(narrow_u32(nt.name.size(), "tensor name"));
    w.text(nt.name);
    w.u32(kTensorRank);
    w.u32(narrow_u32(nt.value.rows(), "tensor rows"));
    w.u32(narrow_u32(nt.value.cols(), "tensor cols"));
    for (double x : nt.value.flat()) w.f32(static_cast<float>(x));
  }

  json config = json::object();
  if (!ck.config_json.empty()) {
    try {
      config = json::parse(ck.config_json);
    } catch (const json::exception& e) {
      throw ContractViolation(std::string("checkpoint config is not valid JSON: ") + e.what());
    }
  }
  json extra;
  extra["variant"] = to_string(shape.variant);
  extra["logit_scale"] = shape.logit_scale;
  extra["config"] = std::move(config);
  extra["dataset_fingerprint"] = ck.dataset_fingerprint;
  const std::string text = extra.dump();
  w.u32(narrow_u32(text.size(), "trailer"));
  w.text(text);

  detail::write_file_atomic(path, w.buffer());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  detail::ByteReader r(bytes);

  char magic[4];
  r.bytes(magic, 4, "magic");
  if (!std::equal(magic, magic + 4, kCheckpointMagic)) {
    throw FormatError("checkpoint: bad magic '" + std::string(magic, 4) + "', expected 'LRCK'");
  }
  const auto version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  }

  Checkpoint ck;
  ck.shape.kind = decode_ranker_kind(r.u32("ranker_kind"), r.offset() - 4);
  ck.shape.relevance = decode_relevance_kind(r.u32("relevance_kind"), r.offset() - 4);
  ck.shape.d_model = r.u32("d_model");
  ck.shape.d_proj = r.u32("d_proj");
  ck.shape.d_hidden = r.u32("d_hidden");
  ck.shape.blocks = r.u32("block_count");
  const auto n_tensors = r.u32("n_tensors");
  if (n_tensors > kMaxTensors) throw CorruptionError("implausible tensor count", r.offset() - 4);

  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    const auto name_len = r.u32("tensor name length");
    if (name_len > kMaxNameLength) throw CorruptionError("implausible tensor name length", r.offset() - 4);
    std::string name = r.text(name_len, "tensor name");
    const auto rank = r.u32("tensor rank");
    if (rank == 0 || rank > kTensorRank) {
      throw CorruptionError("tensor '" + name + "' has unsupported rank " + std::to_string(rank), r.offset() - 4);
    }
    std::size_t rows = 1;
    std::size_t cols = r.u32("tensor dims");
    if (rank == 2) {
      rows = cols;
      cols = r.u32("tensor dims");
    }
    const std::uint64_t count = static_cast<std::uint64_t>(rows) * cols;
    r.need(count * sizeof(float), "tensor data");
    std::vector<float> data(count);
    r.f32s(data, "tensor data");
    num::Tensor2 t(rows, cols);
    std::copy(data.begin(), data.end(), t.flat().begin());
    if (ck.params.contains(name)) throw FormatError("checkpoint: duplicate tensor '" + name + "'");
    ck.params.add(std::move(name), std::move(t));
  }

  const auto trailer_len = r.u32("trailer length");
  const std::string trailer = r.text(trailer_len, "trailer");
  if (r.remaining() != 0) throw CorruptionError("trailing bytes after checkpoint trailer", r.offset());
  json extra;
  try {
    extra = json::parse(trailer);
    ck.shape.variant = parse_variant(extra.at("variant").get<std::string>());
    ck.shape.logit_scale = extra.value("logit_scale", false);
    ck.config_json = extra.value("config", json::object()).dump();
    ck.dataset_fingerprint = extra.value("dataset_fingerprint", std::string{});
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint: malformed trailer JSON: ") + e.what());
  } catch (const ContractViolation& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }

  try {
    validate_shape(ck.shape);
  } catch (const ContractViolation& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }
  check_tensor_set(ck.shape, ck.params);
  // Canonical order, so that a reloaded checkpoint compares equal to the saved one.
  ck.params = Ranker(ck.shape, std::move(ck.params)).params();
  return ck;
}

}  // namespace lranker
