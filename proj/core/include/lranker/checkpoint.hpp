#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "lranker/params.hpp"
#include "lranker/ranker.hpp"

namespace lranker {

inline constexpr char kCheckpointMagic[4] = {'L', 'R', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// A serialized trained ranker. Parameters are held at 32-bit precision so
/// that save/load round-trips reproduce scores bit-exactly.
struct Checkpoint {
  RankerShape shape;
  num::ParamSet params;
  /// TrainConfig as JSON ("{}" when unknown).
  std::string config_json = "{}";
  std::string dataset_fingerprint;

  /// Rounds every parameter to float.
  static Checkpoint from_ranker(const Ranker& ranker, std::string config_json = "{}",
                                std::string dataset_fingerprint = {});
  Ranker ranker() const;
};

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
/// Throws FormatError on bad magic/version or a tensor set that does not
/// match the header (listing the missing names) and CorruptionError on truncation.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace lranker
