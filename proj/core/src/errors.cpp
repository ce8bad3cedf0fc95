#include "lranker/errors.hpp"

namespace lranker {

CorruptionError::CorruptionError(const std::string& what, std::uint64_t offset)
    : FormatError(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

}  // namespace lranker
