#pragma once

#include <optional>
#include <string>

#include "horo/config.hpp"
#include "horo/model.hpp"

namespace horo {

// Binary checkpoint: fixed little-endian header followed by the dense f64
// parameter arrays in block order, plus a JSON manifest sidecar at
// <path>.json carrying the vocabularies, serialized config, training step
// and an optional metrics snapshot. Saving a just-loaded checkpoint
// reproduces both files byte for byte.
inline constexpr char kCheckpointMagic[8] = {'H', 'O', 'R', 'O', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ParameterStore params;
  Vocab entities;
  Vocab relations;
  std::string config_text;  // canonical RunConfig serialization
  std::int64_t step = 0;
  std::string metrics_json;  // "null" when absent

  RunConfig config() const { return RunConfig::parse(config_text); }
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace horo
