#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "xdoc/model.hpp"
#include "xdoc/pretrain.hpp"
#include "xdoc/rng.hpp"

namespace xdoc {

inline constexpr uint32_t kCheckpointVersion = 1;

// Everything needed to resume a run bit-identically.
struct TrainerSnapshot {
  int64_t step = 0;
  std::string config_echo;
  std::string mask_rng;     // serialized engine states
  std::string dropout_rng;
  std::array<Sampler::Cursor, 3> sampler;
};

// Binary, little-endian, CRC-terminated. Parameters and optimizer moments
// are written in parameter-store registration order, so save -> load ->
// save round-trips byte-identically.
void save_checkpoint(const std::string& path, const XDocModel& model,
                     const OptimizerState& opt, const TrainerSnapshot& snap);

// Applies the file into an already-built model of the same architecture.
// Unknown or reshaped parameters raise ShapeError naming the parameter.
TrainerSnapshot load_checkpoint(const std::string& path, XDocModel& model, OptimizerState& opt);

}  // namespace xdoc
