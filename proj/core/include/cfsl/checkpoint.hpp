#ifndef CFSL_CHECKPOINT_HPP_
#define CFSL_CHECKPOINT_HPP_

#include <string>
#include <vector>

#include "cfsl/trainer.hpp"

namespace cfsl {

// Binary model checkpoint. Little-endian, magic "C2V1", one version byte,
// dims, vocab block, class names with origin tags, matrices row-major as
// 64-bit floats, config fingerprint, loss trajectory.
void save_checkpoint(const TrainedModel& model, const std::string& path);
TrainedModel load_checkpoint(const std::string& path);

std::vector<std::uint8_t> serialize_checkpoint(const TrainedModel& model);
TrainedModel deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

}  // namespace cfsl

#endif  // CFSL_CHECKPOINT_HPP_
