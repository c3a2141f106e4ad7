#ifndef MIXDCNN_CHECKPOINT_HPP
#define MIXDCNN_CHECKPOINT_HPP

#include <string>

#include "mixdcnn/trainer.hpp"

namespace mixdcnn {

/// MIXD checkpoint container, little-endian:
///   magic "MIXD", version u32,
///   architecture tag (u32 length + bytes; carries the network topology so a
///   model can be rebuilt from the file alone),
///   K u32,
///   named parameter tensors (u32 name length + bytes, u32 rank, u64 dims,
///   f64 data),
///   trailing CRC32 (u32) over every preceding byte.
void save_checkpoint(const std::string& path, const Model& model);

/// Validates magic, version, and CRC; throws CorruptFileError / VersionError.
Model load_checkpoint(const std::string& path);

/// Topology string stored in the architecture tag, e.g.
/// "mix;K=2;input=16;net=linear:16:32,relu,linear:32:8".
std::string architecture_tag(const Model& model);

} // namespace mixdcnn

#endif
