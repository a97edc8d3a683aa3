#pragma once

// Binary checkpoint: the magic "CLARIGEN1" followed by one record per
// parameter until end of file. Record layout (little-endian):
//   u32 name length, name bytes, u32 rank, u64 extents[rank],
//   f64 values[product(extents)]

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "clarigen/numerics/parameter.h"

namespace clarigen::numerics {

inline constexpr char kCheckpointMagic[] = "CLARIGEN1";

void save_checkpoint(const ParameterSet& params, const std::filesystem::path& path);

std::vector<std::pair<std::string, Tensor>> read_checkpoint(
    const std::filesystem::path& path);

// Copies every record into the parameter of the same name. Missing or extra
// names and shape differences are errors; the set is untouched on failure.
void load_checkpoint(ParameterSet& params, const std::filesystem::path& path);

}  // namespace clarigen::numerics
