#ifndef LAVARNET_CHECKPOINT_HPP
#define LAVARNET_CHECKPOINT_HPP

#include <filesystem>
#include <iosfwd>
#include <string_view>

#include "lavarnet/models.hpp"

namespace lavarnet {

inline constexpr std::string_view kCheckpointFormat = "lavarnet-checkpoint/1";

// Plain-text checkpoint:
//
//   format lavarnet-checkpoint/1
//   variant <name>
//   dims <n> <T> <K> <K_out>
//   tensor <name> <rank> <dim>...
//   <row-major values, one row per line, 17 significant digits>
//   ...
//   end
void write_checkpoint(std::ostream& out, const ModelParams& params);
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params);

// Throws DataError on any format or layout mismatch.
ModelParams read_checkpoint(std::istream& in);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace lavarnet

#endif  // LAVARNET_CHECKPOINT_HPP
