#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>

#include "feedflow/gfn/flow_model.hpp"

namespace feedflow::gfn {

// Text checkpoint:
//   feedflow-flow-model 1
//   layers <n> <w0> ... <wn-1>
//   steps <count>
//   log_z <value>
//   params <count>
//   <one value per line, round-trip precision>
void save_checkpoint(const FlowModel& model, std::ostream& out);
void save_checkpoint(const FlowModel& model, const std::filesystem::path& path);

// When `expected` is given, a checkpoint with a different architecture is a
// ValidationError.
FlowModel load_checkpoint(std::istream& in, const std::optional<Architecture>& expected = {});
FlowModel load_checkpoint(const std::filesystem::path& path,
                          const std::optional<Architecture>& expected = {});

}  // namespace feedflow::gfn
