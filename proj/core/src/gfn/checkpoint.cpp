#include "feedflow/gfn/checkpoint.hpp"

#include <fmt/format.h>

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "feedflow/errors.hpp"

namespace feedflow::gfn {

namespace {

constexpr const char* kMagic = "feedflow-flow-model";
constexpr int kVersion = 1;

std::string join_layers(const Architecture& a) {
  std::string s;
  for (auto w : a.layers) s += fmt::format(" {}", w);
  return s;
}

}  // namespace

void save_checkpoint(const FlowModel& model, std::ostream& out) {
  const auto& arch = model.architecture();
  out << fmt::format("{} {}\n", kMagic, kVersion);
  out << fmt::format("layers {}{}\n", arch.layers.size(), join_layers(arch));
  out << fmt::format("steps {}\n", model.step_count());
  out << fmt::format("log_z {}\n", model.log_z());
  out << fmt::format("params {}\n", model.params().size());
  for (double p : model.params()) out << fmt::format("{}\n", p);
}

void save_checkpoint(const FlowModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  save_checkpoint(model, out);
}

FlowModel load_checkpoint(std::istream& in, const std::optional<Architecture>& expected) {
  std::string word;
  int version = 0;
  if (!(in >> word >> version) || word != kMagic) throw ParseError("not a flow-model checkpoint");
  if (version != kVersion) {
    throw ParseError(fmt::format("unsupported checkpoint version {}", version));
  }
  Architecture arch;
  std::size_t n_layers = 0;
  if (!(in >> word >> n_layers) || word != "layers" || n_layers < 2) {
    throw ParseError("checkpoint: bad layers record");
  }
  arch.layers.resize(n_layers);
  for (auto& w : arch.layers) {
    if (!(in >> w)) throw ParseError("checkpoint: bad layer width");
  }
  std::int64_t steps = 0;
  double log_z = 0.0;
  std::size_t count = 0;
  if (!(in >> word >> steps) || word != "steps") throw ParseError("checkpoint: bad steps record");
  if (!(in >> word >> log_z) || word != "log_z") throw ParseError("checkpoint: bad log_z record");
  if (!(in >> word >> count) || word != "params") throw ParseError("checkpoint: bad params record");
  if (count != arch.param_count()) {
    throw ValidationError("checkpoint parameter count does not match its architecture");
  }
  std::vector<double> params(count);
  for (auto& p : params) {
    if (!(in >> p)) throw ParseError("checkpoint: truncated parameter list");
  }
  if (expected && !(*expected == arch)) {
    throw ValidationError(fmt::format("checkpoint architecture{} does not match expected{}",
                                      join_layers(arch), join_layers(*expected)));
  }
  FlowModel model(std::move(arch), std::move(params), log_z);
  model.set_step_count(steps);
  return model;
}

FlowModel load_checkpoint(const std::filesystem::path& path,
                          const std::optional<Architecture>& expected) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  return load_checkpoint(in, expected);
}

}  // namespace feedflow::gfn
