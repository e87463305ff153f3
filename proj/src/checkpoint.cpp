#include "rrm/checkpoint.hpp"

#include <fstream>
#include <sstream>
#include <string>

namespace rrm {
namespace {

using nlohmann::json;

json matrix_json(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::vector<double>(m.values().begin(), m.values().end())}};
}

Matrix matrix_from(const json& j, std::size_t rows, std::size_t cols, const std::string& name) {
  if (j.at("rows").get<std::size_t>() != rows || j.at("cols").get<std::size_t>() != cols)
    throw CheckpointError("checkpoint: shape mismatch in " + name);
  const auto data = j.at("data").get<std::vector<double>>();
  if (data.size() != rows * cols) throw CheckpointError("checkpoint: wrong element count in " + name);
  Matrix m(rows, cols);
  std::copy(data.begin(), data.end(), m.values().begin());
  return m;
}

json hyper_json(const GnnHyper& h) {
  return {{"features", h.features}, {"leaky_slope", h.leaky_slope}, {"temperature", h.temperature}};
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("checkpoint: cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return json::parse(buf.str());
  } catch (const json::exception& e) {
    throw CheckpointError("checkpoint: malformed or truncated file " + path.string() + ": " + e.what());
  }
}

}  // namespace

json checkpoint_to_json(const GnnParams& params, const json& metadata) {
  json layers = json::array();
  for (const auto& l : params.layers)
    layers.push_back({{"self", matrix_json(l.self)}, {"center", matrix_json(l.center)}, {"neighbor", matrix_json(l.neighbor)}});
  return {{"format", kCheckpointFormat},
          {"version", kCheckpointVersion},
          {"hyper", hyper_json(params.hyper)},
          {"layers", layers},
          {"power_head", params.power_head},
          {"selection_head", params.selection_head},
          {"metadata", metadata}};
}

GnnParams checkpoint_from_json(const json& record) {
  try {
    if (record.at("format").get<std::string>() != kCheckpointFormat)
      throw CheckpointError("checkpoint: unknown format tag");
    const int version = record.at("version").get<int>();
    if (version != kCheckpointVersion)
      throw CheckpointError("checkpoint: unsupported version " + std::to_string(version));
    GnnHyper hyper;
    const auto& h = record.at("hyper");
    hyper.features = h.at("features").get<std::vector<int>>();
    hyper.leaky_slope = h.at("leaky_slope").get<double>();
    hyper.temperature = h.at("temperature").get<double>();
    try {
      hyper.validate();
    } catch (const std::invalid_argument& e) {
      throw CheckpointError(std::string("checkpoint: invalid hyperparameters: ") + e.what());
    }
    GnnParams p = GnnParams::zeros(hyper);
    const auto& layers = record.at("layers");
    if (layers.size() != p.layers.size()) throw CheckpointError("checkpoint: layer count mismatch");
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
      const auto fi = static_cast<std::size_t>(hyper.features[l]);
      const auto fo = static_cast<std::size_t>(hyper.features[l + 1]);
      const std::string tag = "layer " + std::to_string(l);
      p.layers[l].self = matrix_from(layers[l].at("self"), fi, fo, tag + " self");
      p.layers[l].center = matrix_from(layers[l].at("center"), fi, fo, tag + " center");
      p.layers[l].neighbor = matrix_from(layers[l].at("neighbor"), fi, fo, tag + " neighbor");
    }
    p.power_head = record.at("power_head").get<std::vector<double>>();
    p.selection_head = record.at("selection_head").get<std::vector<double>>();
    const auto dim = static_cast<std::size_t>(hyper.embedding_dim());
    if (p.power_head.size() != dim || p.selection_head.size() != dim)
      throw CheckpointError("checkpoint: head size mismatch");
    return p;
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("checkpoint: missing or invalid field: ") + e.what());
  }
}

void save_checkpoint(const GnnParams& params, const std::filesystem::path& path, const json& metadata) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw CheckpointError("checkpoint: cannot write " + path.string());
  out << checkpoint_to_json(params, metadata).dump(1) << '\n';
  if (!out) throw CheckpointError("checkpoint: write failed for " + path.string());
}

GnnParams load_checkpoint(const std::filesystem::path& path, const std::optional<GnnHyper>& expected) {
  GnnParams p = checkpoint_from_json(read_json(path));
  if (expected && !(*expected == p.hyper))
    throw CheckpointError("checkpoint: hyperparameters in " + path.string() + " do not match the run configuration");
  return p;
}

json load_checkpoint_metadata(const std::filesystem::path& path) {
  const json record = read_json(path);
  return record.value("metadata", json::object());
}

}  // namespace rrm
