#include "coal/checkpoint.hpp"

#include "coal/errors.hpp"
#include "coal/io.hpp"

namespace coal {

using nlohmann::json;

json checkpoint_json(const ModelParams& params) {
  json widths = json::array();
  for (const auto& layer : params.extractor) widths.push_back(layer.weights.value.cols());
  json blocks = json::array();
  for (const ParamBlock* b : params.blocks()) {
    blocks.push_back({{"name", b->name},
                      {"rows", b->value.rows()},
                      {"cols", b->value.cols()},
                      {"values", b->value.data()}});
  }
  return {{"format", "coal-checkpoint"},
          {"version", kCheckpointVersion},
          {"temperature", params.temperature},
          {"seed", params.seed},
          {"input_dim", params.input_dim()},
          {"layer_widths", widths},
          {"num_classes", params.num_classes()},
          {"blocks", blocks}};
}

ModelParams checkpoint_from_json(const json& doc) {
  try {
    if (doc.at("format").get<std::string>() != "coal-checkpoint") {
      throw FormatError("not a coal checkpoint");
    }
    const int version = doc.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw FormatError("unsupported checkpoint version " + std::to_string(version));
    }
    ModelConfig cfg;
    cfg.input_dim = doc.at("input_dim").get<std::size_t>();
    cfg.layer_widths = doc.at("layer_widths").get<std::vector<std::size_t>>();
    cfg.num_classes = doc.at("num_classes").get<std::size_t>();
    cfg.temperature = doc.at("temperature").get<double>();
    cfg.seed = doc.at("seed").get<std::uint64_t>();
    ModelParams params = init_model(cfg);
    auto blocks = params.blocks();
    const json& stored = doc.at("blocks");
    if (stored.size() != blocks.size()) {
      throw FormatError("checkpoint has " + std::to_string(stored.size()) + " blocks, model expects " +
                        std::to_string(blocks.size()));
    }
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const json& b = stored[i];
      const auto rows = b.at("rows").get<std::size_t>();
      const auto cols = b.at("cols").get<std::size_t>();
      if (b.at("name").get<std::string>() != blocks[i]->name || rows != blocks[i]->value.rows() ||
          cols != blocks[i]->value.cols()) {
        throw FormatError("checkpoint block " + std::to_string(i) + " does not match '" +
                          blocks[i]->name + "' " + blocks[i]->value.shape_string());
      }
      *blocks[i] = ParamBlock(blocks[i]->name,
                              Tensor2(rows, cols, b.at("values").get<std::vector<double>>()));
    }
    params.validate();
    return params;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params) {
  write_text(path, checkpoint_json(params).dump(1) + "\n");
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  try {
    return checkpoint_from_json(json::parse(read_text(path)));
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace coal
