#include "atp/model_io.hpp"

#include "atp/io.hpp"

namespace atp {

using nlohmann::json;

namespace {

json layer_to_json(const DenseLayer& l) {
  json w = json::array();
  for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
    for (Eigen::Index c = 0; c < l.weight.cols(); ++c) w.push_back(l.weight(r, c));
  return json{{"in", l.weight.cols()},
              {"out", l.weight.rows()},
              {"activation", to_string(l.activation)},
              {"weight", std::move(w)},
              {"bias", io::to_json(l.bias)}};
}

DenseLayer layer_from_json(const json& j) {
  DenseLayer l;
  const auto in = j.at("in").get<Eigen::Index>();
  const auto out = j.at("out").get<Eigen::Index>();
  const auto w = j.at("weight").get<std::vector<double>>();
  if (in <= 0 || out <= 0 || static_cast<Eigen::Index>(w.size()) != in * out) {
    throw IoError("layer weight array does not match its declared shape");
  }
  l.weight.resize(out, in);
  for (Eigen::Index r = 0; r < out; ++r)
    for (Eigen::Index c = 0; c < in; ++c) l.weight(r, c) = w[r * in + c];
  l.bias = io::vector_from_json(j.at("bias"));
  if (l.bias.size() != out) throw IoError("layer bias does not match its declared shape");
  l.activation = activation_from_string(j.at("activation").get<std::string>());
  return l;
}

json net_to_json(const DenseNet& net) {
  json layers = json::array();
  for (const auto& l : net.layers()) layers.push_back(layer_to_json(l));
  return layers;
}

DenseNet net_from_json(const json& j) {
  std::vector<DenseLayer> layers;
  for (const auto& l : j) layers.push_back(layer_from_json(l));
  return DenseNet(std::move(layers));
}

}  // namespace

json model_to_json(const AtpModel& model) {
  const auto& d = model.dims();
  json meta{{"dof", d.dof},
            {"steps", d.steps},
            {"k_z", d.k_z},
            {"k_c", d.k_c},
            {"workspace_dim", d.workspace_dim},
            {"encoder_hidden", d.encoder_hidden},
            {"decoder_hidden", d.decoder_hidden},
            {"hidden_activation", to_string(d.hidden_activation)},
            {"chain", io::to_json(model.chain())},
            {"config_fingerprint", model.config_fingerprint},
            {"final_unit_kl", io::to_json(model.final_unit_kl)}};
  return json{{"format", "atp-model"},
              {"version", kModelFormatVersion},
              {"meta", std::move(meta)},
              {"encoder", net_to_json(model.encoder())},
              {"decoder", net_to_json(model.decoder())}};
}

AtpModel model_from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != "atp-model") throw IoError("not an atp model file");
    if (j.at("version").get<int>() != kModelFormatVersion) {
      throw IoError("unsupported model format version " + std::to_string(j.at("version").get<int>()));
    }
    const auto& meta = j.at("meta");
    ModelDims d;
    d.dof = meta.at("dof").get<int>();
    d.steps = meta.at("steps").get<int>();
    d.k_z = meta.at("k_z").get<int>();
    d.k_c = meta.at("k_c").get<int>();
    d.workspace_dim = meta.at("workspace_dim").get<int>();
    d.encoder_hidden = meta.at("encoder_hidden").get<std::vector<int>>();
    d.decoder_hidden = meta.at("decoder_hidden").get<std::vector<int>>();
    d.hidden_activation = activation_from_string(meta.at("hidden_activation").get<std::string>());
    AtpModel model(io::chain_from_json(meta.at("chain")), d, net_from_json(j.at("encoder")),
                   net_from_json(j.at("decoder")));
    model.config_fingerprint = meta.value("config_fingerprint", "");
    if (meta.contains("final_unit_kl")) model.final_unit_kl = io::vector_from_json(meta.at("final_unit_kl"));
    return model;
  } catch (const json::exception& e) {
    throw IoError(std::string("invalid model file: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const AtpModel& model) {
  io::write_text(path, model_to_json(model).dump() + "\n");
}

AtpModel load_model(const std::filesystem::path& path, const std::optional<KinematicChain>& expected_chain) {
  AtpModel model = model_from_json(io::read_json(path));
  if (expected_chain && !(model.chain() == *expected_chain)) {
    throw DimensionError("model " + path.string() + " was trained for a " + std::to_string(model.chain().dof()) +
                         "-joint chain, requested chain has " + std::to_string(expected_chain->dof()) + " joints");
  }
  return model;
}

}  // namespace atp
