#include <map>
#include <json.hpp>

#include "ssfr/error.hpp"
#include "ssfr/io.hpp"
#include "ssfr/model.hpp"

namespace ssfr {

using nlohmann::json;

namespace {

json matrix_json(const Matrix& m) {
  return json{{"rows", m.rows()}, {"cols", m.cols()},
              {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

Matrix matrix_from(const json& j) {
  const auto rows = j.at("rows").get<Index>(), cols = j.at("cols").get<Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (rows < 0 || cols < 0 || static_cast<std::size_t>(rows * cols) != data.size())
    throw CheckpointError("checkpoint: array shape does not match its data");
  Matrix m(rows, cols);
  std::copy(data.begin(), data.end(), m.data());
  return m;
}

json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vector_from(const json& j) {
  const auto data = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(data.data(), static_cast<Index>(data.size()));
}

json points_json(const Grid& g) { return std::vector<double>(g.points().begin(), g.points().end()); }

struct BasisTable {
  std::vector<std::shared_ptr<const BasisSystem>> bases;
  std::vector<int> grid_refs;  // -1 outcome grid, j for predictor j

  int index_of(const std::shared_ptr<const BasisSystem>& b, int grid_ref) {
    for (std::size_t i = 0; i < bases.size(); ++i)
      if (bases[i] == b) return static_cast<int>(i);
    bases.push_back(b);
    grid_refs.push_back(grid_ref);
    return static_cast<int>(bases.size() - 1);
  }
};

json part_json(const StructuredPart& part, BasisTable& table) {
  json terms = json::array();
  for (const auto& t : part.terms)
    terms.push_back({{"predictor", t.predictor_index},
                     {"s_basis", table.index_of(t.s_basis, static_cast<int>(t.predictor_index))},
                     {"theta", matrix_json(t.theta)}});
  return json{{"t_basis", table.index_of(part.t_basis, -1)}, {"intercept", vector_json(part.intercept)}, {"terms", terms}};
}

StructuredPart part_from(const json& j, const std::vector<std::shared_ptr<const BasisSystem>>& bases) {
  auto basis_at = [&](const json& idx) {
    const auto i = idx.get<std::size_t>();
    if (i >= bases.size()) throw CheckpointError("checkpoint: basis index out of range");
    return bases[i];
  };
  StructuredPart part;
  part.t_basis = basis_at(j.at("t_basis"));
  part.intercept = vector_from(j.at("intercept"));
  for (const auto& t : j.at("terms"))
    part.terms.push_back({matrix_from(t.at("theta")), basis_at(t.at("s_basis")), t.at("predictor").get<std::size_t>()});
  part.validate();
  return part;
}

}  // namespace

std::string serialize_model(const SemiStructuredModel& model) {
  BasisTable table;
  json doc;
  doc["link"] = to_string(model.link);
  json pred_grids = json::array();
  for (const auto& g : model.predictor_grids) pred_grids.push_back(points_json(g));
  doc["grids"] = {{"predictors", pred_grids}, {"outcome", points_json(model.outcome_grid)}};
  doc["structured"] = part_json(model.structured, table);
  if (model.corrected) doc["corrected"] = part_json(*model.corrected, table);
  if (model.deep) {
    const auto& d = *model.deep;
    json layers = json::array();
    for (const auto& l : d.layers())
      layers.push_back({{"activation", to_string(l.activation)}, {"weights", matrix_json(l.weights)},
                        {"bias", vector_json(l.bias)}});
    doc["deep"] = {{"architecture", to_string(d.config().architecture)},
                   {"hidden_sizes", d.config().hidden_sizes},
                   {"activation", to_string(d.config().activation)},
                   {"dropout_rate", d.config().dropout_rate},
                   {"seed", d.config().seed},
                   {"input_dim", d.input_dim()},
                   {"output_dim", d.output_dim()},
                   {"layers", layers}};
  }
  if (model.standardizer) {
    json means = json::array();
    for (const auto& m : model.standardizer->means) means.push_back(vector_json(m));
    doc["standardizer"] = {{"means", means}, {"scales", model.standardizer->scales}};
  }
  json bases = json::array();
  for (std::size_t i = 0; i < table.bases.size(); ++i)
    bases.push_back({{"knots", table.bases[i]->knots()},
                     {"degree", table.bases[i]->degree()},
                     {"num_basis", table.bases[i]->num_basis()},
                     {"grid", table.grid_refs[i]}});
  doc["bases"] = bases;
  return std::string(kCheckpointMagic) + "\nversion " + std::to_string(kCheckpointVersion) + "\n" + doc.dump() + "\n";
}

SemiStructuredModel deserialize_model(const std::string& text) {
  const std::string magic = std::string(kCheckpointMagic) + "\n";
  if (text.compare(0, magic.size(), magic) != 0) throw CheckpointError("checkpoint: bad magic bytes (corrupt file)");
  const auto line_end = text.find('\n', magic.size());
  if (line_end == std::string::npos) throw CheckpointError("checkpoint: truncated header");
  const std::string version_line = text.substr(magic.size(), line_end - magic.size());
  if (version_line.rfind("version ", 0) != 0) throw CheckpointError("checkpoint: missing version line");
  int version = 0;
  try {
    version = std::stoi(version_line.substr(8));
  } catch (const std::exception&) {
    throw CheckpointError("checkpoint: unreadable version");
  }
  if (version != kCheckpointVersion)
    throw CheckpointError("checkpoint: version " + std::to_string(version) + " not supported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  try {
    const json doc = json::parse(text.begin() + static_cast<std::ptrdiff_t>(line_end + 1), text.end());
    std::vector<Grid> pred_grids;
    for (const auto& g : doc.at("grids").at("predictors")) pred_grids.emplace_back(g.get<std::vector<double>>());
    Grid outcome_grid(doc.at("grids").at("outcome").get<std::vector<double>>());
    std::vector<std::shared_ptr<const BasisSystem>> bases;
    for (const auto& b : doc.at("bases")) {
      const int ref = b.at("grid").get<int>();
      if (ref < -1 || ref >= static_cast<int>(pred_grids.size())) throw CheckpointError("checkpoint: bad grid reference");
      const Grid& g = ref < 0 ? outcome_grid : pred_grids[static_cast<std::size_t>(ref)];
      auto basis = std::make_shared<const BasisSystem>(b.at("knots").get<std::vector<double>>(), b.at("degree").get<int>(), g);
      if (basis->num_basis() != b.at("num_basis").get<int>()) throw CheckpointError("checkpoint: basis size mismatch");
      bases.push_back(std::move(basis));
    }
    SemiStructuredModel model{part_from(doc.at("structured"), bases), std::nullopt, parse_link(doc.at("link").get<std::string>()),
                              pred_grids, outcome_grid, std::nullopt, std::nullopt};
    if (doc.contains("corrected")) model.corrected = part_from(doc.at("corrected"), bases);
    if (doc.contains("deep")) {
      const json& d = doc.at("deep");
      DeepConfig cfg;
      cfg.architecture = parse_architecture(d.at("architecture").get<std::string>());
      cfg.hidden_sizes = d.at("hidden_sizes").get<std::vector<int>>();
      cfg.activation = parse_activation(d.at("activation").get<std::string>());
      cfg.dropout_rate = d.at("dropout_rate").get<double>();
      cfg.seed = d.at("seed").get<std::uint64_t>();
      std::vector<DenseLayer> layers;
      for (const auto& l : d.at("layers"))
        layers.push_back({matrix_from(l.at("weights")), vector_from(l.at("bias")),
                          parse_activation(l.at("activation").get<std::string>())});
      model.deep.emplace(cfg, d.at("input_dim").get<Index>(), d.at("output_dim").get<Index>(), model.structured.t_basis,
                         std::move(layers));
    }
    if (doc.contains("standardizer")) {
      Standardizer s;
      for (const auto& m : doc.at("standardizer").at("means")) s.means.push_back(vector_from(m));
      s.scales = doc.at("standardizer").at("scales").get<std::vector<double>>();
      model.standardizer = std::move(s);
    }
    return model;
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("checkpoint: corrupt body: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw CheckpointError(std::string("checkpoint: inconsistent contents: ") + e.what());
  }
}

void save_model(const SemiStructuredModel& model, const std::filesystem::path& path) {
  io::atomic_write(path, serialize_model(model));
}

SemiStructuredModel load_model(const std::filesystem::path& path) {
  std::string text;
  try {
    text = io::read_text(path);
  } catch (const IoError& e) {
    throw CheckpointError(e.what());
  }
  return deserialize_model(text);
}

}  // namespace ssfr
