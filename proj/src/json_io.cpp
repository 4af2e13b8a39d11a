#include "dropnet/json_io.hpp"

#include <fstream>
#include <sstream>

#include "dropnet/error.hpp"

namespace dropnet {

json activation_to_json(const Activation& a) {
  if (a.kind == ActivationKind::leaky_relu)
    return json{{"kind", "leaky_relu"}, {"slope", a.slope}};
  return json(to_string(a.kind));
}

Activation activation_from_json(const json& j) {
  if (j.is_string()) {
    Activation a;
    a.kind = activation_kind_from_string(j.get<std::string>());
    return a;
  }
  require(j.is_object() && j.contains("kind"), ErrorCode::io, "activation needs a kind");
  Activation a;
  a.kind = activation_kind_from_string(j.at("kind").get<std::string>());
  if (j.contains("slope")) a.slope = j.at("slope").get<double>();
  return a;
}

json network_to_json(const Network& net) {
  json layers = json::array();
  for (const Layer& l : net.layers()) {
    json weights = json::array();
    for (int r = 0; r < l.rows(); ++r)
      for (int c = 0; c < l.cols(); ++c) weights.push_back(l.weight(r, c));
    json bias = json::array();
    for (int r = 0; r < l.rows(); ++r) bias.push_back(l.bias[r]);
    layers.push_back(json{{"rows", l.rows()},
                          {"cols", l.cols()},
                          {"weights", std::move(weights)},
                          {"bias", std::move(bias)},
                          {"activation", activation_to_json(l.activation)}});
  }
  return json{{"layers", std::move(layers)}};
}

Network network_from_json(const json& j) {
  require(j.is_object() && j.contains("layers") && j.at("layers").is_array(), ErrorCode::io,
          "network json needs a layers array");
  std::vector<Layer> layers;
  for (const json& lj : j.at("layers")) {
    Layer l;
    const int rows = lj.at("rows").get<int>();
    const int cols = lj.at("cols").get<int>();
    require(rows >= 1 && cols >= 1, ErrorCode::io, "layer dims must be positive");
    const auto& w = lj.at("weights");
    const auto& b = lj.at("bias");
    require(static_cast<int>(w.size()) == rows * cols, ErrorCode::io, "weights length != rows*cols");
    require(static_cast<int>(b.size()) == rows, ErrorCode::io, "bias length != rows");
    l.weight = Eigen::MatrixXd(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) l.weight(r, c) = w.at(static_cast<std::size_t>(r * cols + c)).get<double>();
    l.bias = Eigen::VectorXd(rows);
    for (int r = 0; r < rows; ++r) l.bias[r] = b.at(static_cast<std::size_t>(r)).get<double>();
    l.activation = activation_from_json(lj.at("activation"));
    layers.push_back(std::move(l));
  }
  return Network(std::move(layers));
}

json filter_model_to_json(const FilterModel& m) {
  if (m.independent_bernoulli()) {
    json blocks = json::array();
    for (const auto& b : m.blocks()) blocks.push_back(b);
    json keep = json::array();
    for (int s = 0; s < m.block_count(); ++s) keep.push_back(m.block_keep()[s]);
    return json{{"n", m.size()}, {"blocks", std::move(blocks)}, {"keep_prob", std::move(keep)}};
  }
  json pmf = json::array();
  for (const auto& [pattern, prob] : m.support()) {
    const Eigen::VectorXd mask = m.expand_pattern(pattern);
    json outcome = json::array();
    for (int i = 0; i < m.size(); ++i) outcome.push_back(mask[i] > 0.5 ? 1 : 0);
    pmf.push_back(json{{"outcome", std::move(outcome)}, {"prob", prob}});
  }
  return json{{"n", m.size()}, {"pmf", std::move(pmf)}};
}

FilterModel filter_model_from_json(const json& j) {
  require(j.is_object() && j.contains("n"), ErrorCode::io, "filter model json needs n");
  const int n = j.at("n").get<int>();
  if (j.contains("pmf")) {
    std::vector<std::pair<std::vector<std::uint8_t>, double>> pmf;
    for (const json& e : j.at("pmf")) {
      std::vector<std::uint8_t> outcome;
      for (const json& b : e.at("outcome")) outcome.push_back(static_cast<std::uint8_t>(b.get<int>()));
      pmf.emplace_back(std::move(outcome), e.at("prob").get<double>());
    }
    return FilterModel::explicit_pmf(n, std::move(pmf));
  }
  require(j.contains("blocks") && j.contains("keep_prob"), ErrorCode::io,
          "filter model json needs blocks and keep_prob (or pmf)");
  std::vector<std::vector<int>> blocks;
  for (const json& b : j.at("blocks")) blocks.push_back(b.get<std::vector<int>>());
  const auto keep_list = j.at("keep_prob").get<std::vector<double>>();
  Eigen::VectorXd keep(static_cast<Eigen::Index>(keep_list.size()));
  for (std::size_t i = 0; i < keep_list.size(); ++i) keep[static_cast<Eigen::Index>(i)] = keep_list[i];
  return FilterModel::block_bernoulli(n, std::move(blocks), std::move(keep));
}

json coeff_table_to_json(const CoefficientTable& t) {
  json entries = json::array();
  for (std::uint32_t v = 0; v < t.subset_count(); ++v)
    entries.push_back(json{{"subset", v}, {"value", t.at(v)}});
  return json{{"r", t.block_count()}, {"entries", std::move(entries)}};
}

CoefficientTable coeff_table_from_json(const json& j, std::vector<std::vector<int>> blocks) {
  const int r = j.at("r").get<int>();
  std::vector<double> values(static_cast<std::size_t>(1) << r, 0.0);
  for (const json& e : j.at("entries"))
    values.at(e.at("subset").get<std::uint32_t>()) = e.at("value").get<double>();
  if (blocks.empty())
    for (int i = 0; i < r; ++i) blocks.push_back({i});
  return CoefficientTable(std::move(values), std::move(blocks));
}

json tree_to_json(const DropoutTree& tree) {
  json vertices = json::array();
  for (int v = 0; v < tree.vertex_count(); ++v) {
    const auto& vx = tree.vertex(v);
    vertices.push_back(json{{"id", v}, {"level", vx.level}, {"parent", vx.parent}});
  }
  // Distributions are shared per level in the growth policy; deduplicate by
  // serialized form.
  std::vector<json> dists;
  json edges = json::array();
  for (int v = 1; v < tree.vertex_count(); ++v) {
    const json dj = filter_model_to_json(tree.edge(v).filter);
    int idx = -1;
    for (std::size_t i = 0; i < dists.size(); ++i)
      if (dists[i] == dj) {
        idx = static_cast<int>(i);
        break;
      }
    if (idx < 0) {
      dists.push_back(dj);
      idx = static_cast<int>(dists.size()) - 1;
    }
    edges.push_back(json{{"child", v}, {"distribution", idx}, {"stream", tree.edge(v).stream}});
  }
  return json{{"vertices", std::move(vertices)},
              {"distributions", dists},
              {"edges", std::move(edges)}};
}

json error_report_to_json(const ErrorReport& r) {
  json out;
  out["sup_estimate"] = r.sup_estimate;
  json lq = json::object();
  for (const auto& [q, v] : r.lq_estimates) {
    std::ostringstream key;
    key << q;
    lq[key.str()] = v;
  }
  out["lq_estimates"] = std::move(lq);
  if (r.exceedance) {
    out["exceedance"] = json{{"eps", r.exceedance->eps},
                             {"estimate", r.exceedance->estimate},
                             {"exceed_count", r.exceedance->exceed_count},
                             {"samples", r.exceedance->samples},
                             {"confidence", r.exceedance->confidence},
                             {"wilson_lo", r.exceedance->ci.lo},
                             {"wilson_hi", r.exceedance->ci.hi}};
  }
  out["sample_count"] = r.sample_count;
  out["seed"] = r.seed;
  out["grid_spec"] = r.grid_spec;
  return out;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_io("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_io("cannot write " + path);
  out << content;
  if (!out) throw_io("write failed for " + path);
}

std::string config_hash(const json& config) {
  const std::string dump = config.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : dump) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace dropnet
