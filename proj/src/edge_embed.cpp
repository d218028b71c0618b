#include "phogad/edge_embed.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "phogad/error.hpp"
#include "phogad/random.hpp"

namespace phogad {
using nlohmann::json;

namespace {

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

void glorot(Eigen::MatrixXd& m, Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  m.resize(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.uniform(-a, a);
}

}  // namespace

EdgeEmbedNet EdgeEmbedNet::create(std::size_t edge_dim, std::uint64_t seed, double dropout_rate, AblationFlags flags) {
  if (edge_dim == 0) throw Error(Errc::dimension_mismatch, "edge attributes are empty");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw Error(Errc::invalid_argument, "dropout rate must lie in [0, 1)");
  const auto d = static_cast<Eigen::Index>(edge_dim);
  const auto h1 = static_cast<Eigen::Index>(ceil_div(edge_dim, 4));
  const auto h2 = static_cast<Eigen::Index>(ceil_div(static_cast<std::size_t>(h1), 2));
  Rng rng(seed);
  EdgeEmbedNet net;
  glorot(net.layer1.weight, h1, 2 * d, 2 * d, h1, rng);
  net.layer1.bias = Eigen::VectorXd::Zero(h1);
  glorot(net.layer2.weight, h2, 2 * h1, 2 * h1, h2, rng);
  net.layer2.bias = Eigen::VectorXd::Zero(h2);
  glorot(net.head, 2, h2, h2, 2, rng);
  net.head_bias.setZero();
  net.dropout_rate = dropout_rate;
  net.flags = flags;
  return net;
}

void EdgeEmbedNet::validate() const {
  auto fail = [](const std::string& what) { throw Error(Errc::dimension_mismatch, what); };
  if (layer1.weight.cols() % 2 || layer2.weight.cols() % 2) fail("layer weights must take two equal-width parts");
  if (layer1.bias.size() != layer1.weight.rows() || layer2.bias.size() != layer2.weight.rows()) fail("bias length");
  if (layer2.in_dim() != layer1.out_dim()) fail("layer2 input width differs from layer1 output");
  if (head.rows() != 2 || head.cols() != layer2.out_dim()) fail("head must map layer2 output to 2 logits");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw Error(Errc::invalid_argument, "dropout rate must lie in [0, 1)");
}

EdgeWeights compute_adjacency_weights(const BehaviorGraph& g, const EdgeAdjacency& adj) {
  std::vector<double> norms(g.node_count());
  for (const auto& n : g.nodes()) {
    double s = 0.0;
    for (double x : n.attr) s += x * x;
    norms[n.id] = std::sqrt(s);
  }
  EdgeWeights w;
  w.beta.reserve(adj.entry_count());
  for (const auto& entry : adj.entries()) {
    const auto& u = g.node(entry.outer_self).attr;
    const auto& v = g.node(entry.outer_neighbor).attr;
    const double nu = norms[entry.outer_self], nv = norms[entry.outer_neighbor];
    if (nu == 0.0 || nv == 0.0 || u.size() != v.size()) {
      w.beta.push_back(0.0);
      continue;
    }
    double dot = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) dot += u[k] * v[k];
    w.beta.push_back(std::clamp(dot / (nu * nv), -1.0, 1.0));
  }
  return w;
}

ConvInput ConvInput::build(const BehaviorGraph& g, const EdgeAdjacency& adj, const EdgeWeights& w) {
  if (w.beta.size() != adj.entry_count()) throw Error(Errc::dimension_mismatch, "one weight per adjacency entry expected");
  if (adj.edge_count() != g.edge_count()) throw Error(Errc::dimension_mismatch, "adjacency built for another graph");
  const auto n_edges = static_cast<Eigen::Index>(g.edge_count());
  ConvInput in;
  in.features.resize(n_edges, static_cast<Eigen::Index>(g.edge_dim()));
  for (const auto& e : g.edges())
    for (std::size_t k = 0; k < e.attr.size(); ++k) in.features(e.id, static_cast<Eigen::Index>(k)) = e.attr[k];

  std::vector<Eigen::Triplet<double>> weighted, unweighted;
  weighted.reserve(adj.entry_count());
  unweighted.reserve(adj.entry_count());
  for (EdgeId e = 0; e < g.edge_count(); ++e) {
    const auto nbrs = adj.neighbors(e);
    if (nbrs.empty()) continue;
    const double scale = 1.0 / static_cast<double>(nbrs.size());
    for (std::size_t k = 0; k < nbrs.size(); ++k) {
      const double beta = w.beta[adj.offset(e) + k];
      weighted.emplace_back(e, nbrs[k].neighbor, beta * scale);
      unweighted.emplace_back(e, nbrs[k].neighbor, scale);
    }
  }
  in.weighted.resize(n_edges, n_edges);
  in.weighted.setFromTriplets(weighted.begin(), weighted.end());
  in.unweighted.resize(n_edges, n_edges);
  in.unweighted.setFromTriplets(unweighted.begin(), unweighted.end());
  return in;
}

ForwardResult forward(const EdgeEmbedNet& net, const ConvInput& input, Mode mode, std::uint64_t seed) {
  net.validate();
  if (static_cast<std::size_t>(input.features.cols()) != net.input_dim())
    throw Error(Errc::dimension_mismatch, "edge_dim " + std::to_string(input.features.cols()) +
                                              " does not match network input " + std::to_string(net.input_dim()));
  ForwardResult out;
  auto& cache = out.cache;
  cache.input = &input;
  cache.revision = net.revision;
  cache.flags = net.flags;
  cache.mode = mode;
  const auto& agg = net.flags.use_weights ? input.weighted : input.unweighted;
  const LayerParams* layers[2] = {&net.layer1, &net.layer2};
  Eigen::MatrixXd h = input.features;
  for (int k = 0; k < 2; ++k) {
    auto& lc = cache.layers[k];
    const auto& p = *layers[k];
    const Eigen::Index width = h.cols();
    Eigen::MatrixXd neighbor = agg * h;
    lc.joined.resize(h.rows(), 2 * width);
    lc.joined.leftCols(width) = net.flags.use_disentangle ? h : neighbor;
    lc.joined.rightCols(width) = neighbor;
    lc.pre = (lc.joined * p.weight.transpose()).rowwise() + p.bias.transpose();
    lc.mask = Eigen::MatrixXd::Ones(lc.pre.rows(), lc.pre.cols());
    if (mode == Mode::train && net.dropout_rate > 0.0) {
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
      const double keep_scale = 1.0 / (1.0 - net.dropout_rate);
      for (Eigen::Index r = 0; r < lc.mask.rows(); ++r)
        for (Eigen::Index c = 0; c < lc.mask.cols(); ++c)
          lc.mask(r, c) = rng.uniform() < net.dropout_rate ? 0.0 : keep_scale;
    }
    lc.input = std::move(h);
    h = lc.pre.cwiseMax(0.0).cwiseProduct(lc.mask);
  }
  cache.embedding = h;
  out.logits = (h * net.head.transpose()).rowwise() + net.head_bias.transpose();
  return out;
}

ForwardResult forward(const EdgeEmbedNet& net, const BehaviorGraph& g, const EdgeAdjacency& adj,
                      const EdgeWeights& w, Mode mode, std::uint64_t seed) {
  auto input = std::make_shared<const ConvInput>(ConvInput::build(g, adj, w));
  ForwardResult out = forward(net, *input, mode, seed);
  out.cache.owned_input = std::move(input);
  return out;
}

Gradients backward(const EdgeEmbedNet& net, const ForwardCache& cache, const Eigen::MatrixXd& grad_logits) {
  if (cache.input == nullptr || cache.revision != net.revision || cache.flags.use_weights != net.flags.use_weights ||
      cache.flags.use_disentangle != net.flags.use_disentangle)
    throw Error(Errc::stale_cache, "forward cache does not belong to the current parameters");
  if (grad_logits.rows() != cache.embedding.rows() || grad_logits.cols() != 2)
    throw Error(Errc::dimension_mismatch, "grad_logits must be edges x 2");
  if (cache.layers[1].joined.cols() != net.layer2.weight.cols() || cache.layers[0].joined.cols() != net.layer1.weight.cols())
    throw Error(Errc::stale_cache, "forward cache shapes differ from the network");

  Gradients g;
  g.head = grad_logits.transpose() * cache.embedding;
  g.head_bias = grad_logits.colwise().sum().transpose();
  Eigen::MatrixXd grad_h = grad_logits * net.head;

  const auto& agg = net.flags.use_weights ? cache.input->weighted : cache.input->unweighted;
  const LayerParams* layers[2] = {&net.layer1, &net.layer2};
  Eigen::MatrixXd* weight_grads[2] = {&g.layer1_weight, &g.layer2_weight};
  Eigen::VectorXd* bias_grads[2] = {&g.layer1_bias, &g.layer2_bias};
  for (int k = 1; k >= 0; --k) {
    const auto& lc = cache.layers[k];
    const Eigen::MatrixXd grad_pre =
        grad_h.cwiseProduct(lc.mask).cwiseProduct((lc.pre.array() > 0.0).cast<double>().matrix());
    *weight_grads[k] = grad_pre.transpose() * lc.joined;
    *bias_grads[k] = grad_pre.colwise().sum().transpose();
    if (k == 0) break;
    const Eigen::MatrixXd grad_joined = grad_pre * layers[k]->weight;
    const Eigen::Index width = grad_joined.cols() / 2;
    if (net.flags.use_disentangle)
      grad_h = grad_joined.leftCols(width) + agg.transpose() * grad_joined.rightCols(width);
    else
      grad_h = agg.transpose() * (grad_joined.leftCols(width) + grad_joined.rightCols(width));
  }
  return g;
}

namespace {

template <class M>
json tensor_json(const M& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  return json{{"shape", {m.rows(), m.cols()}}, {"data", data}};
}

Eigen::MatrixXd tensor_from(const json& j) {
  const auto shape = j.at("shape").get<std::vector<Eigen::Index>>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (shape.size() != 2 || static_cast<std::size_t>(shape[0] * shape[1]) != data.size())
    throw Error(Errc::bad_format, "tensor shape does not match its data");
  Eigen::MatrixXd m(shape[0], shape[1]);
  for (Eigen::Index r = 0; r < shape[0]; ++r)
    for (Eigen::Index c = 0; c < shape[1]; ++c) m(r, c) = data[static_cast<std::size_t>(r * shape[1] + c)];
  return m;
}

constexpr const char* kCheckpointFormat = "phogad-edge-embed";
constexpr int kCheckpointVersion = 1;

}  // namespace

json checkpoint_to_json(const EdgeEmbedNet& net) {
  return json{{"format", kCheckpointFormat},
              {"version", kCheckpointVersion},
              {"edge_dim", net.input_dim()},
              {"dropout_rate", net.dropout_rate},
              {"flags", {{"use_weights", net.flags.use_weights}, {"use_disentangle", net.flags.use_disentangle}}},
              {"tensors",
               {{"layer1.weight", tensor_json(net.layer1.weight)},
                {"layer1.bias", tensor_json(net.layer1.bias)},
                {"layer2.weight", tensor_json(net.layer2.weight)},
                {"layer2.bias", tensor_json(net.layer2.bias)},
                {"head.weight", tensor_json(net.head)},
                {"head.bias", tensor_json(net.head_bias)}}}};
}

EdgeEmbedNet checkpoint_from_json(const json& j) {
  try {
    if (j.at("format") != kCheckpointFormat) throw Error(Errc::bad_format, "not an edge-embedding checkpoint");
    if (j.at("version") != kCheckpointVersion)
      throw Error(Errc::bad_format, "unsupported checkpoint version " + j.at("version").dump());
    EdgeEmbedNet net;
    const auto& t = j.at("tensors");
    net.layer1.weight = tensor_from(t.at("layer1.weight"));
    net.layer1.bias = tensor_from(t.at("layer1.bias"));
    net.layer2.weight = tensor_from(t.at("layer2.weight"));
    net.layer2.bias = tensor_from(t.at("layer2.bias"));
    net.head = tensor_from(t.at("head.weight"));
    const Eigen::MatrixXd hb = tensor_from(t.at("head.bias"));
    if (hb.size() != 2) throw Error(Errc::bad_format, "head bias must have 2 entries");
    net.head_bias = Eigen::Map<const Eigen::Vector2d>(hb.data());
    net.dropout_rate = j.at("dropout_rate").get<double>();
    net.flags.use_weights = j.at("flags").at("use_weights").get<bool>();
    net.flags.use_disentangle = j.at("flags").at("use_disentangle").get<bool>();
    net.validate();
    return net;
  } catch (const json::exception& ex) {
    throw Error(Errc::bad_format, std::string("checkpoint: ") + ex.what());
  }
}

void save_checkpoint(const EdgeEmbedNet& net, const std::filesystem::path& path, const json& training_meta) {
  json j = checkpoint_to_json(net);
  j["training"] = training_meta;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
  out << j.dump(1) << '\n';
}

EdgeEmbedNet load_checkpoint(const std::filesystem::path& path, json* training_meta) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& ex) {
    throw Error(Errc::bad_format, path.string() + ": " + ex.what());
  }
  if (training_meta) *training_meta = j.value("training", json::object());
  return checkpoint_from_json(j);
}

}  // namespace phogad
