#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <json.hpp>

#include "phogad/graph.hpp"

namespace phogad {

// One edge-convolution layer: z = W * [self_part, neighbor_part] + b.
struct LayerParams {
  Eigen::MatrixXd weight;  // out x (2 * in)
  Eigen::VectorXd bias;    // out

  Eigen::Index in_dim() const { return weight.cols() / 2; }
  Eigen::Index out_dim() const { return weight.rows(); }
};

struct AblationFlags {
  bool use_weights = true;
  bool use_disentangle = true;
};

struct EdgeEmbedNet {
  LayerParams layer1;          // ceil(edge_dim / 4) outputs
  LayerParams layer2;          // ceil(layer1 / 2) outputs
  Eigen::MatrixXd head;        // 2 x layer2 outputs; row 0 = normal, row 1 = anomalous
  Eigen::Vector2d head_bias = Eigen::Vector2d::Zero();
  double dropout_rate = 0.1;
  AblationFlags flags;
  // Bumped whenever parameters change so stale caches can be detected.
  std::uint64_t revision = 0;

  // Glorot-uniform weights, zero biases.
  static EdgeEmbedNet create(std::size_t edge_dim, std::uint64_t seed, double dropout_rate = 0.1,
                             AblationFlags flags = {});
  std::size_t input_dim() const { return static_cast<std::size_t>(layer1.in_dim()); }
  void validate() const;
};

// Applies f to every trainable tensor in a fixed order.
template <class Net, class F>
void for_each_parameter(Net& net, F&& f) {
  f(net.layer1.weight);
  f(net.layer1.bias);
  f(net.layer2.weight);
  f(net.layer2.bias);
  f(net.head);
  f(net.head_bias);
}

struct Gradients {
  Eigen::MatrixXd layer1_weight, layer2_weight, head;
  Eigen::VectorXd layer1_bias, layer2_bias;
  Eigen::Vector2d head_bias = Eigen::Vector2d::Zero();
};

template <class F>
void for_each_gradient(Gradients& g, F&& f) {
  f(g.layer1_weight);
  f(g.layer1_bias);
  f(g.layer2_weight);
  f(g.layer2_bias);
  f(g.head);
  f(g.head_bias);
}

// Cosine similarity of the outer-node attributes, one value per adjacency
// entry (same order as EdgeAdjacency::entries()). Zero if either is the zero vector.
struct EdgeWeights {
  std::vector<double> beta;
};

EdgeWeights compute_adjacency_weights(const BehaviorGraph& g, const EdgeAdjacency& adj);

// Graph-derived tensors the network consumes, built once per graph.
struct ConvInput {
  Eigen::MatrixXd features;                                 // edges x edge_dim
  Eigen::SparseMatrix<double, Eigen::RowMajor> weighted;    // mean of beta * h over N(e)
  Eigen::SparseMatrix<double, Eigen::RowMajor> unweighted;  // mean of h over N(e)

  static ConvInput build(const BehaviorGraph& g, const EdgeAdjacency& adj, const EdgeWeights& w);
  Eigen::Index edge_count() const { return features.rows(); }
};

enum class Mode { train, eval };

struct ForwardCache {
  struct Layer {
    Eigen::MatrixXd input;   // h^(k)
    Eigen::MatrixXd joined;  // [self_part, neighbor_part]
    Eigen::MatrixXd pre;     // z
    Eigen::MatrixXd mask;    // inverted-dropout scale per unit (1 in eval mode)
  };
  Layer layers[2];
  Eigen::MatrixXd embedding;  // h^(2)
  const ConvInput* input = nullptr;
  std::shared_ptr<const ConvInput> owned_input;  // set when forward built the input itself
  std::uint64_t revision = 0;
  AblationFlags flags;
  Mode mode = Mode::eval;
};

struct ForwardResult {
  Eigen::MatrixXd logits;  // edges x 2
  ForwardCache cache;
};

ForwardResult forward(const EdgeEmbedNet& net, const ConvInput& input, Mode mode, std::uint64_t seed);
ForwardResult forward(const EdgeEmbedNet& net, const BehaviorGraph& g, const EdgeAdjacency& adj,
                      const EdgeWeights& w, Mode mode, std::uint64_t seed);

// Exact gradients w.r.t. all parameters under the cached dropout masks.
// beta is treated as a constant. Throws StaleCache if the net changed since
// the forward pass.
Gradients backward(const EdgeEmbedNet& net, const ForwardCache& cache, const Eigen::MatrixXd& grad_logits);

nlohmann::json checkpoint_to_json(const EdgeEmbedNet& net);
EdgeEmbedNet checkpoint_from_json(const nlohmann::json& j);
void save_checkpoint(const EdgeEmbedNet& net, const std::filesystem::path& path,
                     const nlohmann::json& training_meta = nlohmann::json::object());
EdgeEmbedNet load_checkpoint(const std::filesystem::path& path, nlohmann::json* training_meta = nullptr);

}  // namespace phogad
