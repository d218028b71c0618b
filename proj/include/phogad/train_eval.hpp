#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "phogad/edge_embed.hpp"
#include "phogad/graph.hpp"
#include "phogad/homology.hpp"

namespace phogad {

// Loss = (y-1)(1-delta) p^gamma log(1-p) - y delta (1-p)^gamma log p, with p
// the anomalous-class probability. `standard_focal` swaps the y=0 branch for
// -|1-delta| p^gamma log(1-p), which stays non-negative for every delta.
struct FocalConfig {
  double delta = 2.0;
  double gamma = 2.0;
  bool standard_focal = false;

  nlohmann::json to_json() const;
  static FocalConfig from_json(const nlohmann::json& j);
};

inline constexpr double kProbabilityClamp = 1e-7;

double focal_loss(double p, int y, const FocalConfig& cfg);
// d loss / d p; zero where p was clamped.
double focal_loss_grad(double p, int y, const FocalConfig& cfg);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  std::size_t epochs = 200;
  double learning_rate = 1e-3;
  AdamConfig adam;
  double train_fraction = 0.7;
  double val_fraction = 0.15;
  std::uint64_t seed = 0;  // splits and dropout masks
  std::size_t early_stop_patience = 20;
  double dropout = 0.1;
  AblationFlags flags;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

class Adam {
 public:
  Adam(const EdgeEmbedNet& net, double learning_rate, AdamConfig cfg = {});
  void step(EdgeEmbedNet& net, Gradients& grads);
  std::size_t steps() const noexcept { return t_; }

 private:
  double lr_;
  AdamConfig cfg_;
  std::size_t t_ = 0;
  std::vector<Eigen::VectorXd> m_, v_;
};

struct Split {
  std::vector<EdgeId> train, val, test;
};

// Per-class shuffles so every split keeps the anomaly ratio; unlabeled edges
// are left out of all three.
Split stratified_split(const BehaviorGraph& g, double train_fraction, double val_fraction, std::uint64_t seed);

struct EvalReport {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  nlohmann::json to_json() const;
  bool operator==(const EvalReport&) const = default;
};

// Anomalous is the positive class. `predicted_anomalous[i]` pairs with labels[i].
EvalReport score_predictions(std::span<const Label> labels, std::span<const bool> predicted_anomalous);

// Argmax of the logits over the given edges (unlabeled edges are skipped).
EvalReport evaluate(const EdgeEmbedNet& net, const ConvInput& input, const BehaviorGraph& g, std::span<const EdgeId> edges);
EvalReport evaluate(const EdgeEmbedNet& net, const BehaviorGraph& g, const EdgeAdjacency& adj, const EdgeWeights& w,
                    std::span<const EdgeId> edges);

// Anomalous-class probability per edge.
std::vector<double> anomaly_probabilities(const Eigen::MatrixXd& logits);

struct EpochLog {
  std::size_t epoch = 0;
  double loss = 0.0;
  EvalReport val;
};

struct TrainResult {
  EdgeEmbedNet net;  // best validation-F1 checkpoint
  std::vector<EpochLog> history;
  std::size_t best_epoch = 0;
  Split split;
};

// Full-batch Adam on the mean focal loss of the train split. The returned net
// is the last epoch reaching the best validation F1. Throws SingleClassSplit.
TrainResult train(const BehaviorGraph& g, const EdgeAdjacency& adj, const EdgeWeights& w, std::uint64_t net_init_seed,
                  const TrainConfig& cfg, const FocalConfig& focal);

void write_history_csv(const std::vector<EpochLog>& history, const std::filesystem::path& path);

struct AblationRow {
  std::string name;
  bool use_ph = true;
  AblationFlags flags;
  EvalReport report;
};

// The five rows of the mechanism ablation, in the order: without disentangled
// representation, without neighbor weights, without persistent homology,
// without any of the three, complete. All rows share seeds and splits and are
// scored on the test split. `ph` is the outcome of persistent homology on `g`.
std::vector<AblationRow> run_ablation(const BehaviorGraph& g, const PhOutcome& ph, std::uint64_t net_init_seed,
                                      const TrainConfig& cfg, const FocalConfig& focal);

void write_ablation_csv(const std::vector<AblationRow>& rows, const std::filesystem::path& path);

}  // namespace phogad
