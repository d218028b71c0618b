#include "phogad/train_eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "phogad/csv.hpp"
#include "phogad/error.hpp"
#include "phogad/random.hpp"

namespace phogad {
using nlohmann::json;

json FocalConfig::to_json() const {
  return json{{"delta", delta}, {"gamma", gamma}, {"standard_focal", standard_focal}};
}

FocalConfig FocalConfig::from_json(const json& j) {
  FocalConfig c;
  c.delta = j.value("delta", c.delta);
  c.gamma = j.value("gamma", c.gamma);
  c.standard_focal = j.value("standard_focal", c.standard_focal);
  if (!(c.gamma >= 0.0)) throw Error(Errc::invalid_argument, "focal gamma must be non-negative");
  return c;
}

namespace {

// Coefficient of p^gamma log(1-p) in the y = 0 branch.
double normal_weight(const FocalConfig& cfg) {
  return cfg.standard_focal ? -std::abs(1.0 - cfg.delta) : -(1.0 - cfg.delta);
}

}  // namespace

double focal_loss(double p, int y, const FocalConfig& cfg) {
  p = std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
  if (y == 1) return -cfg.delta * std::pow(1.0 - p, cfg.gamma) * std::log(p);
  return normal_weight(cfg) * std::pow(p, cfg.gamma) * std::log(1.0 - p);
}

double focal_loss_grad(double p, int y, const FocalConfig& cfg) {
  if (p < kProbabilityClamp || p > 1.0 - kProbabilityClamp) return 0.0;
  const double g = cfg.gamma;
  if (y == 1) {
    const double modulation = std::pow(1.0 - p, g);
    double d = modulation / p;
    if (g != 0.0) d -= g * std::pow(1.0 - p, g - 1.0) * std::log(p);
    return -cfg.delta * d;
  }
  double d = -std::pow(p, g) / (1.0 - p);
  if (g != 0.0) d += g * std::pow(p, g - 1.0) * std::log(1.0 - p);
  return normal_weight(cfg) * d;
}

void TrainConfig::validate() const {
  if (!(train_fraction > 0.0 && train_fraction < 1.0) || !(val_fraction > 0.0 && val_fraction < 1.0) ||
      !(train_fraction + val_fraction < 1.0))
    throw Error(Errc::invalid_argument, "train and validation fractions must lie in (0, 1) and sum below 1");
  if (!(learning_rate > 0.0)) throw Error(Errc::invalid_argument, "learning rate must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw Error(Errc::invalid_argument, "dropout must lie in [0, 1)");
}

json TrainConfig::to_json() const {
  return json{{"epochs", epochs},
              {"learning_rate", learning_rate},
              {"adam", {{"beta1", adam.beta1}, {"beta2", adam.beta2}, {"eps", adam.eps}}},
              {"train_fraction", train_fraction},
              {"val_fraction", val_fraction},
              {"seed", seed},
              {"early_stop_patience", early_stop_patience},
              {"dropout", dropout},
              {"flags", {{"use_weights", flags.use_weights}, {"use_disentangle", flags.use_disentangle}}}};
}

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  if (j.contains("adam")) {
    const auto& a = j.at("adam");
    c.adam.beta1 = a.value("beta1", c.adam.beta1);
    c.adam.beta2 = a.value("beta2", c.adam.beta2);
    c.adam.eps = a.value("eps", c.adam.eps);
  }
  c.train_fraction = j.value("train_fraction", c.train_fraction);
  c.val_fraction = j.value("val_fraction", c.val_fraction);
  c.seed = j.value("seed", c.seed);
  c.early_stop_patience = j.value("early_stop_patience", c.early_stop_patience);
  c.dropout = j.value("dropout", c.dropout);
  if (j.contains("flags")) {
    c.flags.use_weights = j.at("flags").value("use_weights", true);
    c.flags.use_disentangle = j.at("flags").value("use_disentangle", true);
  }
  c.validate();
  return c;
}

Adam::Adam(const EdgeEmbedNet& net, double learning_rate, AdamConfig cfg) : lr_(learning_rate), cfg_(cfg) {
  for_each_parameter(net, [&](const auto& p) {
    m_.push_back(Eigen::VectorXd::Zero(p.size()));
    v_.push_back(Eigen::VectorXd::Zero(p.size()));
  });
}

void Adam::step(EdgeEmbedNet& net, Gradients& grads) {
  ++t_;
  std::vector<Eigen::Map<Eigen::VectorXd>> gs;
  for_each_gradient(grads, [&](auto& g) { gs.emplace_back(g.data(), g.size()); });
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  std::size_t i = 0;
  for_each_parameter(net, [&](auto& p) {
    if (gs[i].size() != p.size()) throw Error(Errc::dimension_mismatch, "gradient shape differs from parameter");
    Eigen::Map<Eigen::VectorXd> flat(p.data(), p.size());
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * gs[i];
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * gs[i].cwiseAbs2();
    flat.array() -= lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + cfg_.eps);
    ++i;
  });
  ++net.revision;
}

Split stratified_split(const BehaviorGraph& g, double train_fraction, double val_fraction, std::uint64_t seed) {
  Split split;
  int stream = 0;
  for (Label label : {Label::normal, Label::anomalous}) {
    std::vector<EdgeId> ids;
    for (const auto& e : g.edges())
      if (e.label == label) ids.push_back(e.id);
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(stream++)));
    rng.shuffle(ids);
    const auto n = static_cast<double>(ids.size());
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * n));
    const auto n_val = std::min(ids.size() - n_train, static_cast<std::size_t>(std::llround(val_fraction * n)));
    split.train.insert(split.train.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.val.insert(split.val.end(), ids.begin() + static_cast<std::ptrdiff_t>(n_train),
                     ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    split.test.insert(split.test.end(), ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), ids.end());
  }
  for (auto* part : {&split.train, &split.val, &split.test}) std::sort(part->begin(), part->end());
  return split;
}

json EvalReport::to_json() const {
  return json{{"accuracy", accuracy},
              {"precision", precision},
              {"recall", recall},
              {"f1", f1},
              {"confusion", {{"tp", tp}, {"fp", fp}, {"tn", tn}, {"fn", fn}}}};
}

EvalReport score_predictions(std::span<const Label> labels, std::span<const bool> predicted_anomalous) {
  if (labels.size() != predicted_anomalous.size()) throw Error(Errc::dimension_mismatch, "one prediction per label expected");
  EvalReport r;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == Label::unlabeled) continue;
    const bool actual = labels[i] == Label::anomalous;
    const bool predicted = predicted_anomalous[i];
    if (actual && predicted) ++r.tp;
    else if (!actual && predicted) ++r.fp;
    else if (actual) ++r.fn;
    else ++r.tn;
  }
  const auto total = r.tp + r.fp + r.tn + r.fn;
  auto ratio = [](std::size_t a, std::size_t b) { return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b); };
  r.accuracy = ratio(r.tp + r.tn, total);
  r.precision = ratio(r.tp, r.tp + r.fp);
  r.recall = ratio(r.tp, r.tp + r.fn);
  r.f1 = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

std::vector<double> anomaly_probabilities(const Eigen::MatrixXd& logits) {
  std::vector<double> p(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) p[static_cast<std::size_t>(i)] = 1.0 / (1.0 + std::exp(logits(i, 0) - logits(i, 1)));
  return p;
}

EvalReport evaluate(const EdgeEmbedNet& net, const ConvInput& input, const BehaviorGraph& g, std::span<const EdgeId> edges) {
  const auto logits = forward(net, input, Mode::eval, 0).logits;
  std::vector<Label> labels;
  std::vector<bool> predicted;
  labels.reserve(edges.size());
  for (EdgeId e : edges) {
    labels.push_back(g.edge(e).label);
    predicted.push_back(logits(e, 1) > logits(e, 0));
  }
  // vector<bool> has no contiguous storage; copy into a plain array for the span.
  std::unique_ptr<bool[]> flags(new bool[predicted.size()]);
  for (std::size_t i = 0; i < predicted.size(); ++i) flags[i] = predicted[i];
  return score_predictions(labels, std::span<const bool>(flags.get(), predicted.size()));
}

EvalReport evaluate(const EdgeEmbedNet& net, const BehaviorGraph& g, const EdgeAdjacency& adj, const EdgeWeights& w,
                    std::span<const EdgeId> edges) {
  const ConvInput input = ConvInput::build(g, adj, w);
  return evaluate(net, input, g, edges);
}

TrainResult train(const BehaviorGraph& g, const EdgeAdjacency& adj, const EdgeWeights& w, std::uint64_t net_init_seed,
                  const TrainConfig& cfg, const FocalConfig& focal) {
  cfg.validate();
  TrainResult result;
  result.split = stratified_split(g, cfg.train_fraction, cfg.val_fraction, cfg.seed);
  const auto& train_ids = result.split.train;
  const auto anomalies = std::count_if(train_ids.begin(), train_ids.end(),
                                       [&](EdgeId e) { return g.edge(e).label == Label::anomalous; });
  if (anomalies == 0 || static_cast<std::size_t>(anomalies) == train_ids.size())
    throw Error(Errc::single_class_split, "the train split holds only one class");

  const ConvInput input = ConvInput::build(g, adj, w);
  EdgeEmbedNet net = EdgeEmbedNet::create(g.edge_dim(), net_init_seed, cfg.dropout, cfg.flags);
  Adam adam(net, cfg.learning_rate, cfg.adam);
  result.net = net;
  double best_f1 = -1.0;
  std::size_t since_best = 0;
  const double scale = 1.0 / static_cast<double>(train_ids.size());

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto fwd = forward(net, input, Mode::train, derive_seed(cfg.seed, 1000 + epoch));
    const auto p = anomaly_probabilities(fwd.logits);
    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(fwd.logits.rows(), 2);
    double loss = 0.0;
    for (EdgeId e : train_ids) {
      const int y = g.edge(e).label == Label::anomalous ? 1 : 0;
      loss += focal_loss(p[e], y, focal);
      // dp/dl1 = p(1-p), dp/dl0 = -p(1-p).
      const double d = scale * focal_loss_grad(p[e], y, focal) * p[e] * (1.0 - p[e]);
      grad(e, 0) = -d;
      grad(e, 1) = d;
    }
    loss *= scale;
    auto grads = backward(net, fwd.cache, grad);
    adam.step(net, grads);

    EpochLog log{epoch, loss, evaluate(net, input, g, result.split.val)};
    result.history.push_back(log);
    // Ties move the checkpoint to the later, longer-trained epoch; only a
    // strict improvement resets the patience counter.
    const bool improved = log.val.f1 > best_f1;
    if (log.val.f1 >= best_f1) {
      best_f1 = log.val.f1;
      result.net = net;
      result.best_epoch = epoch;
    }
    since_best = improved ? 0 : since_best + 1;
    if (since_best >= cfg.early_stop_patience) break;
  }
  return result;
}

void write_history_csv(const std::vector<EpochLog>& history, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
  out << "epoch,loss,val_accuracy,val_precision,val_recall,val_f1\n";
  for (const auto& h : history)
    out << h.epoch << ',' << csv::format_double(h.loss) << ',' << csv::format_double(h.val.accuracy) << ','
        << csv::format_double(h.val.precision) << ',' << csv::format_double(h.val.recall) << ','
        << csv::format_double(h.val.f1) << '\n';
}

std::vector<AblationRow> run_ablation(const BehaviorGraph& g, const PhOutcome& ph, std::uint64_t net_init_seed,
                                      const TrainConfig& cfg, const FocalConfig& focal) {
  std::vector<AblationRow> rows = {
      {"without_disentangled_representation", true, {true, false}, {}},
      {"without_neighbor_weights", true, {false, true}, {}},
      {"without_persistent_homology", false, {true, true}, {}},
      {"without_any_mechanism", false, {false, false}, {}},
      {"complete", true, {true, true}, {}},
  };
  const EdgeAdjacency adj = EdgeAdjacency::build(g);
  const EdgeWeights raw_w = compute_adjacency_weights(g, adj);
  const EdgeWeights ph_w = compute_adjacency_weights(ph.optimized, adj);
  for (auto& row : rows) {
    const BehaviorGraph& graph = row.use_ph ? ph.optimized : g;
    const EdgeWeights& w = row.use_ph ? ph_w : raw_w;
    TrainConfig run_cfg = cfg;
    run_cfg.flags = row.flags;
    auto trained = train(graph, adj, w, net_init_seed, run_cfg, focal);
    row.report = evaluate(trained.net, graph, adj, w, trained.split.test);
  }
  return rows;
}

void write_ablation_csv(const std::vector<AblationRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
  out << "framework,persistent_homology,neighbor_weights,disentangled,accuracy,precision,recall,f1,tp,fp,tn,fn\n";
  for (const auto& r : rows)
    out << r.name << ',' << r.use_ph << ',' << r.flags.use_weights << ',' << r.flags.use_disentangle << ','
        << csv::format_double(r.report.accuracy) << ',' << csv::format_double(r.report.precision) << ','
        << csv::format_double(r.report.recall) << ',' << csv::format_double(r.report.f1) << ',' << r.report.tp << ','
        << r.report.fp << ',' << r.report.tn << ',' << r.report.fn << '\n';
}

}  // namespace phogad
