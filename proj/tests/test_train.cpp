#include <doctest.h>

#include <cmath>
#include <fstream>
#include <set>

#include "phogad/error.hpp"
#include "phogad/random.hpp"
#include "phogad/synthetic.hpp"
#include "phogad/train_eval.hpp"
#include "test_util.hpp"

using namespace phogad;

namespace {

// Normal edges near 0.2, anomalies near 0.8 in every coordinate.
BehaviorGraph separable_graph(std::uint64_t seed, std::size_t edges = 200, std::size_t dim = 8) {
  Rng rng(seed);
  std::vector<EdgeInput> es;
  for (std::size_t i = 0; i < edges; ++i) {
    const bool anomaly = i % 5 == 0;
    EdgeInput e{"n" + std::to_string(rng.below(30)), "n" + std::to_string(rng.below(30)), std::vector<double>(dim),
                anomaly ? Label::anomalous : Label::normal};
    for (auto& x : e.attr) x = (anomaly ? 0.8 : 0.2) + 0.05 * rng.normal();
    es.push_back(std::move(e));
  }
  return node_attr_from_edges(test::from_edges(es));
}

std::vector<Label> labels_of(std::initializer_list<int> xs) {
  std::vector<Label> out;
  for (int x : xs) out.push_back(x ? Label::anomalous : Label::normal);
  return out;
}

}  // namespace

TEST_CASE("focal loss spot values") {
  FocalConfig cfg;
  CHECK(std::abs(focal_loss(0.5, 1, cfg) - 0.5 * std::log(2.0)) <= 1e-12);
  // Default normal-class term at delta 2: (-1)(-1)(0.25) log 0.5.
  CHECK(focal_loss(0.5, 0, cfg) == doctest::Approx(0.25 * std::log(0.5)));
  CHECK(focal_loss(1.0 - 1e-12, 1, cfg) < 1e-12);
  cfg.standard_focal = true;
  CHECK(focal_loss(0.5, 0, cfg) == doctest::Approx(-0.25 * std::log(0.5)));
  // Clamping keeps the extremes finite.
  CHECK(std::isfinite(focal_loss(0.0, 1, cfg)));
  CHECK(std::isfinite(focal_loss(1.0, 0, cfg)));
}

TEST_CASE("property: gamma 0 and delta 0.5 give half the cross-entropy") {
  for (bool standard : {false, true}) {
    FocalConfig cfg{0.5, 0.0, standard};
    for (int i = 1; i <= 100; ++i) {
      const double p = i / 101.0;
      CHECK(std::abs(focal_loss(p, 1, cfg) - 0.5 * -std::log(p)) <= 1e-12);
      CHECK(std::abs(focal_loss(p, 0, cfg) - 0.5 * -std::log(1.0 - p)) <= 1e-12);
    }
  }
}

TEST_CASE("property: anomalous-class loss is non-negative and decreasing") {
  Rng rng(2);
  for (int round = 0; round < 200; ++round) {
    FocalConfig cfg{rng.uniform(1.0, 4.0), rng.uniform(0.0, 4.0), false};
    double prev = std::numeric_limits<double>::infinity();
    for (int i = 1; i < 50; ++i) {
      const double l = focal_loss(i / 50.0, 1, cfg);
      CHECK(l >= 0.0);
      CHECK(l < prev);
      prev = l;
    }
  }
}

TEST_CASE("property: loss gradient matches central differences") {
  Rng rng(3);
  for (int round = 0; round < 300; ++round) {
    FocalConfig cfg{rng.uniform(0.1, 3.0), rng.uniform(0.0, 3.0), rng.uniform() < 0.5};
    const double p = rng.uniform(0.01, 0.99);
    const int y = static_cast<int>(rng.below(2));
    const double h = 1e-6;
    const double numeric = (focal_loss(p + h, y, cfg) - focal_loss(p - h, y, cfg)) / (2 * h);
    CHECK(focal_loss_grad(p, y, cfg) == doctest::Approx(numeric).epsilon(1e-5));
  }
  CHECK(focal_loss_grad(0.0, 1, FocalConfig{}) == 0.0);
}

TEST_CASE("metric examples") {
  auto all_normal = labels_of({0, 0, 0, 0, 0, 0, 0, 0, 0, 1});
  bool none[10] = {};
  auto r = score_predictions(all_normal, none);
  CHECK(r.accuracy == doctest::Approx(0.9));
  CHECK(r.recall == 0.0);
  CHECK(r.precision == 0.0);
  CHECK(r.f1 == 0.0);

  std::vector<Label> labels;
  std::vector<char> pred;
  for (int i = 0; i < 9; ++i) labels.push_back(Label::anomalous), pred.push_back(1);  // tp
  labels.push_back(Label::normal), pred.push_back(1);                                  // fp
  labels.push_back(Label::anomalous), pred.push_back(0);                               // fn
  for (int i = 0; i < 89; ++i) labels.push_back(Label::normal), pred.push_back(0);    // tn
  std::unique_ptr<bool[]> p(new bool[pred.size()]);
  for (std::size_t i = 0; i < pred.size(); ++i) p[i] = pred[i];
  auto m = score_predictions(labels, std::span<const bool>(p.get(), pred.size()));
  CHECK(m.precision == doctest::Approx(0.9));
  CHECK(m.recall == doctest::Approx(0.9));
  CHECK(m.f1 == doctest::Approx(0.9));
  CHECK(m.tp + m.fp + m.tn + m.fn == 100);

  auto perfect_labels = labels_of({1, 0, 1, 0});
  bool perfect[4] = {true, false, true, false};
  auto q = score_predictions(perfect_labels, perfect);
  CHECK(q.f1 == 1.0);
  CHECK(q.accuracy == 1.0);
  CHECK(q.fp + q.fn == 0);
}

TEST_CASE("property: metrics ignore edge order") {
  Rng rng(4);
  for (int round = 0; round < 50; ++round) {
    const std::size_t n = 1 + rng.below(60);
    std::vector<std::pair<Label, bool>> rows(n);
    for (auto& [l, p] : rows) {
      l = rng.uniform() < 0.3 ? Label::anomalous : Label::normal;
      p = rng.uniform() < 0.3;
    }
    auto score = [](const std::vector<std::pair<Label, bool>>& rs) {
      std::vector<Label> ls;
      std::unique_ptr<bool[]> ps(new bool[rs.size()]);
      for (std::size_t i = 0; i < rs.size(); ++i) {
        ls.push_back(rs[i].first);
        ps[i] = rs[i].second;
      }
      return score_predictions(ls, std::span<const bool>(ps.get(), rs.size()));
    };
    auto a = score(rows);
    rng.shuffle(rows);
    CHECK(score(rows) == a);
    if (a.precision + a.recall > 0)
      CHECK(a.f1 == doctest::Approx(2 * a.precision * a.recall / (a.precision + a.recall)));
  }
}

TEST_CASE("stratified split keeps the anomaly ratio and covers every labeled edge once") {
  auto g = separable_graph(1, 400);
  auto s = stratified_split(g, 0.7, 0.15, 9);
  std::set<EdgeId> seen;
  for (auto* part : {&s.train, &s.val, &s.test})
    for (EdgeId e : *part) CHECK(seen.insert(e).second);
  CHECK(seen.size() == 400);
  auto frac = [&](const std::vector<EdgeId>& ids) {
    double a = 0;
    for (EdgeId e : ids) a += g.edge(e).label == Label::anomalous;
    return a / static_cast<double>(ids.size());
  };
  CHECK(s.train.size() == 280);
  CHECK(s.val.size() == 60);
  CHECK(frac(s.train) == doctest::Approx(0.2));
  CHECK(frac(s.val) == doctest::Approx(0.2));
  CHECK(frac(s.test) == doctest::Approx(0.2));
  CHECK(stratified_split(g, 0.7, 0.15, 9).train == s.train);
  CHECK(stratified_split(g, 0.7, 0.15, 10).train != s.train);
}

TEST_CASE("adam: zero gradient leaves parameters, first step moves by about lr") {
  auto net = EdgeEmbedNet::create(8, 1);
  const auto before = net;
  Adam adam(net, 0.01);
  Gradients zero;
  zero.layer1_weight = Eigen::MatrixXd::Zero(net.layer1.weight.rows(), net.layer1.weight.cols());
  zero.layer1_bias = Eigen::VectorXd::Zero(net.layer1.bias.size());
  zero.layer2_weight = Eigen::MatrixXd::Zero(net.layer2.weight.rows(), net.layer2.weight.cols());
  zero.layer2_bias = Eigen::VectorXd::Zero(net.layer2.bias.size());
  zero.head = Eigen::MatrixXd::Zero(2, net.head.cols());
  adam.step(net, zero);
  adam.step(net, zero);
  CHECK(net.layer1.weight == before.layer1.weight);
  CHECK(net.head == before.head);
  CHECK(net.revision == before.revision + 2);

  auto ones = zero;
  ones.head.setConstant(3.0);
  Adam fresh(net, 0.01);
  const auto head = net.head;
  fresh.step(net, ones);
  // Bias-corrected first step is lr * g / (|g| + eps).
  CHECK((net.head - head).maxCoeff() == doctest::Approx(-0.01).epsilon(1e-6));
}

TEST_CASE("training reduces the loss, is deterministic and rejects single-class splits") {
  auto g = separable_graph(5);
  auto adj = EdgeAdjacency::build(g);
  auto w = compute_adjacency_weights(g, adj);
  TrainConfig cfg;
  cfg.dropout = 0.0;
  cfg.epochs = 10;
  cfg.early_stop_patience = 100;
  for (bool standard : {false, true}) {
    auto r = train(g, adj, w, 3, cfg, FocalConfig{2.0, 2.0, standard});
    REQUIRE(r.history.size() == 10);
    for (std::size_t i = 1; i < r.history.size(); ++i) CHECK(r.history[i].loss < r.history[i - 1].loss);
  }

  cfg.epochs = 30;
  cfg.dropout = 0.1;
  auto a = train(g, adj, w, 3, cfg, FocalConfig{});
  auto b = train(g, adj, w, 3, cfg, FocalConfig{});
  CHECK(checkpoint_to_json(a.net) == checkpoint_to_json(b.net));
  CHECK(a.best_epoch == b.best_epoch);
  // The returned net is the best-validation one.
  CHECK(evaluate(a.net, g, adj, w, a.split.val) == a.history.at(a.best_epoch).val);

  std::vector<EdgeInput> es;
  for (const auto& e : g.edges()) es.push_back({g.node(e.a).key, g.node(e.b).key, e.attr, Label::normal});
  auto flat = node_attr_from_edges(test::from_edges(es));
  CHECK(test::error_code([&] { train(flat, adj, compute_adjacency_weights(flat, adj), 3, cfg, FocalConfig{}); }) ==
        Errc::single_class_split);
}

TEST_CASE("the non-negative focal form learns a separable graph") {
  // Wide enough that the narrow hidden layers do not start out dead.
  auto g = separable_graph(6, 300, 32);
  auto adj = EdgeAdjacency::build(g);
  auto w = compute_adjacency_weights(g, adj);
  TrainConfig cfg;
  cfg.learning_rate = 1e-2;
  cfg.epochs = 300;
  cfg.early_stop_patience = 300;
  auto r = train(g, adj, w, 1, cfg, FocalConfig{2.0, 2.0, true});
  CHECK(evaluate(r.net, g, adj, w, r.split.test).f1 >= 0.9);
}

TEST_CASE("ablation driver") {
  auto g = separable_graph(7, 150);
  PhOutcome ph;
  ph.optimized = g;  // nothing selected
  TrainConfig cfg;
  cfg.epochs = 15;
  auto rows = run_ablation(g, ph, 2, cfg, FocalConfig{});
  REQUIRE(rows.size() == 5);
  CHECK(rows[0].name == "without_disentangled_representation");
  CHECK(rows[4].name == "complete");
  CHECK_FALSE(rows[2].use_ph);
  CHECK(rows[2].report == rows[4].report);

  auto adj = EdgeAdjacency::build(g);
  auto w = compute_adjacency_weights(g, adj);
  auto direct = train(g, adj, w, 2, cfg, FocalConfig{});
  CHECK(evaluate(direct.net, g, adj, w, direct.split.test) == rows[4].report);

  test::TempDir dir;
  write_ablation_csv(rows, dir.path() / "a.csv");
  write_history_csv(direct.history, dir.path() / "h.csv");
  std::ifstream h(dir.path() / "h.csv");
  std::string header;
  std::getline(h, header);
  CHECK(header == "epoch,loss,val_accuracy,val_precision,val_recall,val_f1");
  std::ifstream a(dir.path() / "a.csv");
  std::size_t lines = 0;
  for (std::string line; std::getline(a, line);) ++lines;
  CHECK(lines == 6);
}

TEST_CASE("synthetic generator counts and labels") {
  SyntheticSpec s;
  s.seed = 3;
  auto recs = make_synthetic_records(s);
  std::size_t anomalies = 0;
  for (const auto& r : recs) anomalies += r.label == Label::anomalous;
  CHECK(recs.size() == 2000 + anomalies);
  CHECK(anomalies == synthetic_anomaly_count(s));
  CHECK(static_cast<double>(anomalies) / static_cast<double>(recs.size()) == doctest::Approx(0.1).epsilon(1e-3));
  auto again = make_synthetic_records(s);
  CHECK(again.front().features == recs.front().features);
}
