#include <doctest.h>

#include <cmath>
#include <vector>

#include "hebbes/plastic.hpp"

using namespace hebbes;

TEST_CASE("hebbian_delta pointwise cases") {
  CHECK(hebbian_delta({0.0, 3.1, -2.0, 7.7, 0.4}, 0.9, -0.3) == 0.0);
  CHECK(hebbian_delta({1.0, 1.0, 0.0, 0.0, 0.0}, 1.0, 1.0) == 1.0);
  // 0.5 * (1*0.5*(-1) + 2*0.5 + 3*(-1) + 4) = 0.5 * 1.5
  CHECK(hebbian_delta({0.5, 1.0, 2.0, 3.0, 4.0}, 0.5, -1.0) == doctest::Approx(0.75).epsilon(1e-14));
}

TEST_CASE("hebbian_delta is linear in eta") {
  Rng rng(5);
  for (int t = 0; t < 50; ++t) {
    HebbRule r{rng.normal(), rng.normal(), rng.normal(), rng.normal(), rng.normal()};
    double pre = rng.normal(), post = rng.normal();
    double base = hebbian_delta(r, pre, post);

    HebbRule doubled = r;
    doubled.eta = 2.0 * r.eta;  // power-of-two scale: exact in binary
    CHECK(hebbian_delta(doubled, pre, post) == 2.0 * base);

    double k = rng.uniform(-3.0, 3.0);
    HebbRule scaled = r;
    scaled.eta = k * r.eta;
    CHECK(hebbian_delta(scaled, pre, post) ==
          doctest::Approx(k * base).epsilon(1e-12));
  }
}

TEST_CASE("hebbian_delta is affine in each coefficient") {
  Rng rng(6);
  for (int t = 0; t < 50; ++t) {
    HebbRule r{rng.normal(), rng.normal(), rng.normal(), rng.normal(), rng.normal()};
    double pre = rng.normal(), post = rng.normal();
    auto diff = [&](double HebbRule::* field) {
      HebbRule hi = r, lo = r;
      hi.*field += 1.0;
      lo.*field -= 1.0;
      return (hebbian_delta(hi, pre, post) - hebbian_delta(lo, pre, post)) / 2.0;
    };
    CHECK(diff(&HebbRule::a) == doctest::Approx(r.eta * pre * post).epsilon(1e-12));
    CHECK(diff(&HebbRule::b) == doctest::Approx(r.eta * pre).epsilon(1e-12));
    CHECK(diff(&HebbRule::c) == doctest::Approx(r.eta * post).epsilon(1e-12));
    CHECK(diff(&HebbRule::d) == doctest::Approx(r.eta).epsilon(1e-12));
  }
}

TEST_CASE("topology validation and synapse count") {
  CHECK(Topology({4, 8, 1}).synapse_count() == 40);
  CHECK(Topology({2, 2, 1}).synapse_count() == 6);
  CHECK_THROWS_AS(Topology({3}), std::invalid_argument);
  CHECK_THROWS_AS(Topology({3, 0, 1}), std::invalid_argument);
}

TEST_CASE("forward propagates zeros and rejects bad dimensions") {
  PlasticNetwork net(Topology({3, 4, 2}));
  Vector obs(3);
  obs << 0.3, -0.7, 1.1;
  Vector out = net.forward(obs);
  CHECK(out.size() == 2);
  CHECK(out[0] == 0.0);  // all-zero weights, odd squashing
  CHECK(out[1] == 0.0);

  PlasticNetwork tiny(Topology({1, 1, 1}));
  Vector one(1);
  one << 0.7;
  CHECK(tiny.forward(one)[0] == 0.0);

  Vector wrong(4);
  CHECK_THROWS_AS(net.forward(wrong), std::invalid_argument);
}

TEST_CASE("forward matches a dense matrix-product oracle") {
  Topology topo({2, 2, 1});
  PlasticNetwork net(topo);
  net.weights()[0] << 0.3, -0.5, 0.8, 0.1;
  net.weights()[1] << 1.2, -0.9;
  Vector obs(2);
  obs << 0.4, -0.6;

  Vector out = net.forward(obs);

  // independent loop-based forward pass
  double h0 = std::tanh(0.3 * 0.4 + (-0.5) * (-0.6));
  double h1 = std::tanh(0.8 * 0.4 + 0.1 * (-0.6));
  double y = std::tanh(1.2 * h0 + (-0.9) * h1);
  CHECK(out[0] == doctest::Approx(y).epsilon(1e-15));
  CHECK(net.last_activations()[1][0] == doctest::Approx(h0).epsilon(1e-15));
  CHECK(net.last_activations()[1][1] == doctest::Approx(h1).epsilon(1e-15));
  CHECK(net.last_activations()[0][0] == 0.4);  // raw observation
}

TEST_CASE("hebbian_step with all-zero rules is the identity") {
  Topology topo({2, 3, 1});
  PlasticNetwork net = init_weights(topo, 99);
  Vector obs(2);
  obs << 0.5, -0.2;
  net.forward(obs);
  std::vector<Matrix> before = net.weights();
  RuleAssignment zeros;
  zeros.rules.resize(topo.synapse_count());
  net.hebbian_step(zeros);
  for (std::size_t l = 0; l < before.size(); ++l) {
    CHECK((net.weights()[l] - before[l]).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("hebbian_step single synapse identity case") {
  // linear 1-1 net; forward with weight 1 puts pre=post=1, then the weight is
  // reset to 0 before stepping with the pure-correlation rule.
  Topology topo({1, 1}, Activation::Linear);
  PlasticNetwork net(topo);
  net.weights()[0](0, 0) = 1.0;
  Vector obs(1);
  obs << 1.0;
  net.forward(obs);
  net.weights()[0](0, 0) = 0.0;
  RuleAssignment rules;
  rules.rules = {HebbRule{1.0, 1.0, 0.0, 0.0, 0.0}};
  net.hebbian_step(rules);
  CHECK(net.weights()[0](0, 0) == 1.0);
}

TEST_CASE("hebbian_step matches the scalar oracle per synapse") {
  Topology topo({3, 1}, Activation::Linear);  // 3 synapses, one output
  PlasticNetwork net(topo);
  net.weights()[0] << 0.2, -0.1, 0.05;
  Vector obs(3);
  obs << 0.9, -0.4, 0.3;
  net.forward(obs);
  double post = net.last_activations()[1][0];

  RuleAssignment rules;
  rules.rules = {HebbRule{0.3, 1.0, 0.0, -1.0, 0.2},
                 HebbRule{-0.5, 0.0, 2.0, 0.0, 0.0},
                 HebbRule{1.1, 0.5, 0.5, 0.5, 0.5}};
  std::vector<double> expected(3);
  for (int i = 0; i < 3; ++i) {
    const HebbRule& r = rules.rules[i];
    expected[i] = net.weights()[0](0, i) +
                  r.eta * (r.a * obs[i] * post + r.b * obs[i] + r.c * post + r.d);
  }
  net.hebbian_step(rules);
  for (int i = 0; i < 3; ++i) {
    CHECK(net.weights()[0](0, i) == doctest::Approx(expected[i]).epsilon(1e-15));
  }
}

TEST_CASE("flat synapse index is layer-major then post-row-major") {
  Topology topo({2, 2, 1}, Activation::Linear);
  PlasticNetwork net(topo);
  Vector obs(2);
  obs << 1.0, 1.0;
  net.forward(obs);  // all activations: hidden = 0, output = 0, input = 1

  // Only the D term fires on zero activations; make it the flat index.
  RuleAssignment rules;
  for (int i = 0; i < topo.synapse_count(); ++i) {
    rules.rules.push_back(HebbRule{1.0, 0.0, 0.0, 0.0, static_cast<double>(i)});
  }
  net.hebbian_step(rules);
  CHECK(net.weights()[0](0, 0) == 0.0);  // idx 0 = layer 0, post 0, pre 0
  CHECK(net.weights()[0](0, 1) == 1.0);
  CHECK(net.weights()[0](1, 0) == 2.0);
  CHECK(net.weights()[0](1, 1) == 3.0);  // clip is 3.0; delta 3 lands exactly there
  CHECK(net.weights()[1](0, 0) == 3.0);  // idx 4 clipped from 4 to the bound
  CHECK(net.weights()[1](0, 1) == 3.0);  // idx 5 clipped
}

TEST_CASE("weights stay inside the clip range") {
  Topology topo({2, 2}, Activation::Linear);
  PlasticNetwork net(topo, 3.0);
  Vector obs(2);
  obs << 1.0, 1.0;
  RuleAssignment rules;
  for (int i = 0; i < 4; ++i) rules.rules.push_back(HebbRule{5.0, 0.0, 0.0, 0.0, 1.0});
  for (int step = 0; step < 10; ++step) {
    net.forward(obs);
    net.hebbian_step(rules);
    for (const Matrix& w : net.weights()) {
      CHECK(w.cwiseAbs().maxCoeff() <= 3.0);
    }
  }
}

TEST_CASE("hebbian_step rejects bad input") {
  Topology topo({2, 2});
  PlasticNetwork net(topo);
  RuleAssignment wrong;
  wrong.rules.resize(3);
  Vector obs(2);
  obs << 0.1, 0.2;
  net.forward(obs);
  CHECK_THROWS_AS(net.hebbian_step(wrong), std::invalid_argument);

  PlasticNetwork fresh(topo);
  RuleAssignment ok;
  ok.rules.resize(4);
  CHECK_THROWS_AS(fresh.hebbian_step(ok), std::logic_error);
}

TEST_CASE("init_weights is deterministic and stays in range") {
  Topology topo({4, 8, 1});
  PlasticNetwork a = init_weights(topo, 42);
  PlasticNetwork b = init_weights(topo, 42);
  for (std::size_t l = 0; l < a.weights().size(); ++l) {
    CHECK((a.weights()[l] - b.weights()[l]).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.weights()[l].cwiseAbs().maxCoeff() <= 0.1);
  }
  PlasticNetwork c = init_weights(topo, 43);
  CHECK((a.weights()[0] - c.weights()[0]).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("init_weights empirical mean matches the uniform-moment oracle") {
  Topology topo({100, 100}, Activation::Linear);  // 1e4 synapses per draw
  double sum = 0.0;
  int count = 0;
  for (int rep = 0; rep < 10; ++rep) {
    PlasticNetwork net = init_weights(topo, 1000 + rep);
    sum += net.weights()[0].sum();
    count += 10000;
  }
  double mean = sum / count;
  double width = 0.2;
  double tol = 3.0 * width / std::sqrt(12.0 * count);
  CHECK(std::abs(mean) < tol);
}

TEST_CASE("forward is deterministic and replayable") {
  Topology topo({4, 6, 2});
  PlasticNetwork net = init_weights(topo, 5);
  Vector obs(4);
  obs << 0.1, -0.2, 0.3, -0.4;
  Vector a = net.forward(obs);
  Vector b = net.forward(obs);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("flat weight round trip") {
  Topology topo({3, 2, 2});
  PlasticNetwork net = init_weights(topo, 17);
  Vector flat = net.flat_weights();
  CHECK(flat.size() == topo.synapse_count());
  PlasticNetwork copy(topo);
  copy.set_flat_weights(flat);
  for (std::size_t l = 0; l < net.weights().size(); ++l) {
    CHECK((net.weights()[l] - copy.weights()[l]).cwiseAbs().maxCoeff() == 0.0);
  }
  Vector bad(flat.size() + 1);
  CHECK_THROWS_AS(copy.set_flat_weights(bad), std::invalid_argument);
}

TEST_CASE("recurrent parameter count and zero behavior") {
  Topology topo({4, 8, 1});
  CHECK(RecurrentNetwork::param_count(topo) == 4 * 8 * (4 + 8) + 8);
  Vector zeros = Vector::Zero(RecurrentNetwork::param_count(topo));
  RecurrentNetwork net(topo, zeros);
  Vector obs(4);
  obs << 0.5, -0.5, 0.25, 0.0;
  Vector out = net.forward(obs);
  CHECK(out[0] == 0.0);

  Vector wrong = Vector::Zero(3);
  CHECK_THROWS_AS(RecurrentNetwork(topo, wrong), std::invalid_argument);
}

TEST_CASE("recurrent cell matches a hand-computed trace") {
  Topology topo({1, 1, 1});
  // params: w_x rows i,f,g,o then w_h rows i,f,g,o then one dense weight
  Vector p(9);
  p << 0.4, -0.3, 0.8, 0.2,   // w_x
       0.1, 0.5, -0.6, 0.3,   // w_h
       1.5;                   // dense
  RecurrentNetwork net(topo, p);
  auto sigmoid = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };

  double h = 0.0, c = 0.0;
  double x = 0.7;
  for (int t = 0; t < 3; ++t) {
    double i = sigmoid(0.4 * x + 0.1 * h);
    double f = sigmoid(-0.3 * x + 0.5 * h);
    double g = std::tanh(0.8 * x + (-0.6) * h);
    double o = sigmoid(0.2 * x + 0.3 * h);
    c = f * c + i * g;
    h = o * std::tanh(c);
    double expected = std::tanh(1.5 * h);
    Vector obs(1);
    obs << x;
    CHECK(net.forward(obs)[0] == doctest::Approx(expected).epsilon(1e-14));
    x = -0.5 * x;
  }

  // state reset reproduces the first step
  net.reset_state();
  Vector obs(1);
  obs << 0.7;
  double i1 = sigmoid(0.4 * 0.7), f1 = sigmoid(-0.3 * 0.7);
  (void)f1;
  double g1 = std::tanh(0.8 * 0.7), o1 = sigmoid(0.2 * 0.7);
  double c1 = i1 * g1, h1 = o1 * std::tanh(c1);
  CHECK(net.forward(obs)[0] == doctest::Approx(std::tanh(1.5 * h1)).epsilon(1e-14));
}
