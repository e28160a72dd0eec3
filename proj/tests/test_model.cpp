#include <catch2/catch_amalgamated.hpp>

#include "evex/relaxations.hpp"
#include "evex/verifier.hpp"

using namespace evex;

namespace {

model_config tiny_cfg(uint64_t seed = 5) {
  model_config cfg;
  cfg.dim = 8;
  cfg.hidden = 10;
  cfg.classes = 4;
  cfg.seed = seed;
  return cfg;
}

struct test_instance {
  vec claim;
  std::vector<vec> sents;
  vec mu;
};

test_instance random_instance(int dim, int n_sents, double mu_lo, double mu_hi, rng_stream& rng) {
  test_instance t;
  t.claim.resize(dim);
  for (double& x : t.claim) x = rng.normal();
  t.sents.assign(n_sents, vec(dim));
  for (auto& s : t.sents)
    for (double& x : s) x = rng.normal();
  t.mu.resize(n_sents);
  for (double& x : t.mu) x = rng.uniform(mu_lo, mu_hi);
  return t;
}

// central differences on a few entries of every parameter tensor
void check_param_grads(model_params& m, const std::function<double()>& loss, rng_stream& rng,
                       double tol) {
  const double h = 1e-5;
  for (auto& [name, t] : m.named()) {
    for (int probe = 0; probe < 3; ++probe) {
      int i = rng.uniform_int(0, t->size() - 1);
      double keep = t->v[i];
      t->v[i] = keep + h;
      double up = loss();
      t->v[i] = keep - h;
      double dn = loss();
      t->v[i] = keep;
      double fd = (up - dn) / (2 * h);
      double err = std::abs(fd - t->g[i]) / std::max(1.0, std::abs(t->g[i]));
      INFO(name << "[" << i << "] fd=" << fd << " an=" << t->g[i]);
      REQUIRE(err < tol);
    }
  }
}

}  // namespace

TEST_CASE("fresh models start from identity projection and neutral calibration") {
  auto m = make_model(tiny_cfg());
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) REQUIRE(m.proj.v[i * 8 + j] == (i == j ? 1.0 : 0.0));
  REQUIRE(m.calib.v[0] == 1.0);
  REQUIRE(m.calib.v[1] == 0.0);
  REQUIRE(m.pair_weight() == Catch::Approx(0.5).margin(1e-12));
  REQUIRE(m.pair_weight_draw() == Catch::Approx(sigmoid(m.pair_raw.v[0])).margin(1e-15));
  m.pair_raw.v[0] = 50.0;  // softplus saturates past the cap
  REQUIRE(m.pair_weight() == pair_weight_cap);
  REQUIRE(m.pair_weight_draw() == 0.0);
}

TEST_CASE("model init is deterministic in the seed") {
  auto a = make_model(tiny_cfg(5));
  auto b = make_model(tiny_cfg(5));
  auto c = make_model(tiny_cfg(6));
  REQUIRE(a.w1.v == b.w1.v);
  REQUIRE(a.vq.v == b.vq.v);
  REQUIRE(a.w1.v != c.w1.v);
  REQUIRE_THROWS_AS(make_model(model_config{0, 10, 4, 1}), config_error);
}

TEST_CASE("checkpoints round trip bit exactly with metadata") {
  auto m = make_model(tiny_cfg(9));
  rng_stream rng(3);
  for (auto& [name, t] : m.named())
    for (double& x : t->v) x = rng.normal();
  model_metadata meta{{"extractor", "scale"}, {"budget", "8"}};

  std::string blob = serialize_model(m, meta);
  REQUIRE(blob.compare(0, 4, "EVCX") == 0);
  model_metadata meta2;
  auto m2 = deserialize_model(blob, &meta2);
  REQUIRE(meta2 == meta);
  for (auto& [name, t] : m.named()) {
    bool found = false;
    for (auto& [name2, t2] : m2.named())
      if (std::string(name) == name2) {
        REQUIRE(t->shape == t2->shape);
        REQUIRE(std::memcmp(t->v.data(), t2->v.data(), t->v.size() * 8) == 0);
        found = true;
      }
    REQUIRE(found);
  }
  REQUIRE(serialize_model(m2, meta2) == blob);
}

TEST_CASE("corrupt checkpoints are rejected") {
  auto m = make_model(tiny_cfg());
  std::string blob = serialize_model(m, {});
  REQUIRE_THROWS_AS(deserialize_model("EVXX" + blob.substr(4)), config_error);
  REQUIRE_THROWS_AS(deserialize_model(blob.substr(0, 40)), config_error);
  std::string wrong_version = blob;
  wrong_version[4] = 2;
  REQUIRE_THROWS_AS(deserialize_model(wrong_version), config_error);
  REQUIRE_THROWS_AS(deserialize_model(""), config_error);
}

TEST_CASE("matrix helpers multiply and accumulate correctly") {
  tensor w;
  w.reset({2, 3});
  w.v = {1, 2, 3, 4, 5, 6};
  vec y;
  matvec(w, {1, 0, -1}, y);
  REQUIRE(y == vec{-2, -2});
  vec x;
  matvec_t(w, {1, 1}, x);
  REQUIRE(x == vec{5, 7, 9});
  outer_acc(w, {1, 2}, {1, 1, 1});
  REQUIRE(w.g == vec{1, 1, 1, 2, 2, 2});
  outer_acc(w, {1, 2}, {1, 1, 1});
  REQUIRE(w.g[0] == 2.0);
  REQUIRE_THROWS_AS(matvec(w, {1, 2}, y), dimension_error);
}

TEST_CASE("softmax and the label loss match hand values") {
  vec p = softmax(vec(7, 0.0));
  for (double x : p) REQUIRE(x == Catch::Approx(1.0 / 7).margin(1e-15));
  REQUIRE(nll_loss(p, 3) == Catch::Approx(1.9459101490553132).margin(1e-9));

  vec q = softmax({1.0, 2.0, 4.0});
  REQUIRE(q[0] + q[1] + q[2] == Catch::Approx(1.0).margin(1e-14));
  REQUIRE(q[2] > q[1]);
  REQUIRE_THROWS_AS(nll_loss(q, 3), parameter_error);
  REQUIRE_THROWS_AS(softmax(vec{}), size_error);

  // gradient of the loss through the softmax, against central differences
  rng_stream rng(17);
  for (int rep = 0; rep < 10; ++rep) {
    vec z(5);
    for (double& x : z) x = rng.uniform(-3, 3);
    int gold = rng.uniform_int(0, 4);
    vec an = nll_grad_logits(softmax(z), gold);
    double err = finite_difference_check([&](const vec& zz) { return nll_loss(softmax(zz), gold); }, z, an);
    REQUIRE(err < 1e-6);
  }
}

TEST_CASE("feedforward head emits a valid distribution and pools by mask") {
  auto m = make_model(tiny_cfg(21));
  rng_stream rng(4);
  auto t = random_instance(8, 5, 0.0, 1.0, rng);
  vec p = mlp_verify(m, t.claim, t.sents, t.mu);
  double total = 0.0;
  for (double x : p) {
    REQUIRE(x > 0.0);
    total += x;
  }
  REQUIRE(total == Catch::Approx(1.0).margin(1e-12));

  // an all-zero mask is the claim-only prediction, same as no sentences at all
  vec zero_mask(5, 0.0);
  REQUIRE(mlp_verify(m, t.claim, t.sents, zero_mask) == mlp_verify(m, t.claim, {}, {}));

  REQUIRE_THROWS_AS(mlp_verify(m, vec(3, 0.0), t.sents, t.mu), dimension_error);
  REQUIRE_THROWS_AS(mlp_verify(m, t.claim, t.sents, vec(2, 0.0)), dimension_error);
}

TEST_CASE("feedforward backward matches central differences") {
  rng_stream rng(31);
  for (int rep = 0; rep < 10; ++rep) {
    auto m = make_model(tiny_cfg(100 + rep));
    // low mass keeps the pooling divisor at 1, high mass makes it move
    bool high_mass = rep % 2 == 0;
    auto t = random_instance(8, 5, high_mass ? 0.5 : 0.02, high_mass ? 0.9 : 0.15, rng);
    int gold = rng.uniform_int(0, 3);

    mlp_cache cache;
    mlp_verify(m, t.claim, t.sents, t.mu, &cache);
    m.zero_grad();
    auto g = mlp_backward(m, cache, nll_grad_logits(cache.probs, gold));

    auto loss = [&] { return nll_loss(mlp_verify(m, t.claim, t.sents, t.mu), gold); };
    check_param_grads(m, loss, rng, 1e-5);

    vec packed = t.claim;
    for (const auto& s : t.sents) packed.insert(packed.end(), s.begin(), s.end());
    packed.insert(packed.end(), t.mu.begin(), t.mu.end());
    vec an = g.claim;
    for (const auto& s : g.sents) an.insert(an.end(), s.begin(), s.end());
    an.insert(an.end(), g.mu.begin(), g.mu.end());
    auto unpack_loss = [&](const vec& x) {
      vec claim(x.begin(), x.begin() + 8);
      std::vector<vec> sents(5);
      for (int i = 0; i < 5; ++i) sents[i] = vec(x.begin() + 8 + i * 8, x.begin() + 8 + (i + 1) * 8);
      vec mu(x.begin() + 48, x.end());
      return nll_loss(mlp_verify(m, claim, sents, mu), gold);
    };
    REQUIRE(finite_difference_check(unpack_loss, packed, an) < 1e-5);
  }
}

TEST_CASE("graph head is exactly permutation invariant") {
  auto m = make_model(tiny_cfg(41));
  rng_stream rng(7);
  auto t = random_instance(8, 6, 0.0, 1.0, rng);
  t.mu[2] = 0.0;  // keep one sentence out of the graph
  vec base = graph_verify(m, t.claim, t.sents, t.mu);
  double total = 0.0;
  for (double x : base) {
    REQUIRE(x > 0.0);
    total += x;
  }
  REQUIRE(total == Catch::Approx(1.0).margin(1e-12));

  std::vector<int> perm{5, 2, 0, 4, 1, 3};
  for (int rep = 0; rep < 4; ++rep) {
    std::vector<vec> sents2;
    vec mu2;
    for (int i : perm) {
      sents2.push_back(t.sents[i]);
      mu2.push_back(t.mu[i]);
    }
    REQUIRE(graph_verify(m, t.claim, sents2, mu2) == base);  // bitwise equal
    rng.shuffle(perm);
  }
}

TEST_CASE("graph head falls back to a claim-only node under an empty mask") {
  auto m = make_model(tiny_cfg(43));
  rng_stream rng(9);
  auto t = random_instance(8, 4, 0.0, 1.0, rng);
  graph_cache cache;
  vec p = graph_verify(m, t.claim, t.sents, vec(4, 0.0), &cache);
  REQUIRE(cache.nodes.empty());
  REQUIRE(cache.node_in.size() == 1);
  REQUIRE(p == graph_verify(m, t.claim, {}, {}));

  // gradients still reach the claim and the graph parameters
  m.zero_grad();
  auto g = graph_backward(m, cache, nll_grad_logits(cache.probs, 1));
  REQUIRE(norm2(g.claim) > 0.0);
  for (const auto& gs : g.sents) REQUIRE(norm2(gs) == 0.0);
}

TEST_CASE("graph backward matches central differences") {
  rng_stream rng(37);
  for (int rep = 0; rep < 10; ++rep) {
    auto m = make_model(tiny_cfg(200 + rep));
    auto t = random_instance(8, 4, 0.15, 0.85, rng);  // support stays stable under probes
    int gold = rng.uniform_int(0, 3);

    graph_cache cache;
    graph_verify(m, t.claim, t.sents, t.mu, &cache);
    m.zero_grad();
    auto g = graph_backward(m, cache, nll_grad_logits(cache.probs, gold));

    auto loss = [&] { return nll_loss(graph_verify(m, t.claim, t.sents, t.mu), gold); };
    check_param_grads(m, loss, rng, 1e-5);

    vec packed = t.claim;
    for (const auto& s : t.sents) packed.insert(packed.end(), s.begin(), s.end());
    packed.insert(packed.end(), t.mu.begin(), t.mu.end());
    vec an = g.claim;
    for (const auto& s : g.sents) an.insert(an.end(), s.begin(), s.end());
    an.insert(an.end(), g.mu.begin(), g.mu.end());
    auto unpack_loss = [&](const vec& x) {
      vec claim(x.begin(), x.begin() + 8);
      std::vector<vec> sents(4);
      for (int i = 0; i < 4; ++i) sents[i] = vec(x.begin() + 8 + i * 8, x.begin() + 8 + (i + 1) * 8);
      vec mu(x.begin() + 40, x.end());
      return nll_loss(graph_verify(m, claim, sents, mu), gold);
    };
    REQUIRE(finite_difference_check(unpack_loss, packed, an) < 1e-5);
  }
}
