#include <doctest.h>

#include <cmath>

#include "kgtrust/conv.hpp"
#include "kgtrust/fixtures.hpp"
#include "support.hpp"

using namespace kgtrust;

namespace {

double leaky(double x) { return x > 0 ? x : 0.2 * x; }
double elu(double x) { return x > 0 ? x : std::exp(x) - 1.0; }

// Per-node loop written from the layer definition, no shared helpers.
Matrix naive_layer(const Matrix& H, const GraphView& view, const LayerParams& p) {
  const auto& A = view.normalized_adjacency;
  const int n = view.num_nodes();
  const Eigen::Index d = H.cols();
  Matrix out(n, p.weight[0].cols());
  for (int i = 0; i < n; ++i) {
    std::vector<int> nbr;
    std::vector<double> a;
    for (SparseRowMatrix::InnerIterator it(A, i); it; ++it) {
      nbr.push_back(static_cast<int>(it.col()));
      a.push_back(it.value());
    }
    // type attention
    double logit[2] = {0, 0};
    bool present[2] = {false, false};
    for (int t = 0; t < 2; ++t) {
      Eigen::RowVectorXd ht = Eigen::RowVectorXd::Zero(d);
      for (std::size_t k = 0; k < nbr.size(); ++k) {
        if (view.node_type[static_cast<std::size_t>(nbr[k])] == t) {
          ht += a[k] * H.row(nbr[k]);
          present[t] = true;
        }
      }
      double s = 0;
      for (Eigen::Index c = 0; c < d; ++c) s += p.type_attention[t](c, 0) * H(i, c) + p.type_attention[t](d + c, 0) * ht(c);
      logit[t] = leaky(s);
    }
    double alpha[2] = {0, 0}, z = 0;
    for (int t = 0; t < 2; ++t) if (present[t]) z += std::exp(logit[t]);
    for (int t = 0; t < 2; ++t) if (present[t]) alpha[t] = std::exp(logit[t]) / z;
    // node attention
    std::vector<double> e(nbr.size());
    double zn = 0;
    for (std::size_t k = 0; k < nbr.size(); ++k) {
      double s = 0;
      for (Eigen::Index c = 0; c < d; ++c) s += p.node_attention(c, 0) * H(i, c) + p.node_attention(d + c, 0) * H(nbr[k], c);
      e[k] = std::exp(leaky(alpha[view.node_type[static_cast<std::size_t>(nbr[k])]] * s));
      zn += e[k];
    }
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(out.cols());
    for (std::size_t k = 0; k < nbr.size(); ++k) {
      acc += (e[k] / zn) * (H.row(nbr[k]) * p.weight[view.node_type[static_cast<std::size_t>(nbr[k])]]);
    }
    for (Eigen::Index c = 0; c < out.cols(); ++c) out(i, c) = elu(acc(c));
  }
  return out;
}

HeteroGraph six_nodes() {
  // 4 users, 2 objects; user 3 has no trust edges
  return HeteroGraph(4, 2, {{0, 1}, {1, 2}, {2, 0}}, {{0, 4}, {1, 4}, {2, 5}, {3, 5}}, {{4, 5}});
}

}  // namespace

TEST_CASE("type embedding sums the typed neighbors") {
  HeteroGraph g = six_nodes();
  GraphView view = build_view(g, {}, Role::Trustor);
  std::mt19937_64 rng(1);
  Matrix H = random_matrix(6, 3, rng);
  Eigen::VectorXd users = type_embedding(3, NodeType::User, view, H);
  // user 3 has only itself among users
  const double self = view.normalized_adjacency.coeff(3, 3);
  CHECK((users - self * H.row(3).transpose()).norm() < 1e-12);
  Eigen::VectorXd objects = type_embedding(3, NodeType::Object, view, H);
  const double w = view.normalized_adjacency.coeff(3, 5);
  CHECK(w > 0.0);
  CHECK((objects - w * H.row(5).transpose()).norm() < 1e-12);
  HeteroGraph lonely(1, 1, {}, {});
  GraphView lv = build_view(lonely, {}, Role::Trustor);
  CHECK(type_embedding(0, NodeType::Object, lv, Matrix::Ones(2, 2)).isZero());
}

TEST_CASE("type attention oracle") {
  std::mt19937_64 rng(2);
  LayerParams p = init_layer(2, 2, rng);
  p.type_attention[0] = Matrix(4, 1);
  p.type_attention[0] << 1, 0, 1, 0;
  p.type_attention[1] = Matrix(4, 1);
  p.type_attention[1] << 0, 0, -1, 0;
  Eigen::VectorXd h(2), hu(2), ho(2);
  h << 1, 0;
  hu << 1, 0;
  ho << 2, 0;
  auto w = type_attention(h, {{NodeType::User, hu}, {NodeType::Object, ho}}, p);
  // logits: 2 and leaky(-2) = -0.4
  const double expect = std::exp(2.0) / (std::exp(2.0) + std::exp(-0.4));
  CHECK(w[NodeType::User] == doctest::Approx(expect).epsilon(1e-12));
  CHECK(w[NodeType::User] + w[NodeType::Object] == doctest::Approx(1.0));
  auto single = type_attention(h, {{NodeType::Object, ho}}, p);
  CHECK(single.size() == 1);
  CHECK(single[NodeType::Object] == 1.0);
}

TEST_CASE("node attention oracle") {
  std::mt19937_64 rng(3);
  LayerParams p = init_layer(1, 1, rng);
  p.node_attention = Matrix(2, 1);
  p.node_attention << 1, 1;
  Matrix H(3, 1);
  H << 1, 2, -3;
  std::vector<int> types{0, 0, 1};
  auto w = node_attention(0, {0, 1, 2}, H, types, {{NodeType::User, 0.5}, {NodeType::Object, 0.5}}, p);
  // scores: 0.5*2 = 1, 0.5*3 = 1.5, leaky(0.5*-2) = -0.2
  const double z = std::exp(1.0) + std::exp(1.5) + std::exp(-0.2);
  CHECK(w[0].second == doctest::Approx(std::exp(1.0) / z));
  CHECK(w[1].second == doctest::Approx(std::exp(1.5) / z));
  CHECK(w[2].second == doctest::Approx(std::exp(-0.2) / z));
  auto alone = node_attention(1, {}, H, types, {}, p);
  REQUIRE(alone.size() == 1);
  CHECK(alone[0] == std::pair<NodeId, double>{1, 1.0});
}

TEST_CASE("property: recorded layer equals the per-node loop") {
  std::mt19937_64 rng(4);
  HeteroGraph g = six_nodes();
  for (Role role : {Role::Trustor, Role::Trustee}) {
    GraphView view = build_view(g, {{3, 0}}, role);
    for (int trial = 0; trial < 20; ++trial) {
      LayerParams p = init_layer(4, 3, rng);
      p.type_attention[0] = random_matrix(8, 1, rng);
      p.type_attention[1] = random_matrix(8, 1, rng);
      p.node_attention = random_matrix(8, 1, rng);
      Matrix H = random_matrix(6, 4, rng);
      Matrix fast = propagate_layer(H, view, p);
      Matrix slow = naive_layer(H, view, p);
      CHECK((fast - slow).cwiseAbs().maxCoeff() < 1e-7);
    }
  }
}

TEST_CASE("single node layer") {
  HeteroGraph g(1, 0, {}, {});
  GraphView view = build_view(g, {}, Role::Trustor);
  std::mt19937_64 rng(5);
  LayerParams p = init_layer(2, 2, rng);
  Matrix H(1, 2);
  H << -0.5, 1.0;
  // one neighbor (itself) gets all attention
  Eigen::RowVectorXd pre = H * p.weight[0];
  Matrix out = propagate_layer(H, view, p);
  CHECK(out(0, 0) == doctest::Approx(elu(pre(0))));
  CHECK(out(0, 1) == doctest::Approx(elu(pre(1))));
  CHECK(propagate_layer(Matrix::Zero(1, 2), view, p).isZero());
}

TEST_CASE("roles agree on symmetric trust and differ on directed trust") {
  std::mt19937_64 rng(6);
  RoleEncoder enc = init_encoder(Role::Trustor, 4, 2, rng);
  EmbeddingTable H0{random_matrix(6, 4, rng)};
  HeteroGraph sym(4, 2, {{0, 1}, {1, 0}, {1, 2}, {2, 1}}, {{0, 4}, {3, 5}});
  auto a = encode_role(build_view(sym, {}, Role::Trustor), H0, enc);
  auto b = encode_role(build_view(sym, {}, Role::Trustee), H0, enc);
  CHECK(a.vectors == b.vectors);
  HeteroGraph directed = six_nodes();
  auto c = encode_role(build_view(directed, {}, Role::Trustor), H0, enc);
  auto d = encode_role(build_view(directed, {}, Role::Trustee), H0, enc);
  CHECK((c.vectors.topRows(4) - d.vectors.topRows(4)).norm() > 1e-6);
}

TEST_CASE("attention weights are distributions") {
  std::mt19937_64 rng(7);
  HeteroGraph g = tiny_graph();
  GraphView view = build_view(g, {}, Role::Trustor);
  ViewOperators ops = prepare_view(view);
  LayerParams p = init_layer(3, 3, rng);
  Tape tape;
  LayerTrace trace;
  propagate_layer(tape, tape.constant(random_matrix(8, 3, rng)), ops, record_layer(tape, p, false), {}, &trace);
  const Matrix& alpha = trace.type_weights.value();
  for (Eigen::Index i = 0; i < alpha.rows(); ++i) CHECK(alpha.row(i).sum() == doctest::Approx(1.0));
  const Matrix& beta = trace.node_weights.value();
  Eigen::Index e = 0;
  for (Eigen::Index i = 0; i < view.normalized_adjacency.rows(); ++i) {
    double s = 0;
    for (SparseRowMatrix::InnerIterator it(view.normalized_adjacency, i); it; ++it) s += beta(e++, 0);
    CHECK(s == doctest::Approx(1.0));
  }
}

TEST_CASE("gated fusion") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd a = random_matrix(5, 1, rng), b = random_matrix(5, 1, rng);
    GateParams g{random_matrix(1, 5, rng, 3.0)};
    Eigen::VectorXd f = fuse(a, b, g);
    for (int k = 0; k < 5; ++k) {
      CHECK(f(k) >= std::min(a(k), b(k)) - 1e-12);
      CHECK(f(k) <= std::max(a(k), b(k)) + 1e-12);
    }
  }
  Eigen::VectorXd a = Eigen::VectorXd::Ones(2), b = Eigen::VectorXd::Zero(2);
  CHECK(fuse(a, b, GateParams{Matrix::Constant(1, 2, 50.0)}).isApprox(a, 1e-12));
  CHECK(fuse(a, b, GateParams{Matrix::Constant(1, 2, -50.0)}).norm() < 1e-12);
  CHECK(fuse(a, b, GateParams{Matrix::Zero(1, 2)})(0) == doctest::Approx(0.5));
  CHECK_THROWS_AS(fuse(a, Eigen::VectorXd::Zero(3), GateParams{Matrix::Zero(1, 2)}), std::invalid_argument);
}
