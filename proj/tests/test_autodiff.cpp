#include <doctest.h>

#include <array>
#include <cmath>
#include <functional>
#include <random>

#include "dyged/error.hpp"
#include "dyged/kernels.hpp"
#include "dyged/tape.hpp"
#include "support.hpp"

using dyged::Error;
using dyged::ErrorKind;
using dyged::Matrix;
namespace ad = dyged::ad;

namespace {

using Builder = std::function<ad::Var(ad::Tape&, std::vector<ad::Var>&)>;

double run_scalar(const Builder& build, const std::vector<Matrix>& inputs) {
  ad::Tape tape;
  std::vector<ad::Var> vars;
  for (const auto& m : inputs) vars.push_back(tape.leaf(m));
  return build(tape, vars).value()[0];
}

// Largest entrywise relative gap between the tape gradient and central
// differences, over every input.
double fd_error(const Builder& build, std::vector<Matrix> inputs, double step = 1e-5) {
  ad::Tape tape;
  std::vector<ad::Var> vars;
  for (const auto& m : inputs) vars.push_back(tape.leaf(m));
  ad::Var loss = build(tape, vars);
  tape.backward(loss);

  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Matrix analytic = vars[k].grad();
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double saved = inputs[k][i];
      inputs[k][i] = saved + step;
      const double up = run_scalar(build, inputs);
      inputs[k][i] = saved - step;
      const double down = run_scalar(build, inputs);
      inputs[k][i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double scale = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
      worst = std::max(worst, std::abs(analytic[i] - numeric) / scale);
    }
  }
  return worst;
}

// Reduces a matrix output to a scalar through fixed random weights so every
// output entry receives a distinct adjoint.
ad::Var project(ad::Tape& tape, ad::Var out, std::uint64_t seed = 99) {
  std::mt19937_64 rng(seed);
  const Matrix& v = out.value();
  ad::Var r = tape.constant(support::random_matrix(v.rows(), v.cols(), rng));
  return ad::sum(ad::mul(out, r));
}

std::vector<Matrix> randoms(std::initializer_list<std::pair<std::size_t, std::size_t>> shapes,
                            std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Matrix> out;
  for (auto [r, c] : shapes) out.push_back(support::random_matrix(r, c, rng));
  return out;
}

}  // namespace

TEST_CASE("matmul values") {
  ad::Tape tape;
  auto a = tape.leaf(Matrix{{1, 2}, {3, 4}});
  auto b = tape.leaf(Matrix{{1}, {1}});
  CHECK(ad::matmul(a, b).value() == Matrix{{3}, {7}});

  std::mt19937_64 rng(1);
  const Matrix m = support::random_matrix(3, 4, rng);
  auto id = tape.leaf(Matrix::identity(3));
  CHECK(ad::matmul(id, tape.leaf(m)).value() == m);
}

TEST_CASE("matmul shape mismatch is a dimension error") {
  ad::Tape tape;
  auto a = tape.leaf(Matrix(2, 3));
  auto b = tape.leaf(Matrix(2, 3));
  try {
    ad::matmul(a, b);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::dimension);
  }
}

TEST_CASE("gradient of sum(a·b) with respect to a") {
  const auto in = randoms({{3, 4}, {4, 2}}, 2);
  auto build = [](ad::Tape&, std::vector<ad::Var>& v) { return ad::sum(ad::matmul(v[0], v[1])); };
  CHECK(fd_error(build, in) < 1e-6);

  ad::Tape tape;
  auto a = tape.leaf(in[0]);
  auto b = tape.leaf(in[1]);
  tape.backward(ad::sum(ad::matmul(a, b)));
  // d/da sum(a·b) = 1·bᵀ: row i of the gradient holds the row sums of b.
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t p = 0; p < 4; ++p) CHECK(a.grad()(i, p) == doctest::Approx(in[1](p, 0) + in[1](p, 1)).epsilon(1e-14));
}

TEST_CASE("elementwise values") {
  ad::Tape tape;
  CHECK(ad::tanh(tape.leaf(Matrix(2, 3))).value() == Matrix(2, 3));
  CHECK(ad::relu(tape.leaf(Matrix{{-1, 2}})).value() == Matrix{{0, 2}});
  CHECK(ad::sigmoid(tape.leaf(Matrix{{0}})).value()[0] == 0.5);
  CHECK(ad::scale(tape.leaf(Matrix{{1, -2}}), 3.0).value() == Matrix{{3, -6}});
  auto a = tape.leaf(Matrix{{1, 2}});
  auto b = tape.leaf(Matrix{{3, 5}});
  CHECK(ad::add(a, b).value() == Matrix{{4, 7}});
  CHECK(ad::sub(a, b).value() == Matrix{{-2, -3}});
  CHECK(ad::mul(a, b).value() == Matrix{{3, 10}});
  CHECK(ad::add_row(tape.leaf(Matrix{{1, 1}, {2, 2}}), b).value() == Matrix{{4, 6}, {5, 7}});
}

TEST_CASE("every differentiable op matches finite differences") {
  // Inputs are uniform on [-1, 1]; the invariant asks for relative error below 1e-5.
  struct Case {
    const char* name;
    std::vector<Matrix> inputs;
    Builder build;
  };
  const std::vector<Case> cases = {
      {"matmul", randoms({{3, 4}, {4, 2}}, 10),
       [](ad::Tape& t, auto& v) { return project(t, ad::matmul(v[0], v[1])); }},
      {"add", randoms({{2, 3}, {2, 3}}, 11), [](ad::Tape& t, auto& v) { return project(t, ad::add(v[0], v[1])); }},
      {"sub", randoms({{2, 3}, {2, 3}}, 12), [](ad::Tape& t, auto& v) { return project(t, ad::sub(v[0], v[1])); }},
      {"mul", randoms({{2, 3}, {2, 3}}, 13), [](ad::Tape& t, auto& v) { return project(t, ad::mul(v[0], v[1])); }},
      {"scale", randoms({{2, 3}}, 14), [](ad::Tape& t, auto& v) { return project(t, ad::scale(v[0], -1.7)); }},
      {"add_row", randoms({{3, 4}, {1, 4}}, 15),
       [](ad::Tape& t, auto& v) { return project(t, ad::add_row(v[0], v[1])); }},
      {"tanh", randoms({{2, 3}}, 16), [](ad::Tape& t, auto& v) { return project(t, ad::tanh(v[0])); }},
      {"sigmoid", randoms({{2, 3}}, 17), [](ad::Tape& t, auto& v) { return project(t, ad::sigmoid(v[0])); }},
      {"relu", randoms({{3, 3}}, 18), [](ad::Tape& t, auto& v) { return project(t, ad::relu(v[0])); }},
      {"softmax_row", randoms({{3, 5}}, 19), [](ad::Tape& t, auto& v) { return project(t, ad::softmax_row(v[0])); }},
      {"concat_rows", randoms({{1, 3}, {2, 3}}, 20),
       [](ad::Tape& t, auto& v) {
         std::array<ad::Var, 2> parts{v[0], v[1]};
         return project(t, ad::concat_rows(parts));
       }},
      {"concat_cols", randoms({{2, 2}, {2, 3}}, 21),
       [](ad::Tape& t, auto& v) {
         std::array<ad::Var, 2> parts{v[0], v[1]};
         return project(t, ad::concat_cols(parts));
       }},
      {"transpose", randoms({{2, 4}}, 22), [](ad::Tape& t, auto& v) { return project(t, ad::transpose(v[0])); }},
      {"sum", randoms({{3, 2}}, 23), [](ad::Tape&, auto& v) { return ad::scale(ad::sum(v[0]), 2.5); }},
      {"mean_rows", randoms({{4, 3}}, 24), [](ad::Tape& t, auto& v) { return project(t, ad::mean_rows(v[0])); }},
      {"max_rows", randoms({{4, 3}}, 25), [](ad::Tape& t, auto& v) { return project(t, ad::max_rows(v[0])); }},
      {"dropout", randoms({{2, 4}}, 26),
       [](ad::Tape& t, auto& v) { return project(t, ad::dropout(v[0], Matrix{{1.25, 0, 1.25, 1.25}, {0, 0, 1.25, 1.25}})); }},
      {"spmm", randoms({{3, 2}}, 27),
       [](ad::Tape& t, auto& v) {
         dyged::Snapshot s;
         s.edges = {{0, 1, 0.5}, {1, 2, 2.0}};
         auto a = std::make_shared<const dyged::SparseMatrix>(dyged::normalized_adjacency_sparse(s, 3));
         return project(t, ad::spmm(a, v[0]));
       }},
      {"weighted_xent", randoms({{4, 2}}, 28),
       [](ad::Tape&, auto& v) {
         const std::array<int, 4> labels{1, 0, 0, 1};
         return ad::weighted_xent(v[0], labels, 0.3);
       }},
      {"composition", randoms({{3, 4}, {4, 4}, {1, 4}}, 29),
       [](ad::Tape& t, auto& v) {
         auto h = ad::tanh(ad::matmul(v[1], ad::transpose(v[0])));
         auto alpha = ad::softmax_row(ad::matmul(v[2], h));
         return project(t, ad::matmul(alpha, v[0]));
       }},
  };
  for (const auto& c : cases) {
    CAPTURE(c.name);
    CHECK(fd_error(c.build, c.inputs) < 1e-5);
  }
}

TEST_CASE("sigmoid gradient at a random input") {
  const auto in = randoms({{1, 6}}, 30);
  auto build = [](ad::Tape& t, std::vector<ad::Var>& v) { return project(t, ad::sigmoid(v[0])); };
  CHECK(fd_error(build, in) < 1e-6);
}

TEST_CASE("softmax_row") {
  ad::Tape tape;
  auto u = ad::softmax_row(tape.leaf(Matrix(1, 3))).value();
  for (std::size_t j = 0; j < 3; ++j) CHECK(u[j] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(ad::softmax_row(tape.leaf(Matrix{{42.0}})).value()[0] == 1.0);

  auto big = ad::softmax_row(tape.leaf(Matrix{{1000.0, 0.0}})).value();
  CHECK(std::isfinite(big[0]));
  CHECK(big[0] == 1.0);  // 1 - e^-1000 rounds to 1
  CHECK(big[1] == doctest::Approx(std::exp(-1000.0)).epsilon(1e-12));

  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix x = support::random_matrix(1, 7, rng, -20, 20);
    Matrix shifted = x;
    for (auto& v : shifted.data()) v += 123.25;
    auto p = ad::softmax_row(tape.leaf(x)).value();
    auto q = ad::softmax_row(tape.leaf(shifted)).value();
    double total = 0.0;
    for (std::size_t j = 0; j < 7; ++j) {
      total += p[j];
      CHECK(std::abs(p[j] - q[j]) <= 1e-12);
    }
    CHECK(std::abs(total - 1.0) <= 1e-12);
  }
}

TEST_CASE("concat shapes") {
  ad::Tape tape;
  auto a = tape.leaf(Matrix(1, 2, 1.0));
  auto b = tape.leaf(Matrix(1, 3, 2.0));
  std::array<ad::Var, 2> cols{a, b};
  auto c = ad::concat_cols(cols).value();
  CHECK(c.rows() == 1);
  CHECK(c.cols() == 5);
  CHECK(c == Matrix{{1, 1, 2, 2, 2}});
  std::array<ad::Var, 1> single{b};
  CHECK(ad::concat_rows(single).value() == b.value());
}

TEST_CASE("backward on simple functionals") {
  std::mt19937_64 rng(32);
  const Matrix w = support::random_matrix(3, 2, rng);
  {
    ad::Tape tape;
    auto v = tape.leaf(w);
    tape.backward(ad::sum(v));
    CHECK(v.grad() == Matrix(3, 2, 1.0));
  }
  {
    ad::Tape tape;
    auto v = tape.leaf(w);
    tape.backward(ad::scale(ad::sum(ad::mul(v, v)), 0.5));
    CHECK(max_abs_diff(v.grad(), w) == 0.0);
  }
}

TEST_CASE("backward: unreachable and constant nodes keep zero gradients") {
  ad::Tape tape;
  auto used = tape.leaf(Matrix{{1, 2}});
  auto unused = tape.leaf(Matrix{{3, 4}});
  auto c = tape.constant(Matrix{{5, 6}});
  auto dangling = ad::tanh(unused);
  tape.backward(ad::sum(ad::mul(used, c)));
  CHECK(used.grad() == Matrix{{5, 6}});
  CHECK(unused.grad() == Matrix(1, 2));
  CHECK(dangling.grad() == Matrix(1, 2));
  CHECK(c.grad() == Matrix(1, 2));
}

TEST_CASE("backward needs a 1x1 loss") {
  ad::Tape tape;
  auto v = tape.leaf(Matrix(2, 2, 1.0));
  CHECK_THROWS_AS(tape.backward(v), Error);
}

TEST_CASE("operands from different tapes are rejected") {
  ad::Tape t1;
  ad::Tape t2;
  auto a = t1.leaf(Matrix(1, 1, 1.0));
  auto b = t2.leaf(Matrix(1, 1, 1.0));
  CHECK_THROWS_AS(ad::add(a, b), Error);
}

TEST_CASE("tape is in topological order") {
  ad::Tape tape;
  auto a = tape.leaf(Matrix{{1, 2}});
  auto b = ad::tanh(a);
  auto c = ad::add(a, b);
  CHECK(a.id < b.id);
  CHECK(b.id < c.id);
  CHECK(tape.size() == 3);
  CHECK(tape.op(c) == ad::Op::add);
  CHECK(tape.dump().find("tanh") != std::string::npos);
}

TEST_CASE("weighted cross-entropy values") {
  ad::Tape tape;
  // Scores chosen so the event probability is exactly 1 or e^-1.
  {
    const std::array<int, 1> l{1};
    auto s = tape.leaf(Matrix{{0.0, -800.0}});
    CHECK(ad::weighted_xent(s, l, 0.1).value()[0] == 0.0);
  }
  {
    const double p = std::exp(-1.0);
    const std::array<int, 1> l{1};
    auto s = tape.leaf(Matrix{{std::log(p), std::log(1.0 - p)}});
    CHECK(ad::weighted_xent(s, l, 0.1).value()[0] == doctest::Approx(0.9).epsilon(1e-12));
  }
  {
    // x = 0.5 halves the ordinary cross-entropy.
    const std::array<int, 3> l{1, 0, 1};
    const Matrix scores{{0.3, -0.2}, {1.1, 0.4}, {-0.5, 0.9}};
    auto s = tape.leaf(scores);
    double ce = 0.0;
    for (std::size_t r = 0; r < 3; ++r) {
      const double z = std::exp(scores(r, 0)) + std::exp(scores(r, 1));
      const double p = std::exp(scores(r, l[r] == 1 ? 0 : 1)) / z;
      ce -= std::log(p);
    }
    CHECK(ad::weighted_xent(s, l, 0.5).value()[0] == doctest::Approx(0.5 * ce / 3.0).epsilon(1e-12));
  }
  {
    // A probability under the floor is clamped: finite loss, flat gradient.
    const std::array<int, 1> l{1};
    auto s = tape.leaf(Matrix{{-1000.0, 0.0}});
    auto loss = ad::weighted_xent(s, l, 0.1);
    CHECK(loss.value()[0] == doctest::Approx(-0.9 * std::log(ad::kProbFloor)));
    tape.backward(loss);
    CHECK(s.grad() == Matrix(1, 2));
  }
  const std::array<int, 1> l{1};
  CHECK_THROWS_AS(ad::weighted_xent(tape.leaf(Matrix(1, 2)), l, 0.0), Error);
  CHECK_THROWS_AS(ad::weighted_xent(tape.leaf(Matrix(1, 2)), l, 1.0), Error);
}

TEST_CASE("non-finite values are rejected at construction") {
  ad::Tape tape;
  CHECK_THROWS_AS(tape.leaf(Matrix{{std::nan("")}}), Error);
}

TEST_CASE("rebuilding the same tape gives bit-identical values and gradients") {
  const auto in = randoms({{4, 3}, {3, 3}, {1, 3}}, 40);
  auto run = [&] {
    ad::Tape tape;
    auto z = tape.leaf(in[0]);
    auto phi = tape.leaf(in[1]);
    auto w = tape.leaf(in[2]);
    auto alpha = ad::softmax_row(ad::matmul(w, ad::tanh(ad::matmul(phi, ad::transpose(z)))));
    auto loss = ad::sum(ad::matmul(alpha, z));
    tape.backward(loss);
    return std::array<Matrix, 4>{loss.value(), z.grad(), phi.grad(), w.grad()};
  };
  CHECK(run() == run());
}

TEST_CASE("corrupted adjoint changes the gradient") {
  const Matrix x{{0.3, -0.4}};
  auto grad_of = [&](bool corrupt) {
    ad::Tape tape;
    if (corrupt) tape.corrupt_adjoint(ad::Op::tanh);
    auto v = tape.leaf(x);
    tape.backward(ad::sum(ad::tanh(v)));
    return v.grad();
  };
  const Matrix clean = grad_of(false);
  const Matrix bad = grad_of(true);
  for (std::size_t i = 0; i < 2; ++i) CHECK(bad[i] == doctest::Approx(1.5 * clean[i]));
}

TEST_CASE("serial and parallel kernels agree bit for bit") {
  std::mt19937_64 rng(50);
  for (auto [m, k, n] : std::vector<std::array<std::size_t, 3>>{{1, 1, 1}, {7, 5, 3}, {130, 64, 33}, {300, 17, 64}}) {
    const Matrix a = support::random_matrix(m, k, rng);
    const Matrix b = support::random_matrix(k, n, rng);
    const Matrix bt = support::random_matrix(n, k, rng);
    const Matrix c = support::random_matrix(m, n, rng);
    Matrix s1, p1;
    dyged::kernels::serial::matmul(a, b, s1);
    dyged::kernels::parallel::matmul(a, b, p1);
    CHECK(s1 == p1);
    CHECK(max_abs_diff(s1, support::dense::mul(a, b)) < 1e-12);

    Matrix s2(k, n, 0.5), p2(k, n, 0.5);
    dyged::kernels::serial::matmul_tn(a, c, s2);
    dyged::kernels::parallel::matmul_tn(a, c, p2);
    CHECK(s2 == p2);

    Matrix s3(m, n, -1.0), p3(m, n, -1.0);
    dyged::kernels::serial::matmul_nt(a, bt, s3);
    dyged::kernels::parallel::matmul_nt(a, bt, p3);
    CHECK(s3 == p3);
    Matrix ref = support::dense::mul(a, bt.transposed());
    for (auto& v : ref.data()) v -= 1.0;
    CHECK(max_abs_diff(s3, ref) < 1e-12);
  }
  for (std::size_t n : {3, 50, 400}) {
    const auto s = support::random_snapshot(n, 0.05, 0, rng);
    const auto a = dyged::normalized_adjacency_sparse(s, n);
    const Matrix b = support::random_matrix(n, 16, rng);
    Matrix s1, p1;
    dyged::kernels::serial::spmm(a, b, s1);
    dyged::kernels::parallel::spmm(a, b, p1);
    CHECK(s1 == p1);
    CHECK(max_abs_diff(s1, support::dense::mul(a.to_dense(), b)) < 1e-12);
  }
}
