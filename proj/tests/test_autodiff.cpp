#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "pgen/autodiff.hpp"
#include "pgen/rng.hpp"

using namespace pgen;

namespace {

// Central finite differences against the analytic gradient of a scalar
// graph. build(tape, leaves) must construct the same graph for perturbed
// leaf values; step 1e-5, relative tolerance 1e-4 per the derivative
// convention |a-n| / max(1e-4, |a|+|n|).
void check_gradients(std::vector<Array> leaf_values,
                     const std::function<Var(Tape&, const std::vector<Var>&)>& build) {
  Tape tape;
  std::vector<Var> leaves;
  for (const Array& v : leaf_values) leaves.push_back(tape.leaf(v));
  Var root = build(tape, leaves);
  REQUIRE(tape.value(root).numel() == 1);
  tape.backward(root);

  const double h = 1e-5;
  for (std::size_t l = 0; l < leaf_values.size(); ++l) {
    const Array& analytic = tape.grad(leaves[l]);
    for (std::size_t i = 0; i < leaf_values[l].numel(); ++i) {
      auto eval = [&](double delta) {
        std::vector<Array> shifted = leaf_values;
        shifted[l][i] += delta;
        Tape t2;
        std::vector<Var> ls;
        for (const Array& v : shifted) ls.push_back(t2.leaf(v));
        return t2.value(build(t2, ls))[0];
      };
      double numeric = (eval(h) - eval(-h)) / (2.0 * h);
      double a = analytic[i];
      double rel = std::fabs(a - numeric) / std::max(1e-4, std::fabs(a) + std::fabs(numeric));
      INFO("leaf " << l << " index " << i << " analytic " << a << " numeric " << numeric);
      REQUIRE(rel <= 1e-4);
    }
  }
}

Array random_array(std::vector<std::size_t> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Array a(std::move(shape));
  for (std::size_t i = 0; i < a.numel(); ++i) a[i] = rng.uniform(lo, hi);
  return a;
}

}  // namespace

TEST_CASE("softmax of zeros is uniform", "[autodiff]") {
  Tape tape;
  Var x = tape.leaf(Array::vector({0.0, 0.0}));
  Var y = tape.softmax(x);
  REQUIRE(tape.value(y)[0] == Catch::Approx(0.5));
  REQUIRE(tape.value(y)[1] == Catch::Approx(0.5));
}

TEST_CASE("softmax rows are normalized even for extreme inputs", "[autodiff]") {
  Tape tape;
  Var x = tape.leaf(Array({2, 3}, std::vector<double>{1000.0, 999.0, 998.0, -5.0, 0.0, 5.0}));
  const Array& y = tape.value(tape.softmax(x));
  for (std::size_t r = 0; r < 2; ++r) {
    double sum = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
      REQUIRE(y.at2(r, c) >= 0.0);
      sum += y.at2(r, c);
    }
    REQUIRE(std::fabs(sum - 1.0) <= 1e-12);
  }
}

TEST_CASE("matmul matches a hand product", "[autodiff]") {
  Tape tape;
  Var a = tape.leaf(Array({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6}));
  Var b = tape.leaf(Array({3, 1}, std::vector<double>{1, 0, -1}));
  const Array& c = tape.value(tape.matmul(a, b));
  REQUIRE(c.rows() == 2);
  REQUIRE(c.cols() == 1);
  REQUIRE(c[0] == Catch::Approx(-2.0));  // 1 - 3
  REQUIRE(c[1] == Catch::Approx(-2.0));  // 4 - 6
}

TEST_CASE("matmul rejects incompatible shapes naming them", "[autodiff]") {
  Tape tape;
  Var a = tape.leaf(Array({2, 3}));
  Var b = tape.leaf(Array({2, 1}));
  REQUIRE_THROWS_MATCHES(tape.matmul(a, b), ShapeError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("(2,3)") &&
                             Catch::Matchers::ContainsSubstring("(2,1)")));
}

TEST_CASE("backward requires a scalar root", "[autodiff]") {
  Tape tape;
  Var x = tape.leaf(Array::vector({1.0, 2.0}));
  REQUIRE_THROWS_AS(tape.backward(x), ContractError);
}

TEST_CASE("sum gradient is all ones", "[autodiff]") {
  Tape tape;
  Var x = tape.leaf(Array({2, 2}, std::vector<double>{1, 2, 3, 4}));
  tape.backward(tape.sum(x));
  for (std::size_t i = 0; i < 4; ++i) REQUIRE(tape.grad(x)[i] == 1.0);
}

TEST_CASE("a leaf off the active graph gets a zero gradient", "[autodiff]") {
  Tape tape;
  Var used = tape.leaf(Array::vector({2.0}));
  Var unused = tape.leaf(Array::vector({5.0, 6.0}));
  tape.backward(tape.sum(used));
  REQUIRE(tape.grad(unused)[0] == 0.0);
  REQUIRE(tape.grad(unused)[1] == 0.0);
}

TEST_CASE("log softmax pick matches finite differences", "[autodiff]") {
  Rng rng(3);
  Array w = random_array({4, 3}, rng);
  Array x = random_array({3}, rng);
  check_gradients({w, x}, [](Tape& t, const std::vector<Var>& l) {
    return t.pick(t.log(t.softmax(t.matmul(l[0], l[1]))), 2);
  });
}

TEST_CASE("every primitive passes the finite-difference oracle", "[autodiff]") {
  Rng rng(17);

  SECTION("matmul matrix-matrix") {
    check_gradients({random_array({2, 3}, rng), random_array({3, 2}, rng)},
                    [](Tape& t, const std::vector<Var>& l) {
                      return t.sum(t.tanh(t.matmul(l[0], l[1])));
                    });
  }
  SECTION("matmul matrix-vector, add, tanh") {
    check_gradients({random_array({3, 4}, rng), random_array({4}, rng), random_array({3}, rng)},
                    [](Tape& t, const std::vector<Var>& l) {
                      return t.sum(t.tanh(t.add(t.matmul(l[0], l[1]), l[2])));
                    });
  }
  SECTION("mul and sigmoid") {
    check_gradients({random_array({5}, rng), random_array({5}, rng)},
                    [](Tape& t, const std::vector<Var>& l) {
                      return t.sum(t.mul(t.sigmoid(l[0]), l[1]));
                    });
  }
  SECTION("smul with scalar node") {
    check_gradients({random_array({1}, rng), random_array({4}, rng)},
                    [](Tape& t, const std::vector<Var>& l) {
                      return t.sum(t.smul(t.sigmoid(l[0]), l[1]));
                    });
  }
  SECTION("scale_shift and log") {
    check_gradients({random_array({4}, rng, 0.5, 2.0)},
                    [](Tape& t, const std::vector<Var>& l) {
                      return t.sum(t.log(t.scale_shift(l[0], 2.0, 1.0)));
                    });
  }
  SECTION("softmax full row") {
    check_gradients({random_array({5}, rng), random_array({5}, rng)},
                    [](Tape& t, const std::vector<Var>& l) {
                      return t.sum(t.mul(t.softmax(l[0]), l[1]));
                    });
  }
  SECTION("concat") {
    check_gradients({random_array({3}, rng), random_array({2}, rng)},
                    [](Tape& t, const std::vector<Var>& l) {
                      return t.sum(t.tanh(t.concat(l[0], l[1])));
                    });
  }
  SECTION("lookup row") {
    check_gradients({random_array({4, 3}, rng)}, [](Tape& t, const std::vector<Var>& l) {
      return t.sum(t.tanh(t.lookup(l[0], 2)));
    });
  }
  SECTION("pick") {
    check_gradients({random_array({6}, rng)}, [](Tape& t, const std::vector<Var>& l) {
      return t.pick(t.softmax(l[0]), 3);
    });
  }
  SECTION("add_rowwise") {
    check_gradients({random_array({3, 4}, rng), random_array({4}, rng)},
                    [](Tape& t, const std::vector<Var>& l) {
                      return t.sum(t.tanh(t.add_rowwise(l[0], l[1])));
                    });
  }
  SECTION("scatter with duplicate targets") {
    check_gradients({random_array({4}, rng), random_array({6}, rng)},
                    [](Tape& t, const std::vector<Var>& l) {
                      Var s = t.scatter(l[0], {1, 4, 1, 5}, 6);
                      return t.sum(t.mul(s, l[1]));
                    });
  }
  SECTION("slice") {
    check_gradients({random_array({6}, rng)}, [](Tape& t, const std::vector<Var>& l) {
      return t.sum(t.tanh(t.slice(l[0], 1, 3)));
    });
  }
  SECTION("stack_rows") {
    check_gradients({random_array({3}, rng), random_array({3}, rng), random_array({3}, rng)},
                    [](Tape& t, const std::vector<Var>& l) {
                      return t.sum(t.tanh(t.stack_rows({l[0], l[1], l[2]})));
                    });
  }
  SECTION("weighted_sum_rows") {
    check_gradients({random_array({3, 4}, rng), random_array({3}, rng), random_array({4}, rng)},
                    [](Tape& t, const std::vector<Var>& l) {
                      Var ctx = t.weighted_sum_rows(l[0], t.softmax(l[1]));
                      return t.sum(t.mul(ctx, l[2]));
                    });
  }
  SECTION("composite expression mixing most primitives") {
    check_gradients(
        {random_array({3, 5}, rng), random_array({5}, rng), random_array({3}, rng),
         random_array({1}, rng)},
        [](Tape& t, const std::vector<Var>& l) {
          Var h = t.tanh(t.add(t.matmul(l[0], l[1]), l[2]));
          Var p = t.softmax(h);
          Var mixed = t.add(t.smul(t.sigmoid(l[3]), p),
                            t.smul(t.scale_shift(t.sigmoid(l[3]), -1.0, 1.0), p));
          return t.log(t.scale_shift(t.pick(mixed, 1), 1.0, 1e-12));
        });
  }
}

TEST_CASE("backward is deterministic", "[autodiff]") {
  Rng rng(9);
  Array w = random_array({4, 4}, rng);
  Array x = random_array({4}, rng);
  auto run = [&]() {
    Tape t;
    Var wv = t.leaf(w), xv = t.leaf(x);
    t.backward(t.sum(t.softmax(t.tanh(t.matmul(wv, xv)))));
    return t.grad(wv);
  };
  Array g1 = run(), g2 = run();
  for (std::size_t i = 0; i < g1.numel(); ++i) REQUIRE(g1[i] == g2[i]);
}

TEST_CASE("global_norm and clipping follow the hand example", "[autodiff]") {
  GradMap grads;
  grads.emplace_back("w", Array::vector({3.0, 4.0}));
  REQUIRE(global_norm(grads) == Catch::Approx(5.0));
  GradMap clipped = clip_gradients(grads, 2.0);
  REQUIRE(clipped[0].second[0] == Catch::Approx(1.2));
  REQUIRE(clipped[0].second[1] == Catch::Approx(1.6));
  REQUIRE(global_norm(clipped) == Catch::Approx(2.0));
}

TEST_CASE("clipping below the threshold is the identity", "[autodiff]") {
  GradMap grads;
  grads.emplace_back("w", Array::vector({0.6, 0.8}));  // norm 1
  GradMap clipped = clip_gradients(grads, 2.0);
  REQUIRE(clipped[0].second[0] == 0.6);
  REQUIRE(clipped[0].second[1] == 0.8);
}

TEST_CASE("clipping is idempotent and never increases the norm", "[autodiff]") {
  Rng rng(21);
  GradMap grads;
  grads.emplace_back("a", random_array({7}, rng, -3.0, 3.0));
  grads.emplace_back("b", random_array({2, 2}, rng, -3.0, 3.0));
  double before = global_norm(grads);
  GradMap once = clip_gradients(grads, 2.0);
  REQUIRE(global_norm(once) <= std::min(before, 2.0) + 1e-12);
  GradMap twice = clip_gradients(once, 2.0);
  for (std::size_t k = 0; k < once.size(); ++k) {
    for (std::size_t i = 0; i < once[k].second.numel(); ++i) {
      REQUIRE(twice[k].second[i] == Catch::Approx(once[k].second[i]).margin(1e-15));
    }
  }
}

TEST_CASE("non-finite gradient entries are rejected by name", "[autodiff]") {
  GradMap grads;
  grads.emplace_back("fine", Array::vector({1.0}));
  grads.emplace_back("broken", Array::vector({std::numeric_limits<double>::quiet_NaN()}));
  REQUIRE_THROWS_MATCHES(clip_gradients(grads, 2.0), NumericError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("broken")));
}

TEST_CASE("clip_gradients rejects a non-positive max_norm", "[autodiff]") {
  GradMap grads;
  grads.emplace_back("w", Array::vector({1.0}));
  REQUIRE_THROWS_AS(clip_gradients(grads, 0.0), ConfigError);
}
