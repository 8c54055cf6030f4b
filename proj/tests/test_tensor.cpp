#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "btac/rng.hpp"
#include "btac/tensor.hpp"

using namespace btac;

namespace {

// Naive oracle: walks every cell with an explicit multi-index and sums
// rank-1 products directly. Independent of ParafacCoeff::compose.
DenseTensor compose_oracle(const ParafacCoeff& c) {
  DenseTensor out(c.dims());
  const int D = c.order();
  std::vector<int> idx(D, 0);
  for (std::int64_t lin = 0; lin < out.size(); ++lin) {
    double cell = 0.0;
    for (int r = 0; r < c.rank(); ++r) {
      double prod = 1.0;
      for (int j = 0; j < D; ++j) prod *= c.margin(j, r)[idx[j]];
      cell += prod;
    }
    out[lin] = cell;
    for (int j = 0; j < D; ++j) {
      if (++idx[j] < c.dims()[j]) break;
      idx[j] = 0;
    }
  }
  return out;
}

std::vector<double> contraction_oracle(const DenseTensor& t,
                                       const std::vector<std::vector<double>>& m,
                                       int j) {
  std::vector<double> out(t.dims()[j], 0.0);
  const int D = t.order();
  std::vector<int> idx(D, 0);
  for (std::int64_t lin = 0; lin < t.size(); ++lin) {
    double w = 1.0;
    for (int k = 0; k < D; ++k)
      if (k != j) w *= m[k][idx[k]];
    out[idx[j]] += w * t[lin];
    for (int k = 0; k < D; ++k) {
      if (++idx[k] < t.dims()[k]) break;
      idx[k] = 0;
    }
  }
  return out;
}

ParafacCoeff random_coeff(std::vector<int> dims, int rank, RngHandle& rng) {
  ParafacCoeff c(dims, rank);
  for (int j = 0; j < c.order(); ++j)
    for (int r = 0; r < rank; ++r)
      for (auto& v : c.margin(j, r)) v = rng.normal();
  return c;
}

}  // namespace

TEST_CASE("linear index is mode-1 fastest") {
  DenseTensor t({2, 3});
  std::vector<int> idx{1, 2};
  CHECK(t.linear_index(idx) == 1 + 2 * 2);
  t[t.linear_index(idx)] = 7.0;
  CHECK(t.at(idx) == 7.0);
}

TEST_CASE("compose: rank-1 outer product by hand") {
  // beta_1 = (1,2), beta_2 = (3,4) -> cell (i1,i2) = b1[i1]*b2[i2]
  ParafacCoeff c({2, 2}, 1);
  c.margin(0, 0)[0] = 1.0;
  c.margin(0, 0)[1] = 2.0;
  c.margin(1, 0)[0] = 3.0;
  c.margin(1, 0)[1] = 4.0;
  DenseTensor b = c.compose();
  CHECK(b.at(std::vector<int>{0, 0}) == doctest::Approx(3.0));
  CHECK(b.at(std::vector<int>{1, 0}) == doctest::Approx(6.0));
  CHECK(b.at(std::vector<int>{0, 1}) == doctest::Approx(4.0));
  CHECK(b.at(std::vector<int>{1, 1}) == doctest::Approx(8.0));
}

TEST_CASE("compose: all-zero margin annihilates") {
  RngHandle rng(42, 0);
  ParafacCoeff c = random_coeff({3, 4}, 2, rng);
  for (int r = 0; r < 2; ++r)
    for (auto& v : c.margin(1, r)) v = 0.0;
  DenseTensor b = c.compose();
  for (std::int64_t i = 0; i < b.size(); ++i) CHECK(b[i] == 0.0);
}

TEST_CASE("compose matches naive triple-loop oracle") {
  RngHandle rng(7, 0);
  ParafacCoeff c = random_coeff({4, 5, 6}, 3, rng);
  DenseTensor fast = c.compose();
  DenseTensor slow = compose_oracle(c);
  for (std::int64_t i = 0; i < fast.size(); ++i) {
    const double denom = std::max(1.0, std::abs(slow[i]));
    CHECK(std::abs(fast[i] - slow[i]) / denom < 1e-12);
  }
}

TEST_CASE("compose is linear in each margin at rank 1") {
  RngHandle rng(11, 0);
  for (int rep = 0; rep < 10; ++rep) {
    ParafacCoeff c = random_coeff({3, 2, 4}, 1, rng);
    DenseTensor base = c.compose();
    const double scale = 2.5;
    for (auto& v : c.margin(0, 0)) v *= scale;
    DenseTensor scaled = c.compose();
    for (std::int64_t i = 0; i < base.size(); ++i)
      CHECK(scaled[i] == doctest::Approx(scale * base[i]).epsilon(1e-12));
  }
}

TEST_CASE("rank-1 compose factorizes: cross-ratio constant") {
  RngHandle rng(13, 0);
  ParafacCoeff c = random_coeff({3, 4}, 1, rng);
  DenseTensor b = c.compose();
  // ratio of rows i and i' must be constant across columns when defined
  for (int col = 0; col < 4; ++col) {
    const double r0 = b.at(std::vector<int>{0, col}) / b.at(std::vector<int>{1, col});
    const double rref = b.at(std::vector<int>{0, 0}) / b.at(std::vector<int>{1, 0});
    CHECK(r0 == doctest::Approx(rref).epsilon(1e-10));
  }
}

TEST_CASE("outer_contraction: identity matrix row sums") {
  DenseTensor t({2, 2});
  t.at(std::vector<int>{0, 0}) = 1.0;
  t.at(std::vector<int>{1, 1}) = 1.0;
  std::vector<double> ones{1.0, 1.0};
  std::vector<std::span<const double>> m{{}, ones};
  auto out = outer_contraction(t, m, 0);
  CHECK(out[0] == doctest::Approx(1.0));
  CHECK(out[1] == doctest::Approx(1.0));
}

TEST_CASE("outer_contraction: zero tensor gives zero vector") {
  DenseTensor t({3, 2, 2});
  std::vector<double> a{1.0, 2.0}, b{0.5, -1.0};
  std::vector<std::span<const double>> m{{}, a, b};
  auto out = outer_contraction(t, m, 0);
  for (double v : out) CHECK(v == 0.0);
}

TEST_CASE("outer_contraction matches naive loop oracle, all modes") {
  RngHandle rng(99, 0);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<int> dims{3, 3, 3};
    DenseTensor t(dims);
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.normal();
    std::vector<std::vector<double>> m(3);
    for (int k = 0; k < 3; ++k) {
      m[k].resize(dims[k]);
      for (auto& v : m[k]) v = rng.normal();
    }
    for (int j = 0; j < 3; ++j) {
      std::vector<std::span<const double>> spans{m[0], m[1], m[2]};
      auto fast = outer_contraction(t, spans, j);
      auto slow = contraction_oracle(t, m, j);
      for (std::size_t z = 0; z < fast.size(); ++z)
        CHECK(std::abs(fast[z] - slow[z]) < 1e-12 * std::max(1.0, std::abs(slow[z])));
    }
  }
}

TEST_CASE("outer_contraction agrees with compose-then-sum on small instances") {
  RngHandle rng(5, 0);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<int> dims{4, 3, 5};
    DenseTensor t(dims);
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.normal();
    ParafacCoeff c = random_coeff(dims, 1, rng);
    // sum over cells of t * outer-product weight, with mode j fixed
    for (int j = 0; j < 3; ++j) {
      std::vector<std::span<const double>> spans{c.margin(0, 0), c.margin(1, 0),
                                                 c.margin(2, 0)};
      auto got = outer_contraction(t, spans, j);
      // oracle: compose the rank-1 weight with margin j set to a basis
      // vector, then take the full inner product with t
      for (int z = 0; z < dims[j]; ++z) {
        ParafacCoeff basis = c;
        for (auto& v : basis.margin(j, 0)) v = 0.0;
        basis.margin(j, 0)[z] = 1.0;
        DenseTensor w = basis.compose();
        double s = 0.0;
        for (std::int64_t i = 0; i < t.size(); ++i) s += w[i] * t[i];
        CHECK(got[z] == doctest::Approx(s).epsilon(1e-11));
      }
    }
  }
}

TEST_CASE("outer_contraction rejects mismatched margins") {
  DenseTensor t({2, 3});
  std::vector<double> bad{1.0, 2.0};  // should be length 3
  std::vector<std::span<const double>> m{{}, bad};
  CHECK_THROWS(outer_contraction(t, m, 0));
}

TEST_CASE("frobenius_distance basics") {
  DenseTensor a({1, 2}), b({1, 2});
  CHECK(frobenius_distance(a, b) == 0.0);
  a[0] = 1.0;
  CHECK(frobenius_distance(a, b) == doctest::Approx(1.0));
  DenseTensor c({2, 2});
  CHECK_THROWS(frobenius_distance(a, c));
}

TEST_CASE("frobenius_distance matches direct summation oracle") {
  RngHandle rng(3, 0);
  DenseTensor a({7, 5}), b({7, 5});
  for (std::int64_t i = 0; i < a.size(); ++i) {
    a[i] = rng.normal();
    b[i] = rng.normal();
  }
  double s = 0.0;
  for (std::int64_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  CHECK(frobenius_distance(a, b) == doctest::Approx(std::sqrt(s)).epsilon(1e-14));
}

TEST_CASE("invalid construction is rejected") {
  CHECK_THROWS(DenseTensor(std::vector<int>{}));
  CHECK_THROWS(DenseTensor({2, 0}));
  CHECK_THROWS(DenseTensor({2, 2}, std::vector<double>(3, 0.0)));
  CHECK_THROWS(ParafacCoeff({2, 2}, 0));
}
