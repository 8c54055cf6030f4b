#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <queue>
#include <vector>

#include "btac/simulate.hpp"

using namespace btac;

TEST_CASE("block design: P=4, T=8 hand evaluation") {
  BlockDesign d = make_block_design(4, 8);
  const std::vector<double> want{1, 0, 0, 0, 1, 0, 0, 0};
  CHECK(d.z == want);
}

TEST_CASE("block design: P=30, T=100 matches the case rule directly") {
  BlockDesign d = make_block_design(30, 100);
  for (int t = 1; t <= 100; ++t) {
    bool on = false;
    for (int k = 0; k * 30 < t; ++k)
      if (k * 30 < t && t < k * 30 + 15) on = true;
    CHECK(d.z[t - 1] == (on ? 1.0 : 0.0));
  }
  // active runs have length 14 and start right after each multiple of 30
  int run = 0, max_run = 0;
  for (double v : d.z) {
    run = v > 0 ? run + 1 : 0;
    max_run = std::max(max_run, run);
  }
  CHECK(max_run == 14);
  CHECK(d.z[0] == 1.0);
  CHECK(d.z[29] == 0.0);
  CHECK(d.z[30] == 1.0);
}

TEST_CASE("block design: P=T single partial block; bad args throw") {
  BlockDesign d = make_block_design(8, 8);
  for (int t = 1; t <= 8; ++t) CHECK(d.z[t - 1] == ((t < 4) ? 1.0 : 0.0));
  CHECK_THROWS(make_block_design(0, 5));
  CHECK_THROWS(make_block_design(6, 5));
}

TEST_CASE("hrf kernel: vanishes at origin, peak near delay*dispersion") {
  HrfParams p;
  auto h = hrf_kernel(p, 32, 1.0);
  CHECK(h[0] == 0.0);
  int argmax = 0;
  for (int i = 0; i < 32; ++i)
    if (h[i] > h[argmax]) argmax = i;
  CHECK(std::abs(argmax * 1.0 - p.response_delay * p.response_dispersion) <= 1.0);
  CHECK(*std::max_element(h.begin(), h.end()) == doctest::Approx(1.0));
}

TEST_CASE("hrf kernel: no undershoot means nonnegative") {
  HrfParams p;
  p.undershoot_scale = 0.0;
  auto h = hrf_kernel(p, 64, 0.5);
  for (double v : h) CHECK(v >= 0.0);
  CHECK_THROWS(hrf_kernel(p, 0, 1.0));
  p.response_dispersion = -1.0;
  CHECK_THROWS(hrf_kernel(p, 32, 1.0));
}

TEST_CASE("convolution: unit impulse at t=1 reproduces the kernel") {
  BlockDesign d;
  d.period = 1;
  d.T = 40;
  d.z.assign(40, 0.0);
  d.z[0] = 1.0;
  auto h = hrf_kernel(HrfParams{}, 32, 1.0);
  auto x = convolve_stimulus(d, h);
  for (int t = 0; t < 40; ++t)
    CHECK(x[t] == doctest::Approx(t < 32 ? h[t] : 0.0));
}

TEST_CASE("convolution: zero stimulus gives zero covariate") {
  BlockDesign d;
  d.T = 20;
  d.z.assign(20, 0.0);
  auto x = convolve_stimulus(d, hrf_kernel(HrfParams{}, 10, 1.0));
  for (double v : x) CHECK(v == 0.0);
}

TEST_CASE("convolution matches the naive summation oracle exactly") {
  BlockDesign d = make_block_design(30, 100);
  auto h = hrf_kernel(HrfParams{}, 32, 1.0);
  auto x = convolve_stimulus(d, h);
  for (int t = 1; t <= 100; ++t) {
    double s = 0.0;
    for (int k = 0; k < 32; ++k)
      if (t - k >= 1) s += h[k] * d.z[t - k - 1];
    CHECK(x[t - 1] == s);  // identical arithmetic, bitwise equal
  }
  std::vector<double> too_long(101, 0.0);
  CHECK_THROWS(convolve_stimulus(d, too_long));
}

TEST_CASE("make_regions: floors at 5, matches reported 5-16 range") {
  RngHandle rng(31, 0);
  int total = 0, in_range = 0;
  for (int rep = 0; rep < 100; ++rep) {
    auto dims = make_regions(10, 3, 10.0, rng);
    for (const auto& d : dims)
      for (int v : d) {
        ++total;
        CHECK(v >= 5);
        if (v <= 16) ++in_range;
      }
  }
  CHECK(static_cast<double>(in_range) / total > 0.97);
}

TEST_CASE("make_regions: shape and determinism") {
  RngHandle a(5, 0), b(5, 0);
  auto da = make_regions(1, 3, 10.0, a);
  CHECK(da.size() == 1);
  CHECK(da[0].size() == 3);
  auto db = make_regions(1, 3, 10.0, b);
  CHECK(da == db);
}

TEST_CASE("region volume mean is near the reported 1107.8") {
  RngHandle rng(77, 0);
  double total = 0.0;
  int count = 0;
  for (int rep = 0; rep < 60; ++rep) {
    auto dims = make_regions(10, 3, 10.0, rng);
    for (const auto& d : dims) {
      total += static_cast<double>(cell_count(d));
      ++count;
    }
  }
  const double mean = total / count;
  CHECK(mean > 950.0);
  CHECK(mean < 1250.0);
}

TEST_CASE("true coefficients: tiny budget gives one voxel") {
  RngHandle rng(1, 0);
  DenseTensor b = make_true_coefficients({5, 5}, 0.05, rng);  // budget 1
  int active = 0;
  for (std::int64_t i = 0; i < b.size(); ++i) active += b[i] > 0 ? 1 : 0;
  CHECK(active == 1);
}

TEST_CASE("true coefficients: sphere respects the cap and geometry") {
  RngHandle rng(2, 0);
  for (int rep = 0; rep < 20; ++rep) {
    DenseTensor b = make_true_coefficients({10, 10, 10}, 0.05, rng);
    std::vector<std::vector<int>> cells;
    std::vector<int> idx(3, 0);
    for (std::int64_t lin = 0; lin < b.size(); ++lin) {
      if (b[lin] > 0) cells.push_back(idx);
      for (int j = 0; j < 3; ++j) {
        if (++idx[j] < 10) break;
        idx[j] = 0;
      }
    }
    CHECK(cells.size() <= 50);
    CHECK(cells.size() == 33);  // radius-2 ball in 3-D
    // centroid recovers the integer center; check every cell within radius
    double cx = 0, cy = 0, cz = 0;
    for (auto& c : cells) {
      cx += c[0];
      cy += c[1];
      cz += c[2];
    }
    cx /= cells.size();
    cy /= cells.size();
    cz /= cells.size();
    for (auto& c : cells) {
      const double r2 = (c[0] - cx) * (c[0] - cx) + (c[1] - cy) * (c[1] - cy) +
                        (c[2] - cz) * (c[2] - cz);
      CHECK(r2 <= 4.0 + 1e-9);
    }
  }
}

TEST_CASE("sphere at a corner clips to bounds and stays contiguous") {
  DenseTensor b = sphere_support({6, 6}, {0, 0}, 2);
  int active = 0;
  for (std::int64_t i = 0; i < b.size(); ++i) active += b[i] > 0 ? 1 : 0;
  CHECK(active > 0);
  CHECK(active < sphere_cell_count(2, 2));  // clipped
  // flood fill from the corner reaches every active cell
  std::vector<int> seen(36, 0);
  std::queue<std::pair<int, int>> q;
  q.push({0, 0});
  seen[0] = 1;
  int reached = 0;
  while (!q.empty()) {
    auto [x, y] = q.front();
    q.pop();
    ++reached;
    const int dx[] = {1, -1, 0, 0}, dy[] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k) {
      const int nx = x + dx[k], ny = y + dy[k];
      if (nx < 0 || ny < 0 || nx >= 6 || ny >= 6) continue;
      const int lin = nx + 6 * ny;
      if (!seen[lin] && b[lin] > 0) {
        seen[lin] = 1;
        q.push({nx, ny});
      }
    }
  }
  CHECK(reached == active);
}

TEST_CASE("connectivity covariance: no pairs is a scaled identity") {
  Eigen::MatrixXd c = make_connectivity_covariance(4, {}, 5.0, 1.0);
  CHECK((c - 5.0 * Eigen::MatrixXd::Identity(4, 4)).norm() == 0.0);
}

TEST_CASE("connectivity covariance: paper settings") {
  std::vector<ConnectedPair> pairs{{1, 2, 0.9}, {5, 8, 0.9}};
  Eigen::MatrixXd c = make_connectivity_covariance(10, pairs, 5.0, 1.0);
  CHECK(c(0, 0) == doctest::Approx(5.0));
  CHECK(c(1, 2) == doctest::Approx(4.5));
  CHECK(c(5, 8) == doctest::Approx(4.5));
  CHECK(c(1, 3) == 0.0);
  Eigen::LLT<Eigen::MatrixXd> llt(c);
  CHECK(llt.info() == Eigen::Success);
}

TEST_CASE("connectivity covariance: degenerate correlation rejected") {
  CHECK_THROWS(make_connectivity_covariance(3, {{0, 1, 1.0}}, 5.0, 1.0));
  CHECK_THROWS(make_connectivity_covariance(3, {{0, 0, 0.5}}, 5.0, 1.0));
  // conflicting specification of the same pair
  CHECK_THROWS(make_connectivity_covariance(3, {{0, 1, 0.5}, {1, 0, 0.6}}, 5.0, 1.0));
  // two chained 0.9 pairs on 3 regions are jointly infeasible
  CHECK_THROWS(make_connectivity_covariance(3, {{0, 1, 0.9}, {1, 2, 0.9}}, 5.0, 1.0));
}

TEST_CASE("noiseless limit: responses equal centered stimulus component") {
  SimSpec spec;
  spec.n = 2;
  spec.T = 40;
  spec.G = 2;
  spec.D = 2;
  spec.period = 10;
  spec.sigma_y2 = 0.0;
  spec.cnr = 1.0;
  spec.region_dims = std::vector<std::vector<int>>{{3, 3}, {2, 4}};
  RngHandle rng(9, 0);
  Dataset ds = generate_dataset(spec, rng);
  // covariate is centered
  double xs = std::accumulate(ds.covariate.begin(), ds.covariate.end(), 0.0);
  CHECK(std::abs(xs) < 1e-10);
  for (int i = 0; i < 2; ++i)
    for (int g = 0; g < 2; ++g) {
      const auto V = ds.region_size(g);
      for (int t = 0; t < spec.T; ++t)
        for (std::int64_t v = 0; v < V; ++v)
          CHECK(ds.y[i][g][t * V + v] ==
                doctest::Approx(ds.truth.coeff[g][v] * ds.covariate[t]));
      // per-voxel temporal mean of the stimulus component is zero
      for (std::int64_t v = 0; v < V; ++v) {
        double m = 0.0;
        for (int t = 0; t < spec.T; ++t) m += ds.y[i][g][t * V + v];
        CHECK(std::abs(m / spec.T) < 1e-10);
      }
    }
}

TEST_CASE("cnr calibration is exact and determinism is bitwise") {
  SimSpec spec;
  spec.n = 3;
  spec.T = 30;
  spec.G = 2;
  spec.D = 2;
  spec.period = 10;
  spec.sigma_y2 = 4.0;
  spec.cnr = 1.5;
  spec.snr = 5.0;
  RngHandle a(33, 0), b(33, 0);
  Dataset d1 = generate_dataset(spec, a);
  Dataset d2 = generate_dataset(spec, b);
  CHECK(d1.region_dims == d2.region_dims);
  for (int i = 0; i < spec.n; ++i)
    for (int g = 0; g < spec.G; ++g) CHECK(d1.y[i][g] == d2.y[i][g]);
  for (int g = 0; g < spec.G; ++g)
    for (std::int64_t v = 0; v < d1.truth.coeff[g].size(); ++v) {
      const double c = d1.truth.coeff[g][v];
      if (c != 0.0) CHECK(c == doctest::Approx(1.5 * 2.0));  // cnr * sigma_y
    }
}

TEST_CASE("paper-scale spec generates and a voxel regression recovers the slope") {
  SimSpec spec;
  spec.n = 4;
  spec.T = 100;
  spec.G = 3;
  spec.D = 3;
  spec.period = 30;
  spec.sigma_y2 = 0.01;
  spec.cnr = 10.0;  // slope cnr * sigma_y = 1
  spec.snr = 5.0;
  spec.pairs = {{0, 1, 0.9}};
  RngHandle rng(4, 0);
  Dataset ds = generate_dataset(spec, rng);
  // find an active voxel
  int g0 = -1;
  std::int64_t v0 = -1;
  for (int g = 0; g < spec.G && g0 < 0; ++g)
    for (std::int64_t v = 0; v < ds.truth.coeff[g].size(); ++v)
      if (ds.truth.coeff[g][v] != 0.0) {
        g0 = g;
        v0 = v;
        break;
      }
  REQUIRE(g0 >= 0);
  const auto V = ds.region_size(g0);
  double sxy = 0.0, sxx = 0.0;
  for (int t = 0; t < spec.T; ++t) {
    sxy += ds.covariate[t] * ds.y[0][g0][t * V + v0];
    sxx += ds.covariate[t] * ds.covariate[t];
  }
  CHECK(sxy / sxx == doctest::Approx(1.0).epsilon(0.08));
}

TEST_CASE("bad sim specs are rejected") {
  SimSpec spec;
  spec.cnr = -1.0;
  RngHandle rng(1, 0);
  CHECK_THROWS(generate_dataset(spec, rng));
}
