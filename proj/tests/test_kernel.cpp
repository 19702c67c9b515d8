#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "wncs/kernel.hpp"

using namespace wncs;

namespace {

double sum(std::span<const double> row) { return std::accumulate(row.begin(), row.end(), 0.0); }

ModelParams random_params(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ModelParams p;
  p.a = -1.3 + 2.6 * unit(rng);
  p.sigma2 = 0.1 + 3.0 * unit(rng);
  p.p = unit(rng);
  p.beta = 0.05 + 0.9 * unit(rng);
  p.B = 1 + static_cast<int>(unit(rng) * 4);
  const int L = static_cast<int>(unit(rng) * 4);
  p.harvest_probs.assign(static_cast<std::size_t>(L + 1), 0.0);
  for (auto& q : p.harvest_probs) q = unit(rng) + 1e-3;
  const double total = std::accumulate(p.harvest_probs.begin(), p.harvest_probs.end(), 0.0);
  for (auto& q : p.harvest_probs) q /= total;
  // Absorb the rounding left over by the division.
  p.harvest_probs.back() += 1.0 - std::accumulate(p.harvest_probs.begin(), p.harvest_probs.end(), 0.0);
  return p;
}

Grid small_grid(bool folded) { return build_grid(ModelParams{}, 4.0, 31, 4, folded); }

}  // namespace

TEST_CASE("grid construction") {
  const Grid sym = Grid::uniform(2.0, 5, 2, false);
  CHECK(sym.x_nodes == std::vector<double>{-2, -1, 0, 1, 2});
  CHECK(sym.dx == 1.0);
  CHECK(sym.zero_index() == 2);
  CHECK(sym.mirror(0) == 4);

  const Grid fold = Grid::uniform(2.0, 5, 2, true);
  CHECK(fold.x_nodes == std::vector<double>{0, 1, 2});
  CHECK(fold.zero_index() == 0);

  ModelParams p;
  p.a = 0.0;
  const Grid g = build_grid(p, 4.0, 31, 7, false);
  CHECK(g.x_max == doctest::Approx(oracle::kXMaxAZero).epsilon(1e-15));
  CHECK(g.size() == 31);
  CHECK(build_grid(p, 4.0, 31, 7, true).size() == 16);

  // Every node has its negative.
  const Grid canon = build_grid(ModelParams{}, 5.0, 201, 25, false);
  for (std::size_t i = 0; i < canon.size(); ++i) CHECK(canon.x_nodes[i] == -canon.x_nodes[canon.mirror(i)]);
  CHECK(canon.x_nodes[canon.zero_index()] == 0.0);

  CHECK(sym.nearest(0.4) == 2);
  CHECK(sym.nearest(-7.0) == 0);
  CHECK(sym.nearest(9.0) == 4);
}

TEST_CASE("grid preconditions") {
  const ModelParams p;
  CHECK_THROWS_AS(build_grid(p, 5.0, 29, 5, false), ConfigError);
  CHECK_THROWS_AS(build_grid(p, 5.0, 32, 5, false), ConfigError);
  CHECK_THROWS_AS(build_grid(p, 0.0, 31, 5, false), ConfigError);
  CHECK_THROWS_AS(build_grid(p, 5.0, 31, 1, false), ConfigError);
  CHECK_NOTHROW(build_grid(p, 5.0, 32, 5, true));
}

TEST_CASE("gaussian rows") {
  const Grid g = small_grid(false);
  const auto centered = gaussian_row(0.0, 1.0, g);
  CHECK(sum(centered) == doctest::Approx(1.0).epsilon(1e-12));
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(centered[i] == centered[g.mirror(i)]);

  const auto far = gaussian_row(10.0 * g.x_max, 1.0, g);
  CHECK(far.back() == doctest::Approx(1.0).epsilon(1e-12));
  const auto far_left = gaussian_row(-10.0 * g.x_max, 1.0, g);
  CHECK(far_left.front() == doctest::Approx(1.0).epsilon(1e-12));

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> c(-2.0 * g.x_max, 2.0 * g.x_max);
  std::uniform_real_distribution<double> v(0.01, 20.0);
  for (int k = 0; k < 200; ++k) {
    const auto row = gaussian_row(c(rng), v(rng), g);
    CHECK(std::abs(sum(row) - 1.0) <= 1e-12);
    for (double w : row) CHECK(w >= 0.0);
  }

  CHECK_THROWS_AS(gaussian_row(0.0, 0.0, g), DomainError);
  CHECK_THROWS_AS(gaussian_row(0.0, -1.0, g), DomainError);
  CHECK_THROWS_AS(gaussian_row(0.0, 1.0, small_grid(true)), ConfigError);
}

TEST_CASE("folded rows agree with folding a symmetric row") {
  const Grid sym = small_grid(false);
  const Grid fold = small_grid(true);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> c(0.0, 1.5 * sym.x_max);
  std::uniform_real_distribution<double> v(0.05, 10.0);
  for (int k = 0; k < 200; ++k) {
    const double center = c(rng);
    const double var = v(rng);
    const auto folded = folded_gaussian_row(center, var, fold);
    const auto pushed = fold_row(gaussian_row(center, var, sym), sym);
    REQUIRE(folded.size() == pushed.size());
    CHECK(std::abs(sum(folded) - 1.0) <= 1e-12);
    for (std::size_t j = 0; j < folded.size(); ++j) CHECK(std::abs(folded[j] - pushed[j]) <= 1e-9);
  }

  // Centered: twice the positive half of the centered row, renormalized.
  const auto half = gaussian_row(0.0, 1.0, sym);
  const auto at_zero = folded_gaussian_row(0.0, 1.0, fold);
  const std::size_t z = sym.zero_index();
  for (std::size_t j = 1; j < fold.size(); ++j) CHECK(at_zero[j] == doctest::Approx(2.0 * half[z + j]));
  CHECK(at_zero[0] == doctest::Approx(half[z]));

  CHECK_THROWS_AS(folded_gaussian_row(-1.0, 1.0, fold), DomainError);
  CHECK_THROWS_AS(folded_gaussian_row(1.0, 1.0, sym), ConfigError);
}

TEST_CASE("fold kernels") {
  for (double v : {0.0, 0.3, 1.7}) {
    for (double z : {0.5, 2.0}) {
      CHECK(FoldKernels::varphi(v, 0.0, z) == doctest::Approx(2.0 * FoldKernels::psi(v, z)));
      CHECK(FoldKernels::varphi(v, 0.9, z) == doctest::Approx(FoldKernels::varphi(v, -0.9, z)));
    }
  }
  CHECK(FoldKernels::psi(0.0, 1.0) == 1.0);
  CHECK(FoldKernels::psi(2.0, 2.0) == doctest::Approx(std::exp(-1.0)));
}

TEST_CASE("kernel rows and branch weights are stochastic") {
  std::mt19937_64 rng(2024);
  for (int draw = 0; draw < 10; ++draw) {
    const ModelParams p = random_params(rng);
    for (bool folded : {false, true}) {
      const Kernel k = build_kernel(p, build_grid(p, 4.0, 31, 5, folded));
      for (const auto& m : k.matrices) {
        for (std::size_t i = 0; i < m.n; ++i) CHECK(std::abs(sum(m.row(i)) - 1.0) <= 1e-9);
      }
      for (std::size_t s = 0; s < k.layout.count(); ++s) {
        const int y = k.layout.y_of(s);
        const int b = k.layout.b_of(s);
        for (Action u : {Action::Idle, Action::Uplink, Action::Downlink}) {
          CHECK(k.admissible(s, u) == is_admissible(u, y, b));
          if (!k.admissible(s, u)) continue;
          double w = 0.0;
          for (const auto& br : k.branches[s][index(u)]) w += br.weight;
          CHECK(std::abs(w - 1.0) <= 1e-12);
        }
      }
    }
  }
}

TEST_CASE("kernel branch structure") {
  ModelParams p;
  const Kernel k = build_kernel(p, small_grid(false));
  const SliceLayout& L = k.layout;

  SUBCASE("idle: age saturates, battery gains the harvest") {
    const auto& br = k.branches[L.index(4, 1, 2)][index(Action::Idle)];
    REQUIRE(br.size() == 3);
    for (int ell = 0; ell < 3; ++ell) {
      CHECK(br[ell].next_slice == L.index(4, 1, std::min(2 + ell, 3)));
      CHECK(br[ell].matrix == kDriftMatrix);
      CHECK(br[ell].weight == doctest::Approx(1.0 / 3.0));
    }
  }
  SUBCASE("uplink: success resets age and raises y") {
    const auto& br = k.branches[L.index(2, 0, 1)][index(Action::Uplink)];
    double to_success = 0.0;
    for (const auto& b : br) {
      CHECK(b.matrix == kDriftMatrix);
      if (L.tau_of(b.next_slice) == 1 && L.y_of(b.next_slice) == 1) to_success += b.weight;
    }
    CHECK(to_success == doctest::Approx(1.0 - p.p));
  }
  SUBCASE("downlink: success goes through the reset for the current age") {
    const auto& br = k.branches[L.index(3, 1, 0)][index(Action::Downlink)];
    double reset = 0.0;
    for (const auto& b : br) {
      if (b.matrix == reset_matrix(3)) {
        reset += b.weight;
        CHECK(L.y_of(b.next_slice) == 0);
        CHECK(L.tau_of(b.next_slice) == 4);
      } else {
        CHECK(b.matrix == kDriftMatrix);
        CHECK(L.y_of(b.next_slice) == 1);
      }
    }
    CHECK(reset == doctest::Approx(1.0 - p.p));
  }
}

TEST_CASE("reset rows are the post-control law, identical across source nodes") {
  ModelParams p;
  p.p = 0.0;
  const Grid g = small_grid(false);
  const Kernel k = build_kernel(p, g);
  for (int tau = 0; tau <= g.tau_max; ++tau) {
    const XMatrix& m = k.matrices[reset_matrix(tau)];
    CHECK(m.identical_rows);
    const auto want = gaussian_row(0.0, eps_tau(tau, p.a, p.sigma2), g);
    for (std::size_t i = 0; i < m.n; ++i) {
      for (std::size_t j = 0; j < m.n; ++j) CHECK(m.row(i)[j] == doctest::Approx(want[j]).epsilon(1e-14));
    }
  }
  const auto& br = k.branches[k.layout.index(2, 1, 1)][index(Action::Downlink)];
  for (const auto& b : br) {
    if (b.weight > 0.0) CHECK(b.matrix == reset_matrix(2));
  }
}

TEST_CASE("p = 1: uplink behaves as idle except for the battery") {
  ModelParams p;
  p.p = 1.0;
  const Kernel k = build_kernel(p, small_grid(true));
  const SliceLayout& L = k.layout;
  for (int tau = 0; tau <= L.tau_max; ++tau) {
    const int next_tau = std::min(tau + 1, L.tau_max);
    for (int b = 1; b <= L.B; ++b) {
      std::vector<double> want(L.count(), 0.0);
      for (int ell = 0; ell <= p.max_harvest(); ++ell) {
        want[L.index(next_tau, 0, std::min(b + ell - 1, L.B))] += p.harvest_probs[ell];
      }
      std::vector<double> got(L.count(), 0.0);
      for (const auto& br : k.branches[L.index(tau, 0, b)][index(Action::Uplink)]) {
        CHECK(br.matrix == kDriftMatrix);
        got[br.next_slice] += br.weight;
      }
      for (std::size_t s = 0; s < L.count(); ++s) CHECK(got[s] == doctest::Approx(want[s]).epsilon(1e-14));
    }
  }
}

TEST_CASE("symmetric drift kernel commutes with x -> -x") {
  const Grid g = small_grid(false);
  const Kernel k = build_kernel(ModelParams{}, g);
  const XMatrix& m = k.matrices[kDriftMatrix];
  for (std::size_t i = 0; i < m.n; ++i) {
    for (std::size_t j = 0; j < m.n; ++j) {
      CHECK(std::abs(m.row(i)[j] - m.row(g.mirror(i))[g.mirror(j)]) <= 1e-15);
    }
  }
}

TEST_CASE("folded kernel equals the symmetric kernel pushed through the fold") {
  ModelParams p;
  const Grid sym = small_grid(false);
  const Grid fold = small_grid(true);
  const Kernel ks = build_kernel(p, sym);
  const Kernel kf = build_kernel(p, fold);
  REQUIRE(ks.matrices.size() == kf.matrices.size());
  for (std::size_t m = 0; m < ks.matrices.size(); ++m) {
    for (std::size_t j = 0; j < fold.size(); ++j) {
      const auto pushed = fold_row(ks.matrices[m].row(sym.zero_index() + j), sym);
      for (std::size_t l = 0; l < fold.size(); ++l) CHECK(std::abs(pushed[l] - kf.matrices[m].row(j)[l]) <= 1e-9);
    }
  }
}

TEST_CASE("kernel artifact round trip") {
  ModelParams p;
  p.B = 2;
  const Kernel k = build_kernel(p, build_grid(p, 4.0, 31, 3, true));
  const auto path = (std::filesystem::temp_directory_path() / "wncs_kernel_roundtrip.json").string();
  write_kernel(k, path);
  const Kernel back = read_kernel(path);
  CHECK(back.grid.x_nodes == k.grid.x_nodes);
  CHECK(back.layout.count() == k.layout.count());
  REQUIRE(back.matrices.size() == k.matrices.size());
  for (std::size_t m = 0; m < k.matrices.size(); ++m) CHECK(back.matrices[m].data == k.matrices[m].data);
  for (std::size_t s = 0; s < k.layout.count(); ++s) {
    for (int u = 0; u < kNumActions; ++u) {
      REQUIRE(back.branches[s][u].size() == k.branches[s][u].size());
      for (std::size_t q = 0; q < k.branches[s][u].size(); ++q) {
        CHECK(back.branches[s][u][q].weight == k.branches[s][u][q].weight);
        CHECK(back.branches[s][u][q].next_slice == k.branches[s][u][q].next_slice);
      }
    }
  }
  std::filesystem::remove(path);
  CHECK_THROWS_AS(read_kernel(path), ConfigError);
}
