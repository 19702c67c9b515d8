#include "wncs/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include <json.hpp>

namespace wncs {

namespace {

double normal_pdf(double x, double center, double variance) {
  return FoldKernels::psi(x - center, variance) / std::sqrt(2.0 * std::numbers::pi * variance);
}

// P(X > t) for X ~ N(center, variance).
double upper_tail(double t, double center, double variance) {
  return 0.5 * std::erfc((t - center) / std::sqrt(2.0 * variance));
}

// P(X < t) for X ~ N(center, variance).
double lower_tail(double t, double center, double variance) {
  return 0.5 * std::erfc((center - t) / std::sqrt(2.0 * variance));
}

void normalize(std::vector<double>& row) {
  double total = 0.0;
  for (double v : row) total += v;
  for (double& v : row) v /= total;
}

void check_variance(double variance) {
  if (!(variance > 0.0) || !std::isfinite(variance)) {
    throw DomainError("Gaussian row: variance must be > 0");
  }
}

}  // namespace

std::size_t Grid::nearest(double x) const {
  if (size() <= 1) return 0;
  const double origin = x_nodes.front();
  const double k = std::round((x - origin) / dx);
  if (!(k > 0.0)) return 0;
  return std::min(static_cast<std::size_t>(k), size() - 1);
}

Grid Grid::uniform(double x_max, std::size_t n_nodes, int tau_max, bool folded) {
  if (!(x_max > 0.0)) throw ConfigError("grid: x_max must be > 0");
  if (n_nodes == 0) throw ConfigError("grid: need at least one node");
  if (!folded && n_nodes % 2 == 0) throw ConfigError("grid: symmetric grids need an odd node count");
  if (tau_max < 2) throw ConfigError("grid: tau_max must be >= 2");

  Grid g;
  g.x_max = x_max;
  g.tau_max = tau_max;
  g.folded = folded;
  if (folded) {
    const std::size_t half = (n_nodes + 1) / 2;
    g.dx = half > 1 ? x_max / static_cast<double>(half - 1) : 2.0 * x_max;
    g.x_nodes.resize(half);
    for (std::size_t j = 0; j < half; ++j) g.x_nodes[j] = static_cast<double>(j) * g.dx;
  } else {
    const auto m = static_cast<long>((n_nodes - 1) / 2);
    g.dx = n_nodes > 1 ? x_max / static_cast<double>(m) : 2.0 * x_max;
    g.x_nodes.resize(n_nodes);
    for (std::size_t i = 0; i < n_nodes; ++i) {
      g.x_nodes[i] = static_cast<double>(static_cast<long>(i) - m) * g.dx;
    }
  }
  if (g.x_nodes.size() > 1) {
    // Pin the outer node exactly on x_max.
    g.x_nodes.back() = x_max;
    if (!folded) g.x_nodes.front() = -x_max;
  }
  return g;
}

Grid build_grid(const ModelParams& params, double x_max_multiplier, int n_nodes, int tau_max,
                bool folded) {
  if (!(x_max_multiplier > 0.0)) throw ConfigError("grid: x_max multiplier must be > 0");
  if (n_nodes < 31) throw ConfigError("grid: n_nodes must be >= 31");
  if (!folded && n_nodes % 2 == 0) throw ConfigError("grid: n_nodes must be odd");
  if (tau_max < 2) throw ConfigError("grid: tau_max must be >= 2");
  double widest = 0.0;
  for (int tau = 0; tau <= tau_max; ++tau) {
    widest = std::max(widest, eps_tau(tau, params.a, params.sigma2));
  }
  return Grid::uniform(x_max_multiplier * std::sqrt(widest), static_cast<std::size_t>(n_nodes),
                       tau_max, folded);
}

double FoldKernels::psi(double v, double z) { return std::exp(-(v * v) / (2.0 * z)); }

double FoldKernels::varphi(double v, double s, double z) { return psi(v - s, z) + psi(v + s, z); }

std::vector<double> gaussian_row(double center, double variance, const Grid& grid) {
  check_variance(variance);
  if (grid.folded) throw ConfigError("gaussian_row needs a symmetric grid");
  const std::size_t n = grid.size();
  std::vector<double> row(n, 0.0);
  if (n == 1) {
    row[0] = 1.0;
    return row;
  }
  for (std::size_t j = 0; j < n; ++j) row[j] = normal_pdf(grid.x_nodes[j], center, variance) * grid.dx;
  const double edge = grid.x_max + 0.5 * grid.dx;
  row.front() += lower_tail(-edge, center, variance);
  row.back() += upper_tail(edge, center, variance);
  normalize(row);
  return row;
}

std::vector<double> folded_gaussian_row(double center_abs, double variance, const Grid& grid) {
  check_variance(variance);
  if (!grid.folded) throw ConfigError("folded_gaussian_row needs a folded grid");
  if (center_abs < 0.0) throw DomainError("folded_gaussian_row: center must be >= 0");
  const std::size_t n = grid.size();
  std::vector<double> row(n, 0.0);
  if (n == 1) {
    row[0] = 1.0;
    return row;
  }
  const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi * variance);
  row[0] = 0.5 * FoldKernels::varphi(0.0, center_abs, variance) * norm * grid.dx;
  for (std::size_t j = 1; j < n; ++j) {
    row[j] = FoldKernels::varphi(grid.x_nodes[j], center_abs, variance) * norm * grid.dx;
  }
  const double edge = grid.x_max + 0.5 * grid.dx;
  row.back() += upper_tail(edge, center_abs, variance) + lower_tail(-edge, center_abs, variance);
  normalize(row);
  return row;
}

std::vector<double> fold_row(std::span<const double> row, const Grid& symmetric) {
  if (symmetric.folded || row.size() != symmetric.size()) {
    throw ConfigError("fold_row: row must live on a symmetric grid");
  }
  const std::size_t m = symmetric.zero_index();
  std::vector<double> out(m + 1, 0.0);
  out[0] = row[m];
  for (std::size_t j = 1; j <= m; ++j) out[j] = row[m + j] + row[m - j];
  return out;
}

namespace {

XMatrix drift_matrix(const ModelParams& params, const Grid& grid) {
  XMatrix mat;
  mat.n = grid.size();
  mat.data.reserve(mat.n * mat.n);
  for (double x : grid.x_nodes) {
    const double center = params.a * x;
    const auto row = grid.folded ? folded_gaussian_row(std::abs(center), params.sigma2, grid)
                                 : gaussian_row(center, params.sigma2, grid);
    mat.data.insert(mat.data.end(), row.begin(), row.end());
  }
  mat.identical_rows = params.a == 0.0;
  return mat;
}

XMatrix reset_matrix_for(int tau, const ModelParams& params, const Grid& grid) {
  const double var = eps_tau(tau, params.a, params.sigma2);
  const auto row = grid.folded ? folded_gaussian_row(0.0, var, grid) : gaussian_row(0.0, var, grid);
  XMatrix mat;
  mat.n = grid.size();
  mat.identical_rows = true;
  mat.data.reserve(mat.n * mat.n);
  for (std::size_t i = 0; i < mat.n; ++i) mat.data.insert(mat.data.end(), row.begin(), row.end());
  return mat;
}

}  // namespace

Kernel build_kernel(const ModelParams& params, const Grid& grid) {
  params.validate();
  if (grid.size() == 0 || grid.tau_max < 2) throw ConfigError("build_kernel: invalid grid");

  Kernel k;
  k.params = params;
  k.grid = grid;
  k.layout = SliceLayout{grid.tau_max, params.B};
  k.matrices.push_back(drift_matrix(params, grid));
  for (int tau = 0; tau <= grid.tau_max; ++tau) k.matrices.push_back(reset_matrix_for(tau, params, grid));

  const SliceLayout& L = k.layout;
  const double p_up = params.uplink_drop();
  const double p_down = params.downlink_drop();
  const int B = params.B;
  k.branches.resize(L.count());

  for (std::size_t s = 0; s < L.count(); ++s) {
    const int tau = L.tau_of(s);
    const int y = L.y_of(s);
    const int b = L.b_of(s);
    const int next_tau = std::min(tau + 1, grid.tau_max);
    auto& out = k.branches[s];

    for (int ell = 0; ell <= params.max_harvest(); ++ell) {
      const double p_ell = params.harvest_probs[static_cast<std::size_t>(ell)];
      const int b_keep = std::min(b + ell, B);

      out[index(Action::Idle)].push_back({p_ell, L.index(next_tau, y, b_keep), kDriftMatrix});

      if (b > 0) {
        const int b_spend = std::min(b + ell - 1, B);
        auto& up = out[index(Action::Uplink)];
        up.push_back({p_ell * p_up, L.index(next_tau, y, b_spend), kDriftMatrix});
        up.push_back({p_ell * (1.0 - p_up), L.index(1, 1, b_spend), kDriftMatrix});
      }

      if (y == 1) {
        auto& down = out[index(Action::Downlink)];
        down.push_back({p_ell * p_down, L.index(next_tau, 1, b_keep), kDriftMatrix});
        down.push_back({p_ell * (1.0 - p_down), L.index(next_tau, 0, b_keep), reset_matrix(tau)});
      }
    }
  }
  return k;
}

namespace {

nlohmann::json params_json(const ModelParams& p) {
  return {{"a", p.a},           {"sigma2", p.sigma2}, {"p", p.p},
          {"p_up", p.uplink_drop()}, {"p_down", p.downlink_drop()}, {"beta", p.beta},
          {"B", p.B},           {"K", p.K()},         {"harvest_probs", p.harvest_probs}};
}

}  // namespace

void write_kernel(const Kernel& kernel, const std::string& path) {
  nlohmann::json j;
  j["format"] = "wncs-kernel";
  j["schema_version"] = 1;
  j["params"] = params_json(kernel.params);
  j["grid"] = {{"x_nodes", kernel.grid.x_nodes}, {"dx", kernel.grid.dx},
               {"x_max", kernel.grid.x_max},     {"tau_max", kernel.grid.tau_max},
               {"folded", kernel.grid.folded}};
  j["layout"] = {{"tau_max", kernel.layout.tau_max},
                 {"B", kernel.layout.B},
                 {"slice_index", "(tau * 2 + y) * (B + 1) + b"}};
  j["decisions"] = {"gaussian rows: normalized density x dx, boundary tail lumping, renormalized",
                    "age saturates at tau_max",
                    "post-control variance sigma2 * (1 - a^(2(tau+1))) / (1 - a^2)"};
  if (std::abs(kernel.params.a) >= 1.0) {
    j["decisions"].push_back("|a| >= 1: age truncation at tau_max is an approximation");
  }
  auto& mats = j["matrices"] = nlohmann::json::array();
  for (const auto& m : kernel.matrices) {
    mats.push_back({{"n", m.n}, {"identical_rows", m.identical_rows}, {"data", m.data}});
  }
  auto& br = j["branches"] = nlohmann::json::array();
  for (std::size_t s = 0; s < kernel.branches.size(); ++s) {
    for (int u = 0; u < kNumActions; ++u) {
      for (const auto& b : kernel.branches[s][static_cast<std::size_t>(u)]) {
        br.push_back({s, u, b.weight, b.next_slice, b.matrix});
      }
    }
  }
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write kernel artifact: " + path);
  out << j.dump() << '\n';
}

Kernel read_kernel(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read kernel artifact: " + path);
  const auto j = nlohmann::json::parse(in);
  if (j.value("format", "") != "wncs-kernel") throw ConfigError("not a kernel artifact: " + path);

  Kernel k;
  const auto& p = j.at("params");
  k.params.a = p.at("a");
  k.params.sigma2 = p.at("sigma2");
  k.params.p = p.at("p");
  k.params.p_up = p.at("p_up");
  k.params.p_down = p.at("p_down");
  k.params.beta = p.at("beta");
  k.params.B = p.at("B");
  k.params.harvest_probs = p.at("harvest_probs").get<std::vector<double>>();
  const auto& g = j.at("grid");
  k.grid.x_nodes = g.at("x_nodes").get<std::vector<double>>();
  k.grid.dx = g.at("dx");
  k.grid.x_max = g.at("x_max");
  k.grid.tau_max = g.at("tau_max");
  k.grid.folded = g.at("folded");
  k.layout = SliceLayout{j.at("layout").at("tau_max"), j.at("layout").at("B")};
  for (const auto& m : j.at("matrices")) {
    XMatrix mat;
    mat.n = m.at("n");
    mat.identical_rows = m.at("identical_rows");
    mat.data = m.at("data").get<std::vector<double>>();
    k.matrices.push_back(std::move(mat));
  }
  k.branches.resize(k.layout.count());
  for (const auto& b : j.at("branches")) {
    const std::size_t s = b.at(0);
    const int u = b.at(1);
    k.branches.at(s).at(static_cast<std::size_t>(u))
        .push_back({b.at(2).get<double>(), b.at(3).get<std::size_t>(), b.at(4).get<std::size_t>()});
  }
  return k;
}

}  // namespace wncs
