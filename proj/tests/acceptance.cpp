// Acceptance run: one PASS/FAIL line per criterion. Tolerances are fixed here.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "conelab/cli.hpp"
#include "conelab/errors.hpp"
#include "conelab/grids.hpp"
#include "conelab/needle.hpp"
#include "conelab/variational.hpp"

using namespace conelab;

namespace {

constexpr double kPi = std::numbers::pi;

struct Criterion {
  int id;
  std::string name;
  double time_limit;  // seconds, 0 for none
  std::function<bool(std::ostringstream&)> body;
};

template <class F>
double simpson(F f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

// --- 1 ----------------------------------------------------------------------
bool distortion(std::ostringstream& detail) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  int bad_linear = 0;
  for (int i = 0; i < 1000; ++i) {
    const double N = 1.0 + 9.0 * U(rng);
    const double t = U(rng);
    const double theta = 10.0 * U(rng);
    if (sigma({0, N, t, theta}) != t || tau({0, N, t, theta}) != t) ++bad_linear;
  }
  int bad_branch = 0;
  for (int i = 0; i < 1000; ++i) {
    const double K = 5.0 * U(rng) + 1e-3;
    const double N = 0.5 + 5.0 * U(rng);
    const double theta = 2.0 * kPi * std::sqrt(N / K) * U(rng);
    const bool expect_inf = K * theta * theta >= N * kPi * kPi;
    if (std::isinf(sigma({K, N, 0.5, theta})) != expect_inf) ++bad_branch;
  }
  // The boundary itself: K theta^2 = N pi^2 exactly.
  if (!std::isinf(sigma({1.0, 1.0, 0.5, kPi}))) ++bad_branch;
  if (!std::isinf(sigma({4.0, 4.0, 0.5, kPi}))) ++bad_branch;
  detail << "K=0 mismatches " << bad_linear << "/1000, branch mismatches " << bad_branch << "/1002";
  return bad_linear == 0 && bad_branch == 0;
}

// --- 2, 3 -------------------------------------------------------------------
bool t_closed_form(std::ostringstream& detail) {
  double worst = 0.0;
  for (double N : {2.0, 3.0, 4.5}) {
    for (double k : {1.0, 2.0}) {
      for (double lambda : {0.1, 1.0, 10.0}) {
        const double expected = std::pow(kPi / 2, N / 2) * k * std::pow(lambda, -N / 2);
        worst = std::max(worst, rel(moment_T_hpw(N, k, lambda).T, expected));
      }
    }
  }
  detail << "max rel deviation " << worst << " (tol 1e-6)";
  return worst <= 1e-6;
}

bool t_identity(std::ostringstream& detail) {
  double analytic = 0.0;
  double fd = 0.0;
  for (double N : {2.0, 3.0, 4.5}) {
    for (double k : {1.0, 2.0}) {
      for (double lambda : {0.1, 1.0, 10.0}) {
        const auto m = moment_T_hpw(N, k, lambda);
        analytic = std::max(analytic, std::abs(-lambda * m.T_prime - N / 2 * m.T) / m.T);
        const double h = 1e-4 * lambda;
        const double d = (moment_T_hpw(N, k, lambda + h).T - moment_T_hpw(N, k, lambda - h).T) / (2 * h);
        fd = std::max(fd, std::abs(-lambda * d - N / 2 * m.T) / m.T);
      }
    }
  }
  detail << "analytic residual " << analytic << ", finite-difference residual " << fd << " (tol 1e-6)";
  return analytic <= 1e-6 && fd <= 1e-6;
}

// --- 4, 5, 6 ----------------------------------------------------------------
bool hpw_cones(std::ostringstream& detail) {
  double worst = 0.0;
  for (double N : {2.5, 3.0, 4.0}) {
    const double sharp = N * N / 4;
    for (double lambda : log_spaced(1e-3, 1e3, 7)) {
      const auto r = hpw_report(Density::power_law(1, N), N, hpw_extremal(lambda));
      worst = std::max(worst, rel(r.quotient, sharp));
    }
  }
  detail << "max rel deviation " << worst << " (tol 1e-6)";
  return worst <= 1e-6;
}

const std::vector<CknParams>& ckn_pairs() {
  static const std::vector<CknParams> v = {CknParams::make(4, 1, 2.5), CknParams::make(3, 0.5, 3.5)};
  return v;
}

bool ckn_cones(std::ostringstream& detail) {
  double worst = 0.0;
  for (const auto& p : ckn_pairs()) {
    const double sharp = (p.N - p.q) * (p.N - p.q) / (p.p * p.p);
    for (double lambda : log_spaced(1e-2, 1e2, 5)) {
      const auto r = ckn_report(Density::power_law(1, p.N), p, ckn_extremal(p, lambda));
      worst = std::max(worst, rel(r.quotient, sharp));
    }
  }
  detail << "max rel deviation " << worst << " (tol 1e-5)";
  return worst <= 1e-5;
}

bool ckn_scaling(std::ostringstream& detail) {
  double worst = 0.0;
  for (const auto& p : ckn_pairs()) {
    const double alpha = (p.N - p.q) / (2 - p.q) - p.p / (p.p - 2);
    for (double lambda : log_spaced(1e-2, 1e2, 5)) {
      const auto m = moment_T_ckn(p, 1.0, lambda);
      worst = std::max(worst, rel(m.ratio, std::pow(2.0, alpha)));
    }
  }
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  int nonneg = 0;
  int tested = 0;
  while (tested < 1000) {
    const double q = 2.0 * U(rng);
    const double p = 2.0 + 8.0 * U(rng);
    const double N = 2.0 + (2 * (p - q) / (p - 2) - 2.0) * U(rng);
    if (!CknParams::admissible(p, q, N)) continue;
    ++tested;
    if (!(CknParams::make(p, q, N).alpha() < 0.0)) ++nonneg;
  }
  detail << "max ratio deviation " << worst << " (tol 1e-6), alpha >= 0 in " << nonneg << "/1000";
  return worst <= 1e-6 && nonneg == 0;
}

// --- 7 ----------------------------------------------------------------------
bool witnesses(std::ostringstream& detail) {
  const auto grid = default_lambda_grid();
  const auto params = CknParams::make(4, 1, 2.5);

  const auto h = family_scan(Density::truncated(1, 3, 1), 3, std::nullopt, FamilyKind::Hpw, grid);
  const double lh = h.argmin_lambda;
  const double M0 = simpson([&](double x) { return x * x * std::exp(-2 * lh * x * x); }, 0, 1, 200000);
  const double M2 = simpson([&](double x) { return std::pow(x, 4) * std::exp(-2 * lh * x * x); }, 0, 1, 200000);
  const double hpw_brute = 2 * lh * M2 / M0 - 1.5;

  const auto c = family_scan(Density::truncated(1, 2.5, 1), 2.5, params, FamilyKind::Ckn, grid);
  const double lc = c.argmin_lambda;
  // x = t^2: I2 = int 2t^2 (l+t^2)^{-2}, I1 = int 2t^4 (l+t^2)^{-3} over [0,1]
  const double I2 = simpson([&](double t) { return 2 * t * t * std::pow(lc + t * t, -2.0); }, 0, 1, 200000);
  const double I1 = simpson([&](double t) { return 2 * std::pow(t, 4) * std::pow(lc + t * t, -3.0); }, 0, 1, 200000);
  const double ckn_brute = 0.5 * I1 / I2 - 1.5 / 4;

  const auto ph = family_scan(Density::power_law(1, 3), 3, std::nullopt, FamilyKind::Hpw, grid);
  const auto pc = family_scan(Density::power_law(1, 2.5), 2.5, params, FamilyKind::Ckn, grid);
  double cone_worst = 0.0;
  for (double s : ph.slacks) cone_worst = std::max(cone_worst, std::abs(s));
  for (double s : pc.slacks) cone_worst = std::max(cone_worst, std::abs(s));

  detail << "HPW min " << h.min_value << " at lambda " << lh << " (brute " << hpw_brute << "), CKN min " << c.min_value
         << " at lambda " << lc << " (brute " << ckn_brute << "), cone max |slack| " << cone_worst;
  return h.min_value < -1e-3 && c.min_value < -1e-3 && hpw_brute < -1e-3 && ckn_brute < -1e-3 &&
         rel(h.min_value, hpw_brute) <= 1e-6 && rel(c.min_value, ckn_brute) <= 1e-6 && cone_worst <= 1e-6;
}

// --- 8 ----------------------------------------------------------------------
bool dichotomy(std::ostringstream& detail) {
  struct Entry {
    const char* name;
    Density d;
    double N;
    std::optional<CknParams> params;
    bool cone;
  };
  const auto p25 = CknParams::make(4, 1, 2.5);
  const std::vector<Entry> corpus = {
      {"x^2", Density::power_law(1, 3), 3, std::nullopt, true},
      {"2x^2", Density::power_law(2, 3), 3, std::nullopt, true},
      {"x^1.5 ckn", Density::power_law(1, 2.5), 2.5, p25, true},
      {"x^2 on [0,1]", Density::truncated(1, 3, 1), 3, std::nullopt, false},
      {"x^1.5 on [0,1] ckn", Density::truncated(1, 2.5, 1), 2.5, p25, false},
      {"2x^3 on [0,3]", Density::truncated(2, 4, 3), 4, std::nullopt, false},
      {"x^2 e^-x on [0,2]", Density::power_law_exp(1, 3, 1, 2), 3, std::nullopt, false},
      {"const on [0,10]", Density::tabulated({0, 10}, {1, 1}), 3, std::nullopt, false},
      {"linear on [0,10]", Density::tabulated({0, 10}, {0, 10}), 3, std::nullopt, false},
      {"x^2 against 4", Density::power_law(1, 3), 4, std::nullopt, false},
  };
  int ok = 0;
  for (const auto& e : corpus) {
    try {
      const auto v = rigidity_verdict(e.d, e.N, e.params);
      double min_slack = v.hpw_scan.min_value;
      if (v.ckn_scan) min_slack = std::min(min_slack, v.ckn_scan->min_value);
      const bool agree = v.cone.is_cone == (min_slack >= -kVerdictThreshold);
      if (agree && v.is_cone() == e.cone) {
        ++ok;
      } else {
        detail << e.name << " disagrees; ";
      }
    } catch (const std::exception& ex) {
      detail << e.name << " threw " << ex.what() << "; ";
    }
  }
  detail << ok << "/" << corpus.size() << " consistent";
  return ok == static_cast<int>(corpus.size());
}

// --- 9 ----------------------------------------------------------------------
bool per_ray(std::ostringstream& detail) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  double hpw_min = kInfinity;
  double ckn_min = kInfinity;
  // Odd draws are extremal samples with 5% nodal noise, close to equality.
  auto noisy = [&](auto&& f, std::vector<double> nodes) {
    GridFunction u{std::move(nodes), {}};
    for (double x : u.nodes) u.values.push_back(f(x) * (1 + 0.05 * (2 * U(rng) - 1)));
    u.values.back() = 0.0;
    return u;
  };
  for (int i = 0; i < 200; ++i) {
    const double N = 2.0 + 3.0 * U(rng);
    const auto u = i % 2 == 0 ? random_grid_function(rng) : noisy(hpw_extremal(0.5 + U(rng)), linspace(0, 6, 97));
    hpw_min = std::min(hpw_min, hpw_report(Density::power_law(0.5 + 2 * U(rng), N), N, u).slack);
  }
  for (int i = 0; i < 200; ++i) {
    const auto& p = ckn_pairs()[i % 2];
    const auto u = (i / 2) % 2 == 0 ? random_grid_function(rng)
                                    : noisy(ckn_extremal(p, 0.5 + U(rng)), geometric_grid(1e-3, 1e3, 120));
    ckn_min = std::min(ckn_min, ckn_report(Density::power_law(0.5 + 2 * U(rng), p.N), p, u).slack);
  }
  detail << "HPW min slack " << hpw_min << ", CKN min slack " << ckn_min << " (tol -1e-9)";
  return hpw_min >= -1e-9 && ckn_min >= -1e-9;
}

// --- 10 ---------------------------------------------------------------------
bool needles(std::ostringstream& detail) {
  const NeedleEnsemble e{3, {{1, 0.25}, {2, 0.25}, {0.5, 0.5}}};
  const double disintegration = verify_disintegration(e, default_cone_radii()).max_rel_deviation;
  const auto rw = reweight(e, hpw_extremal(1.0));
  double moment_dev = rw.max_moment_deviation;
  for (double m : rw.normalized_moment) moment_dev = std::max(moment_dev, std::abs(m - 1.0));
  // Independent: C_a = c_a Gamma(5/2) / (2 * 2^{5/2}) for u = e^{-x^2}, N = 3
  const double unit = 0.75 * std::sqrt(kPi) / (2 * std::pow(2.0, 2.5));
  double q_total = 0.0;
  for (const auto& r : e.rays) q_total += r.q * r.c * unit;
  const double total_dev = rel(rw.tilde_q_total, q_total);

  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> U(0.1, 3.0);
  double chain_min = kInfinity;
  for (int i = 0; i < 100; ++i) {
    const NeedleEnsemble r{2.2 + U(rng), {{U(rng), 0.4}, {U(rng), 0.6}}};
    const auto a = aggregate_hpw(r, std::vector<TestFunction>{random_grid_function(rng), random_grid_function(rng)});
    chain_min = std::min({chain_min, a.final_slack, a.integrated_slack, a.cauchy_schwarz_slack});
  }
  double tight = 0.0;
  for (double lambda : {0.1, 1.0, 10.0}) {
    tight = std::max(tight, std::abs(aggregate_hpw(NeedleEnsemble{4, {{1, 0.5}, {3, 0.5}}}, hpw_extremal(lambda)).final_slack));
  }
  detail << "disintegration " << disintegration << " (1e-12), moments " << moment_dev << " and total " << total_dev
         << " (1e-8), chain min " << chain_min << " (>= -1e-9), extremal |slack| " << tight << " (1e-8)";
  return disintegration <= 1e-12 && moment_dev <= 1e-8 && total_dev <= 1e-8 && rw.reassembly_rel_deviation <= 1e-8 &&
         chain_min >= -1e-9 && tight <= 1e-8;
}

// --- 11 ---------------------------------------------------------------------
bool gradients(std::ostringstream& detail) {
  std::mt19937_64 rng(11);
  const auto params = ckn_pairs()[0];
  QuadratureConfig cfg;
  cfg.rel_tol = 1e-14;
  cfg.abs_tol = 1e-300;
  const Density hpw_ds[] = {Density::power_law(1, 3), Density::truncated(1, 3, 2.5), Density::power_law_exp(1, 3, 1, 2),
                            Density::tabulated({0, 1, 5}, {0, 2, 1})};
  const Density ckn_ds[] = {Density::power_law(1, 2.5), Density::truncated(2, 2.5, 3)};
  double worst = 0.0;
  for (int c = 0; c < 50; ++c) {
    const bool ckn = c % 2 == 1;
    const Density& d = ckn ? ckn_ds[c % 2] : hpw_ds[c % 4];
    const auto u = random_grid_function(rng);
    auto logq = [&](const GridFunction& w) {
      return ckn ? std::log(ckn_report(d, params, w, cfg).quotient) : std::log(hpw_report(d, 3, w, cfg).quotient);
    };
    const auto g = quotient_gradient(d, ckn ? std::optional(params) : std::nullopt, u,
                                     ckn ? QuotientKind::Ckn : QuotientKind::Hpw);
    std::vector<double> fd(g.size());
    double scale = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double h = 1e-5 * std::max(1.0, std::abs(u.values[i]));
      GridFunction up = u;
      GridFunction dn = u;
      up.values[i] += h;
      dn.values[i] -= h;
      fd[i] = (logq(up) - logq(dn)) / (2 * h);
      scale = std::max(scale, std::abs(fd[i]));
    }
    for (std::size_t i = 0; i < g.size(); ++i) worst = std::max(worst, std::abs(g[i] - fd[i]) / scale);
  }
  detail << "max deviation relative to the largest component " << worst << " (tol 1e-5)";
  return worst <= 1e-5;
}

// --- 12 ---------------------------------------------------------------------
bool minimization(std::ostringstream& detail) {
  MinimizeOptions opt;
  opt.max_iters = 20000;
  const auto t0 = std::chrono::steady_clock::now();
  const auto h = minimize_quotient(Density::power_law(1, 3), 3, std::nullopt, QuotientKind::Hpw,
                                   tent_function(linspace(0, 4, 161)), opt);
  const double hpw_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::mt19937_64 rng(0);
  const auto params = ckn_pairs()[0];
  const auto c = minimize_quotient(Density::power_law(1, 2.5), 2.5, params, QuotientKind::Ckn,
                                   random_positive_grid_function(rng, geometric_grid(1e-3, 1e3, 120)), opt);
  const double hpw_gap = (h.quotient - 2.25) / 2.25;
  const double ckn_gap = (c.quotient - 0.140625) / 0.140625;
  detail << "HPW Q* " << h.quotient << " (gap " << hpw_gap << ", " << hpw_seconds << " s), CKN Q* " << c.quotient
         << " (gap " << ckn_gap << ")";
  return hpw_gap >= -1e-6 && hpw_gap <= 0.01 && hpw_seconds < 10.0 && std::abs(ckn_gap) <= 0.01;
}

// --- 13 ---------------------------------------------------------------------
bool cli_contract(std::ostringstream& detail) {
  const std::string pl = R"({"kind":"powerlaw","c":1,"N":3})";
  const std::string tr = R"({"kind":"truncated","c":1,"N":3,"R":1})";
  const std::string pl25 = R"({"kind":"powerlaw","c":1,"N":2.5})";
  const std::string ens = R"({"N":3,"rays":[{"c":1,"q":0.5},{"c":2,"q":0.5}]})";
  struct Case {
    std::vector<std::string> args;
    int code;
  };
  const std::vector<Case> cases = {
      {{"check-mcp", "--density", pl, "--N", "3"}, 0},
      {{"check-mcp", "--density", pl, "--N", "2"}, 1},
      {{"check-cone", "--density", tr, "--N", "3"}, 1},
      {{"bg-profile", "--density", pl, "--N", "3", "--format", "csv"}, 0},
      {{"hpw", "--density", tr, "--N", "3", "--lambda", "0.01"}, 1},
      {{"ckn", "--density", pl25, "--N", "2.5", "--p", "4", "--q", "1", "--lambda", "1"}, 0},
      {{"scan", "--kind", "hpw", "--density", tr, "--N", "3", "--format", "csv"}, 1},
      {{"minimize", "--kind", "ckn", "--density", pl25, "--N", "2.5", "--p", "4", "--q", "1", "--init", "random",
        "--nodes", "30", "--seed", "5", "--max-iters", "5"},
       3},
      {{"verdict", "--density", pl, "--N", "3"}, 0},
      {{"needle-verify", "--ensemble", ens, "--lambda", "1"}, 0},
      {{"needle-aggregate", "--ensemble", ens, "--kind", "hpw", "--lambda", "1"}, 0},
      {{"distortion", "--K", "0", "--N", "3", "--t", "0.3", "--theta", "2"}, 0},
      {{"verdict", "--density", pl, "--N", "3", "--no-such-flag"}, 2},
      {{"hpw", "--density", pl, "--N", "3", "--u", R"({"kind":"grid","nodes":[0,1],"values":[0,0]})"}, 3},
  };
  int ok = 0;
  for (const auto& c : cases) {
    std::ostringstream o1, e1, o2, e2;
    const int r1 = cli::run(c.args, o1, e1);
    const int r2 = cli::run(c.args, o2, e2);
    if (r1 == c.code && r2 == c.code && o1.str() == o2.str()) {
      ++ok;
    } else {
      detail << c.args[0] << " gave " << r1 << "/" << r2 << "; ";
    }
  }
  detail << ok << "/" << cases.size() << " subcommand runs deterministic with expected exit codes";
  return ok == static_cast<int>(cases.size());
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "distortion exactness", 1.0, distortion},
      {2, "T closed form", 2.0, t_closed_form},
      {3, "T scaling identity", 0.0, t_identity},
      {4, "HPW equality on cones", 5.0, hpw_cones},
      {5, "CKN equality on cones", 0.0, ckn_cones},
      {6, "CKN scaling law", 0.0, ckn_scaling},
      {7, "rigidity witnesses", 0.0, witnesses},
      {8, "verdict dichotomy", 0.0, dichotomy},
      {9, "per-ray property suites", 0.0, per_ray},
      {10, "needle machinery", 0.0, needles},
      {11, "gradient check", 0.0, gradients},
      {12, "minimization", 0.0, minimization},
      {13, "CLI determinism and exit codes", 0.0, cli_contract},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    std::ostringstream detail;
    bool pass = false;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      pass = c.body(detail);
    } catch (const std::exception& e) {
      detail << "exception: " << e.what();
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.time_limit > 0.0 && seconds >= c.time_limit) {
      pass = false;
      detail << "; over time limit " << c.time_limit << " s";
    }
    if (!pass) ++failed;
    std::printf("%s %2d %s: %s [%.3f s]\n", pass ? "PASS" : "FAIL", c.id, c.name.c_str(), detail.str().c_str(), seconds);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
