#include "conelab/quad.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "conelab/errors.hpp"

namespace conelab {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kTiny = std::numeric_limits<double>::min();
constexpr double kInf = std::numeric_limits<double>::infinity();

// 15-point Kronrod abscissae/weights with the embedded 7-point Gauss rule
// (QUADPACK qk15 ordering: odd entries are the Gauss nodes, last is 0).
constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

double sample(const Integrand& g, double x) {
  const double v = g(x);
  if (!std::isfinite(v)) {
    std::ostringstream msg;
    msg << "non-finite integrand sample " << v << " at mapped abscissa " << x;
    throw QuadratureError(msg.str());
  }
  return v;
}

struct Panel {
  std::size_t piece;
  double a;
  double b;
  double value;
  double error;
  double abs_value;
};

Panel kronrod15(const Integrand& g, std::size_t piece, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = sample(g, center);
  double resg = fc * kWg[3];
  double resk = fc * kWgk[7];
  double resabs = std::abs(resk);
  std::array<double, 7> fv1{};
  std::array<double, 7> fv2{};
  for (int j = 0; j < 3; ++j) {
    const int jtw = 2 * j + 1;
    const double absc = half * kXgk[jtw];
    const double f1 = sample(g, center - absc);
    const double f2 = sample(g, center + absc);
    fv1[jtw] = f1;
    fv2[jtw] = f2;
    resg += kWg[j] * (f1 + f2);
    resk += kWgk[jtw] * (f1 + f2);
    resabs += kWgk[jtw] * (std::abs(f1) + std::abs(f2));
  }
  for (int j = 0; j < 4; ++j) {
    const int jtwm1 = 2 * j;
    const double absc = half * kXgk[jtwm1];
    const double f1 = sample(g, center - absc);
    const double f2 = sample(g, center + absc);
    fv1[jtwm1] = f1;
    fv2[jtwm1] = f2;
    resk += kWgk[jtwm1] * (f1 + f2);
    resabs += kWgk[jtwm1] * (std::abs(f1) + std::abs(f2));
  }
  const double reskh = 0.5 * resk;
  double resasc = kWgk[7] * std::abs(fc - reskh);
  for (int j = 0; j < 7; ++j) {
    resasc += kWgk[j] * (std::abs(fv1[j] - reskh) + std::abs(fv2[j] - reskh));
  }
  const double width = std::abs(half);
  resabs *= width;
  resasc *= width;
  double err = std::abs((resk - resg) * half);
  if (resasc != 0.0 && err != 0.0) {
    err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
  }
  if (resabs > kTiny / (50.0 * kEps)) {
    err = std::max(50.0 * kEps * resabs, err);
  }
  return Panel{piece, a, b, resk * half, err, resabs};
}

// A mapped integrand on [lo, hi] together with its initial panel boundaries.
struct Piece {
  Integrand g;
  std::vector<double> cuts;  // sorted, includes both ends
};

IntegralResult adaptive(const std::vector<Piece>& pieces, const QuadratureConfig& cfg) {
  std::vector<Panel> panels;
  for (std::size_t p = 0; p < pieces.size(); ++p) {
    const auto& cuts = pieces[p].cuts;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      if (cuts[i + 1] > cuts[i]) panels.push_back(kronrod15(pieces[p].g, p, cuts[i], cuts[i + 1]));
    }
  }
  auto by_error = [&panels](std::size_t l, std::size_t r) { return panels[l].error < panels[r].error; };
  std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(by_error)> heap(by_error);
  for (std::size_t i = 0; i < panels.size(); ++i) heap.push(i);

  auto totals = [&panels]() {
    double v = 0.0, e = 0.0, a = 0.0;
    for (const auto& p : panels) {
      v += p.value;
      e += p.error;
      a += p.abs_value;
    }
    return std::array<double, 3>{v, e, a};
  };

  auto [value, error, abs_total] = totals();
  std::size_t iterations = 0;
  while (true) {
    // Panels bottom out at 50 eps |f|; stop once every panel is there.
    const double tol = std::max({cfg.abs_tol, cfg.rel_tol * std::abs(value), 100.0 * kEps * abs_total});
    if (error <= tol) break;
    if (heap.empty() || panels.size() >= cfg.max_subdivisions) {
      std::ostringstream msg;
      msg << "quadrature did not converge within " << cfg.max_subdivisions
          << " subdivisions (value " << value << ", error estimate " << error
          << ", tolerance " << tol << ")";
      throw QuadratureError(msg.str());
    }
    const std::size_t worst = heap.top();
    heap.pop();
    const Panel old = panels[worst];
    const double mid = 0.5 * (old.a + old.b);
    if (!(mid > old.a && mid < old.b) || (old.b - old.a) <= 8.0 * kEps * std::max(std::abs(old.a), std::abs(old.b))) {
      // Not splittable in floating point; its error stays in the total.
      continue;
    }
    const Integrand& g = pieces[old.piece].g;
    Panel left = kronrod15(g, old.piece, old.a, mid);
    Panel right = kronrod15(g, old.piece, mid, old.b);
    value += left.value + right.value - old.value;
    error += left.error + right.error - old.error;
    abs_total += left.abs_value + right.abs_value - old.abs_value;
    panels[worst] = left;
    panels.push_back(right);
    heap.push(worst);
    heap.push(panels.size() - 1);
    if (++iterations % 64 == 0) {
      const auto t = totals();
      value = t[0];
      error = t[1];
      abs_total = t[2];
    }
  }
  const auto t = totals();
  IntegralResult out;
  out.value = t[0];
  out.error_estimate = t[1];
  out.subdivisions_used = panels.size();
  return out;
}

double grading_for(double singular_exponent, const QuadratureConfig& cfg) {
  if (!(singular_exponent > -1.0)) {
    throw IntegrabilityError("singularity exponent " + std::to_string(singular_exponent) +
                             " is not integrable (need > -1)");
  }
  return std::max(cfg.grading_exponent, 1.0 / (singular_exponent + 1.0));
}

// x = a + L t^g on t in [0, 1].
Piece graded_piece(const Integrand& f, double a, double b, double grading,
                   std::span<const double> breakpoints, std::size_t initial_panels) {
  const double len = b - a;
  Piece piece;
  piece.g = [&f, a, len, grading](double t) {
    const double tg = std::pow(t, grading);
    const double x = a + len * tg;
    if (tg == 0.0) return 0.0;
    const double v = f(x);
    if (v == 0.0) return 0.0;
    return v * len * grading * (tg / t);
  };
  for (std::size_t i = 0; i <= initial_panels; ++i) {
    piece.cuts.push_back(static_cast<double>(i) / static_cast<double>(initial_panels));
  }
  for (double bp : breakpoints) {
    if (bp > a && bp < b) piece.cuts.push_back(std::pow((bp - a) / len, 1.0 / grading));
  }
  std::sort(piece.cuts.begin(), piece.cuts.end());
  piece.cuts.erase(std::unique(piece.cuts.begin(), piece.cuts.end()), piece.cuts.end());
  return piece;
}

Piece plain_piece(const Integrand& f, double a, double b, std::span<const double> breakpoints) {
  Piece piece;
  piece.g = [&f](double x) { return f(x); };
  piece.cuts = {a, b};
  for (double bp : breakpoints) {
    if (bp > a && bp < b) piece.cuts.push_back(bp);
  }
  std::sort(piece.cuts.begin(), piece.cuts.end());
  piece.cuts.erase(std::unique(piece.cuts.begin(), piece.cuts.end()), piece.cuts.end());
  return piece;
}

// x = scale / v^g on v in (0, 1], covering [scale, inf).
Piece tail_piece(const Integrand& f, double scale, double exponent, const QuadratureConfig& cfg,
                 std::span<const double> breakpoints) {
  const double grading = std::max(cfg.grading_exponent, 1.0 / (exponent - 1.0));
  Piece piece;
  piece.g = [&f, scale, grading](double v) {
    const double u = std::pow(v, grading);
    if (u == 0.0) return 0.0;
    const double x = scale / u;
    if (!std::isfinite(x)) return 0.0;
    const double fx = f(x);
    if (fx == 0.0) return 0.0;
    // dx = scale/u^2 du, du = g v^{g-1} dv
    return fx * (x / u) * grading * (u / v);
  };
  const std::size_t initial = 8;
  for (std::size_t i = 0; i <= initial; ++i) piece.cuts.push_back(static_cast<double>(i) / initial);
  for (double bp : breakpoints) {
    if (bp > scale && std::isfinite(bp)) piece.cuts.push_back(std::pow(scale / bp, 1.0 / grading));
  }
  std::sort(piece.cuts.begin(), piece.cuts.end());
  piece.cuts.erase(std::unique(piece.cuts.begin(), piece.cuts.end()), piece.cuts.end());
  return piece;
}

double gaussian_radius(const Integrand& f, const decay::Gaussian& g, const QuadratureConfig& cfg) {
  if (!(g.rate > 0.0) || !std::isfinite(g.rate)) {
    throw std::invalid_argument("gaussian decay rate must be positive");
  }
  const double log_inv = std::log(1.0 / cfg.tail_tol);
  double radius = std::sqrt(log_inv / g.rate);
  // polynomial prefactor: tail ~ R^{k-1} e^{-rate R^2} / (2 rate)
  for (int it = 0; it < 16; ++it) {
    const double corr = (g.prefactor_degree - 1.0) * std::log(radius) - std::log(2.0 * g.rate);
    radius = std::sqrt(std::max(log_inv + corr, log_inv) / g.rate);
  }
  // The declared bound carries no amplitude; check the tail against the
  // integrand's own scale and push the radius out until it is negligible.
  for (int it = 0; it < 200; ++it) {
    double scale = 0.0;
    constexpr int kProbes = 64;
    for (int i = 1; i <= kProbes; ++i) {
      const double x = radius * i / kProbes;
      const double v = f(x);
      if (std::isfinite(v)) scale = std::max(scale, std::abs(v) * x);
    }
    const double tail = std::abs(f(radius)) / (2.0 * g.rate * radius);
    if (tail <= cfg.tail_tol * std::max(scale, kTiny)) break;
    radius *= 1.1;
  }
  return radius;
}

}  // namespace

void QuadratureConfig::validate() const {
  if (!(rel_tol > 0.0) || !(abs_tol > 0.0) || !(tail_tol > 0.0)) {
    throw std::invalid_argument("quadrature tolerances must be positive");
  }
  if (max_subdivisions < 4) throw std::invalid_argument("max_subdivisions must be at least 4");
  if (!(grading_exponent >= 1.0)) throw std::invalid_argument("grading_exponent must be >= 1");
}

IntegralResult integrate_interval(const Integrand& f, double a, double b, const QuadratureConfig& cfg,
                                  std::optional<double> singularity_exponent_at_a,
                                  std::span<const double> breakpoints) {
  cfg.validate();
  if (!std::isfinite(a) || !std::isfinite(b)) throw std::invalid_argument("interval ends must be finite");
  if (b < a) {
    IntegralResult r = integrate_interval(f, b, a, cfg, std::nullopt, breakpoints);
    r.value = -r.value;
    return r;
  }
  IntegralResult out;
  out.truncation_radius = b;
  if (b == a) return out;
  std::vector<Piece> pieces;
  if (singularity_exponent_at_a) {
    pieces.push_back(graded_piece(f, a, b, grading_for(*singularity_exponent_at_a, cfg), breakpoints, 1));
  } else {
    pieces.push_back(plain_piece(f, a, b, breakpoints));
  }
  IntegralResult r = adaptive(pieces, cfg);
  r.truncation_radius = b;
  return r;
}

IntegralResult integrate_halfline(const Integrand& f, double singularity_exponent, const DecayClass& decay,
                                  const QuadratureConfig& cfg, std::span<const double> breakpoints) {
  cfg.validate();
  const double grading = grading_for(singularity_exponent, cfg);
  constexpr std::size_t kInitialPanels = 8;

  return std::visit(
      [&](const auto& d) -> IntegralResult {
        using D = std::decay_t<decltype(d)>;
        std::vector<Piece> pieces;
        double radius = 0.0;
        if constexpr (std::is_same_v<D, decay::Compact>) {
          if (!(d.radius > 0.0) || !std::isfinite(d.radius)) {
            throw std::invalid_argument("compact decay radius must be positive and finite");
          }
          radius = d.radius;
          pieces.push_back(graded_piece(f, 0.0, radius, grading, breakpoints, kInitialPanels));
        } else if constexpr (std::is_same_v<D, decay::Gaussian>) {
          radius = gaussian_radius(f, d, cfg);
          pieces.push_back(graded_piece(f, 0.0, radius, grading, breakpoints, kInitialPanels));
        } else {
          if (!(d.exponent > 1.0)) {
            throw IntegrabilityError("power decay exponent " + std::to_string(d.exponent) +
                                     " is not integrable at infinity (need > 1)");
          }
          if (!(d.scale > 0.0) || !std::isfinite(d.scale)) {
            throw std::invalid_argument("power decay scale must be positive");
          }
          radius = kInf;
          pieces.push_back(graded_piece(f, 0.0, d.scale, grading, breakpoints, kInitialPanels));
          pieces.push_back(tail_piece(f, d.scale, d.exponent, cfg, breakpoints));
        }
        IntegralResult r = adaptive(pieces, cfg);
        r.truncation_radius = radius;
        return r;
      },
      decay);
}

double gamma_fn(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw DomainError("gamma_fn requires a positive finite argument, got " + std::to_string(x));
  }
  return std::tgamma(x);
}

double unit_ball_volume(double N) {
  if (!(N > 0.0) || !std::isfinite(N)) {
    throw DomainError("unit_ball_volume requires N > 0, got " + std::to_string(N));
  }
  if (N < 300.0) return std::pow(M_PI, 0.5 * N) / std::tgamma(0.5 * N + 1.0);
  return std::exp(0.5 * N * std::log(M_PI) - std::lgamma(0.5 * N + 1.0));
}

}  // namespace conelab
