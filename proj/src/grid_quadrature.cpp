#include "conelab/grid_quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/math/quadrature/gauss.hpp>

#include "conelab/errors.hpp"

namespace conelab {

namespace {

using Rule = boost::math::quadrature::gauss<double, 30>;
constexpr double kGrading = 3.0;

}  // namespace

DiscreteQuotient::DiscreteQuotient(const Density& d, std::vector<double> nodes, QuotientKind kind,
                                   std::optional<CknParams> params)
    : nodes_(std::move(nodes)), kind_(kind) {
  GridFunction probe{nodes_, std::vector<double>(nodes_.size(), 0.0)};
  probe.validate();
  double q = 0.0;
  if (kind_ == QuotientKind::Ckn) {
    if (!params) throw std::invalid_argument("CKN quotient needs exponents (p, q, N)");
    params->validate();
    p_ = params->p;
    q = params->q;
  }

  std::vector<double> cuts;
  for (double b : d.breakpoints()) cuts.push_back(b);
  const auto& abscissa = Rule::abscissa();
  const auto& weights = Rule::weights();

  stiffness_.resize(nodes_.size() - 1);
  for (std::size_t e = 0; e + 1 < nodes_.size(); ++e) {
    const double a = nodes_[e];
    const double b = nodes_[e + 1];
    stiffness_[e] = ball_volume(d, b) - ball_volume(d, a);

    std::vector<double> pieces{a};
    for (double c : cuts) {
      if (c > a && c < b) pieces.push_back(c);
    }
    pieces.push_back(b);
    for (std::size_t k = 0; k + 1 < pieces.size(); ++k) {
      const double lo = pieces[k];
      const double hi = pieces[k + 1];
      const bool graded = lo == 0.0;
      for (std::size_t j = 0; j < abscissa.size(); ++j) {
        for (double sign : {-1.0, 1.0}) {
          const double t = 0.5 * (1.0 + sign * abscissa[j]);
          double x = lo + (hi - lo) * t;
          double jac = 0.5 * weights[j] * (hi - lo);
          if (graded) {
            x = hi * std::pow(t, kGrading);
            jac *= kGrading * std::pow(t, kGrading - 1.0);
          }
          if (x >= d.support_end()) continue;
          const double W = jac * d(x);
          if (W == 0.0) continue;
          Point pt;
          pt.element = e;
          pt.s = (x - a) / (b - a);
          pt.w_mass = W;
          pt.w_x2 = W * x * x;
          pt.w_neg_q = kind_ == QuotientKind::Ckn ? W * std::pow(x, -q) : 0.0;
          pt.w_sing = kind_ == QuotientKind::Ckn ? W * std::pow(x, 2.0 - 2.0 * q) : 0.0;
          points_.push_back(pt);
        }
      }
    }
  }
}

double DiscreteQuotient::normalizer_degree() const { return kind_ == QuotientKind::Hpw ? 2.0 : p_; }

double DiscreteQuotient::normalizer(std::span<const double> free) const {
  if (free.size() != free_size()) throw std::invalid_argument("wrong number of free values");
  double total = 0.0;
  for (const auto& pt : points_) {
    const double v1 = pt.element + 1 < free.size() ? free[pt.element + 1] : 0.0;
    const double u = (1.0 - pt.s) * free[pt.element] + pt.s * v1;
    total += kind_ == QuotientKind::Hpw ? pt.w_mass * u * u : pt.w_neg_q * std::pow(std::abs(u), p_);
  }
  return total;
}

double DiscreteQuotient::log_quotient(std::span<const double> free, std::vector<double>* grad) const {
  const std::size_t n = free_size();
  if (free.size() != n) throw std::invalid_argument("wrong number of free values");
  auto value = [&](std::size_t i) { return i < n ? free[i] : 0.0; };

  std::vector<double> gD(n + 1, 0.0);
  std::vector<double> gA(n + 1, 0.0);  // second moment (HPW) or singular moment (CKN)
  std::vector<double> gB(n + 1, 0.0);  // mass (HPW) or CKN mass
  double D = 0.0;
  for (std::size_t e = 0; e < n; ++e) {
    const double h = nodes_[e + 1] - nodes_[e];
    const double slope = (value(e + 1) - value(e)) / h;
    D += stiffness_[e] * slope * slope;
    const double dslope = 2.0 * stiffness_[e] * slope / h;
    gD[e] -= dslope;
    gD[e + 1] += dslope;
  }
  double A = 0.0;
  double B = 0.0;
  for (const auto& pt : points_) {
    const std::size_t e = pt.element;
    const double u = (1.0 - pt.s) * value(e) + pt.s * value(e + 1);
    double a_val, a_der, b_val, b_der;
    if (kind_ == QuotientKind::Hpw) {
      a_val = pt.w_x2 * u * u;
      a_der = 2.0 * pt.w_x2 * u;
      b_val = pt.w_mass * u * u;
      b_der = 2.0 * pt.w_mass * u;
    } else {
      const double au = std::abs(u);
      const double sg = u < 0.0 ? -1.0 : 1.0;
      const double r = 2.0 * p_ - 2.0;
      a_val = au == 0.0 ? 0.0 : pt.w_sing * std::pow(au, r);
      a_der = au == 0.0 ? 0.0 : pt.w_sing * r * std::pow(au, r - 1.0) * sg;
      b_val = au == 0.0 ? 0.0 : pt.w_neg_q * std::pow(au, p_);
      b_der = au == 0.0 ? 0.0 : pt.w_neg_q * p_ * std::pow(au, p_ - 1.0) * sg;
    }
    A += a_val;
    B += b_val;
    gA[e] += a_der * (1.0 - pt.s);
    gA[e + 1] += a_der * pt.s;
    gB[e] += b_der * (1.0 - pt.s);
    gB[e + 1] += b_der * pt.s;
  }
  if (!(D > 0.0 && A > 0.0 && B > 0.0)) throw DegenerateError("degenerate test function: a quotient integral vanishes");
  if (grad) {
    grad->assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) (*grad)[i] = gD[i] / D + gA[i] / A - 2.0 * gB[i] / B;
  }
  return std::log(D) + std::log(A) - 2.0 * std::log(B);
}

std::vector<double> DiscreteQuotient::hessian_diagonal(std::span<const double> free) const {
  const std::size_t n = free_size();
  if (free.size() != n) throw std::invalid_argument("wrong number of free values");
  auto value = [&](std::size_t i) { return i < n ? free[i] : 0.0; };
  std::vector<double> hD(n + 1, 0.0), hA(n + 1, 0.0), hB(n + 1, 0.0);
  double D = 0.0, A = 0.0, B = 0.0;
  for (std::size_t e = 0; e < n; ++e) {
    const double h = nodes_[e + 1] - nodes_[e];
    const double slope = (value(e + 1) - value(e)) / h;
    D += stiffness_[e] * slope * slope;
    hD[e] += 2.0 * stiffness_[e] / (h * h);
    hD[e + 1] += 2.0 * stiffness_[e] / (h * h);
  }
  for (const auto& pt : points_) {
    const std::size_t e = pt.element;
    const double u = (1.0 - pt.s) * value(e) + pt.s * value(e + 1);
    double a2, b2;
    if (kind_ == QuotientKind::Hpw) {
      A += pt.w_x2 * u * u;
      B += pt.w_mass * u * u;
      a2 = 2.0 * pt.w_x2;
      b2 = 2.0 * pt.w_mass;
    } else {
      const double au = std::abs(u);
      const double r = 2.0 * p_ - 2.0;
      A += pt.w_sing * std::pow(au, r);
      B += pt.w_neg_q * std::pow(au, p_);
      a2 = pt.w_sing * r * (r - 1.0) * std::pow(au, r - 2.0);
      b2 = pt.w_neg_q * p_ * (p_ - 1.0) * std::pow(au, p_ - 2.0);
    }
    const double s0 = (1.0 - pt.s) * (1.0 - pt.s);
    const double s1 = pt.s * pt.s;
    hA[e] += a2 * s0;
    hA[e + 1] += a2 * s1;
    hB[e] += b2 * s0;
    hB[e + 1] += b2 * s1;
  }
  if (!(D > 0.0 && A > 0.0 && B > 0.0)) throw DegenerateError("degenerate test function: a quotient integral vanishes");
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = hD[i] / D + hA[i] / A + 2.0 * hB[i] / B;
  return out;
}

GridFunction DiscreteQuotient::to_grid_function(std::span<const double> free) const {
  GridFunction u;
  u.nodes = nodes_;
  u.values.assign(free.begin(), free.end());
  u.values.push_back(0.0);
  return u;
}

}  // namespace conelab
