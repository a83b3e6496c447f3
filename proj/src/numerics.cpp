#include "isolab/numerics.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace isolab::num {

namespace {

double safe_norm(const CMatrix& m) { return std::max(m.norm(), 1e-300); }

}  // namespace

// ---------------------------------------------------------------------------
// ZPath

ZPath::ZPath(std::vector<CVector> vertices) : verts_(std::move(vertices)) {
  if (verts_.size() < 2) throw Error("ZPath needs at least 2 vertices");
  const auto d = verts_.front().size();
  cumlen_.reserve(verts_.size());
  cumlen_.push_back(0.0);
  for (std::size_t k = 1; k < verts_.size(); ++k) {
    if (verts_[k].size() != d) throw Error("ZPath vertices of mixed dimension");
    const double len = (verts_[k] - verts_[k - 1]).norm();
    if (len == 0.0) throw Error("ZPath has coincident consecutive vertices");
    cumlen_.push_back(cumlen_.back() + len);
  }
}

ZPath ZPath::through(const std::vector<Complex>& points) {
  std::vector<CVector> vs;
  vs.reserve(points.size());
  for (const auto& p : points) {
    CVector v(1);
    v[0] = p;
    vs.push_back(v);
  }
  return ZPath(std::move(vs));
}

ZPath ZPath::segment(const CVector& from, const CVector& to) {
  return ZPath(std::vector<CVector>{from, to});
}

CVector ZPath::point_at(double s) const {
  s = std::clamp(s, 0.0, length());
  const auto it = std::upper_bound(cumlen_.begin(), cumlen_.end(), s);
  int k = std::max<int>(1, static_cast<int>(it - cumlen_.begin()));
  k = std::min<int>(k, segment_count());
  const double t = (s - cumlen_[k - 1]) / (cumlen_[k] - cumlen_[k - 1]);
  return verts_[k - 1] + t * (verts_[k] - verts_[k - 1]);
}

CVector ZPath::velocity(int k) const {
  const CVector d = verts_[k + 1] - verts_[k];
  return d / d.norm();
}

ZPath ZPath::reversed() const {
  std::vector<CVector> vs(verts_.rbegin(), verts_.rend());
  return ZPath(std::move(vs));
}

bool ZPath::closed(double tol) const {
  return (verts_.front() - verts_.back()).norm() <= tol;
}

// ---------------------------------------------------------------------------
// eig

int EigResult::defect_of(int value_index) const {
  for (const auto& c : clusters) {
    if (value_index >= c.begin && value_index < c.begin + c.count) return c.defect();
  }
  throw Error("eig: value index out of range");
}

int EigResult::max_defect() const {
  int d = 0;
  for (const auto& c : clusters) d = std::max(d, c.defect());
  return d;
}

EigResult eig(const CMatrix& m, double cluster_rtol) {
  if (m.rows() != m.cols()) throw Error("eig: matrix is not square");
  if (m.rows() > 16) throw Error("eig: size above limit 16");
  const int p = static_cast<int>(m.rows());

  Eigen::ComplexEigenSolver<CMatrix> solver(m, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success)
    throw Error("eig: QR iteration failed to converge");

  // Sort eigenvalues by (Re, Im) ascending.
  CVector vals = solver.eigenvalues();
  std::vector<int> order(p);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (vals[a].real() != vals[b].real()) return vals[a].real() < vals[b].real();
    return vals[a].imag() < vals[b].imag();
  });
  CVector sorted(p);
  for (int i = 0; i < p; ++i) sorted[i] = vals[order[i]];

  const double scale = safe_norm(m);
  const double tol = cluster_rtol * scale;

  EigResult r;
  r.values = sorted;

  // Greedy clustering of the sorted list; clusters of nearly equal values are
  // contiguous under the (Re, Im) order.
  int i = 0;
  while (i < p) {
    EigCluster c;
    c.begin = i;
    Complex sum = sorted[i];
    int j = i + 1;
    while (j < p && std::abs(sorted[j] - sum / double(j - i)) <= tol) {
      sum += sorted[j];
      ++j;
    }
    c.count = j - i;
    c.value = sum / double(c.count);
    i = j;
    r.clusters.push_back(c);
  }

  // Geometric multiplicities and eigenvectors from the null space of
  // (m - value I) at the cluster representative.
  std::vector<CMatrix> bases;
  int total_cols = 0;
  for (auto& c : r.clusters) {
    CMatrix shifted = m - c.value * CMatrix::Identity(p, p);
    Eigen::JacobiSVD<CMatrix> svd(shifted, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    int null_dim = 0;
    for (int k = 0; k < p; ++k)
      if (sv[k] <= tol) ++null_dim;
    null_dim = std::clamp(null_dim, 1, c.count);
    c.geometric = null_dim;
    bases.push_back(svd.matrixV().rightCols(null_dim));
    total_cols += null_dim;
  }

  r.vectors.resize(p, total_cols);
  int col = 0;
  for (std::size_t ci = 0; ci < r.clusters.size(); ++ci) {
    r.vector_begin.push_back(col);
    for (int k = 0; k < r.clusters[ci].geometric; ++k, ++col) {
      r.vectors.col(col) = bases[ci].col(k);
      r.vector_residuals.push_back(
          (m * r.vectors.col(col) - r.clusters[ci].value * r.vectors.col(col)).norm());
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// expm / normalized_log

CMatrix expm(const CMatrix& m) {
  if (m.rows() != m.cols()) throw Error("expm: matrix is not square");
  return m.exp();
}

CMatrix normalized_log(const CMatrix& g) {
  if (g.rows() != g.cols()) throw Error("normalized_log: matrix is not square");
  const int p = static_cast<int>(g.rows());
  const double scale = safe_norm(g);

  EigResult eg = eig(g);
  for (int i = 0; i < p; ++i) {
    if (std::abs(eg.values[i]) <= 1e-14 * scale)
      throw SingularMatrixError("normalized_log: singular matrix");
  }

  // Scalar branch per cluster: principal log shifted so Re((log l)/2 pi i)
  // lands in [0, 1). With principal arg in (-pi, pi] the shift is 0 or 1.
  const Complex twopii = 2.0 * kPi * kImag;
  struct Node {
    Complex z;
    double shift;
  };
  std::vector<Node> nodes;
  nodes.reserve(p);
  for (const auto& c : eg.clusters) {
    const double shift = std::arg(c.value) < 0.0 ? 1.0 : 0.0;
    for (int k = 0; k < c.count; ++k) nodes.push_back({c.value, shift});
  }

  // Confluent Newton divided differences of f(z) = (Log z)/(2 pi i) + shift.
  // Repeated nodes pick up derivative terms: f^(k)(z)/k! = (-1)^(k-1)/(k z^k)
  // / (2 pi i), which captures the nilpotent part of defective clusters.
  std::vector<std::vector<Complex>> dd(p, std::vector<Complex>(p));
  auto f_derived = [&](const Node& n, int k) -> Complex {
    if (k == 0) return std::log(n.z) / twopii + n.shift;
    const double sgn = (k % 2 == 1) ? 1.0 : -1.0;
    return sgn / (double(k) * std::pow(n.z, k)) / twopii;
  };
  for (int i0 = 0; i0 < p; ++i0) dd[i0][i0] = f_derived(nodes[i0], 0);
  for (int len = 1; len < p; ++len) {
    for (int i0 = 0; i0 + len < p; ++i0) {
      const int j = i0 + len;
      const Complex dz = nodes[j].z - nodes[i0].z;
      if (std::abs(dz) == 0.0) {
        dd[i0][j] = f_derived(nodes[i0], len);
      } else {
        dd[i0][j] = (dd[i0 + 1][j] - dd[i0][j - 1]) / dz;
      }
    }
  }

  CMatrix result = dd[0][0] * CMatrix::Identity(p, p);
  CMatrix prod = CMatrix::Identity(p, p);
  for (int k = 1; k < p; ++k) {
    prod = prod * (g - nodes[k - 1].z * CMatrix::Identity(p, p));
    result += dd[0][k] * prod;
  }

  const double resid = (expm(twopii * result) - g).norm() / scale;
  if (resid > 1e-9)
    throw Error("normalized_log: residual " + std::to_string(resid) +
                " above tolerance (ill-conditioned spectrum)");
  return result;
}

// ---------------------------------------------------------------------------
// Dormand-Prince 5(4)

namespace {

struct Dopri5 {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  // embedded 4th-order weights
  static constexpr double e1 = 5179.0 / 57600, e3 = 7571.0 / 16695, e4 = 393.0 / 640,
                          e5 = -92097.0 / 339200, e6 = 187.0 / 2100, e7 = 1.0 / 40;
};

double error_norm(const CMatrix& err, const CMatrix& y0, const CMatrix& y1, double atol,
                  double rtol) {
  const auto sc = (atol + rtol * y0.cwiseAbs().cwiseMax(y1.cwiseAbs()).array()).matrix();
  const double n = (err.cwiseAbs().array() / sc.array()).matrix().norm();
  return n / std::sqrt(double(err.size()));
}

}  // namespace

OdeResult integrate_linear_ode(const PathRhs& rhs, const ZPath& path, const CMatrix& y0,
                               const OdeOptions& opt) {
  OdeResult res;
  res.y_end = y0;
  res.samples.emplace_back(0.0, y0);

  CMatrix y = y0;
  double h_carry = 0.0;  // last accepted step, reused across segments

  for (int seg = 0; seg < path.segment_count(); ++seg) {
    const double s0 = path.cumulative(seg);
    const double ell = path.cumulative(seg + 1) - s0;
    const CVector vel = path.velocity(seg);
    const CVector origin = path.vertex(seg);
    auto point = [&](double sigma) -> CVector { return origin + sigma * vel; };

    double sigma = 0.0;
    double h = (h_carry > 0.0) ? std::min(h_carry, ell) : ell / 16.0;
    if (opt.max_ds > 0.0) h = std::min(h, opt.max_ds);

    CMatrix k1 = rhs(point(0.0), vel, y);
    bool rejected = false;

    while (sigma < ell) {
      if (++res.steps > opt.max_steps) {
        res.failure = OdeFailure{OdeFailure::Kind::step_budget, s0 + sigma};
        res.y_end = y;
        return res;
      }
      h = std::min(h, ell - sigma);
      if (opt.max_ds > 0.0) h = std::min(h, opt.max_ds);
      if (h < 1e-14 * std::max(ell, 1e-30) || h < 1e-300) {
        res.failure = OdeFailure{OdeFailure::Kind::step_underflow, s0 + sigma};
        res.y_end = y;
        return res;
      }

      using D = Dopri5;
      const CMatrix k2 = rhs(point(sigma + D::c2 * h), vel, y + h * (D::a21 * k1));
      const CMatrix k3 = rhs(point(sigma + D::c3 * h), vel, y + h * (D::a31 * k1 + D::a32 * k2));
      const CMatrix k4 =
          rhs(point(sigma + D::c4 * h), vel, y + h * (D::a41 * k1 + D::a42 * k2 + D::a43 * k3));
      const CMatrix k5 = rhs(point(sigma + D::c5 * h),
                             vel, y + h * (D::a51 * k1 + D::a52 * k2 + D::a53 * k3 + D::a54 * k4));
      const CMatrix k6 =
          rhs(point(sigma + h), vel,
              y + h * (D::a61 * k1 + D::a62 * k2 + D::a63 * k3 + D::a64 * k4 + D::a65 * k5));
      const CMatrix y5 =
          y + h * (D::b1 * k1 + D::b3 * k3 + D::b4 * k4 + D::b5 * k5 + D::b6 * k6);
      const CMatrix k7 = rhs(point(sigma + h), vel, y5);
      const CMatrix y4 =
          y + h * (D::e1 * k1 + D::e3 * k3 + D::e4 * k4 + D::e5 * k5 + D::e6 * k6 + D::e7 * k7);

      const double err = error_norm(y5 - y4, y, y5, opt.atol, opt.rtol);

      if (err <= 1.0) {
        sigma += h;
        y = y5;
        k1 = k7;  // FSAL
        res.samples.emplace_back(s0 + sigma, y);
        if (opt.monitor && !opt.monitor(s0 + sigma, y)) {
          res.failure = OdeFailure{OdeFailure::Kind::monitor_stop, s0 + sigma};
          res.y_end = y;
          return res;
        }
        const double grow = rejected ? 1.0 : 5.0;
        const double fac =
            (err == 0.0) ? grow : std::clamp(0.9 * std::pow(err, -0.2), 0.2, grow);
        h *= fac;
        h_carry = h;
        rejected = false;
      } else {
        h *= std::clamp(0.9 * std::pow(err, -0.2), 0.2, 1.0);
        rejected = true;
      }
    }
  }

  res.y_end = y;
  return res;
}

// ---------------------------------------------------------------------------
// tanh-sinh quadrature with endpoint weights

namespace {

// Abscissa machinery for x = (1 + tanh(v))/2, v = (pi/2) sinh(u): log(x) and
// log(1-x) stay accurate far into the corners.
struct TsNode {
  double log_x;
  double log_1mx;
  double x;
  double dxdu;
};

TsNode ts_node(double u) {
  const double v = 0.5 * kPi * std::sinh(u);
  TsNode n;
  n.log_x = -std::log1p(std::exp(-2.0 * v));
  n.log_1mx = -std::log1p(std::exp(2.0 * v));
  n.x = std::exp(n.log_x);
  const double sech = 1.0 / std::cosh(v);
  n.dxdu = 0.25 * kPi * std::cosh(u) * sech * sech;
  return n;
}

}  // namespace

Complex quad_unit_interval(const std::function<Complex(double)>& g, Complex mu0, Complex mu1,
                           const QuadOptions& opt,
                           std::vector<std::pair<int, Complex>>* table) {
  if (mu0.real() <= -1.0)
    throw DivergentIntegralError("quad: Re(mu0) <= -1, integral diverges", 0);
  if (mu1.real() <= -1.0)
    throw DivergentIntegralError("quad: Re(mu1) <= -1, integral diverges", 1);

  // Truncation range: the integrand decays like exp(-(1+Re mu) pi sinh(u)),
  // so pick U with (1 + min Re mu) * pi * sinh(U) comfortably past 1e-17.
  const double mu_min = std::min(mu0.real(), mu1.real());
  const double v_needed = 45.0 / std::max(1.0 + mu_min, 1e-3);
  const double umax = std::min(7.9, std::asinh(2.0 * v_needed / kPi));

  auto term = [&](double u) -> Complex {
    const TsNode n = ts_node(u);
    const Complex logw = mu0 * n.log_x + mu1 * n.log_1mx;
    const double mag = logw.real() + std::log(n.dxdu);
    if (mag < -800.0 || n.x <= 0.0 || n.x >= 1.0) return {0.0, 0.0};
    return std::exp(logw) * n.dxdu * g(n.x);
  };

  double h = 1.0;
  Complex sum = term(0.0);
  for (double u = h; u <= umax; u += h) sum += term(u) + term(-u);
  Complex integral = h * sum;
  if (table) table->emplace_back(0, integral);

  for (int level = 1; level <= opt.max_level; ++level) {
    h *= 0.5;
    Complex add{0.0, 0.0};
    for (double u = h; u <= umax; u += 2.0 * h) add += term(u) + term(-u);
    const Complex refined = 0.5 * integral + h * add;
    if (table) table->emplace_back(level, refined);
    const double delta = std::abs(refined - integral);
    integral = refined;
    if (level >= 3 && delta <= opt.target_rel * (std::abs(integral) + 1e-30)) break;
  }
  return integral;
}

Complex quad_endpoint(const std::function<Complex(Complex)>& smooth, Complex za, Complex zb,
                      Complex mu0, Complex mu1, const QuadOptions& opt) {
  const Complex delta = zb - za;
  if (std::abs(delta) == 0.0) throw Error("quad_endpoint: endpoints coincide");
  auto g = [&](double x) { return smooth(za + x * delta); };
  const Complex pref = std::exp((1.0 + mu0 + mu1) * std::log(delta));
  return pref * quad_unit_interval(g, mu0, mu1, opt);
}

}  // namespace isolab::num
