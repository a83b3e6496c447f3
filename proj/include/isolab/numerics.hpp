#pragma once

#include <Eigen/Dense>

#include <complex>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace isolab {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

inline constexpr double kPi = 3.141592653589793238462643383279502884;
inline const Complex kImag{0.0, 1.0};

/// Base class for all numerical failures raised by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SingularMatrixError : Error {
  using Error::Error;
};

/// Malformed input files or option strings (CLI exit code 2).
struct ParseError : Error {
  using Error::Error;
};

/// Adaptive stepping could not proceed; `path_parameter` is the point on the
/// path where the step size underflowed (callers treat this as a
/// singularity / blow-up signal).
struct StepUnderflowError : Error {
  StepUnderflowError(const std::string& what, double s)
      : Error(what), path_parameter(s) {}
  double path_parameter;
};

/// An endpoint exponent has Re <= -1, so the integral does not converge.
/// `component` identifies the offending exponent (index into the caller's
/// exponent list, or 0/1 for the two endpoints of a bare quadrature call).
struct DivergentIntegralError : Error {
  DivergentIntegralError(const std::string& what, int which)
      : Error(what), component(which) {}
  int component;
};

namespace num {

// ---------------------------------------------------------------------------
// Polyline paths

/// Piecewise-linear path in C^d: d = 1 for loops in the z-plane, d = n for
/// paths in pole-configuration space. Parametrized by cumulative Euclidean
/// arc length s in [0, length()].
class ZPath {
 public:
  explicit ZPath(std::vector<CVector> vertices);

  /// Convenience: path in the plane (d = 1) through the given points.
  static ZPath through(const std::vector<Complex>& points);
  static ZPath segment(const CVector& from, const CVector& to);

  int dim() const { return static_cast<int>(verts_.front().size()); }
  int segment_count() const { return static_cast<int>(verts_.size()) - 1; }
  double length() const { return cumlen_.back(); }

  const CVector& vertex(int k) const { return verts_[k]; }
  const std::vector<CVector>& vertices() const { return verts_; }
  double cumulative(int k) const { return cumlen_[k]; }

  CVector point_at(double s) const;
  /// Velocity d(point)/ds on segment k (constant per segment, unit speed).
  CVector velocity(int k) const;

  ZPath reversed() const;
  bool closed(double tol = 0.0) const;

 private:
  std::vector<CVector> verts_;
  std::vector<double> cumlen_;
};

// ---------------------------------------------------------------------------
// Eigenvalue analysis

struct EigCluster {
  Complex value;   // cluster representative (mean of member eigenvalues)
  int begin = 0;   // first index into the sorted eigenvalue list
  int count = 0;   // algebraic multiplicity
  int geometric = 0;
  int defect() const { return count - geometric; }
};

struct EigResult {
  CVector values;   // sorted ascending by (Re, Im)
  /// One column per independent eigenvector actually found; columns of
  /// cluster c start at vector_begin[c] and there are clusters[c].geometric
  /// of them. For diagonalizable input this is a full p-column basis aligned
  /// with `values`.
  CMatrix vectors;
  std::vector<double> vector_residuals;  // ||M v - lambda v|| per column
  std::vector<EigCluster> clusters;
  std::vector<int> vector_begin;

  int defect_of(int value_index) const;
  int max_defect() const;
  bool diagonalizable() const { return max_defect() == 0; }
};

/// Dense complex eigendecomposition (QR iteration on the Hessenberg form via
/// Eigen) with eigenvalue clustering at threshold cluster_rtol * ||m|| for
/// multiplicity decisions. Sizes up to 16.
EigResult eig(const CMatrix& m, double cluster_rtol = 1e-8);

CMatrix expm(const CMatrix& m);

/// The normalized logarithm E of an invertible G: exp(2 pi i E) = G and every
/// eigenvalue rho of E satisfies 0 <= Re rho < 1. Defective G is handled by
/// cluster-wise scalar branches plus the finite nilpotent correction
/// (confluent Newton interpolation of the branch-shifted log on the spectrum).
CMatrix normalized_log(const CMatrix& g);

// ---------------------------------------------------------------------------
// Adaptive ODE integration along polyline paths

struct OdeOptions {
  double rtol = 1e-10;
  double atol = 1e-12;
  /// Caps the step length (0 = no cap); used when downstream consumers need
  /// dense samples along the path.
  double max_ds = 0.0;
  std::size_t max_steps = 1'000'000;
  /// Called after each accepted step; returning false aborts the run with
  /// OdeFailure::Kind::monitor_stop.
  std::function<bool(double s, const CMatrix& y)> monitor;
};

struct OdeFailure {
  enum class Kind { step_underflow, step_budget, monitor_stop };
  Kind kind;
  double s;  // path parameter reached
};

struct OdeResult {
  CMatrix y_end;
  std::vector<std::pair<double, CMatrix>> samples;  // accepted steps, incl. s=0
  std::size_t steps = 0;
  std::optional<OdeFailure> failure;
  bool ok() const { return !failure.has_value(); }
};

/// rhs(point, velocity, y) -> dy/ds, where `point` is the path point at
/// parameter s and `velocity` its derivative on the current segment (so the
/// rhs contracts its 1-form with the local direction; for dY/dz = A(z) Y take
/// A(point) * y * velocity).
using PathRhs =
    std::function<CMatrix(const CVector& point, const CVector& velocity, const CMatrix& y)>;

/// Dormand-Prince 5(4) with adaptive steps; restarts stage one at each vertex
/// so the velocity jump of the polyline never enters a step.
OdeResult integrate_linear_ode(const PathRhs& rhs, const ZPath& path, const CMatrix& y0,
                               const OdeOptions& opt = {});

// ---------------------------------------------------------------------------
// Quadrature with endpoint singularities

struct QuadOptions {
  int max_level = 12;      // node count doubles per level
  double target_rel = 1e-12;
};

/// Integral over [0,1] of x^mu0 (1-x)^mu1 g(x) dx for Re mu0, Re mu1 > -1.
/// Double-exponential (tanh-sinh) rule with the endpoint weights evaluated
/// analytically at the nodes, so g only ever sees interior points.
/// If `table` is given, appends (level, running value) per refinement.
Complex quad_unit_interval(const std::function<Complex(double)>& g, Complex mu0, Complex mu1,
                           const QuadOptions& opt = {},
                           std::vector<std::pair<int, Complex>>* table = nullptr);

/// Integral over the straight segment [za, zb] of
///   (t - za)^mu0 (zb - t)^mu1 f(t) dt,
/// with principal powers of (zb - za) carried analytically.
Complex quad_endpoint(const std::function<Complex(Complex)>& smooth, Complex za, Complex zb,
                      Complex mu0, Complex mu1, const QuadOptions& opt = {});

}  // namespace num
}  // namespace isolab
