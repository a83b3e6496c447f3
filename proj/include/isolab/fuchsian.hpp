#pragma once

#include "isolab/numerics.hpp"

#include <string>
#include <vector>

namespace isolab::fuchs {

/// dy/dz = (sum_i B_i / (z - a_i)) y with sum_i B_i = 0, so z = infinity is a
/// regular point. Plain data; validate() reports invariant violations.
struct FuchsianSystem {
  CVector poles;                  // a_1..a_n, pairwise distinct
  std::vector<CMatrix> residues;  // B_1..B_n, each p x p

  int n() const { return static_cast<int>(poles.size()); }
  int p() const { return residues.empty() ? 0 : static_cast<int>(residues.front().rows()); }
  double residue_scale() const;  // max ||B_i||
};

inline constexpr double kPoleMinSeparation = 1e-10;
inline constexpr double kResidueSumRtol = 1e-12;

struct Violation {
  std::string what;
  double magnitude;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  std::string str() const;
};

/// Diagnostic: checks pole distinctness/separation, residue shape, finiteness
/// and the residue-sum side condition. Never throws.
ValidationReport validate(const FuchsianSystem& sys);

/// Throws Error with the report text when validate() finds violations.
void require_valid(const FuchsianSystem& sys);

/// Coefficient matrix A(z) = sum_i B_i / (z - a_i); z must keep distance
/// > 1e-12 from every pole.
CMatrix coefficient_at(const FuchsianSystem& sys, Complex z);

/// Local exponents: beta[i] = eigenvalues of B_i, sorted by (Re, Im).
struct ExponentTable {
  std::vector<CVector> beta;
  int n() const { return static_cast<int>(beta.size()); }
  int p() const { return beta.empty() ? 0 : static_cast<int>(beta.front().size()); }
};

ExponentTable exponents(const FuchsianSystem& sys);

/// sum_{i,j} beta_i^j; vanishes for any system with sum B_i = 0 (the trace of
/// the residue-sum).
Complex fuchs_defect(const ExponentTable& table);

// JSON file format:
//   {"p": int, "poles": [[re,im],...], "residues": [[[re,im],...],...]}
// residues[i] is the p*p row-major entry list of the block for poles[i].
FuchsianSystem parse_system_json(const std::string& text);
FuchsianSystem load_system_file(const std::string& path);
std::string system_json(const FuchsianSystem& sys);

}  // namespace isolab::fuchs
