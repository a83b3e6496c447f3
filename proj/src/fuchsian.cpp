#include "isolab/fuchsian.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace isolab::fuchs {

double FuchsianSystem::residue_scale() const {
  double s = 0.0;
  for (const auto& b : residues) s = std::max(s, b.norm());
  return s;
}

std::string ValidationReport::str() const {
  if (ok()) return "ok";
  std::ostringstream os;
  for (std::size_t i = 0; i < violations.size(); ++i) {
    if (i) os << "; ";
    os << violations[i].what << " (magnitude " << violations[i].magnitude << ")";
  }
  return os.str();
}

ValidationReport validate(const FuchsianSystem& sys) {
  ValidationReport rep;
  const int n = sys.n();
  if (n == 0 || sys.residues.size() != static_cast<std::size_t>(n)) {
    rep.violations.push_back({"pole/residue count mismatch",
                              double(std::abs(n - int(sys.residues.size())))});
    return rep;
  }
  const int p = sys.p();
  for (int i = 0; i < n; ++i) {
    if (sys.residues[i].rows() != p || sys.residues[i].cols() != p) {
      rep.violations.push_back({"residue " + std::to_string(i) + " is not " +
                                    std::to_string(p) + "x" + std::to_string(p),
                                0.0});
      return rep;
    }
    if (!sys.residues[i].allFinite())
      rep.violations.push_back({"residue " + std::to_string(i) + " has non-finite entries", 0.0});
  }

  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double d = std::abs(sys.poles[i] - sys.poles[j]);
      if (d <= kPoleMinSeparation)
        rep.violations.push_back(
            {"coincident poles " + std::to_string(i) + "," + std::to_string(j), d});
    }

  CMatrix sum = CMatrix::Zero(p, p);
  for (const auto& b : sys.residues) sum += b;
  const double defect = sum.norm();
  if (defect > kResidueSumRtol * std::max(sys.residue_scale(), 1e-300))
    rep.violations.push_back({"residue sum", defect});
  return rep;
}

void require_valid(const FuchsianSystem& sys) {
  const auto rep = validate(sys);
  if (!rep.ok()) throw Error("invalid Fuchsian system: " + rep.str());
}

CMatrix coefficient_at(const FuchsianSystem& sys, Complex z) {
  const int p = sys.p();
  CMatrix a = CMatrix::Zero(p, p);
  for (int i = 0; i < sys.n(); ++i) {
    const Complex d = z - sys.poles[i];
    if (std::abs(d) <= 1e-12)
      throw Error("coefficient_at: z within 1e-12 of pole " + std::to_string(i));
    a += sys.residues[i] / d;
  }
  return a;
}

ExponentTable exponents(const FuchsianSystem& sys) {
  ExponentTable t;
  t.beta.reserve(sys.n());
  for (const auto& b : sys.residues) t.beta.push_back(num::eig(b).values);
  return t;
}

Complex fuchs_defect(const ExponentTable& table) {
  Complex s{0.0, 0.0};
  for (const auto& row : table.beta) s += row.sum();
  return s;
}

// ---------------------------------------------------------------------------
// JSON I/O

namespace {

using nlohmann::json;

Complex parse_complex_pair(const json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw ParseError("expected [re, im] pair, got " + j.dump());
  return {j[0].get<double>(), j[1].get<double>()};
}

json dump_complex_pair(Complex z) { return json::array({z.real(), z.imag()}); }

}  // namespace

FuchsianSystem parse_system_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("system file is not valid JSON: ") + e.what());
  }
  if (!j.contains("p") || !j.contains("poles") || !j.contains("residues"))
    throw ParseError("system file needs keys p, poles, residues");

  FuchsianSystem sys;
  const int p = j["p"].get<int>();
  if (p <= 0 || p > 16) throw ParseError("matrix dimension p out of range [1,16]");
  const auto& poles = j["poles"];
  const auto& residues = j["residues"];
  if (!poles.is_array() || !residues.is_array() || poles.size() != residues.size() ||
      poles.empty())
    throw ParseError("poles and residues must be equal-length non-empty arrays");

  const int n = static_cast<int>(poles.size());
  sys.poles.resize(n);
  for (int i = 0; i < n; ++i) sys.poles[i] = parse_complex_pair(poles[i]);
  for (int i = 0; i < n; ++i) {
    const auto& r = residues[i];
    if (!r.is_array() || r.size() != static_cast<std::size_t>(p) * p)
      throw ParseError("residue " + std::to_string(i) + " must list p*p row-major entries");
    CMatrix b(p, p);
    for (int k = 0; k < p * p; ++k) b(k / p, k % p) = parse_complex_pair(r[k]);
    sys.residues.push_back(std::move(b));
  }
  return sys;
}

FuchsianSystem load_system_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open system file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_system_json(buf.str());
}

std::string system_json(const FuchsianSystem& sys) {
  json j;
  j["p"] = sys.p();
  json poles = json::array();
  for (int i = 0; i < sys.n(); ++i) poles.push_back(dump_complex_pair(sys.poles[i]));
  j["poles"] = poles;
  json residues = json::array();
  for (const auto& b : sys.residues) {
    json r = json::array();
    for (int row = 0; row < b.rows(); ++row)
      for (int col = 0; col < b.cols(); ++col) r.push_back(dump_complex_pair(b(row, col)));
    residues.push_back(r);
  }
  j["residues"] = residues;
  return j.dump(2);
}

}  // namespace isolab::fuchs
