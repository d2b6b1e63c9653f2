#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "fqcat/poly.hpp"

namespace fqcat {

// ---------------------------------------------------------------------------
// Measure parameters.
//
// For each family the ring of measures on the relative Burnside ring is a
// polynomial ring in one parameter t (a pair of such rings glued at t = 0 for
// the orthogonal family, where an even/odd branch must be chosen), and the
// measure attached to t sends a structure class to its counting polynomial P
// evaluated at t. A parameter is one of:
//   * symbolic   - the formal variable t, possibly rescaled by an exact
//                  rational constant (restriction acts on symbolic parameters
//                  by rescaling, so the scale keeps that operation closed);
//   * rational   - an exact rational value;
//   * algebraic  - an algebraic number presented by its monic minimal
//                  polynomial over the rationals; values are computed in the
//                  residue ring Q[x]/(minpoly).
// ---------------------------------------------------------------------------

enum class ParamKind { symbolic, rational, algebraic };

// Residue-class value in Q[x]/(h), h monic. Used for algebraic parameters.
struct Algebraic {
  UniPoly residue;  // reduced: degree < deg(h)
  UniPoly minpoly;  // monic, degree >= 1

  bool operator==(const Algebraic& o) const {
    return residue == o.residue && minpoly == o.minpoly;
  }
  bool operator!=(const Algebraic& o) const { return !(*this == o); }
  std::string str() const;
};

// A measure value in the domain selected by the parameter kind: a polynomial
// in t for symbolic parameters, an exact rational for rational ones, a
// residue class for algebraic ones.
using MeasureValue = std::variant<UniPoly, Rat, Algebraic>;

std::string measure_value_str(const MeasureValue& v);

struct MeasureSpec {
  Family family{Family::GL};
  long q{0};
  std::optional<Branch> branch;  // orthogonal family only
  ParamKind kind{ParamKind::symbolic};
  Rat scale{1};           // symbolic: the parameter is scale * t
  Rat rational_value{0};  // rational kind
  UniPoly minpoly;        // algebraic kind

  static MeasureSpec symbolic(Family fam, long q, std::optional<Branch> br = {});
  static MeasureSpec rational(Family fam, long q, const Rat& value,
                              std::optional<Branch> br = {});
  // Input error unless the polynomial is monic of degree >= 1.
  static MeasureSpec algebraic(Family fam, long q, const UniPoly& minpoly,
                               std::optional<Branch> br = {});

  std::string param_str() const;
  std::string str() const;
};

// The class's counting polynomial for this spec's family/branch, with a
// symbolic spec's scale folded in: P_A(scale * t).
UniPoly measure_polynomial(const MeasureSpec& spec, const StructureClass& a);

// Visits the family's nondegenerate finite models in increasing size together
// with each model's parameter value (GL: q^d; Sp: q^d with d even; U: (-q)^d;
// O: q^(d/2) signed by discriminant, both discriminants per dimension, with
// the branch restricting dimension parity). The callback returns false to
// stop early.
void for_each_ambient_model(
    Family fam, std::optional<Branch> br, long q,
    const std::function<bool(const StructureClass&, const Rat&)>& visit);

// The measure of the class: the counting polynomial at the parameter, in the
// parameter's domain.
MeasureValue measure_of_class(const MeasureSpec& spec, const StructureClass& a);

// ---------------------------------------------------------------------------
// Fiber measures. An embedding A -> B induces a restriction map of
// transitive G-sets X(B) -> X(A); its measure is a polynomial law in the
// parameter, computed two independent ways that must agree:
//   (i)  the ratio P_B / P_A as a reduced rational function, and
//   (ii) a polynomial fitted to finite-model extension counts: the number of
//        embeddings of B into a growing model that extend one fixed
//        embedding of A, as a function of the model's parameter value.
// The fitted polynomial (ii) is the returned law; a mismatch with (i) is an
// internal-consistency error, and a law that fails to be polynomial is a
// non-polynomial-law error.
// ---------------------------------------------------------------------------

struct FiberMeasure {
  StructureClass a, b;
  RatFunc ratio;       // route (i), reduced
  UniPoly law;         // route (ii); equals ratio as a rational function
  MeasureValue value;  // law at the spec's parameter
};

// Embedding chosen as the first one between canonical models in scan order
// (input error if none exists). For a numeric parameter at which A has
// measure zero the value does not exist: division-domain error.
FiberMeasure fiber_measure(const MeasureSpec& spec, const StructureClass& a,
                           const StructureClass& b);
// Same with an explicit embedding: rows are the images in B's canonical
// model of A's canonical basis (input error if not an embedding).
FiberMeasure fiber_measure(const MeasureSpec& spec, const StructureClass& a,
                           const StructureClass& b, const Mat& embedding);

// ---------------------------------------------------------------------------
// Axiom checker. Verifies, as exact polynomial identities in t over all
// classes of dimension <= bound (bound <= 3):
//   * normalization: the identity embedding has fiber measure 1, and the
//     fiber over the empty class is the class's own counting polynomial;
//   * invariance: the law does not depend on the choice of embedding;
//   * multiplicativity: law(A->C) = law(A->B) * law(B->C) over chains;
//   * base change: law(A->B) = sum over the relative amalgam orbits D of
//     (B, A') over A of law(A'->D), with orbit multiplicities. Base changes
//     over the empty class degenerate to plain product decompositions whose
//     orbit count grows like q^(dim B * dim A'); they are checked up to joint
//     dimension bound+1 (the Burnside product range), while every
//     configuration with a nonempty base within the bound is checked.
// Failures are report data, not exceptions.
// ---------------------------------------------------------------------------

struct AxiomCheckLine {
  std::string kind;    // "normalization" | "invariance" | "multiplicativity" | "base-change"
  std::string detail;  // classes involved
  bool pass{false};
};

struct AxiomsReport {
  Family family{Family::GL};
  std::optional<Branch> branch;
  long q{0};
  int bound{0};
  long normalization_checked{0};
  long invariance_checked{0};
  long multiplicativity_checked{0};
  long base_change_checked{0};
  std::vector<AxiomCheckLine> failures;
  bool pass() const { return failures.empty(); }
};

AxiomsReport axioms_check(const MeasureSpec& spec, int bound);

// ---------------------------------------------------------------------------
// Regularity. A measure is regular when every transitive set has invertible
// measure, i.e. the parameter avoids the family's singular set:
//   GL:      {0} and q^i (i >= 0)
//   Sp:      {0} and q^(2i) (i >= 0)
//   O even:  {0, 1} and +-q^i (i >= 1)
//   O odd:   {0} and +-q^i (i >= 0)
//   U:       {0} and (-q)^i (i >= 0)
// Every nonzero parameter is quasi-regular (regular after restriction).
// Algebraic parameters are singular iff the minimal polynomial vanishes at a
// singular value. Symbolic parameters are not decidable:
// undecidable-at-symbolic error.
// ---------------------------------------------------------------------------

enum class Regularity { regular, quasi_regular_only, irregular };

std::string to_string(Regularity r);
Regularity regularity(const MeasureSpec& spec);

// The parameter map induced by restricting the measure n levels down the
// defining chain of open subgroups:
//   GL: t / q^n; Sp: t / q^(2n); O: t / q^n (same branch); U: (-1)^n t / q^n.
MeasureSpec restrict_parameter(const MeasureSpec& spec, int n);

// ---------------------------------------------------------------------------
// Counting-measure consistency: the finite models realize the measure along
// their parameter sequence. For each model index in `indices` the row
// compares the oracle embedding count of A into the model with the counting
// polynomial at the model's parameter value:
//   GL: index l, model (l,0,0), t = q^l      Sp: index m, model (m,0), t = q^(2m)
//   O:  index r, models of dimension 2r resp. 2r+1 for both discriminants,
//       t = chi(disc) q^r                    U: index m, model (m,0), t = (-q)^m
// ---------------------------------------------------------------------------

struct CountingRow {
  StructureClass model;
  Rat parameter{0};
  Int oracle{0};
  Rat measure{0};
  bool pass{false};
};

struct CountingReport {
  Family family{Family::GL};
  std::optional<Branch> branch;
  StructureClass cls;
  long q{0};
  std::vector<CountingRow> rows;
  bool pass() const;
};

CountingReport counting_measure_consistency(Family fam, std::optional<Branch> br,
                                            const StructureClass& a,
                                            const std::vector<int>& indices, long q);

// The symbolic measure of every class equals the polynomial fitted to its
// oracle counts over at least deg + 3 model abscissae.
bool measure_matches_count_fit(Family fam, std::optional<Branch> br,
                               const StructureClass& a, long q);

// ---------------------------------------------------------------------------
// Relations of the universal measure ring, checked as exact polynomial
// identities in t under the counting polynomials. With a, b, c the measures
// of the one-vector basis classes:
//   GL: b = c and a = q^-1 b(c+1)
//   Sp: a = q^-1 b(b+1)
//   U:  with c = 1+b-a: c = t, (a-b)^2 = (q+1)a - b,
//       a = q^-1 c(c-1), b = q^-1 (c-1)(c+q)
//   O:  per branch, with u = c+1-a/2-b/2 and v = (a-b)/2:
//       u = t on the even branch and 0 on the odd, v = 0 even and t odd,
//       u*v = 0, c = -1 + q^-1 u(u+q-1) + v^2, and the quadratic relation
//       ((q+1)(c+1) - (q+1)a/2 + (q-1)b/2) a = (c+1+(q-1)(a+b)/2) c;
//       also the full space has measure t^2 on both branches.
// ---------------------------------------------------------------------------

struct ThetaReport {
  Family family{Family::GL};
  long q{0};
  std::vector<AxiomCheckLine> lines;  // kind = "theta-relation"
  bool pass() const;
};

ThetaReport theta_relations_check(Family fam, long q);

}  // namespace fqcat
