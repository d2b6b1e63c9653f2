#pragma once

#include <map>
#include <string>
#include <vector>

#include "fqcat/common.hpp"
#include "fqcat/space.hpp"

namespace fqcat {

// Element of the relative Burnside ring with q inverted (2q for the
// orthogonal family): a finitely supported rational combination of
// structure classes of one family. The class of the empty structure is the
// ring unit.
class BurnsideElem {
 public:
  explicit BurnsideElem(Family fam) : family_(fam) {}
  static BurnsideElem basis(const StructureClass& c);
  static BurnsideElem one(Family fam);

  Family family() const { return family_; }
  const std::map<StructureClass, Rat>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  Rat coeff(const StructureClass& c) const;
  int level() const;  // max dimension in the support; 0 when zero

  BurnsideElem& operator+=(const BurnsideElem& o);
  BurnsideElem& operator-=(const BurnsideElem& o);
  friend BurnsideElem operator+(BurnsideElem a, const BurnsideElem& b) { return a += b; }
  friend BurnsideElem operator-(BurnsideElem a, const BurnsideElem& b) { return a -= b; }
  BurnsideElem operator*(const Rat& c) const;  // scalar action
  BurnsideElem operator-() const;
  bool operator==(const BurnsideElem& o) const {
    return family_ == o.family_ && terms_ == o.terms_;
  }
  bool operator!=(const BurnsideElem& o) const { return !(*this == o); }

  void add_term(const StructureClass& c, const Rat& coef);
  std::string str() const;

 private:
  Family family_;
  std::map<StructureClass, Rat> terms_;  // no zero coefficients stored
};

// All structure classes of the family with dimension at most dim_bound,
// ascending in the class ordering (dimension first).
std::vector<StructureClass> classes_up_to(Family fam, int dim_bound);

// Isomorphism class of the direct sum of two classes.
StructureClass class_direct_sum(const StructureClass& a, const StructureClass& b, long q);

// Ring product: bilinear extension of the orbit decomposition of a product
// of transitive sets (input error on family mismatch).
BurnsideElem multiply(const BurnsideElem& x, const BurnsideElem& y, long q);

// Marks homomorphism attached to the test class C: on a basis class B it
// counts the embeddings of B into C, extended linearly.
Rat marks(const BurnsideElem& x, const StructureClass& c, long q);

// Restriction endomorphism: restrict the G-set to the stabilizer of the
// first canonical summand H (a dual pair, a symplectic pair, a hyperbolic
// plane, or a norm-one line, by family) and identify back with G. Computed
// on a basis class A by forward substitution of the marks system
//   sum_B coef_B * #emb(B -> C) = #emb(A -> H + C)
// over classes C of dimension <= dim(A) (the matrix is triangular in the
// dimension ordering with |Aut(C)| on the diagonal), then verified on the
// surplus classes of dimension dim(A) + 1.
BurnsideElem delta(const BurnsideElem& x, long q);

// The grading eigenvectors of delta together with their eigenvalues; each
// is verified by applying delta before being returned.
struct Eigenvector {
  std::string name;
  BurnsideElem elem;
  Rat eigenvalue;
};
std::vector<Eigenvector> grading_eigenvectors(Family fam, long q);

// Expansion of the presentation monomials in the generators (per family:
// X = first nondegenerate class, etc.) into the class basis, with an exact
// rank computation over the rationals.
struct PresentationReport {
  Family family{Family::GL};
  long q{0};
  int level_bound{0};
  int monomial_count{0};
  int class_count{0};
  int rank{0};
  bool independent{false};
  bool spanning{false};
  bool filtration_respected{false};
  bool o_relation_zero{false};  // vacuously true outside the orthogonal family
  bool pass() const {
    return independent && spanning && filtration_respected && o_relation_zero;
  }
};
PresentationReport presentation_check(Family fam, long q, int level_bound);

}  // namespace fqcat
