#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fqcat/common.hpp"
#include "fqcat/space.hpp"

namespace fqcat {

// Sparse polynomial in the variables (t, u, v) with exact rational
// coefficients. The base prime power q is always a concrete rational constant
// folded into the coefficients, never a variable.
class MultiPoly {
 public:
  using Key = std::array<int, 3>;  // exponents of (t, u, v)

  MultiPoly() = default;
  MultiPoly(const Rat& c);
  MultiPoly(long c);
  static MultiPoly var(int i);  // 0 -> t, 1 -> u, 2 -> v
  static MultiPoly monomial(const Key& k, const Rat& c);

  bool is_zero() const { return terms_.empty(); }
  const std::map<Key, Rat>& terms() const { return terms_; }
  Rat coeff(const Key& k) const;

  MultiPoly& operator+=(const MultiPoly& o);
  MultiPoly& operator-=(const MultiPoly& o);
  friend MultiPoly operator+(MultiPoly a, const MultiPoly& b) { return a += b; }
  friend MultiPoly operator-(MultiPoly a, const MultiPoly& b) { return a -= b; }
  MultiPoly operator*(const MultiPoly& o) const;
  MultiPoly operator-() const;
  bool operator==(const MultiPoly& o) const { return terms_ == o.terms_; }
  bool operator!=(const MultiPoly& o) const { return !(*this == o); }

  MultiPoly scale_var(int i, const Rat& c) const;    // var_i -> c * var_i
  MultiPoly set_var(int i, const Rat& value) const;  // var_i -> constant
  Rat eval(const Rat& t, const Rat& u = 1, const Rat& v = 1) const;
  int degree(int i) const;  // degree in variable i; -1 for the zero polynomial

  // True if every coefficient denominator divides a power of base.
  bool denominators_divide_power_of(const Int& base) const;

  std::string str() const;  // deterministic, graded-lex term order

 private:
  std::map<Key, Rat> terms_;  // no zero coefficients stored
  void add_term(const Key& k, const Rat& c);
};

// Dense univariate polynomial over the rationals (coefficient of t^i at
// index i; no trailing zeros stored).
class UniPoly {
 public:
  UniPoly() = default;
  UniPoly(const Rat& c);
  UniPoly(long c);
  explicit UniPoly(std::vector<Rat> coeffs);
  static UniPoly t();
  // Conversion from a MultiPoly using only the first variable (input error
  // if u or v occurs).
  static UniPoly from_multi(const MultiPoly& p);

  bool is_zero() const { return coeffs_.empty(); }
  int degree() const { return static_cast<int>(coeffs_.size()) - 1; }
  Rat coeff(int i) const;
  const Rat& leading() const;
  const std::vector<Rat>& coeffs() const { return coeffs_; }

  UniPoly& operator+=(const UniPoly& o);
  UniPoly& operator-=(const UniPoly& o);
  friend UniPoly operator+(UniPoly a, const UniPoly& b) { return a += b; }
  friend UniPoly operator-(UniPoly a, const UniPoly& b) { return a -= b; }
  UniPoly operator*(const UniPoly& o) const;
  UniPoly operator-() const;
  bool operator==(const UniPoly& o) const { return coeffs_ == o.coeffs_; }
  bool operator!=(const UniPoly& o) const { return !(*this == o); }

  Rat eval(const Rat& x) const;
  MultiPoly to_multi() const;
  std::string str() const;

  // Quotient and remainder (input error on zero divisor).
  static std::pair<UniPoly, UniPoly> divmod(const UniPoly& a, const UniPoly& b);
  static UniPoly gcd(UniPoly a, UniPoly b);  // monic; gcd(0,0) = 0

 private:
  std::vector<Rat> coeffs_;
  void trim();
};

// Rational function in t, kept reduced with a monic denominator.
class RatFunc {
 public:
  RatFunc() : num_(), den_(Rat(1)) {}
  RatFunc(const Rat& c) : num_(c), den_(Rat(1)) {}
  RatFunc(long c) : num_(Rat(c)), den_(Rat(1)) {}
  RatFunc(UniPoly num) : num_(std::move(num)), den_(Rat(1)) {}
  RatFunc(UniPoly num, UniPoly den);
  static RatFunc t() { return RatFunc(UniPoly::t()); }

  const UniPoly& num() const { return num_; }
  const UniPoly& den() const { return den_; }
  bool is_zero() const { return num_.is_zero(); }
  bool is_polynomial() const { return den_.degree() == 0; }

  RatFunc operator+(const RatFunc& o) const;
  RatFunc operator-(const RatFunc& o) const;
  RatFunc operator*(const RatFunc& o) const;
  RatFunc operator/(const RatFunc& o) const;  // division-domain error on zero divisor
  RatFunc operator-() const;
  RatFunc& operator+=(const RatFunc& o) { return *this = *this + o; }
  RatFunc& operator-=(const RatFunc& o) { return *this = *this - o; }
  RatFunc& operator*=(const RatFunc& o) { return *this = *this * o; }
  bool operator==(const RatFunc& o) const { return num_ == o.num_ && den_ == o.den_; }
  bool operator!=(const RatFunc& o) const { return !(*this == o); }

  // Evaluation; division-domain error where the denominator vanishes.
  Rat eval(const Rat& x) const;
  std::string str() const;

 private:
  UniPoly num_, den_;
  void reduce();
};

// Embedding-count polynomials built from the counting recurrences, memoized.
// Whenever two reduction routes apply, both are computed and must agree
// (internal-consistency error otherwise). q is the base field size; for the
// orthogonal family the branch selects the parity of the ambient model
// dimension and eps tags the discriminant class of the counted space.
MultiPoly gl_Q(int a, int b, int c, long q);            // variables (t, u, v)
MultiPoly sp_Q(int a, int b, long q);                   // variables (t, u)
MultiPoly o_Q(Branch br, int a, SquareClass eps, int b, long q);
MultiPoly u_Q(int a, int b, long q);                    // polynomial in u^2

// Closed-form one-variable specializations (u = v = 1), constructed directly
// from the product formulas.
UniPoly gl_P(int a, int b, int c, long q);
UniPoly sp_P(int a, int b, long q);
UniPoly o_P(Branch br, int a, SquareClass eps, int b, long q);
UniPoly u_P(int a, int b, long q);

// Class-keyed front ends. The branch argument is consulted only for the
// orthogonal family (input error if missing there).
MultiPoly class_Q(const StructureClass& a, long q, std::optional<Branch> br = {});
UniPoly class_P(const StructureClass& a, long q, std::optional<Branch> br = {});

// The point (t, u, v) at which the family's Q evaluates to the number of
// embeddings into the model of class m. For the orthogonal family the branch
// is the parity of m's nondegenerate dimension and t carries the sign of its
// modified discriminant; unused variables are fixed at 1.
std::array<Rat, 3> ambient_substitution(const StructureClass& m, long q);

// Branch selected by an orthogonal ambient model (parity of the
// nondegenerate dimension); empty for other families.
std::optional<Branch> ambient_branch(const StructureClass& m);

// Counting-law check: oracle embedding count vs the family's Q at the
// ambient substitution. Failure is data, not an exception.
struct CountIdentityReport {
  StructureClass a, m;
  long q{0};
  Int oracle{0};
  Rat poly_value{0};
  bool pass{false};
};
CountIdentityReport verify_count_identity(const StructureClass& a, const StructureClass& m,
                                          long q);

// Exact Lagrange interpolation through the first degree_bound + 1 samples;
// requires at least degree_bound + 3 samples at distinct abscissae and
// checks the surplus ones against the fit (non-polynomial-law error on
// mismatch).
UniPoly fit_polynomial(const std::vector<std::pair<Rat, Rat>>& samples, int degree_bound);

}  // namespace fqcat
