#pragma once

#include <array>
#include <map>
#include <memory>
#include <vector>

#include "fqcat/common.hpp"

namespace fqcat {

// Finite field F_{p^k}, odd or even characteristic. Elements are indices in
// [0, q); the index encodes the little-endian coefficient tuple (c_0, ..., c_{k-1})
// of the residue class modulo the canonical modulus, via index = sum c_i p^i.
// The canonical modulus is the lexicographically least monic irreducible
// polynomial of degree k, comparing coefficient tuples (c_0, ..., c_{k-1}).
// Deterministic element scans use tuple-lex order on the coefficient tuples
// (c_0 compared first), which differs from index order for k > 1.
class Fq {
 public:
  static const Fq& get(int p, int k);

  int p() const { return p_; }
  int k() const { return k_; }
  long q() const { return q_; }
  bool odd() const { return p_ != 2; }

  int add(int a, int b) const { return add_[a * q_ + b]; }
  int sub(int a, int b) const { return add_[a * q_ + neg_[b]]; }
  int mul(int a, int b) const { return mul_[a * q_ + b]; }
  int neg(int a) const { return neg_[a]; }
  int inv(int a) const;
  int pow(int a, long e) const;
  int frobenius(int a) const { return frob_[a]; }

  // Coefficients of the canonical modulus, little-endian, length k+1, monic.
  const std::vector<int>& modulus() const { return modulus_; }

  std::vector<int> coeffs(int a) const;
  int from_coeffs(const std::vector<int>& c) const;

  // All elements in tuple-lex order (used for "least such element" scans).
  const std::vector<int>& elements_lex() const { return lex_order_; }

  // Absolute trace to the prime field, returned as an integer in [0, p).
  int trace(int a) const { return trace_[a]; }

 private:
  Fq(int p, int k);

  int p_, k_;
  long q_;
  std::vector<int> modulus_;
  std::vector<int> add_, mul_, neg_, inv_, frob_, trace_;
  std::vector<int> lex_order_;
};

enum class SquareClass { zero, square, nonsquare };

std::string to_string(SquareClass c);

// Multiplicative quadratic character, extended by zero. Requires odd
// characteristic (unsupported-field error otherwise).
SquareClass quadratic_character(const Fq& F, int a);

// Least non-square in tuple-lex order. Odd characteristic only.
int pick_nonsquare(const Fq& F);

// For k even: the involution a -> a^(p^(k/2)) fixing the index-2 subfield, and
// the relative norm a -> a^(p^(k/2) + 1) into that subfield.
struct ConjNorm {
  int conj;
  int norm;
};
ConjNorm norm_and_conjugate(const Fq& F, int a);

// Elements of the cyclotomic field Q(zeta_p) with coefficients in T, written
// on the power basis 1, zeta, ..., zeta^(p-2); zeta^(p-1) rewrites to
// -(1 + zeta + ... + zeta^(p-2)). T must support +, -, *, == and construction
// from int.
template <class T>
class Cyclo {
 public:
  Cyclo() : p_(2), c_(1, T(0)) {}
  explicit Cyclo(int p, T constant = T(0)) : p_(p), c_(p - 1, T(0)) {
    c_[0] = std::move(constant);
  }

  static Cyclo zeta_pow(int p, long e) {
    Cyclo r(p);
    long m = ((e % p) + p) % p;
    if (m < p - 1) {
      r.c_[m] = T(1);
    } else {
      for (auto& x : r.c_) x = T(-1);
    }
    return r;
  }

  int p() const { return p_; }
  const std::vector<T>& coeffs() const { return c_; }
  T& operator[](int i) { return c_[i]; }
  const T& operator[](int i) const { return c_[i]; }

  Cyclo operator+(const Cyclo& o) const {
    Cyclo r = *this;
    for (int i = 0; i < p_ - 1; ++i) r.c_[i] = r.c_[i] + o.c_[i];
    return r;
  }
  Cyclo operator-(const Cyclo& o) const {
    Cyclo r = *this;
    for (int i = 0; i < p_ - 1; ++i) r.c_[i] = r.c_[i] - o.c_[i];
    return r;
  }
  Cyclo operator*(const Cyclo& o) const {
    // Convolve, reduce exponents mod p, then fold zeta^(p-1).
    std::vector<T> acc(p_, T(0));
    for (int i = 0; i < p_ - 1; ++i)
      for (int j = 0; j < p_ - 1; ++j) acc[(i + j) % p_] = acc[(i + j) % p_] + c_[i] * o.c_[j];
    Cyclo r(p_);
    for (int e = 0; e < p_ - 1; ++e) r.c_[e] = acc[e] - acc[p_ - 1];
    return r;
  }
  Cyclo operator*(const T& s) const {
    Cyclo r = *this;
    for (auto& x : r.c_) x = x * s;
    return r;
  }
  bool operator==(const Cyclo& o) const { return p_ == o.p_ && c_ == o.c_; }
  bool operator!=(const Cyclo& o) const { return !(*this == o); }

  bool is_zero() const {
    for (const auto& x : c_)
      if (!(x == T(0))) return false;
    return true;
  }

 private:
  int p_;
  std::vector<T> c_;
};

using CycloScalar = Cyclo<Rat>;

// psi(a) = zeta_p ^ Tr(a), the standard additive character.
CycloScalar additive_character(const Fq& F, int a);

}  // namespace fqcat
