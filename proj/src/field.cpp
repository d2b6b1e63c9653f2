#include "fqcat/field.hpp"

#include <algorithm>
#include <mutex>
#include <numeric>

namespace fqcat {

namespace {

bool is_prime(int p) {
  if (p < 2) return false;
  for (int d = 2; d * d <= p; ++d)
    if (p % d == 0) return false;
  return true;
}

// Polynomials over F_p, little-endian, trailing zeros allowed.
using Poly = std::vector<int>;

Poly poly_mod(Poly a, const Poly& m, int p) {
  int dm = static_cast<int>(m.size()) - 1;
  while (static_cast<int>(a.size()) > dm) {
    int lead = a.back();
    if (lead != 0) {
      int shift = static_cast<int>(a.size()) - 1 - dm;
      for (int i = 0; i <= dm; ++i) {
        int& t = a[shift + i];
        t = ((t - lead * m[i]) % p + p) % p;
      }
    }
    a.pop_back();
  }
  return a;
}

Poly poly_mulmod(const Poly& a, const Poly& b, const Poly& m, int p) {
  Poly c(a.size() + b.size() - 1, 0);
  for (size_t i = 0; i < a.size(); ++i)
    for (size_t j = 0; j < b.size(); ++j) c[i + j] = (c[i + j] + a[i] * b[j]) % p;
  return poly_mod(std::move(c), m, p);
}

bool poly_is_zero(const Poly& a) {
  return std::all_of(a.begin(), a.end(), [](int x) { return x == 0; });
}

// Trial division by all monic polynomials of degree 1..deg(f)/2.
bool is_irreducible(const Poly& f, int p) {
  int d = static_cast<int>(f.size()) - 1;
  if (d == 1) return true;
  for (int e = 1; 2 * e <= d; ++e) {
    long count = 1;
    for (int i = 0; i < e; ++i) count *= p;
    for (long idx = 0; idx < count; ++idx) {
      Poly g(e + 1, 0);
      long t = idx;
      for (int i = 0; i < e; ++i) {
        g[i] = static_cast<int>(t % p);
        t /= p;
      }
      g[e] = 1;
      if (poly_is_zero(poly_mod(f, g, p))) return false;
    }
  }
  return true;
}

}  // namespace

Fq::Fq(int p, int k) : p_(p), k_(k) {
  require(is_prime(p), ErrorKind::input, "field characteristic must be prime");
  require(k >= 1 && k <= 6, ErrorKind::input, "field degree out of range");
  q_ = 1;
  for (int i = 0; i < k; ++i) {
    q_ *= p;
    require(q_ <= 4096, ErrorKind::input, "field too large");
  }

  // Least-lex monic irreducible modulus: scan constant-first coefficient
  // tuples in increasing lex order.
  if (k == 1) {
    modulus_ = {0, 1};  // x (never used for reduction when k == 1)
  } else {
    long count = 1;
    for (int i = 0; i < k; ++i) count *= p;
    bool found = false;
    // Lex order on (c_0, ..., c_{k-1}) means c_0 is the most significant key.
    std::vector<int> tuple(k, 0);
    for (long step = 0; step < count && !found; ++step) {
      Poly f(k + 1, 0);
      for (int i = 0; i < k; ++i) f[i] = tuple[i];
      f[k] = 1;
      if (is_irreducible(f, p)) {
        modulus_ = f;
        found = true;
      }
      for (int i = k - 1; i >= 0; --i) {
        if (++tuple[i] < p) break;
        tuple[i] = 0;
      }
    }
    require(found, ErrorKind::internal_consistency, "no irreducible modulus found");
  }

  auto idx_of = [&](const Poly& a) {
    long v = 0;
    for (int i = k_ - 1; i >= 0; --i) v = v * p_ + (i < static_cast<int>(a.size()) ? a[i] : 0);
    return static_cast<int>(v);
  };
  auto poly_of = [&](int a) {
    Poly c(k_, 0);
    long t = a;
    for (int i = 0; i < k_; ++i) {
      c[i] = static_cast<int>(t % p_);
      t /= p_;
    }
    return c;
  };

  add_.resize(q_ * q_);
  mul_.resize(q_ * q_);
  neg_.resize(q_);
  inv_.assign(q_, -1);
  for (int a = 0; a < q_; ++a) {
    Poly pa = poly_of(a);
    Poly na(k_);
    for (int i = 0; i < k_; ++i) na[i] = (p_ - pa[i]) % p_;
    neg_[a] = idx_of(na);
    for (int b = 0; b < q_; ++b) {
      Poly pb = poly_of(b);
      Poly s(k_);
      for (int i = 0; i < k_; ++i) s[i] = (pa[i] + pb[i]) % p_;
      add_[a * q_ + b] = idx_of(s);
      mul_[a * q_ + b] = (k_ == 1) ? (a * b) % p_ : idx_of(poly_mulmod(pa, pb, modulus_, p_));
    }
  }
  for (int a = 1; a < q_; ++a)
    for (int b = 1; b < q_; ++b)
      if (mul_[a * q_ + b] == 1) inv_[a] = b;

  frob_.resize(q_);
  trace_.resize(q_);
  for (int a = 0; a < q_; ++a) frob_[a] = pow(a, p_);
  for (int a = 0; a < q_; ++a) {
    int acc = a, t = a;
    for (int i = 1; i < k_; ++i) {
      t = frob_[t];
      acc = add(acc, t);
    }
    // acc lies in the prime field: its tuple is (c, 0, ..., 0).
    require(acc < p_, ErrorKind::internal_consistency, "trace not in prime field");
    trace_[a] = acc;
  }

  lex_order_.resize(q_);
  std::iota(lex_order_.begin(), lex_order_.end(), 0);
  std::sort(lex_order_.begin(), lex_order_.end(), [&](int a, int b) {
    return poly_of(a) < poly_of(b);
  });
}

int Fq::inv(int a) const {
  require(a != 0, ErrorKind::input, "inverse of zero");
  return inv_[a];
}

int Fq::pow(int a, long e) const {
  if (e < 0) return pow(inv(a), -e);
  int r = 1, b = a;
  while (e > 0) {
    if (e & 1) r = mul(r, b);
    b = mul(b, b);
    e >>= 1;
  }
  return r;
}

std::vector<int> Fq::coeffs(int a) const {
  std::vector<int> c(k_);
  long t = a;
  for (int i = 0; i < k_; ++i) {
    c[i] = static_cast<int>(t % p_);
    t /= p_;
  }
  return c;
}

int Fq::from_coeffs(const std::vector<int>& c) const {
  require(static_cast<int>(c.size()) == k_, ErrorKind::input, "coefficient tuple length");
  long v = 0;
  for (int i = k_ - 1; i >= 0; --i) {
    require(c[i] >= 0 && c[i] < p_, ErrorKind::input, "coefficient out of range");
    v = v * p_ + c[i];
  }
  return static_cast<int>(v);
}

const Fq& Fq::get(int p, int k) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, std::unique_ptr<Fq>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[{p, k}];
  if (!slot) slot.reset(new Fq(p, k));
  return *slot;
}

std::string to_string(SquareClass c) {
  switch (c) {
    case SquareClass::zero: return "zero";
    case SquareClass::square: return "square";
    case SquareClass::nonsquare: return "nonsquare";
  }
  return "?";
}

SquareClass quadratic_character(const Fq& F, int a) {
  require(F.odd(), ErrorKind::unsupported_field,
          "quadratic character needs odd characteristic");
  if (a == 0) return SquareClass::zero;
  return F.pow(a, (F.q() - 1) / 2) == 1 ? SquareClass::square : SquareClass::nonsquare;
}

int pick_nonsquare(const Fq& F) {
  require(F.odd(), ErrorKind::unsupported_field, "no non-squares in even characteristic");
  for (int a : F.elements_lex())
    if (quadratic_character(F, a) == SquareClass::nonsquare) return a;
  fail(ErrorKind::internal_consistency, "no non-square found");
}

ConjNorm norm_and_conjugate(const Fq& F, int a) {
  require(F.k() % 2 == 0, ErrorKind::input, "conjugation needs even extension degree");
  long q0 = 1;
  for (int i = 0; i < F.k() / 2; ++i) q0 *= F.p();
  int c = F.pow(a, q0);
  return {c, F.mul(c, a)};
}

CycloScalar additive_character(const Fq& F, int a) {
  return CycloScalar::zeta_pow(F.p(), F.trace(a));
}

}  // namespace fqcat
