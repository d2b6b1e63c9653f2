#include "fqcat/poly.hpp"

#include <algorithm>
#include <mutex>
#include <sstream>
#include <tuple>

#include "fqcat/enumerate.hpp"

namespace fqcat {

namespace {

Rat chi(SquareClass s) {
  switch (s) {
    case SquareClass::square: return 1;
    case SquareClass::nonsquare: return -1;
    case SquareClass::zero: break;
  }
  fail(ErrorKind::input, "discriminant tag must be square or nonsquare");
}

long binom2(long n) { return n >= 2 ? n * (n - 1) / 2 : 0; }

bool divides_power_of(Int d, const Int& base) {
  d = abs(d);
  while (d != 1) {
    Int g;
    mpz_gcd(g.get_mpz_t(), d.get_mpz_t(), base.get_mpz_t());
    if (g == 1) return false;
    while (d % g == 0) d /= g;
  }
  return true;
}

}  // namespace

// ---------------------------------------------------------------------------
// MultiPoly

MultiPoly::MultiPoly(const Rat& c) {
  if (c != 0) terms_[{0, 0, 0}] = c;
}

MultiPoly::MultiPoly(long c) : MultiPoly(Rat(c)) {}

MultiPoly MultiPoly::var(int i) {
  require(i >= 0 && i < 3, ErrorKind::input, "variable index out of range");
  Key k{0, 0, 0};
  k[static_cast<size_t>(i)] = 1;
  return monomial(k, 1);
}

MultiPoly MultiPoly::monomial(const Key& k, const Rat& c) {
  require(k[0] >= 0 && k[1] >= 0 && k[2] >= 0, ErrorKind::input, "negative exponent");
  MultiPoly p;
  if (c != 0) p.terms_[k] = c;
  return p;
}

Rat MultiPoly::coeff(const Key& k) const {
  auto it = terms_.find(k);
  return it == terms_.end() ? Rat(0) : it->second;
}

void MultiPoly::add_term(const Key& k, const Rat& c) {
  if (c == 0) return;
  auto [it, fresh] = terms_.emplace(k, c);
  if (!fresh) {
    it->second += c;
    if (it->second == 0) terms_.erase(it);
  }
}

MultiPoly& MultiPoly::operator+=(const MultiPoly& o) {
  for (const auto& [k, c] : o.terms_) add_term(k, c);
  return *this;
}

MultiPoly& MultiPoly::operator-=(const MultiPoly& o) {
  for (const auto& [k, c] : o.terms_) add_term(k, -c);
  return *this;
}

MultiPoly MultiPoly::operator*(const MultiPoly& o) const {
  MultiPoly r;
  for (const auto& [k1, c1] : terms_)
    for (const auto& [k2, c2] : o.terms_)
      r.add_term({k1[0] + k2[0], k1[1] + k2[1], k1[2] + k2[2]}, c1 * c2);
  return r;
}

MultiPoly MultiPoly::operator-() const {
  MultiPoly r;
  for (const auto& [k, c] : terms_) r.terms_[k] = -c;
  return r;
}

MultiPoly MultiPoly::scale_var(int i, const Rat& c) const {
  require(i >= 0 && i < 3, ErrorKind::input, "variable index out of range");
  MultiPoly r;
  for (const auto& [k, coef] : terms_)
    r.add_term(k, coef * rat_pow(c, k[static_cast<size_t>(i)]));
  return r;
}

MultiPoly MultiPoly::set_var(int i, const Rat& value) const {
  require(i >= 0 && i < 3, ErrorKind::input, "variable index out of range");
  MultiPoly r;
  for (const auto& [k, coef] : terms_) {
    Key k2 = k;
    k2[static_cast<size_t>(i)] = 0;
    r.add_term(k2, coef * rat_pow(value, k[static_cast<size_t>(i)]));
  }
  return r;
}

Rat MultiPoly::eval(const Rat& t, const Rat& u, const Rat& v) const {
  Rat r = 0;
  for (const auto& [k, c] : terms_)
    r += c * rat_pow(t, k[0]) * rat_pow(u, k[1]) * rat_pow(v, k[2]);
  return r;
}

int MultiPoly::degree(int i) const {
  int d = -1;
  for (const auto& [k, c] : terms_) d = std::max(d, k[static_cast<size_t>(i)]);
  return d;
}

bool MultiPoly::denominators_divide_power_of(const Int& base) const {
  for (const auto& [k, c] : terms_)
    if (!divides_power_of(c.get_den(), base)) return false;
  return true;
}

std::string MultiPoly::str() const {
  if (terms_.empty()) return "0";
  static const char* names[3] = {"t", "u", "v"};
  std::ostringstream out;
  bool first = true;
  // Highest term first.
  for (auto it = terms_.rbegin(); it != terms_.rend(); ++it) {
    const auto& [k, c] = *it;
    Rat a = c;
    if (first) {
      if (a < 0) { out << "-"; a = -a; }
    } else {
      out << (a < 0 ? " - " : " + ");
      if (a < 0) a = -a;
    }
    first = false;
    bool constant = k[0] == 0 && k[1] == 0 && k[2] == 0;
    bool unit = a == 1;
    if (!unit || constant) out << a.get_str();
    bool printed = !unit || constant;
    for (int i = 0; i < 3; ++i) {
      if (k[static_cast<size_t>(i)] == 0) continue;
      if (printed) out << "*";
      out << names[i];
      if (k[static_cast<size_t>(i)] > 1) out << "^" << k[static_cast<size_t>(i)];
      printed = true;
    }
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// UniPoly

UniPoly::UniPoly(const Rat& c) {
  if (c != 0) coeffs_.push_back(c);
}

UniPoly::UniPoly(long c) : UniPoly(Rat(c)) {}

UniPoly::UniPoly(std::vector<Rat> coeffs) : coeffs_(std::move(coeffs)) { trim(); }

UniPoly UniPoly::t() { return UniPoly(std::vector<Rat>{0, 1}); }

UniPoly UniPoly::from_multi(const MultiPoly& p) {
  require(p.degree(1) <= 0 && p.degree(2) <= 0, ErrorKind::input,
          "polynomial is not univariate in t");
  std::vector<Rat> c(static_cast<size_t>(std::max(p.degree(0), -1) + 1), Rat(0));
  for (const auto& [k, coef] : p.terms()) c[static_cast<size_t>(k[0])] = coef;
  return UniPoly(std::move(c));
}

void UniPoly::trim() {
  while (!coeffs_.empty() && coeffs_.back() == 0) coeffs_.pop_back();
}

Rat UniPoly::coeff(int i) const {
  if (i < 0 || i >= static_cast<int>(coeffs_.size())) return 0;
  return coeffs_[static_cast<size_t>(i)];
}

const Rat& UniPoly::leading() const {
  require(!coeffs_.empty(), ErrorKind::input, "zero polynomial has no leading coefficient");
  return coeffs_.back();
}

UniPoly& UniPoly::operator+=(const UniPoly& o) {
  if (o.coeffs_.size() > coeffs_.size()) coeffs_.resize(o.coeffs_.size(), Rat(0));
  for (size_t i = 0; i < o.coeffs_.size(); ++i) coeffs_[i] += o.coeffs_[i];
  trim();
  return *this;
}

UniPoly& UniPoly::operator-=(const UniPoly& o) {
  if (o.coeffs_.size() > coeffs_.size()) coeffs_.resize(o.coeffs_.size(), Rat(0));
  for (size_t i = 0; i < o.coeffs_.size(); ++i) coeffs_[i] -= o.coeffs_[i];
  trim();
  return *this;
}

UniPoly UniPoly::operator*(const UniPoly& o) const {
  if (is_zero() || o.is_zero()) return UniPoly();
  std::vector<Rat> c(coeffs_.size() + o.coeffs_.size() - 1, Rat(0));
  for (size_t i = 0; i < coeffs_.size(); ++i)
    for (size_t j = 0; j < o.coeffs_.size(); ++j) c[i + j] += coeffs_[i] * o.coeffs_[j];
  return UniPoly(std::move(c));
}

UniPoly UniPoly::operator-() const {
  UniPoly r = *this;
  for (auto& c : r.coeffs_) c = -c;
  return r;
}

Rat UniPoly::eval(const Rat& x) const {
  Rat r = 0;
  for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) r = r * x + *it;
  return r;
}

MultiPoly UniPoly::to_multi() const {
  MultiPoly p;
  for (size_t i = 0; i < coeffs_.size(); ++i)
    p += MultiPoly::monomial({static_cast<int>(i), 0, 0}, coeffs_[i]);
  return p;
}

std::string UniPoly::str() const {
  MultiPoly p = to_multi();
  return p.str();
}

std::pair<UniPoly, UniPoly> UniPoly::divmod(const UniPoly& a, const UniPoly& b) {
  require(!b.is_zero(), ErrorKind::input, "polynomial division by zero");
  UniPoly rem = a;
  if (a.degree() < b.degree()) return {UniPoly(), rem};
  std::vector<Rat> q(static_cast<size_t>(a.degree() - b.degree() + 1), Rat(0));
  while (!rem.is_zero() && rem.degree() >= b.degree()) {
    int shift = rem.degree() - b.degree();
    Rat c = rem.leading() / b.leading();
    q[static_cast<size_t>(shift)] = c;
    std::vector<Rat> sub(static_cast<size_t>(shift), Rat(0));
    sub.push_back(c);
    rem -= b * UniPoly(std::move(sub));
  }
  return {UniPoly(std::move(q)), rem};
}

UniPoly UniPoly::gcd(UniPoly a, UniPoly b) {
  while (!b.is_zero()) {
    auto [q, r] = divmod(a, b);
    a = std::move(b);
    b = std::move(r);
  }
  if (a.is_zero()) return a;
  Rat lc = a.leading();
  for (auto& c : a.coeffs_) c /= lc;
  return a;
}

// ---------------------------------------------------------------------------
// RatFunc

RatFunc::RatFunc(UniPoly num, UniPoly den) : num_(std::move(num)), den_(std::move(den)) {
  require(!den_.is_zero(), ErrorKind::division_domain, "zero denominator");
  reduce();
}

void RatFunc::reduce() {
  if (num_.is_zero()) {
    den_ = UniPoly(Rat(1));
    return;
  }
  UniPoly g = UniPoly::gcd(num_, den_);
  if (g.degree() > 0) {
    auto [qn, rn] = UniPoly::divmod(num_, g);
    auto [qd, rd] = UniPoly::divmod(den_, g);
    require(rn.is_zero() && rd.is_zero(), ErrorKind::internal_consistency,
            "gcd does not divide exactly");
    num_ = std::move(qn);
    den_ = std::move(qd);
  }
  Rat lc = den_.leading();
  if (lc != 1) {
    std::vector<Rat> n = num_.coeffs(), d = den_.coeffs();
    for (auto& c : n) c /= lc;
    for (auto& c : d) c /= lc;
    num_ = UniPoly(std::move(n));
    den_ = UniPoly(std::move(d));
  }
}

RatFunc RatFunc::operator+(const RatFunc& o) const {
  return RatFunc(num_ * o.den_ + o.num_ * den_, den_ * o.den_);
}

RatFunc RatFunc::operator-(const RatFunc& o) const {
  return RatFunc(num_ * o.den_ - o.num_ * den_, den_ * o.den_);
}

RatFunc RatFunc::operator*(const RatFunc& o) const {
  return RatFunc(num_ * o.num_, den_ * o.den_);
}

RatFunc RatFunc::operator/(const RatFunc& o) const {
  require(!o.is_zero(), ErrorKind::division_domain, "division by zero rational function");
  return RatFunc(num_ * o.den_, den_ * o.num_);
}

RatFunc RatFunc::operator-() const {
  RatFunc r = *this;
  r.num_ = -r.num_;
  return r;
}

Rat RatFunc::eval(const Rat& x) const {
  Rat d = den_.eval(x);
  if (d == 0) fail(ErrorKind::division_domain, "denominator vanishes at evaluation point");
  return num_.eval(x) / d;
}

std::string RatFunc::str() const {
  if (is_polynomial()) return num_.str();
  return "(" + num_.str() + ") / (" + den_.str() + ")";
}

// ---------------------------------------------------------------------------
// Family Q polynomials

namespace {

// t, u, v and small composites used by the recurrences.
const MultiPoly kT = MultiPoly::var(0);
const MultiPoly kU = MultiPoly::var(1);
const MultiPoly kV = MultiPoly::var(2);

using QKey = std::tuple<int, int, int, int, int, int, long>;  // family, branch, a, eps, b, c, q
std::map<QKey, MultiPoly> g_q_memo;
std::mutex g_q_mu;

int eps_tag(SquareClass s) { return s == SquareClass::nonsquare ? 1 : 0; }

void check_equal_routes(const MultiPoly& x, const MultiPoly& y, const char* what) {
  require(x == y, ErrorKind::internal_consistency,
          std::string("recurrence routes disagree for ") + what);
}

void check_denominators(const MultiPoly& p, long q, bool invert_two) {
  Int base = invert_two ? Int(2 * q) : Int(q);
  require(p.denominators_divide_power_of(base), ErrorKind::internal_consistency,
          "coefficient denominators escape the inverted primes");
}

MultiPoly gl_Q_impl(int a, int b, int c, long q) {
  if (a == 0 && b == 0 && c == 0) return MultiPoly(1);
  Rat qr(q);
  if (a >= 1) {
    // q^{-1} (t-1) t u v . Q_{a-1,b,c}(q^{-1} t, u, v)
    MultiPoly factor = MultiPoly::monomial({2, 1, 1}, 1 / qr) - MultiPoly::monomial({1, 1, 1}, 1 / qr);
    return factor * gl_Q(a - 1, b, c, q).scale_var(0, 1 / qr);
  }
  std::optional<MultiPoly> via_b, via_c;
  if (b >= 1) {
    MultiPoly r = gl_Q(0, b - 1, c, q);
    Rat s = rat_pow(qr, b - 1);
    via_b = MultiPoly(s) * (kT - MultiPoly(1)) * kU * r.scale_var(0, 1 / qr) +
            MultiPoly(s) * (kU - MultiPoly(1)) * r.scale_var(1, 1 / qr);
  }
  if (c >= 1) {
    MultiPoly r = gl_Q(0, b, c - 1, q);
    Rat s = rat_pow(qr, c - 1);
    via_c = MultiPoly(s) * (kT - MultiPoly(1)) * kV * r.scale_var(0, 1 / qr) +
            MultiPoly(s) * (kV - MultiPoly(1)) * r.scale_var(2, 1 / qr);
  }
  if (via_b && via_c) check_equal_routes(*via_b, *via_c, "graded counting polynomial");
  return via_b ? *via_b : *via_c;
}

MultiPoly sp_Q_impl(int a, int b, long q) {
  if (a == 0 && b == 0) return MultiPoly(1);
  Rat qr(q);
  std::optional<MultiPoly> via_a, via_b;
  if (a >= 1) {
    // q^{-1} (t-1) t u^2 . Q_{a-1,b}(q^{-2} t, u)
    MultiPoly factor =
        MultiPoly::monomial({2, 2, 0}, 1 / qr) - MultiPoly::monomial({1, 2, 0}, 1 / qr);
    via_a = factor * sp_Q(a - 1, b, q).scale_var(0, 1 / (qr * qr));
  }
  if (b >= 1) {
    MultiPoly r = sp_Q(a, b - 1, q);
    Rat s = rat_pow(qr, 2 * a + b - 1);
    via_b = MultiPoly(s) * (kT - MultiPoly(1)) * kU * r.scale_var(0, 1 / (qr * qr)) +
            MultiPoly(s) * (kU - MultiPoly(1)) * r.scale_var(1, 1 / qr);
  }
  if (via_a && via_b) check_equal_routes(*via_a, *via_b, "symplectic counting polynomial");
  return via_a ? *via_a : *via_b;
}

MultiPoly o_Q_impl(Branch br, int a, SquareClass eps, int b, long q) {
  require(a > 0 || eps == SquareClass::square, ErrorKind::input,
          "zero-dimensional nondegenerate part carries the square tag");
  Rat qr(q);
  bool even = br == Branch::even;
  // Base cases (radical-free, below the two-step reduction).
  if (b == 0) {
    if (a == 0) return MultiPoly(1);
    if (a == 1) {
      if (even)  // q^{-1} (t-1) t u
        return MultiPoly::monomial({2, 1, 0}, 1 / qr) - MultiPoly::monomial({1, 1, 0}, 1 / qr);
      // (t + chi(eps)) t u
      return MultiPoly::monomial({2, 1, 0}, 1) + MultiPoly::monomial({1, 1, 0}, chi(eps));
    }
    if (a == 2 && eps == SquareClass::nonsquare) {
      if (even) {  // q^{-3} (t-1)(t-q) t^2 u^2
        MultiPoly tt = MultiPoly::monomial({2, 2, 0}, rat_pow(qr, -3));
        return (kT - MultiPoly(1)) * (kT - MultiPoly(Rat(q))) * tt;
      }
      // q^{-1} (t^2-1) t^2 u^2
      return MultiPoly::monomial({4, 2, 0}, 1 / qr) - MultiPoly::monomial({2, 2, 0}, 1 / qr);
    }
  }
  std::optional<MultiPoly> via_a, via_b;
  if (a >= 3 || (a == 2 && eps == SquareClass::square)) {
    MultiPoly r = o_Q(br, a - 2, eps, b, q).scale_var(0, 1 / qr);
    if (even) {  // q^{-3} (t+q)(t-1) t^2 u^2 . Q(q^{-1} t, u)
      MultiPoly tt = MultiPoly::monomial({2, 2, 0}, rat_pow(qr, -3));
      via_a = (kT + MultiPoly(Rat(q))) * (kT - MultiPoly(1)) * tt * r;
    } else {  // q^{-1} (t^2-1) t^2 u^2 . Q(q^{-1} t, u)
      MultiPoly tt = MultiPoly::monomial({2, 2, 0}, 1 / qr);
      via_a = (kT * kT - MultiPoly(1)) * tt * r;
    }
  }
  if (b >= 1) {
    MultiPoly r = o_Q(br, a, eps, b - 1, q);
    if (even) {
      Rat s = rat_pow(qr, a + b - 2);
      via_b = MultiPoly(s) * (kT + MultiPoly(Rat(q))) * (kT - MultiPoly(1)) * kU *
                  r.scale_var(0, 1 / qr) +
              MultiPoly(rat_pow(qr, a + b - 1)) * (kU - MultiPoly(1)) * r.scale_var(1, 1 / qr);
    } else {
      Rat s = rat_pow(qr, a + b - 1);
      via_b = MultiPoly(s) * (kT * kT - MultiPoly(1)) * kU * r.scale_var(0, 1 / qr) +
              MultiPoly(s) * (kU - MultiPoly(1)) * r.scale_var(1, 1 / qr);
    }
  }
  require(via_a || via_b, ErrorKind::internal_consistency,
          "orthogonal recurrence reached a non-base dead end");
  if (via_a && via_b) check_equal_routes(*via_a, *via_b, "orthogonal counting polynomial");
  return via_a ? *via_a : *via_b;
}

MultiPoly u_Q_impl(int a, int b, long q) {
  if (a == 0 && b == 0) return MultiPoly(1);
  Rat qr(q);
  std::optional<MultiPoly> via_a, via_b;
  if (a >= 1) {
    // q^{-1} (t-1) t u^2 . Q_{a-1,b}(-q^{-1} t, u)
    MultiPoly factor =
        MultiPoly::monomial({2, 2, 0}, 1 / qr) - MultiPoly::monomial({1, 2, 0}, 1 / qr);
    via_a = factor * u_Q(a - 1, b, q).scale_var(0, -1 / qr);
  }
  if (b >= 1) {
    MultiPoly r = u_Q(a, b - 1, q);
    Rat s = rat_pow(qr, 2 * (a + b) - 3);
    MultiPoly uu = kU * kU;
    via_b = MultiPoly(s) * (kT - MultiPoly(1)) * (kT + MultiPoly(Rat(q))) * uu *
                r.scale_var(0, 1 / (qr * qr)) +
            MultiPoly(rat_pow(qr, 2 * (a + b - 1))) * (uu - MultiPoly(1)) * r.scale_var(1, 1 / qr);
  }
  if (via_a && via_b) check_equal_routes(*via_a, *via_b, "unitary counting polynomial");
  return via_a ? *via_a : *via_b;
}

}  // namespace

namespace {

// Memo lookup helper: compute outside the lock, insert under it (racing
// computations produce identical polynomials, so emplace is safe).
template <typename Build>
MultiPoly memoized_Q(const QKey& key, const Build& build) {
  {
    std::lock_guard lock(g_q_mu);
    auto it = g_q_memo.find(key);
    if (it != g_q_memo.end()) return it->second;
  }
  MultiPoly p = build();
  std::lock_guard lock(g_q_mu);
  return g_q_memo.emplace(key, std::move(p)).first->second;
}

}  // namespace

MultiPoly gl_Q(int a, int b, int c, long q) {
  require(a >= 0 && b >= 0 && c >= 0 && q >= 2, ErrorKind::input, "bad counting parameters");
  return memoized_Q({0, -1, a, -1, b, c, q}, [&] {
    MultiPoly p = gl_Q_impl(a, b, c, q);
    check_denominators(p, q, false);
    return p;
  });
}

MultiPoly sp_Q(int a, int b, long q) {
  require(a >= 0 && b >= 0 && q >= 2, ErrorKind::input, "bad counting parameters");
  return memoized_Q({1, -1, a, -1, b, 0, q}, [&] {
    MultiPoly p = sp_Q_impl(a, b, q);
    check_denominators(p, q, false);
    return p;
  });
}

MultiPoly o_Q(Branch br, int a, SquareClass eps, int b, long q) {
  require(a >= 0 && b >= 0 && q >= 2, ErrorKind::input, "bad counting parameters");
  return memoized_Q({2, br == Branch::even ? 0 : 1, a, eps_tag(eps), b, 0, q}, [&] {
    MultiPoly p = o_Q_impl(br, a, eps, b, q);
    check_denominators(p, q, true);
    return p;
  });
}

MultiPoly u_Q(int a, int b, long q) {
  require(a >= 0 && b >= 0 && q >= 2, ErrorKind::input, "bad counting parameters");
  return memoized_Q({3, -1, a, -1, b, 0, q}, [&] {
    MultiPoly p = u_Q_impl(a, b, q);
    for (const auto& [k, c] : p.terms())
      require(k[1] % 2 == 0, ErrorKind::internal_consistency,
              "unitary counting polynomial has an odd radical exponent");
    check_denominators(p, q, false);
    return p;
  });
}

// ---------------------------------------------------------------------------
// Closed-form P polynomials

namespace {

UniPoly roots_product(int a, const Rat& scale, const std::vector<Rat>& roots) {
  UniPoly p(scale);
  for (const Rat& r : roots) p = p * (UniPoly::t() - UniPoly(r));
  std::vector<Rat> shift(static_cast<size_t>(a), Rat(0));
  shift.push_back(Rat(1));  // t^a
  return p * UniPoly(std::move(shift));
}

}  // namespace

UniPoly gl_P(int a, int b, int c, long q) {
  require(a >= 0 && b >= 0 && c >= 0 && q >= 2, ErrorKind::input, "bad counting parameters");
  Rat qr(q);
  std::vector<Rat> roots;
  for (int i = 0; i < a + b + c; ++i) roots.push_back(rat_pow(qr, i));
  return roots_product(a, rat_pow(qr, -static_cast<long>(a + b) * (a + c)), roots);
}

UniPoly sp_P(int a, int b, long q) {
  require(a >= 0 && b >= 0 && q >= 2, ErrorKind::input, "bad counting parameters");
  Rat qr(q);
  long e = 2 * binom2(a + b) + static_cast<long>(a) * a - binom2(b);
  std::vector<Rat> roots;
  for (int i = 0; i < a + b; ++i) roots.push_back(rat_pow(qr, 2 * i));
  return roots_product(a, rat_pow(qr, -e), roots);
}

UniPoly o_P(Branch br, int a, SquareClass eps, int b, long q) {
  require(a >= 0 && b >= 0 && q >= 2, ErrorKind::input, "bad counting parameters");
  require(a > 0 || eps == SquareClass::square, ErrorKind::input,
          "zero-dimensional nondegenerate part carries the square tag");
  Rat qr(q), x = chi(eps);
  std::vector<Rat> roots;
  if (br == Branch::even) {
    if (b >= 1) {
      roots.push_back(1);
      for (int j = 1; j < b; ++j) {
        roots.push_back(rat_pow(qr, j));
        roots.push_back(-rat_pow(qr, j));
      }
      roots.push_back(-rat_pow(qr, b));
    }
    if (a >= 1) roots.push_back(rat_pow(qr, b));
    for (int i = 0; i + 2 <= a; ++i)
      roots.push_back((i % 2 == 0 ? -x : x) * rat_pow(qr, b + 1 + i / 2));
    return roots_product(a, rat_pow(qr, -binom2(a + b + 1)), roots);
  }
  for (int j = 0; j < b; ++j) {
    roots.push_back(rat_pow(qr, j));
    roots.push_back(-rat_pow(qr, j));
  }
  for (int i = 0; i + 1 <= a; ++i)
    roots.push_back((i % 2 == 0 ? -x : x) * rat_pow(qr, b + i / 2));
  return roots_product(a, rat_pow(qr, -binom2(a + b)), roots);
}

UniPoly u_P(int a, int b, long q) {
  require(a >= 0 && b >= 0 && q >= 2, ErrorKind::input, "bad counting parameters");
  Rat qr(q);
  std::vector<Rat> roots;
  for (int i = 0; i < a + 2 * b; ++i) roots.push_back(rat_pow(-qr, i));
  return roots_product(a, rat_pow(qr, -static_cast<long>(a + b) * (a + b)), roots);
}

// ---------------------------------------------------------------------------
// Class-keyed front ends and the counting-law check

MultiPoly class_Q(const StructureClass& a, long q, std::optional<Branch> br) {
  switch (a.family) {
    case Family::GL: return gl_Q(a.l, a.m, a.n, q);
    case Family::Sp: return sp_Q(a.m, a.n, q);
    case Family::O:
      require(br.has_value(), ErrorKind::input, "orthogonal polynomial needs a branch");
      return o_Q(*br, a.m, a.delta, a.n, q);
    case Family::U: return u_Q(a.m, a.n, q);
  }
  fail(ErrorKind::input, "unknown family");
}

UniPoly class_P(const StructureClass& a, long q, std::optional<Branch> br) {
  switch (a.family) {
    case Family::GL: return gl_P(a.l, a.m, a.n, q);
    case Family::Sp: return sp_P(a.m, a.n, q);
    case Family::O:
      require(br.has_value(), ErrorKind::input, "orthogonal polynomial needs a branch");
      return o_P(*br, a.m, a.delta, a.n, q);
    case Family::U: return u_P(a.m, a.n, q);
  }
  fail(ErrorKind::input, "unknown family");
}

std::array<Rat, 3> ambient_substitution(const StructureClass& m, long q) {
  Rat qr(q);
  switch (m.family) {
    case Family::GL: return {rat_pow(qr, m.l), rat_pow(qr, m.m), rat_pow(qr, m.n)};
    case Family::Sp: return {rat_pow(qr, 2 * m.m), rat_pow(qr, m.n), 1};
    case Family::O: return {chi(m.delta) * rat_pow(qr, m.m / 2), rat_pow(qr, m.n), 1};
    case Family::U: return {rat_pow(-qr, m.m), rat_pow(-qr, m.n), 1};
  }
  fail(ErrorKind::input, "unknown family");
}

std::optional<Branch> ambient_branch(const StructureClass& m) {
  if (m.family != Family::O) return {};
  return m.m % 2 == 0 ? Branch::even : Branch::odd;
}

CountIdentityReport verify_count_identity(const StructureClass& a, const StructureClass& m,
                                          long q) {
  require(a.family == m.family, ErrorKind::input, "family mismatch");
  CountIdentityReport rep;
  rep.a = a;
  rep.m = m;
  rep.q = q;
  rep.oracle = count_embeddings(a, m, q);
  auto sub = ambient_substitution(m, q);
  rep.poly_value = class_Q(a, q, ambient_branch(m)).eval(sub[0], sub[1], sub[2]);
  rep.pass = Rat(rep.oracle) == rep.poly_value;
  return rep;
}

// ---------------------------------------------------------------------------
// Interpolation

UniPoly fit_polynomial(const std::vector<std::pair<Rat, Rat>>& samples, int degree_bound) {
  require(degree_bound >= 0, ErrorKind::input, "negative degree bound");
  require(static_cast<int>(samples.size()) >= degree_bound + 3, ErrorKind::input,
          "need at least degree_bound + 3 samples");
  for (size_t i = 0; i < samples.size(); ++i)
    for (size_t j = i + 1; j < samples.size(); ++j)
      require(samples[i].first != samples[j].first, ErrorKind::input,
              "sample abscissae must be distinct");

  // Newton divided differences through the first degree_bound + 1 points.
  size_t k = static_cast<size_t>(degree_bound) + 1;
  std::vector<Rat> dd(k);
  for (size_t i = 0; i < k; ++i) dd[i] = samples[i].second;
  for (size_t j = 1; j < k; ++j)
    for (size_t i = k - 1; i >= j; --i) {
      dd[i] = (dd[i] - dd[i - 1]) / (samples[i].first - samples[i - j].first);
      if (i == j) break;
    }
  UniPoly p, basis(Rat(1));
  for (size_t i = 0; i < k; ++i) {
    p += UniPoly(dd[i]) * basis;
    basis = basis * (UniPoly::t() - UniPoly(samples[i].first));
  }

  for (size_t i = k; i < samples.size(); ++i)
    require(p.eval(samples[i].first) == samples[i].second, ErrorKind::non_polynomial_law,
            "surplus sample off the fitted polynomial");
  return p;
}

}  // namespace fqcat
