#include "fqcat/category.hpp"

#include <algorithm>
#include <functional>
#include <mutex>
#include <set>
#include <sstream>

#include "fqcat/common.hpp"
#include "fqcat/field.hpp"

namespace fqcat {

namespace {

// ---------------------------------------------------------------------------
// Small exact helpers over the coefficient field.
// ---------------------------------------------------------------------------

Vec unit_vec(int d, int i) {
  Vec v(static_cast<size_t>(d), 0);
  v[static_cast<size_t>(i)] = 1;
  return v;
}

// Row vector times matrix (m has |u| rows).
Vec vec_mat(const Fq& F, const Vec& u, const Mat& m) {
  if (m.empty()) return {};
  Vec out(m[0].size(), 0);
  for (size_t a = 0; a < u.size(); ++a) {
    if (u[a] == 0) continue;
    for (size_t c = 0; c < out.size(); ++c)
      out[c] = F.add(out[c], F.mul(u[a], m[a][c]));
  }
  return out;
}

Mat mat_mul(const Fq& F, const Mat& a, const Mat& b) {
  Mat out;
  out.reserve(a.size());
  for (const Vec& r : a) out.push_back(vec_mat(F, r, b));
  return out;
}

Mat mat_inverse(const Fq& F, Mat a) {
  int n = static_cast<int>(a.size());
  if (n == 0) return {};
  for (int i = 0; i < n; ++i) {
    require(static_cast<int>(a[i].size()) == n, ErrorKind::internal_consistency,
            "inverse of a non-square matrix");
    a[i].resize(static_cast<size_t>(2 * n), 0);
    a[i][static_cast<size_t>(n + i)] = 1;
  }
  int row = 0;
  for (int col = 0; col < n; ++col) {
    int piv = -1;
    for (int r = row; r < n; ++r)
      if (a[r][static_cast<size_t>(col)] != 0) {
        piv = r;
        break;
      }
    if (piv < 0) fail(ErrorKind::internal_consistency, "singular matrix in inverse");
    std::swap(a[piv], a[row]);
    int iv = F.inv(a[row][static_cast<size_t>(col)]);
    for (int c = 0; c < 2 * n; ++c)
      a[row][static_cast<size_t>(c)] = F.mul(a[row][static_cast<size_t>(c)], iv);
    for (int r = 0; r < n; ++r) {
      if (r == row) continue;
      int f = a[r][static_cast<size_t>(col)];
      if (f == 0) continue;
      for (int c = 0; c < 2 * n; ++c)
        a[r][static_cast<size_t>(c)] =
            F.sub(a[r][static_cast<size_t>(c)], F.mul(f, a[row][static_cast<size_t>(c)]));
    }
    ++row;
  }
  Mat inv(static_cast<size_t>(n), Vec(static_cast<size_t>(n), 0));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) inv[i][j] = a[i][static_cast<size_t>(n + j)];
  return inv;
}

// Echelon basis of the intersection of two row spans.
Mat span_intersection(const Fq& F, const Mat& a, const Mat& b) {
  if (a.empty() || b.empty()) return {};
  size_t d = a[0].size();
  size_t na = a.size(), nb = b.size();
  Mat m(d, Vec(na + nb, 0));
  for (size_t c = 0; c < d; ++c) {
    for (size_t i = 0; i < na; ++i) m[c][i] = a[i][c];
    for (size_t j = 0; j < nb; ++j) m[c][na + j] = F.neg(b[j][c]);
  }
  Mat ker = lin::kernel_basis(F, m);
  Mat rows;
  for (const Vec& x : ker) {
    Vec alpha(x.begin(), x.begin() + static_cast<long>(na));
    Vec v = vec_mat(F, alpha, a);
    if (std::any_of(v.begin(), v.end(), [](int e) { return e != 0; })) rows.push_back(v);
  }
  return lin::rref(F, rows);
}

// p(c * t) for a rational scale factor (mirrors the measure-side convention).
UniPoly scale_law(const UniPoly& p, const Rat& c) {
  std::vector<Rat> out;
  out.reserve(static_cast<size_t>(p.degree() + 1));
  Rat pw(1);
  for (int i = 0; i <= p.degree(); ++i) {
    out.push_back(p.coeff(i) * pw);
    pw *= c;
  }
  return UniPoly(std::move(out));
}

// A polynomial law folded with the spec's parameter domain. Category
// operations stay inside Q(t) (symbolic) or Q (rational); algebraic
// parameters would need coefficients in a number field.
RatFunc parameter_fold(const MeasureSpec& spec, const UniPoly& law) {
  switch (spec.kind) {
    case ParamKind::symbolic:
      return RatFunc(spec.scale == 1 ? law : scale_law(law, spec.scale));
    case ParamKind::rational:
      return RatFunc(law.eval(spec.rational_value));
    case ParamKind::algebraic:
      fail(ErrorKind::input,
           "category operations need a symbolic or rational parameter");
  }
  fail(ErrorKind::input, "unknown parameter kind");
}

RatFunc part_measure(const MeasureSpec& spec, const StructureClass& a) {
  return parameter_fold(spec, class_P(a, spec.q, spec.branch));
}

StructureClass empty_class(Family fam) {
  switch (fam) {
    case Family::GL: return gl_class(0, 0, 0);
    case Family::Sp: return sp_class(0, 0);
    case Family::O: return o_class(0, SquareClass::square, 0);
    case Family::U: return u_class(0, 0);
  }
  fail(ErrorKind::input, "unknown family");
}

int field_conj(const Fq& F, Family fam, long q0, int a) {
  return fam == Family::U ? F.pow(a, q0) : a;
}

}  // namespace

// ---------------------------------------------------------------------------
// Cyclo
// ---------------------------------------------------------------------------

Cyclo Cyclo::zeta(int p, long k) {
  require(p >= 2, ErrorKind::input, "cyclotomic order must be a prime");
  for (int d = 2; d * d <= p; ++d)
    require(p % d != 0, ErrorKind::input, "cyclotomic order must be a prime");
  Cyclo z;
  z.p_ = p;
  z.coords_.assign(static_cast<size_t>(p - 1), RatFunc());
  long r = ((k % p) + p) % p;
  if (r < p - 1) {
    z.coords_[static_cast<size_t>(r)] = RatFunc(1);
  } else {
    for (auto& c : z.coords_) c = RatFunc(-1);
  }
  return z;
}

bool Cyclo::is_zero() const {
  return std::all_of(coords_.begin(), coords_.end(),
                     [](const RatFunc& c) { return c.is_zero(); });
}

std::optional<RatFunc> Cyclo::rational_part() const {
  for (size_t i = 1; i < coords_.size(); ++i)
    if (!coords_[i].is_zero()) return std::nullopt;
  return coords_[0];
}

void Cyclo::align(Cyclo& a, Cyclo& b) {
  if (a.p_ == b.p_) return;
  if (a.p_ == 0) {
    RatFunc s = a.coords_[0];
    a.p_ = b.p_;
    a.coords_.assign(static_cast<size_t>(b.p_ - 1), RatFunc());
    a.coords_[0] = s;
  } else if (b.p_ == 0) {
    align(b, a);
  } else {
    fail(ErrorKind::input, "mixing two different cyclotomic orders");
  }
}

Cyclo Cyclo::operator+(const Cyclo& o) const {
  Cyclo a = *this, b = o;
  align(a, b);
  for (size_t i = 0; i < a.coords_.size(); ++i) a.coords_[i] += b.coords_[i];
  return a;
}

Cyclo Cyclo::operator-(const Cyclo& o) const {
  Cyclo a = *this, b = o;
  align(a, b);
  for (size_t i = 0; i < a.coords_.size(); ++i) a.coords_[i] -= b.coords_[i];
  return a;
}

Cyclo Cyclo::operator-() const {
  Cyclo a = *this;
  for (auto& c : a.coords_) c = -c;
  return a;
}

Cyclo Cyclo::operator*(const Cyclo& o) const {
  Cyclo a = *this, b = o;
  align(a, b);
  if (a.p_ == 0) {
    a.coords_[0] = a.coords_[0] * b.coords_[0];
    return a;
  }
  size_t p = static_cast<size_t>(a.p_);
  std::vector<RatFunc> tmp(p);  // exponents mod p
  for (size_t i = 0; i < a.coords_.size(); ++i) {
    if (a.coords_[i].is_zero()) continue;
    for (size_t j = 0; j < b.coords_.size(); ++j) {
      if (b.coords_[j].is_zero()) continue;
      tmp[(i + j) % p] += a.coords_[i] * b.coords_[j];
    }
  }
  // zeta^(p-1) = -(1 + zeta + ... + zeta^(p-2))
  Cyclo out;
  out.p_ = a.p_;
  out.coords_.assign(p - 1, RatFunc());
  for (size_t j = 0; j + 1 < p; ++j) out.coords_[j] = tmp[j] - tmp[p - 1];
  return out;
}

bool Cyclo::operator==(const Cyclo& o) const {
  Cyclo a = *this, b = o;
  align(a, b);
  return a.coords_ == b.coords_;
}

Cyclo Cyclo::conj() const {
  if (p_ == 0) return *this;
  size_t p = static_cast<size_t>(p_);
  std::vector<RatFunc> tmp(p);
  tmp[0] = coords_[0];
  for (size_t i = 1; i < coords_.size(); ++i) tmp[p - i] = coords_[i];
  Cyclo out;
  out.p_ = p_;
  out.coords_.assign(p - 1, RatFunc());
  for (size_t j = 0; j + 1 < p; ++j) out.coords_[j] = tmp[j] - tmp[p - 1];
  return out;
}

std::string Cyclo::str() const {
  if (p_ == 0) return coords_[0].str();
  std::string s;
  for (size_t i = 0; i < coords_.size(); ++i) {
    if (coords_[i].is_zero()) continue;
    if (!s.empty()) s += " + ";
    s += "(" + coords_[i].str() + ")";
    if (i == 1) s += "*z";
    if (i > 1) s += "*z^" + std::to_string(i);
  }
  if (s.empty()) s = "0";
  return s + "  [z = zeta_" + std::to_string(p_) + "]";
}

void Cyclo::normalize() {}

// ---------------------------------------------------------------------------
// Objects
// ---------------------------------------------------------------------------

std::string CatObject::str() const {
  std::string s = "C[";
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i) s += " + ";
    s += parts[i].str();
  }
  return s + "]";
}

CatObject single_object(const StructureClass& a) { return CatObject{a.family, {a}}; }

CatObject point_object(Family fam) { return CatObject{fam, {empty_class(fam)}}; }

CatObject full_space_object(Family fam, long q, int grade) {
  CatObject out{fam, {empty_class(fam)}};
  switch (fam) {
    case Family::GL:
      out.parts.push_back(grade == 0 ? gl_class(0, 1, 0) : gl_class(0, 0, 1));
      return out;
    case Family::Sp:
      out.parts.push_back(sp_class(0, 1));
      return out;
    case Family::O: {
      // isotropic vectors, then one piece per norm value (norms with equal
      // square class give isomorphic marked-vector spaces)
      out.parts.push_back(o_class(0, SquareClass::square, 1));
      long half = (q - 1) / 2;
      for (long i = 0; i < half; ++i) out.parts.push_back(o_class(1, SquareClass::square, 0));
      for (long i = 0; i < half; ++i)
        out.parts.push_back(o_class(1, SquareClass::nonsquare, 0));
      return out;
    }
    case Family::U: {
      out.parts.push_back(u_class(0, 1));
      // one piece per nonzero norm value in the fixed subfield
      auto [p, k] = factor_prime_power(q);
      (void)p;
      (void)k;
      for (long i = 0; i < q - 1; ++i) out.parts.push_back(u_class(1, 0));
      return out;
    }
  }
  fail(ErrorKind::input, "unknown family");
}

// ---------------------------------------------------------------------------
// Hom bases
// ---------------------------------------------------------------------------

namespace {

struct HomEntry {
  std::vector<AmalgamOrbit> orbits;
  std::vector<std::string> labels;
  std::map<std::string, int> index;
};

std::map<std::tuple<std::string, std::string, long>, HomEntry> g_hom;
std::mutex g_hom_mu;

const HomEntry& hom_entry(const StructureClass& cod, const StructureClass& dom, long q) {
  require(cod.family == dom.family, ErrorKind::input,
          "hom basis across different families");
  auto key = std::tuple(cod.str(), dom.str(), q);
  {
    std::lock_guard<std::mutex> lock(g_hom_mu);
    auto it = g_hom.find(key);
    if (it != g_hom.end()) return it->second;
  }
  HomEntry e;
  e.orbits = amalgam_orbits(cod, dom, q);
  for (size_t i = 0; i < e.orbits.size(); ++i) {
    e.labels.push_back(e.orbits[i].label());
    e.index.emplace(e.labels.back(), static_cast<int>(i));
  }
  std::lock_guard<std::mutex> lock(g_hom_mu);
  return g_hom.emplace(std::move(key), std::move(e)).first->second;
}

std::map<std::pair<std::string, long>, std::string> g_diag;
std::mutex g_diag_mu;

}  // namespace

const std::vector<AmalgamOrbit>& hom_basis(const StructureClass& cod,
                                           const StructureClass& dom, long q) {
  return hom_entry(cod, dom, q).orbits;
}

const std::vector<std::string>& hom_labels(const StructureClass& cod,
                                           const StructureClass& dom, long q) {
  return hom_entry(cod, dom, q).labels;
}

int hom_label_index(const StructureClass& cod, const StructureClass& dom, long q,
                    const std::string& label) {
  const HomEntry& e = hom_entry(cod, dom, q);
  auto it = e.index.find(label);
  require(it != e.index.end(), ErrorKind::input,
          "unknown orbit label " + label + " in Hom(" + dom.str() + ", " + cod.str() + ")");
  return it->second;
}

std::string diagonal_label(const StructureClass& a, long q) {
  auto key = std::pair(a.str(), q);
  {
    std::lock_guard<std::mutex> lock(g_diag_mu);
    auto it = g_diag.find(key);
    if (it != g_diag.end()) return it->second;
  }
  FormedSpace m = canonical_model(a, q);
  Mat id;
  for (int i = 0; i < m.dim; ++i) id.push_back(unit_vec(m.dim, i));
  std::string label = amalgam_pair_label(a, id, a, id, m);
  // sanity: the label must be one of the hom-basis labels
  hom_label_index(a, a, q, label);
  std::lock_guard<std::mutex> lock(g_diag_mu);
  return g_diag.emplace(key, std::move(label)).first->second;
}

// ---------------------------------------------------------------------------
// Morphisms
// ---------------------------------------------------------------------------

template <class K>
void MorphismT<K>::add_term(const MorKey& k, const K& c) {
  auto it = terms.find(k);
  if (it == terms.end())
    terms.emplace(k, c);
  else
    it->second += c;
}

template <class K>
K MorphismT<K>::coeff(const MorKey& k) const {
  auto it = terms.find(k);
  return it == terms.end() ? K() : it->second;
}

template <class K>
bool same_terms(const MorphismT<K>& a, const MorphismT<K>& b) {
  if (!(a.cod == b.cod) || !(a.dom == b.dom)) return false;
  std::set<MorKey> keys;
  for (const auto& [k, v] : a.terms) keys.insert(k);
  for (const auto& [k, v] : b.terms) keys.insert(k);
  for (const MorKey& k : keys)
    if (!(a.coeff(k) == b.coeff(k))) return false;
  return true;
}

Morphism zero_morphism(const CatObject& cod, const CatObject& dom) {
  return Morphism{cod, dom, {}};
}

Morphism identity_morphism(const CatObject& x, long q) {
  Morphism out{x, x, {}};
  for (size_t i = 0; i < x.parts.size(); ++i)
    out.terms.emplace(
        MorKey{static_cast<int>(i), static_cast<int>(i), diagonal_label(x.parts[i], q)},
        RatFunc(1));
  return out;
}

Morphism ones_morphism(const CatObject& cod, const CatObject& dom, long q) {
  Morphism out{cod, dom, {}};
  for (size_t j = 0; j < cod.parts.size(); ++j)
    for (size_t i = 0; i < dom.parts.size(); ++i)
      for (const std::string& l : hom_labels(cod.parts[j], dom.parts[i], q))
        out.terms.emplace(MorKey{static_cast<int>(j), static_cast<int>(i), l}, RatFunc(1));
  return out;
}

Morphism basis_morphism(const CatObject& cod, const CatObject& dom, int cod_part,
                        int dom_part, const std::string& orbit) {
  require(cod_part >= 0 && cod_part < static_cast<int>(cod.parts.size()) && dom_part >= 0 &&
              dom_part < static_cast<int>(dom.parts.size()),
          ErrorKind::input, "part index out of range");
  Morphism out{cod, dom, {}};
  out.terms.emplace(MorKey{cod_part, dom_part, orbit}, RatFunc(1));
  return out;
}

// ---------------------------------------------------------------------------
// The structure-constant engine.
//
// Fix single classes Z, Y, X, orbits o1 of (Z, Y) and o2 of (Y, X), and a
// target orbit of (Z, X) with quotient space Q and part maps zq, xq. At a
// representative pair (z, x) the y-configurations contributing to the target
// split by their overlap with the span U of z and x. The two identification
// kernels pin y on a subspace of its domain (tau below); the overlap is a
// subspace C of the remaining free coordinates. For each C the pinned data
// plus the prescribed pairings give a linear system for the collapsed images
// inside U; the transverse remainder is a free extension counted by a fiber
// law. The constant is  sum over C of n_C * law_C,  where n_C counts the
// admissible collapsed images (exactness of both kernels and of C itself)
// and law_C is the extension-count polynomial of the prefix inside the
// enlarged formed space E' = U + residual slots.
// ---------------------------------------------------------------------------

namespace {

struct ConstantEngine {
  Family fam;
  std::optional<Branch> br;
  long q;
  const StructureClass &Z, &Y, &X;
  const AmalgamOrbit &o1, &o2, &target;
  const std::vector<std::vector<int>> &pos1, &pos2;  // coordinate layouts of the joints
  const FormedSpace& Ym;                             // canonical model of Y

  const Fq* Fp{nullptr};
  FormedSpace Q;
  Mat zq, xq;
  int dZ{0}, dY{0}, dX{0}, dQ{0};

  int conj(int a) const { return field_conj(*Fp, fam, Q.q0, a); }
  int gradeY(int j) const { return fam == Family::GL && j >= Ym.dim0 ? 1 : 0; }

  Vec yslot1(const Vec& w) const {
    Vec v(static_cast<size_t>(o1.joint.dim), 0);
    for (int j = 0; j < dY; ++j) v[static_cast<size_t>(pos1[1][static_cast<size_t>(j)])] = w[static_cast<size_t>(j)];
    return v;
  }
  Vec yslot2(const Vec& w) const {
    Vec v(static_cast<size_t>(o2.joint.dim), 0);
    for (int j = 0; j < dY; ++j) v[static_cast<size_t>(pos2[0][static_cast<size_t>(j)])] = w[static_cast<size_t>(j)];
    return v;
  }
  Vec zunit(int a) const { return unit_vec(o1.joint.dim, pos1[0][static_cast<size_t>(a)]); }
  Vec xunit(int b) const { return unit_vec(o2.joint.dim, pos2[1][static_cast<size_t>(b)]); }

  // Pairing of a fixed generator (z part a / x part b / pinned row r) with the
  // y-image of a domain vector, in both argument orders.
  int presc_left_z(int a, const Vec& w) const { return o1.joint.form(zunit(a), yslot1(w)); }
  int presc_right_z(int a, const Vec& w) const { return o1.joint.form(yslot1(w), zunit(a)); }
  int presc_left_x(int b, const Vec& w) const { return o2.joint.form(xunit(b), yslot2(w)); }
  int presc_right_x(int b, const Vec& w) const { return o2.joint.form(yslot2(w), xunit(b)); }

  UniPoly run();
};

struct FixedGen {
  Vec qvec;   // the generator inside Q
  int kind;   // 0: z part, 1: x part, 2: pinned y-image
  int idx;    // part coordinate (kinds 0, 1) or pinned row (kind 2)
};

// fiber-law memo, keyed by the transported embedding
std::map<std::tuple<int, int, long, std::string, std::string, std::string>, UniPoly>
    g_fiber_law;
std::mutex g_fiber_mu;

std::string serialize_mat(const Mat& m) {
  std::string s;
  for (const Vec& r : m) {
    for (int v : r) s += std::to_string(v) + ",";
    s += ";";
  }
  return s;
}

UniPoly fiber_law_for(Family fam, std::optional<Branch> br, long q,
                      const StructureClass& a, const StructureClass& b, const Mat& emb) {
  auto key = std::tuple(static_cast<int>(fam), br ? static_cast<int>(*br) : -1, q, a.str(),
                        b.str(), serialize_mat(emb));
  {
    std::lock_guard<std::mutex> lock(g_fiber_mu);
    auto it = g_fiber_law.find(key);
    if (it != g_fiber_law.end()) return it->second;
  }
  FiberMeasure fm = fiber_measure(MeasureSpec::symbolic(fam, q, br), a, b, emb);
  std::lock_guard<std::mutex> lock(g_fiber_mu);
  return g_fiber_law.emplace(std::move(key), fm.law).first->second;
}

UniPoly ConstantEngine::run() {
  const Fq& F = *Fp;
  // A trivial middle object: the unique y satisfies every orbit condition.
  if (dY == 0) return UniPoly(1);

  // ---- pinned rows (w | tau): y(w) is forced to the quotient vector tau ----
  Mat rawW, rawT;
  for (const Vec& r : o1.kernel) {
    Vec u(static_cast<size_t>(dZ)), w(static_cast<size_t>(dY));
    for (int a = 0; a < dZ; ++a) u[static_cast<size_t>(a)] = r[static_cast<size_t>(pos1[0][static_cast<size_t>(a)])];
    for (int j = 0; j < dY; ++j) w[static_cast<size_t>(j)] = r[static_cast<size_t>(pos1[1][static_cast<size_t>(j)])];
    Vec t = vec_mat(F, u, zq);
    for (int& e : t) e = F.neg(e);
    rawW.push_back(std::move(w));
    rawT.push_back(std::move(t));
  }
  for (const Vec& r : o2.kernel) {
    Vec w(static_cast<size_t>(dY)), v(static_cast<size_t>(dX));
    for (int j = 0; j < dY; ++j) w[static_cast<size_t>(j)] = r[static_cast<size_t>(pos2[0][static_cast<size_t>(j)])];
    for (int b = 0; b < dX; ++b) v[static_cast<size_t>(b)] = r[static_cast<size_t>(pos2[1][static_cast<size_t>(b)])];
    Vec t = vec_mat(F, v, xq);
    for (int& e : t) e = F.neg(e);
    rawW.push_back(std::move(w));
    rawT.push_back(std::move(t));
  }

  // Echelonize per grade with the domain columns first; a pivot falling into
  // the quotient columns would force y(0) != 0, an empty stratum.
  const bool graded = fam == Family::GL;
  std::vector<int> yg0, yg1, qg0, qg1;
  for (int j = 0; j < dY; ++j) (gradeY(j) == 0 ? yg0 : yg1).push_back(j);
  for (int c = 0; c < dQ; ++c)
    ((!graded || c < Q.dim0) ? qg0 : qg1).push_back(c);
  Mat pinW, pinT;  // expanded pinned rows
  std::vector<int> pinGrade;
  std::vector<bool> freeMask(static_cast<size_t>(dY), true);
  for (int g = 0; g < (graded ? 2 : 1); ++g) {
    const std::vector<int>& yc = g == 0 ? yg0 : yg1;
    const std::vector<int>& qc = g == 0 ? qg0 : qg1;
    Mat block;
    for (size_t r = 0; r < rawW.size(); ++r) {
      // grade purity of the raw rows is an invariant of graded kernels
      bool inG = false, outG = false;
      for (int j : yc) inG = inG || rawW[r][static_cast<size_t>(j)] != 0;
      for (int c : qc) inG = inG || rawT[r][static_cast<size_t>(c)] != 0;
      for (int j = 0; j < dY; ++j)
        if (std::find(yc.begin(), yc.end(), j) == yc.end() && rawW[r][static_cast<size_t>(j)] != 0)
          outG = true;
      for (int c = 0; c < dQ; ++c)
        if (std::find(qc.begin(), qc.end(), c) == qc.end() && rawT[r][static_cast<size_t>(c)] != 0)
          outG = true;
      if (!inG) continue;
      require(!outG, ErrorKind::internal_consistency, "kernel row mixes grades");
      Vec row;
      row.reserve(yc.size() + qc.size());
      for (int j : yc) row.push_back(rawW[r][static_cast<size_t>(j)]);
      for (int c : qc) row.push_back(rawT[r][static_cast<size_t>(c)]);
      block.push_back(std::move(row));
    }
    Mat ech = lin::rref(F, block);
    for (const Vec& row : ech) {
      int piv = 0;
      while (piv < static_cast<int>(row.size()) && row[static_cast<size_t>(piv)] == 0) ++piv;
      if (piv >= static_cast<int>(yc.size())) return UniPoly();  // inconsistent pin
      Vec w(static_cast<size_t>(dY), 0), t(static_cast<size_t>(dQ), 0);
      for (size_t s = 0; s < yc.size(); ++s) w[static_cast<size_t>(yc[s])] = row[s];
      for (size_t s = 0; s < qc.size(); ++s) t[static_cast<size_t>(qc[s])] = row[yc.size() + s];
      freeMask[static_cast<size_t>(yc[static_cast<size_t>(piv)])] = false;
      pinW.push_back(std::move(w));
      pinT.push_back(std::move(t));
      pinGrade.push_back(g);
    }
  }
  int p = static_cast<int>(pinW.size());
  std::vector<int> freeIdx;
  for (int j = 0; j < dY; ++j)
    if (freeMask[static_cast<size_t>(j)]) freeIdx.push_back(j);
  int r = static_cast<int>(freeIdx.size());
  int r0 = 0;
  for (int k : freeIdx)
    if (gradeY(k) == 0) ++r0;

  // ---- model-independent consistency of the pinned data ----
  // (injectivity) y restricted to the pinned span must be injective
  if (lin::rank(F, pinT) != p) return UniPoly();
  // (isometry) pinned images must reproduce the domain pairings
  for (int a = 0; a < p; ++a)
    for (int b = 0; b < p; ++b)
      if (Q.form(pinT[static_cast<size_t>(a)], pinT[static_cast<size_t>(b)]) !=
          Ym.form(pinW[static_cast<size_t>(a)], pinW[static_cast<size_t>(b)]))
        return UniPoly();
  // (cross consistency) pinned images must pair with z and x as prescribed
  for (int t = 0; t < p; ++t) {
    for (int a = 0; a < dZ; ++a) {
      if (Q.form(zq[static_cast<size_t>(a)], pinT[static_cast<size_t>(t)]) !=
          presc_left_z(a, pinW[static_cast<size_t>(t)]))
        return UniPoly();
      if (Q.form(pinT[static_cast<size_t>(t)], zq[static_cast<size_t>(a)]) !=
          presc_right_z(a, pinW[static_cast<size_t>(t)]))
        return UniPoly();
    }
    for (int b = 0; b < dX; ++b) {
      if (Q.form(xq[static_cast<size_t>(b)], pinT[static_cast<size_t>(t)]) !=
          presc_left_x(b, pinW[static_cast<size_t>(t)]))
        return UniPoly();
      if (Q.form(pinT[static_cast<size_t>(t)], xq[static_cast<size_t>(b)]) !=
          presc_right_x(b, pinW[static_cast<size_t>(t)]))
        return UniPoly();
    }
  }
  // (kernel exactness on the pinned span) the pair kernels may not grow
  {
    Mat tz = pinT;
    for (const Vec& row : zq) tz.push_back(row);
    if (p + dZ - lin::rank(F, tz) != static_cast<int>(o1.kernel.size())) return UniPoly();
    Mat tx = pinT;
    for (const Vec& row : xq) tx.push_back(row);
    if (p + dX - lin::rank(F, tx) != static_cast<int>(o2.kernel.size())) return UniPoly();
  }

  // ---- fixed generators, pivot basis of U, spans for the exactness tests ----
  std::vector<FixedGen> gens;
  for (int a = 0; a < dZ; ++a) gens.push_back({zq[static_cast<size_t>(a)], 0, a});
  for (int b = 0; b < dX; ++b) gens.push_back({xq[static_cast<size_t>(b)], 1, b});
  for (int t = 0; t < p; ++t) gens.push_back({pinT[static_cast<size_t>(t)], 2, t});

  std::vector<int> Ssel;  // indices into gens[0 .. dZ+dX) forming a basis of Q
  {
    Mat acc;
    int rk = 0;
    for (int i = 0; i < dZ + dX; ++i) {
      acc.push_back(gens[static_cast<size_t>(i)].qvec);
      int nrk = lin::rank(F, acc);
      if (nrk > rk) {
        rk = nrk;
        Ssel.push_back(i);
      } else {
        acc.pop_back();
      }
    }
    require(rk == dQ, ErrorKind::internal_consistency,
            "part maps fail to span the quotient");
  }
  Mat SMat;
  for (int i : Ssel) SMat.push_back(gens[static_cast<size_t>(i)].qvec);
  Mat SInv = mat_inverse(F, SMat);

  Mat Bz, Bx;
  {
    Mat m = zq;
    for (const Vec& row : pinT) m.push_back(row);
    Bz = lin::rref(F, m);
    m = xq;
    for (const Vec& row : pinT) m.push_back(row);
    Bx = lin::rref(F, m);
  }

  auto scatter = [&](const Vec& gamma) {
    Vec w(static_cast<size_t>(dY), 0);
    for (int k = 0; k < r; ++k) w[static_cast<size_t>(freeIdx[static_cast<size_t>(k)])] = gamma[static_cast<size_t>(k)];
    return w;
  };

  // ---- base linear system: pairings of the collapsed images against U ----
  Mat baseRows;
  std::vector<std::pair<int, bool>> baseTag;  // (gen index, mirrored?)
  for (size_t gi = 0; gi < gens.size(); ++gi) {
    Vec row(static_cast<size_t>(dQ), 0);
    for (int c = 0; c < dQ; ++c)
      row[static_cast<size_t>(c)] = Q.form(gens[gi].qvec, unit_vec(dQ, c));
    baseRows.push_back(std::move(row));
    baseTag.emplace_back(static_cast<int>(gi), false);
    if (graded) {
      Vec rrow(static_cast<size_t>(dQ), 0);
      for (int c = 0; c < dQ; ++c)
        rrow[static_cast<size_t>(c)] = Q.form(unit_vec(dQ, c), gens[gi].qvec);
      baseRows.push_back(std::move(rrow));
      baseTag.emplace_back(static_cast<int>(gi), true);
    }
  }
  auto base_rhs = [&](size_t row, const Vec& w) {
    const FixedGen& g = gens[static_cast<size_t>(baseTag[row].first)];
    bool mir = baseTag[row].second;
    switch (g.kind) {
      case 0: return mir ? presc_right_z(g.idx, w) : presc_left_z(g.idx, w);
      case 1: return mir ? presc_right_x(g.idx, w) : presc_left_x(g.idx, w);
      default:
        return mir ? Ym.form(w, pinW[static_cast<size_t>(g.idx)])
                   : Ym.form(pinW[static_cast<size_t>(g.idx)], w);
    }
  };

  // ---- per-free-slot data: prescribed pairings and derived-row checks ----
  // G[c][k]  = form(S_c image, y(f_k)) and Gm[k][c] the mirrored order
  Mat Gsf(static_cast<size_t>(dQ), Vec(static_cast<size_t>(r), 0));
  Mat Gfs(static_cast<size_t>(r), Vec(static_cast<size_t>(dQ), 0));
  auto gen_pair_left = [&](const FixedGen& g, int freepos) {
    Vec w = scatter(unit_vec(r, freepos));
    return g.kind == 0 ? presc_left_z(g.idx, w)
           : g.kind == 1 ? presc_left_x(g.idx, w)
                         : Ym.form(pinW[static_cast<size_t>(g.idx)], w);
  };
  auto gen_pair_right = [&](const FixedGen& g, int freepos) {
    Vec w = scatter(unit_vec(r, freepos));
    return g.kind == 0 ? presc_right_z(g.idx, w)
           : g.kind == 1 ? presc_right_x(g.idx, w)
                         : Ym.form(w, pinW[static_cast<size_t>(g.idx)]);
  };
  for (int c = 0; c < dQ; ++c)
    for (int k = 0; k < r; ++k) {
      Gsf[static_cast<size_t>(c)][static_cast<size_t>(k)] =
          gen_pair_left(gens[static_cast<size_t>(Ssel[static_cast<size_t>(c)])], k);
      Gfs[static_cast<size_t>(k)][static_cast<size_t>(c)] =
          gen_pair_right(gens[static_cast<size_t>(Ssel[static_cast<size_t>(c)])], k);
    }
  // Residual-slot admissibility: every fixed generator's pairing with a free
  // slot must agree with its expansion over the basis S (since the generator
  // is a combination of S inside the ambient model, the pairing values are
  // forced; a mismatch empties every stratum keeping that slot residual).
  std::vector<bool> badSlot(static_cast<size_t>(r), false);
  for (size_t gi = 0; gi < gens.size(); ++gi) {
    Vec lam = vec_mat(F, gens[gi].qvec, SInv);
    for (int k = 0; k < r; ++k) {
      int derivedL = 0, derivedR = 0;
      for (int c = 0; c < dQ; ++c) {
        derivedL = F.add(derivedL, F.mul(conj(lam[static_cast<size_t>(c)]),
                                         Gsf[static_cast<size_t>(c)][static_cast<size_t>(k)]));
        derivedR = F.add(derivedR, F.mul(lam[static_cast<size_t>(c)],
                                         Gfs[static_cast<size_t>(k)][static_cast<size_t>(c)]));
      }
      if (derivedL != gen_pair_left(gens[gi], k) || derivedR != gen_pair_right(gens[gi], k))
        badSlot[static_cast<size_t>(k)] = true;
    }
  }

  // (iia) rows: pairings of a collapsed image with a residual slot, made
  // linear in the image by conjugating where the form conjugates the left
  // argument.
  Mat iiaLeft(static_cast<size_t>(r), Vec(static_cast<size_t>(dQ), 0));
  Mat iiaRight(static_cast<size_t>(r), Vec(static_cast<size_t>(dQ), 0));
  for (int k = 0; k < r; ++k)
    for (int d = 0; d < dQ; ++d) {
      int accL = 0, accR = 0;
      for (int c = 0; c < dQ; ++c) {
        accL = F.add(accL, F.mul(SInv[static_cast<size_t>(d)][static_cast<size_t>(c)],
                                 conj(Gsf[static_cast<size_t>(c)][static_cast<size_t>(k)])));
        accR = F.add(accR, F.mul(SInv[static_cast<size_t>(d)][static_cast<size_t>(c)],
                                 Gfs[static_cast<size_t>(k)][static_cast<size_t>(c)]));
      }
      iiaLeft[static_cast<size_t>(k)][static_cast<size_t>(d)] = accL;
      iiaRight[static_cast<size_t>(k)][static_cast<size_t>(d)] = accR;
    }

  // ---- transport data for the fiber laws ----
  StructureClass clsP = target.cls;
  FormedSpace canP = canonical_model(clsP, q);
  Mat canPtoS;  // images of canonical P basis expressed in S coefficients
  {
    auto isoQ = find_first_embedding(Q, canP);
    require(isoQ.has_value(), ErrorKind::internal_consistency,
            "quotient space does not match its class");
    canPtoS = mat_mul(F, mat_inverse(F, *isoQ), SInv);
  }

  // ---- stratum processing ----
  UniPoly total;
  std::vector<int> gradeFree(static_cast<size_t>(r), 0);
  for (int k = 0; k < r; ++k) gradeFree[static_cast<size_t>(k)] = k < r0 ? 0 : 1;

  auto process = [&](const Mat& Crows) {
    int s = static_cast<int>(Crows.size());
    std::vector<bool> ispiv(static_cast<size_t>(r), false);
    std::vector<int> rowGrade(static_cast<size_t>(s), 0);
    for (int kk = 0; kk < s; ++kk) {
      int piv = 0;
      while (Crows[static_cast<size_t>(kk)][static_cast<size_t>(piv)] == 0) ++piv;
      ispiv[static_cast<size_t>(piv)] = true;
      rowGrade[static_cast<size_t>(kk)] = gradeFree[static_cast<size_t>(piv)];
    }
    std::vector<int> resid;
    for (int k = 0; k < r; ++k)
      if (!ispiv[static_cast<size_t>(k)]) resid.push_back(k);
    for (int k : resid)
      if (badSlot[static_cast<size_t>(k)]) return;

    long nC = 1;
    if (s > 0) {
      // extended system: base rows plus the residual pairing rows
      Mat A = baseRows;
      for (int k : resid) {
        A.push_back(iiaLeft[static_cast<size_t>(k)]);
        if (graded) A.push_back(iiaRight[static_cast<size_t>(k)]);
      }
      Mat part(static_cast<size_t>(s));
      std::vector<Vec> gammaW(static_cast<size_t>(s));
      for (int kk = 0; kk < s; ++kk) {
        const Vec& gamma = Crows[static_cast<size_t>(kk)];
        Vec w = scatter(gamma);
        gammaW[static_cast<size_t>(kk)] = w;
        Vec rhs;
        rhs.reserve(A.size());
        for (size_t rI = 0; rI < baseRows.size(); ++rI) rhs.push_back(base_rhs(rI, w));
        for (int k : resid) {
          Vec fk = scatter(unit_vec(r, k));
          rhs.push_back(conj(Ym.form(w, fk)));
          if (graded) rhs.push_back(Ym.form(fk, w));
        }
        auto sol = lin::solve(F, A, rhs);
        if (!sol) return;
        if (graded) {
          // project to the row's grade; the discarded component solves the
          // homogeneous system (grade-supported rows, vanishing mismatched
          // prescriptions), so the projection still solves the full system
          Vec& u = *sol;
          for (int c = 0; c < dQ; ++c) {
            int cg = c < Q.dim0 ? 0 : 1;
            if (cg != rowGrade[static_cast<size_t>(kk)]) u[static_cast<size_t>(c)] = 0;
          }
        }
        part[static_cast<size_t>(kk)] = *sol;
      }
      // pairings among the collapsed images are offset-independent
      for (int a = 0; a < s; ++a)
        for (int b = 0; b < s; ++b)
          if (Q.form(part[static_cast<size_t>(a)], part[static_cast<size_t>(b)]) !=
              Ym.form(gammaW[static_cast<size_t>(a)], gammaW[static_cast<size_t>(b)]))
            return;
      Mat Rk = lin::kernel_basis(F, A);
      Mat Rk0, Rk1;
      if (graded) {
        for (const Vec& row : Rk) {
          bool g0 = false, g1 = false;
          for (int c = 0; c < dQ; ++c) {
            if (row[static_cast<size_t>(c)] == 0) continue;
            (c < Q.dim0 ? g0 : g1) = true;
          }
          require(!(g0 && g1), ErrorKind::internal_consistency,
                  "offset kernel mixes grades");
          (g1 ? Rk1 : Rk0).push_back(row);
        }
      } else {
        Rk0 = Rk;
      }
      auto kernel_of = [&](int kk) -> const Mat& {
        return (graded && rowGrade[static_cast<size_t>(kk)] == 1) ? Rk1 : Rk0;
      };

      // projective representatives of the nonzero collapse coefficients,
      // grade-pure (a graded relation splits into its grade components)
      long qF = F.q();
      std::vector<Vec> gcoefs;
      {
        std::vector<std::vector<int>> groups;
        if (graded) {
          std::vector<int> g0idx, g1idx;
          for (int kk = 0; kk < s; ++kk)
            (rowGrade[static_cast<size_t>(kk)] == 0 ? g0idx : g1idx).push_back(kk);
          if (!g0idx.empty()) groups.push_back(g0idx);
          if (!g1idx.empty()) groups.push_back(g1idx);
        } else {
          std::vector<int> all(static_cast<size_t>(s));
          for (int kk = 0; kk < s; ++kk) all[static_cast<size_t>(kk)] = kk;
          groups.push_back(all);
        }
        for (const auto& grp : groups) {
          int gs = static_cast<int>(grp.size());
          // tuples over the group with first nonzero coefficient 1
          std::vector<int> digits(static_cast<size_t>(gs), 0);
          for (int lead = 0; lead < gs; ++lead) {
            int tailLen = gs - lead - 1;
            long count = 1;
            for (int i = 0; i < tailLen; ++i) count *= qF;
            for (long it = 0; it < count; ++it) {
              Vec c(static_cast<size_t>(s), 0);
              c[static_cast<size_t>(grp[static_cast<size_t>(lead)])] = 1;
              long tmp = it;
              for (int i = 0; i < tailLen; ++i) {
                c[static_cast<size_t>(grp[static_cast<size_t>(lead + 1 + i)])] =
                    static_cast<int>(tmp % qF);
                tmp /= qF;
              }
              gcoefs.push_back(std::move(c));
            }
          }
        }
      }

      // conjugation-linear combination is plain linear on coordinates
      auto violates = [&](const std::vector<Vec>& u) {
        for (const Vec& gc : gcoefs) {
          Vec v(static_cast<size_t>(dQ), 0);
          for (int kk = 0; kk < s; ++kk) {
            int c = gc[static_cast<size_t>(kk)];
            if (c == 0) continue;
            for (int d = 0; d < dQ; ++d)
              v[static_cast<size_t>(d)] =
                  F.add(v[static_cast<size_t>(d)], F.mul(c, u[static_cast<size_t>(kk)][static_cast<size_t>(d)]));
          }
          if (lin::in_span(F, Bz, v) || lin::in_span(F, Bx, v)) return true;
        }
        return false;
      };

      double logTotal = 0;
      for (int kk = 0; kk < s; ++kk)
        logTotal += static_cast<double>(kernel_of(kk).size());
      double totalAssign = 1;
      for (int kk = 0; kk < s; ++kk)
        for (size_t i = 0; i < kernel_of(kk).size(); ++i) totalAssign *= static_cast<double>(qF);
      if (totalAssign <= 600000.0) {
        // odometer over all offset tuples
        std::vector<int> rho(static_cast<size_t>(s));
        int totDigits = 0;
        for (int kk = 0; kk < s; ++kk) {
          rho[static_cast<size_t>(kk)] = static_cast<int>(kernel_of(kk).size());
          totDigits += rho[static_cast<size_t>(kk)];
        }
        std::vector<int> digit(static_cast<size_t>(totDigits), 0);
        nC = 0;
        bool done = false;
        while (!done) {
          std::vector<Vec> u(static_cast<size_t>(s));
          int dpos = 0;
          for (int kk = 0; kk < s; ++kk) {
            Vec v = part[static_cast<size_t>(kk)];
            const Mat& Kb = kernel_of(kk);
            for (int i = 0; i < rho[static_cast<size_t>(kk)]; ++i, ++dpos) {
              int c = digit[static_cast<size_t>(dpos)];
              if (c == 0) continue;
              for (int d = 0; d < dQ; ++d)
                v[static_cast<size_t>(d)] =
                    F.add(v[static_cast<size_t>(d)], F.mul(c, Kb[static_cast<size_t>(i)][static_cast<size_t>(d)]));
            }
            u[static_cast<size_t>(kk)] = std::move(v);
          }
          if (!violates(u)) ++nC;
          done = true;
          for (int i = 0; i < totDigits; ++i) {
            if (++digit[static_cast<size_t>(i)] < qF) {
              done = false;
              break;
            }
            digit[static_cast<size_t>(i)] = 0;
          }
          if (totDigits == 0) break;
        }
      } else if (s == 1) {
        // closed form by inclusion-exclusion over the two forbidden spans
        const Mat& Kb = kernel_of(0);
        int rho = static_cast<int>(Kb.size());
        auto affine_hits = [&](const Mat& W) -> long {
          Mat rw = Kb;
          for (const Vec& row : W) rw.push_back(row);
          int rkRW = lin::rank(F, rw);
          rw.push_back(part[0]);
          if (lin::rank(F, rw) != rkRW) return 0;  // the affine set misses W
          int dimInt = rho + static_cast<int>(W.size()) - rkRW;
          long out = 1;
          for (int i = 0; i < dimInt; ++i) out *= qF;
          return out;
        };
        long all = 1;
        for (int i = 0; i < rho; ++i) all *= qF;
        Mat Bzx = span_intersection(F, Bz, Bx);
        nC = all - affine_hits(Bz) - affine_hits(Bx) + affine_hits(Bzx);
      } else {
        fail(ErrorKind::internal_consistency,
             "collapse offset enumeration exceeds the supported size");
      }
      if (nC == 0) return;
    }

    // ---- the transverse extension: a fiber law of the prefix in E' ----
    if (resid.empty()) {
      total += UniPoly(nC);
      return;
    }
    // slot order: grade-0 basis slots, grade-0 residual slots, then grade 1
    struct Slot {
      bool isS;
      int idx;  // S position or free position
    };
    std::vector<Slot> slots;
    for (int g = 0; g < (graded ? 2 : 1); ++g) {
      for (int c = 0; c < dQ; ++c) {
        int cg = (!graded || (Ssel[static_cast<size_t>(c)] >= 0 &&
                              grade_of_qvec(SMat[static_cast<size_t>(c)])) == 0)
                     ? 0
                     : 1;
        (void)cg;
      }
      break;
    }
    slots.clear();
    auto qvec_grade = [&](const Vec& v) {
      if (!graded) return 0;
      for (int c = 0; c < dQ; ++c)
        if (v[static_cast<size_t>(c)] != 0) return c < Q.dim0 ? 0 : 1;
      return 0;
    };
    for (int g = 0; g < (graded ? 2 : 1); ++g) {
      for (int c = 0; c < dQ; ++c)
        if (qvec_grade(SMat[static_cast<size_t>(c)]) == g) slots.push_back({true, c});
      for (int k : resid)
        if (gradeFree[static_cast<size_t>(k)] == g) slots.push_back({false, k});
    }
    int dimE = static_cast<int>(slots.size());
    int dim0E = 0;
    for (const Slot& sl : slots) {
      int g = sl.isS ? qvec_grade(SMat[static_cast<size_t>(sl.idx)])
                     : gradeFree[static_cast<size_t>(sl.idx)];
      if (g == 0) ++dim0E;
    }
    FormedSpace E;
    E.family = fam;
    E.F = Fp;
    E.q0 = Q.q0;
    E.dim = dimE;
    E.dim0 = graded ? dim0E : dimE;
    E.gram.assign(static_cast<size_t>(dimE) * static_cast<size_t>(dimE), 0);
    auto pair_value = [&](const Slot& si, const Slot& sj) {
      if (si.isS && sj.isS)
        return Q.form(SMat[static_cast<size_t>(si.idx)], SMat[static_cast<size_t>(sj.idx)]);
      if (si.isS && !sj.isS)
        return gen_pair_left(gens[static_cast<size_t>(Ssel[static_cast<size_t>(si.idx)])],
                             sj.idx);
      if (!si.isS && sj.isS)
        return gen_pair_right(gens[static_cast<size_t>(Ssel[static_cast<size_t>(sj.idx)])],
                              si.idx);
      return Ym.form(scatter(unit_vec(r, si.idx)), scatter(unit_vec(r, sj.idx)));
    };
    for (int i = 0; i < dimE; ++i)
      for (int j = 0; j < dimE; ++j) {
        if (graded && !(i < dim0E && j >= dim0E)) continue;
        E.at(i, j) = pair_value(slots[static_cast<size_t>(i)], slots[static_cast<size_t>(j)]);
      }
    StructureClass clsE = classify(E);
    FormedSpace canE = canonical_model(clsE, q);
    auto isoE = find_first_embedding(E, canE);
    require(isoE.has_value(), ErrorKind::internal_consistency,
            "extension space does not match its class");
    // images of the S basis inside the canonical extension model
    Mat rowsP(static_cast<size_t>(dQ));
    for (int i = 0; i < dimE; ++i)
      if (slots[static_cast<size_t>(i)].isS)
        rowsP[static_cast<size_t>(slots[static_cast<size_t>(i)].idx)] =
            (*isoE)[static_cast<size_t>(i)];
    Mat emb = mat_mul(F, canPtoS, rowsP);
    UniPoly law = fiber_law_for(fam, br, q, clsP, clsE, emb);
    total += law * UniPoly(nC);
  };

  // enumerate collapse subspaces (grade-split for GL)
  auto with_each_subspace_or_empty = [&](int d, const std::function<void(const Mat&)>& cb) {
    cb(Mat{});
    for (int s = 1; s <= d; ++s) for_each_subspace(F, d, s, cb);
  };
  if (!graded) {
    with_each_subspace_or_empty(r, process);
  } else {
    int r1 = r - r0;
    with_each_subspace_or_empty(r0, [&](const Mat& c0) {
      with_each_subspace_or_empty(r1, [&](const Mat& c1) {
        Mat rows;
        for (const Vec& row : c0) {
          Vec full(static_cast<size_t>(r), 0);
          for (int i = 0; i < r0; ++i) full[static_cast<size_t>(i)] = row[static_cast<size_t>(i)];
          rows.push_back(std::move(full));
        }
        for (const Vec& row : c1) {
          Vec full(static_cast<size_t>(r), 0);
          for (int i = 0; i < r1; ++i) full[static_cast<size_t>(r0 + i)] = row[static_cast<size_t>(i)];
          rows.push_back(std::move(full));
        }
        process(rows);
      });
    });
  }

  require(total.degree() <= Y.level(), ErrorKind::internal_consistency,
          "structure constant exceeds the degree bound");
  return total;
}

int grade_of_qvec(const Vec&) { return 0; }  // placeholder; resolved locally above

std::map<std::string, std::vector<UniPoly>> g_const_memo;
std::mutex g_const_mu;

}  // namespace

const std::vector<UniPoly>& composition_constant_laws(
    Family fam, std::optional<Branch> br, long q, const StructureClass& z,
    const StructureClass& y, const StructureClass& x, const std::string& o1,
    const std::string& o2) {
  std::string key = std::to_string(static_cast<int>(fam)) + "|" +
                    (br ? std::to_string(static_cast<int>(*br)) : "-") + "|" +
                    std::to_string(q) + "|" + z.str() + "|" + y.str() + "|" + x.str() +
                    "|" + o1 + "|" + o2;
  {
    std::lock_guard<std::mutex> lock(g_const_mu);
    auto it = g_const_memo.find(key);
    if (it != g_const_memo.end()) return it->second;
  }
  const AmalgamOrbit& orb1 = hom_basis(z, y, q)[static_cast<size_t>(hom_label_index(z, y, q, o1))];
  const AmalgamOrbit& orb2 = hom_basis(y, x, q)[static_cast<size_t>(hom_label_index(y, x, q, o2))];
  const auto& targets = hom_basis(z, x, q);
  auto pos1 = amalgam_positions({z, y}, q);
  auto pos2 = amalgam_positions({y, x}, q);
  FormedSpace Ym = canonical_model(y, q);
  std::vector<UniPoly> laws;
  laws.reserve(targets.size());
  for (const AmalgamOrbit& tgt : targets) {
    ConstantEngine eng{fam,  br,  q,  z,  y,  x, orb1, orb2, tgt, pos1, pos2, Ym,
                       nullptr, FormedSpace{}, {}, {}, 0, 0, 0, 0};
    eng.Q = amalgam_quotient_space(tgt);
    eng.Fp = eng.Q.F;
    eng.zq = tgt.part_map(0);
    eng.xq = tgt.part_map(1);
    eng.dZ = z.dim();
    eng.dY = y.dim();
    eng.dX = x.dim();
    eng.dQ = eng.Q.dim;
    laws.push_back(eng.run());
  }
  std::lock_guard<std::mutex> lock(g_const_mu);
  return g_const_memo.emplace(std::move(key), std::move(laws)).first->second;
}

RatFunc composition_constant(const MeasureSpec& spec, const StructureClass& z,
                             const StructureClass& y, const StructureClass& x,
                             const std::string& o1, const std::string& o2,
                             const std::string& target) {
  const auto& laws = composition_constant_laws(spec.family, spec.branch, spec.q, z, y, x,
                                               o1, o2);
  int ti = hom_label_index(z, x, spec.q, target);
  return parameter_fold(spec, laws[static_cast<size_t>(ti)]);
}

template <class K>
MorphismT<K> compose(const MorphismT<K>& f, const MorphismT<K>& g, const MeasureSpec& spec) {
  require(g.cod == f.dom, ErrorKind::input, "composition objects do not match");
  require(f.cod.family == spec.family, ErrorKind::input,
          "composition family does not match the measure");
  MorphismT<K> out;
  out.cod = f.cod;
  out.dom = g.dom;
  for (const auto& [fk, fc] : f.terms) {
    if (fc.is_zero()) continue;
    for (const auto& [gk, gc] : g.terms) {
      if (gk.cod_part != fk.dom_part || gc.is_zero()) continue;
      const StructureClass& Zc = f.cod.parts[static_cast<size_t>(fk.cod_part)];
      const StructureClass& Yc = f.dom.parts[static_cast<size_t>(fk.dom_part)];
      const StructureClass& Xc = g.dom.parts[static_cast<size_t>(gk.dom_part)];
      const auto& labels = hom_labels(Zc, Xc, spec.q);
      const auto& laws = composition_constant_laws(spec.family, spec.branch, spec.q, Zc,
                                                   Yc, Xc, fk.orbit, gk.orbit);
      K prod = fc * gc;
      for (size_t ti = 0; ti < labels.size(); ++ti) {
        if (laws[ti].is_zero()) continue;
        K term = prod * K(parameter_fold(spec, laws[ti]));
        out.add_term(MorKey{fk.cod_part, gk.dom_part, labels[ti]}, term);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Trace, dimension, transpose, Gram
// ---------------------------------------------------------------------------

template <class K>
K trace(const MorphismT<K>& f, const MeasureSpec& spec) {
  require(f.cod == f.dom, ErrorKind::input, "trace of a non-endomorphism");
  K total{};
  for (size_t i = 0; i < f.cod.parts.size(); ++i) {
    // only the diagonal orbit meets the diagonal, in a full configuration copy
    K c = f.coeff(MorKey{static_cast<int>(i), static_cast<int>(i),
                         diagonal_label(f.cod.parts[i], spec.q)});
    if (!c.is_zero()) total += c * K(part_measure(spec, f.cod.parts[i]));
  }
  return total;
}

template <class K>
K trace_of_composite(const MorphismT<K>& f, const MorphismT<K>& g, const MeasureSpec& spec) {
  require(g.cod == f.dom && f.cod == g.dom, ErrorKind::input,
          "composite trace objects do not match");
  K total{};
  for (const auto& [fk, fc] : f.terms) {
    if (fc.is_zero()) continue;
    for (const auto& [gk, gc] : g.terms) {
      if (gk.cod_part != fk.dom_part || gk.dom_part != fk.cod_part || gc.is_zero()) continue;
      const StructureClass& Zc = f.cod.parts[static_cast<size_t>(fk.cod_part)];
      const StructureClass& Yc = f.dom.parts[static_cast<size_t>(fk.dom_part)];
      const auto& laws = composition_constant_laws(spec.family, spec.branch, spec.q, Zc,
                                                   Yc, Zc, fk.orbit, gk.orbit);
      int di = hom_label_index(Zc, Zc, spec.q, diagonal_label(Zc, spec.q));
      if (laws[static_cast<size_t>(di)].is_zero()) continue;
      K term = fc * gc * K(parameter_fold(spec, laws[static_cast<size_t>(di)]));
      total += term * K(part_measure(spec, Zc));
    }
  }
  return total;
}

RatFunc object_dimension(const CatObject& x, const MeasureSpec& spec) {
  require(x.family == spec.family, ErrorKind::input,
          "object family does not match the measure");
  RatFunc total;
  for (const StructureClass& a : x.parts) total += part_measure(spec, a);
  return total;
}

namespace {
std::map<std::tuple<std::string, std::string, long, std::string>, std::string> g_transp;
std::mutex g_transp_mu;
}  // namespace

std::string transpose_label(const StructureClass& cod, const StructureClass& dom, long q,
                            const std::string& orbit) {
  auto key = std::tuple(cod.str(), dom.str(), q, orbit);
  {
    std::lock_guard<std::mutex> lock(g_transp_mu);
    auto it = g_transp.find(key);
    if (it != g_transp.end()) return it->second;
  }
  const AmalgamOrbit& O =
      hom_basis(cod, dom, q)[static_cast<size_t>(hom_label_index(cod, dom, q, orbit))];
  FormedSpace Qs = amalgam_quotient_space(O);
  std::string out = amalgam_pair_label(dom, O.part_map(1), cod, O.part_map(0), Qs);
  hom_label_index(dom, cod, q, out);  // sanity
  std::lock_guard<std::mutex> lock(g_transp_mu);
  return g_transp.emplace(std::move(key), std::move(out)).first->second;
}

Morphism transpose(const Morphism& f, long q) {
  Morphism out{f.dom, f.cod, {}};
  for (const auto& [k, c] : f.terms) {
    const StructureClass& B = f.cod.parts[static_cast<size_t>(k.cod_part)];
    const StructureClass& A = f.dom.parts[static_cast<size_t>(k.dom_part)];
    out.add_term(MorKey{k.dom_part, k.cod_part, transpose_label(B, A, q, k.orbit)}, c);
  }
  return out;
}

GramReport gram_matrix(const CatObject& x, const CatObject& y, const MeasureSpec& spec) {
  require(x.family == spec.family && y.family == spec.family, ErrorKind::input,
          "gram objects do not match the measure");
  GramReport rep;
  for (size_t j = 0; j < y.parts.size(); ++j)
    for (size_t i = 0; i < x.parts.size(); ++i)
      for (const std::string& l : hom_labels(y.parts[j], x.parts[i], spec.q))
        rep.basis.push_back(MorKey{static_cast<int>(j), static_cast<int>(i), l});
  size_t n = rep.basis.size();
  require(n <= 150, ErrorKind::input, "gram matrix basis too large");
  rep.entries.assign(n, std::vector<RatFunc>(n));
  std::vector<Morphism> fs, fts;
  for (const MorKey& k : rep.basis) {
    Morphism f = basis_morphism(y, x, k.cod_part, k.dom_part, k.orbit);
    fs.push_back(f);
    fts.push_back(transpose(f, spec.q));
  }
  for (size_t a = 0; a < n; ++a)
    for (size_t b = 0; b < n; ++b)
      rep.entries[a][b] = trace_of_composite(fs[a], fts[b], spec);

  // fraction-free determinant over the polynomial entries
  std::vector<std::vector<UniPoly>> m(n, std::vector<UniPoly>(n));
  for (size_t a = 0; a < n; ++a)
    for (size_t b = 0; b < n; ++b) {
      require(rep.entries[a][b].is_polynomial(), ErrorKind::internal_consistency,
              "gram entry is not polynomial");
      m[a][b] = rep.entries[a][b].num();
    }
  if (n == 0) {
    rep.det = RatFunc(1);
    return rep;
  }
  UniPoly prev(1);
  int sign = 1;
  bool zero = false;
  for (size_t k = 0; k + 1 < n && !zero; ++k) {
    if (m[k][k].is_zero()) {
      size_t piv = k + 1;
      while (piv < n && m[piv][k].is_zero()) ++piv;
      if (piv == n) {
        zero = true;
        break;
      }
      std::swap(m[piv], m[k]);
      sign = -sign;
    }
    for (size_t i = k + 1; i < n; ++i)
      for (size_t j = k + 1; j < n; ++j) {
        UniPoly numl = m[i][j] * m[k][k] - m[i][k] * m[k][j];
        auto [quot, rem] = UniPoly::divmod(numl, prev);
        require(rem.is_zero(), ErrorKind::internal_consistency,
                "fraction-free elimination left a remainder");
        m[i][j] = quot;
      }
    prev = m[k][k];
  }
  rep.det = zero ? RatFunc() : RatFunc(sign < 0 ? -m[n - 1][n - 1] : m[n - 1][n - 1]);
  return rep;
}

// ---------------------------------------------------------------------------
// Tensor structure
// ---------------------------------------------------------------------------

TensorObject tensor_object(const CatObject& x, const CatObject& y, long q) {
  require(x.family == y.family, ErrorKind::input, "tensor across families");
  TensorObject out;
  out.object.family = x.family;
  for (size_t i = 0; i < x.parts.size(); ++i)
    for (size_t j = 0; j < y.parts.size(); ++j) {
      const auto& hb = hom_basis(x.parts[i], y.parts[j], q);
      const auto& labels = hom_labels(x.parts[i], y.parts[j], q);
      for (size_t oi = 0; oi < hb.size(); ++oi) {
        out.object.parts.push_back(hb[oi].cls);
        out.pieces.push_back(TensorPiece{static_cast<int>(i), static_cast<int>(j),
                                         static_cast<int>(oi), labels[oi]});
      }
    }
  return out;
}

namespace {

// A concrete realization of a pair-of-pairs configuration: for the orbit O of
// (P, R) where P, R are themselves orbit classes of pairs, produce ambient
// embeddings of all four underlying configurations and read off the two
// cross labels.
struct TensorRealization {
  std::string left;   // label of the pair of left-factor configurations
  std::string right;  // label of the pair of right-factor configurations
};

TensorRealization realize_tensor_pair(const StructureClass& zk, const StructureClass& wl,
                                      const AmalgamOrbit& ozw, const StructureClass& xi,
                                      const StructureClass& yj, const AmalgamOrbit& oxy,
                                      const AmalgamOrbit& O, long q) {
  // place the quotient of O inside an ambient model large enough to hold it
  FormedSpace Qo = amalgam_quotient_space(O);
  std::optional<Mat> embQ;
  FormedSpace model;
  for_each_ambient_model(O.parts[0].family, std::nullopt, q,
                         [&](const StructureClass& mc, const Rat&) {
                           FormedSpace m = canonical_model(mc, q);
                           auto e = find_first_embedding(Qo, m);
                           if (e.has_value()) {
                             embQ = e;
                             model = m;
                             return false;
                           }
                           return true;
                         });
  require(embQ.has_value(), ErrorKind::internal_consistency,
          "tensor orbit does not embed in any ambient model");
  const Fq& F = *model.F;
  Mat pEmb = mat_mul(F, O.part_map(0), *embQ);  // canonical P inside the model
  Mat rEmb = mat_mul(F, O.part_map(1), *embQ);

  auto factor_rows = [&](const AmalgamOrbit& inner, const Mat& pieceEmb, int side) {
    // inner quotient -> canonical class of the piece -> ambient model
    FormedSpace Qi = amalgam_quotient_space(inner);
    FormedSpace canPiece = canonical_model(inner.cls, q);
    auto iso = find_first_embedding(Qi, canPiece);
    require(iso.has_value(), ErrorKind::internal_consistency,
            "piece quotient does not match its class");
    return mat_mul(F, mat_mul(F, inner.part_map(side), *iso), pieceEmb);
  };
  Mat zRows = factor_rows(ozw, pEmb, 0);
  Mat wRows = factor_rows(ozw, pEmb, 1);
  Mat xRows = factor_rows(oxy, rEmb, 0);
  Mat yRows = factor_rows(oxy, rEmb, 1);
  TensorRealization out;
  out.left = amalgam_pair_label(zk, zRows, xi, xRows, model);
  out.right = amalgam_pair_label(wl, wRows, yj, yRows, model);
  return out;
}

}  // namespace

Morphism tensor_morphism(const Morphism& f, const Morphism& g, long q) {
  require(f.cod.family == g.cod.family, ErrorKind::input, "tensor across families");
  TensorObject tdom = tensor_object(f.dom, g.dom, q);
  TensorObject tcod = tensor_object(f.cod, g.cod, q);
  Morphism out{tcod.object, tdom.object, {}};
  for (size_t pa = 0; pa < tcod.pieces.size(); ++pa) {
    const TensorPiece& cp = tcod.pieces[pa];
    const StructureClass& zk = f.cod.parts[static_cast<size_t>(cp.left_part)];
    const StructureClass& wl = g.cod.parts[static_cast<size_t>(cp.right_part)];
    const AmalgamOrbit& ozw =
        hom_basis(zk, wl, q)[static_cast<size_t>(cp.orbit_index)];
    for (size_t pb = 0; pb < tdom.pieces.size(); ++pb) {
      const TensorPiece& dp = tdom.pieces[pb];
      const StructureClass& xi = f.dom.parts[static_cast<size_t>(dp.left_part)];
      const StructureClass& yj = g.dom.parts[static_cast<size_t>(dp.right_part)];
      const AmalgamOrbit& oxy =
          hom_basis(xi, yj, q)[static_cast<size_t>(dp.orbit_index)];
      const auto& targets =
          hom_basis(tcod.object.parts[pa], tdom.object.parts[pb], q);
      const auto& labels = hom_labels(tcod.object.parts[pa], tdom.object.parts[pb], q);
      for (size_t ti = 0; ti < targets.size(); ++ti) {
        TensorRealization real =
            realize_tensor_pair(zk, wl, ozw, xi, yj, oxy, targets[ti], q);
        RatFunc c = f.coeff(MorKey{cp.left_part, dp.left_part, real.left}) *
                    g.coeff(MorKey{cp.right_part, dp.right_part, real.right});
        if (!c.is_zero())
          out.add_term(MorKey{static_cast<int>(pa), static_cast<int>(pb), labels[ti]}, c);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Category-law check suite
// ---------------------------------------------------------------------------

namespace {

void cat_check(CategoryReport& rep, const std::string& law, const std::string& detail,
               bool pass) {
  if (!pass) rep.failures.push_back(CatCheckLine{law, detail, false});
}

}  // namespace

std::string CategoryReport::summary() const {
  std::ostringstream os;
  os << "category laws " << family_str(family)
     << (branch ? std::string("/") + branch_str(*branch) : "") << " q=" << q
     << " bound=" << level_bound << ": objects=" << objects << " identity=" << identity_checked
     << "+" << identity_sampled << "s assoc=" << assoc_checked << "+" << assoc_sampled
     << "s cyclicity=" << cyclicity_checked << "+" << cyclicity_sampled
     << "s tensor_dim=" << tensor_dim_checked << " trace_id=" << trace_id_checked
     << " failures=" << failures.size();
  return os.str();
}

CategoryReport category_laws_check(Family fam, std::optional<Branch> br, long q,
                                   int level_bound) {
  CategoryReport rep;
  rep.family = fam;
  rep.branch = br;
  rep.q = q;
  rep.level_bound = level_bound;
  MeasureSpec spec = MeasureSpec::symbolic(fam, q, br);

  std::vector<StructureClass> classes = classes_up_to_level(fam, level_bound);
  rep.objects = static_cast<long>(classes.size());
  std::vector<CatObject> objs;
  for (const auto& c : classes) objs.push_back(single_object(c));

  // --- identity laws ---
  const size_t kIdentityCap = 200;
  const size_t kIdentitySamples = 48;
  for (const auto& B : classes)
    for (const auto& A : classes) {
      const auto& labels = hom_labels(B, A, q);
      CatObject ob = single_object(B), oa = single_object(A);
      Morphism idB = identity_morphism(ob, q), idA = identity_morphism(oa, q);
      bool exhaustive = labels.size() <= kIdentityCap;
      size_t stride = exhaustive ? 1 : std::max<size_t>(1, labels.size() / kIdentitySamples);
      for (size_t li = 0; li < labels.size(); li += stride) {
        Morphism fb = basis_morphism(ob, oa, 0, 0, labels[li]);
        bool ok = same_terms(compose(idB, fb, spec), fb) &&
                  same_terms(compose(fb, idA, spec), fb);
        cat_check(rep, "identity", B.str() + "<-" + A.str() + " " + labels[li], ok);
        (exhaustive ? rep.identity_checked : rep.identity_sampled) += 1;
      }
    }

  // --- associativity ---
  const long kAssocCap = 1200;
  const int kAssocSamples = 3;
  for (const auto& A : classes)
    for (const auto& B : classes)
      for (const auto& Cc : classes)
        for (const auto& D : classes) {
          if (fam == Family::U && A.dim() + B.dim() + Cc.dim() + D.dim() > 5) continue;
          const auto& lf = hom_labels(B, A, q);
          const auto& lg = hom_labels(Cc, B, q);
          const auto& lh = hom_labels(D, Cc, q);
          long totalTriples = static_cast<long>(lf.size()) * static_cast<long>(lg.size()) *
                              static_cast<long>(lh.size());
          if (totalTriples == 0) continue;
          CatObject oa = single_object(A), ob = single_object(B), oc = single_object(Cc),
                    od = single_object(D);
          auto run_one = [&](size_t fi, size_t gi, size_t hi) {
            Morphism f = basis_morphism(ob, oa, 0, 0, lf[fi]);
            Morphism g = basis_morphism(oc, ob, 0, 0, lg[gi]);
            Morphism h = basis_morphism(od, oc, 0, 0, lh[hi]);
            Morphism lhs = compose(h, compose(g, f, spec), spec);
            Morphism rhs = compose(compose(h, g, spec), f, spec);
            cat_check(rep, "associativity",
                      A.str() + "->" + B.str() + "->" + Cc.str() + "->" + D.str() + " #" +
                          std::to_string(fi) + "," + std::to_string(gi) + "," +
                          std::to_string(hi),
                      same_terms(lhs, rhs));
          };
          if (totalTriples <= kAssocCap) {
            for (size_t fi = 0; fi < lf.size(); ++fi)
              for (size_t gi = 0; gi < lg.size(); ++gi)
                for (size_t hi = 0; hi < lh.size(); ++hi) {
                  run_one(fi, gi, hi);
                  rep.assoc_checked += 1;
                }
          } else {
            for (int sIdx = 0; sIdx < kAssocSamples; ++sIdx) {
              size_t fi = (static_cast<size_t>(sIdx) * 7919 + 13) % lf.size();
              size_t gi = (static_cast<size_t>(sIdx) * 104729 + 5) % lg.size();
              size_t hi = (static_cast<size_t>(sIdx) * 1299709 + 2) % lh.size();
              run_one(fi, gi, hi);
              rep.assoc_sampled += 1;
            }
          }
        }

  // --- trace cyclicity ---
  const long kCycCap = 1500;
  const int kCycSamples = 120;
  for (const auto& A : classes)
    for (const auto& B : classes) {
      const auto& lf = hom_labels(B, A, q);
      const auto& lg = hom_labels(A, B, q);
      long totalPairs = static_cast<long>(lf.size()) * static_cast<long>(lg.size());
      if (totalPairs == 0) continue;
      CatObject oa = single_object(A), ob = single_object(B);
      auto run_one = [&](size_t fi, size_t gi) {
        Morphism f = basis_morphism(ob, oa, 0, 0, lf[fi]);
        Morphism g = basis_morphism(oa, ob, 0, 0, lg[gi]);
        RatFunc t1 = trace_of_composite(f, g, spec);
        RatFunc t2 = trace_of_composite(g, f, spec);
        cat_check(rep, "cyclicity",
                  A.str() + "/" + B.str() + " #" + std::to_string(fi) + "," +
                      std::to_string(gi),
                  t1 == t2);
      };
      if (totalPairs <= kCycCap) {
        for (size_t fi = 0; fi < lf.size(); ++fi)
          for (size_t gi = 0; gi < lg.size(); ++gi) {
            run_one(fi, gi);
            rep.cyclicity_checked += 1;
          }
      } else {
        for (int sIdx = 0; sIdx < kCycSamples; ++sIdx) {
          size_t fi = (static_cast<size_t>(sIdx) * 7919 + 1) % lf.size();
          size_t gi = (static_cast<size_t>(sIdx) * 104729 + 3) % lg.size();
          run_one(fi, gi);
          rep.cyclicity_sampled += 1;
        }
      }
    }

  // --- tensor multiplicativity of dimension ---
  for (const auto& A : classes)
    for (const auto& B : classes) {
      TensorObject t = tensor_object(single_object(A), single_object(B), q);
      RatFunc lhs = object_dimension(t.object, spec);
      RatFunc rhs = object_dimension(single_object(A), spec) *
                    object_dimension(single_object(B), spec);
      cat_check(rep, "tensor dimension", A.str() + " (x) " + B.str(), lhs == rhs);
      rep.tensor_dim_checked += 1;
    }

  // --- trace of the identity ---
  for (const auto& A : classes) {
    CatObject oa = single_object(A);
    RatFunc tr = trace(identity_morphism(oa, q), spec);
    cat_check(rep, "trace of identity", A.str(), tr == object_dimension(oa, spec));
    rep.trace_id_checked += 1;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Specialization check against a finite model
// ---------------------------------------------------------------------------

std::string SpecializeReport::summary() const {
  std::ostringstream os;
  os << "specialization " << family_str(family)
     << (branch ? std::string("/") + branch_str(*branch) : "") << " q=" << q << " model="
     << model_class.str() << " t=" << t_value.get_str() << ": constants=" << constants_checked
     << " (zero=" << zero_checked << ") empty_pieces=" << empty_checked
     << " failures=" << failures.size();
  return os.str();
}

SpecializeReport specialize_check(Family fam, std::optional<Branch> br, long q,
                                  int model_index, int level_bound) {
  SpecializeReport rep;
  rep.family = fam;
  rep.branch = br;
  rep.q = q;
  require(model_index >= 1, ErrorKind::input, "model index must be positive");
  switch (fam) {
    case Family::GL:
      rep.model_class = gl_class(model_index, 0, 0);
      rep.t_value = Rat(1);
      for (int i = 0; i < model_index; ++i) rep.t_value *= Rat(q);
      break;
    case Family::Sp:
      rep.model_class = sp_class(model_index, 0);
      rep.t_value = Rat(1);
      for (int i = 0; i < 2 * model_index; ++i) rep.t_value *= Rat(q);
      break;
    case Family::O: {
      require(br.has_value(), ErrorKind::input, "orthogonal family needs a branch");
      int dim = *br == Branch::even ? 2 * model_index : 2 * model_index + 1;
      rep.model_class = o_class(dim, SquareClass::square, 0);
      rep.t_value = Rat(1);
      for (int i = 0; i < model_index; ++i) rep.t_value *= Rat(q);
      break;
    }
    case Family::U: {
      rep.model_class = u_class(model_index, 0);
      rep.t_value = Rat(1);
      for (int i = 0; i < model_index; ++i) rep.t_value *= Rat(-q);
      break;
    }
  }
  FormedSpace M = canonical_model(rep.model_class, q);
  const Fq& F = *M.F;

  auto fail_line = [&](const std::string& law, const std::string& detail) {
    rep.failures.push_back(CatCheckLine{law, detail, false});
  };

  std::vector<StructureClass> classes = classes_up_to_level(fam, level_bound);
  std::map<StructureClass, std::vector<Mat>> embs;
  for (const auto& A : classes) {
    std::vector<Mat> list;
    enumerate_embeddings(canonical_model(A, q), M, [&](const Mat& rows) { list.push_back(rows); });
    // the measure of the piece must specialize to the configuration count
    Rat mu = class_P(A, q, br).eval(rep.t_value);
    if (mu != Rat(static_cast<long>(list.size())))
      fail_line("piece measure", A.str() + " measure " + mu.get_str() + " vs count " +
                                     std::to_string(list.size()));
    if (list.empty()) rep.empty_checked += 1;
    embs.emplace(A, std::move(list));
  }

  for (const auto& Z : classes)
    for (const auto& X : classes) {
      const auto& targets = hom_basis(Z, X, q);
      const auto& tlabels = hom_labels(Z, X, q);
      for (size_t ti = 0; ti < targets.size(); ++ti) {
        FormedSpace Qo = amalgam_quotient_space(targets[ti]);
        auto eQ = find_first_embedding(Qo, M);
        if (!eQ.has_value()) continue;  // target unrealizable here: vacuous
        Mat zRows = mat_mul(F, targets[ti].part_map(0), *eQ);
        Mat xRows = mat_mul(F, targets[ti].part_map(1), *eQ);
        for (const auto& Y : classes) {
          std::map<std::pair<std::string, std::string>, long> bucket;
          for (const Mat& y : embs.at(Y)) {
            std::string l1 = amalgam_pair_label(Z, zRows, Y, y, M);
            std::string l2 = amalgam_pair_label(Y, y, X, xRows, M);
            bucket[{l1, l2}] += 1;
          }
          for (const std::string& o1 : hom_labels(Z, Y, q))
            for (const std::string& o2 : hom_labels(Y, X, q)) {
              const auto& laws =
                  composition_constant_laws(fam, br, q, Z, Y, X, o1, o2);
              Rat lawVal = laws[ti].eval(rep.t_value);
              auto it = bucket.find({o1, o2});
              long count = it == bucket.end() ? 0 : it->second;
              rep.constants_checked += 1;
              if (count == 0 && lawVal == 0) rep.zero_checked += 1;
              if (lawVal != Rat(count))
                fail_line("structure constant",
                          Z.str() + "<-" + Y.str() + "<-" + X.str() + " [" + o1 + ";" + o2 +
                              "] -> " + tlabels[ti] + ": law " + lawVal.get_str() +
                              " vs count " + std::to_string(count));
            }
        }
      }
    }
  return rep;
}

// ---------------------------------------------------------------------------
// Fourier kernels (GL)
// ---------------------------------------------------------------------------

std::string FourierReport::summary() const {
  std::ostringstream os;
  os << "fourier q=" << q << ": " << lines.size() << " identities, labels=" << labels
     << ", failures=" << failures.size();
  return os.str();
}

FourierReport fourier_check(long q) {
  for (long d = 2; d * d <= q; ++d)
    require(q % d != 0, ErrorKind::input, "fourier kernel needs a prime field");
  FourierReport rep;
  rep.q = q;
  int p = static_cast<int>(q);
  Family fam = Family::GL;
  MeasureSpec spec = MeasureSpec::symbolic(fam, q);
  const Fq& F = coefficient_field(fam, q);

  auto add_line = [&](const std::string& law, const std::string& detail, bool pass) {
    rep.lines.push_back(CatCheckLine{law, detail, pass});
    if (!pass) rep.failures.push_back(rep.lines.back());
  };

  CatObject V0 = full_space_object(fam, q, 0);
  CatObject V1 = full_space_object(fam, q, 1);
  StructureClass vec0 = gl_class(0, 1, 0), vec1 = gl_class(0, 0, 1);

  // integer exponent of a field element (prime field)
  auto exp_of = [&](int a) {
    int acc = 0;
    for (int k = 0; k < p; ++k) {
      if (acc == a) return k;
      acc = F.add(acc, 1);
    }
    fail(ErrorKind::internal_consistency, "field element outside the prime field");
  };
  // cross value of a one-vector pair orbit: the pairing of the two marked
  // vectors inside the joint space
  auto cross_of = [&](const StructureClass& cod, const StructureClass& dom,
                      const AmalgamOrbit& o) {
    auto pos = amalgam_positions({cod, dom}, q);
    int i0 = cod == vec0 ? pos[0][0] : pos[1][0];  // degree-0 coordinate
    int i1 = cod == vec0 ? pos[1][0] : pos[0][0];
    return o.joint.at(i0, i1);
  };

  RatFunc tinv = RatFunc(UniPoly(1), UniPoly::t());
  auto build_kernel = [&](const CatObject& cod, const CatObject& dom,
                          const StructureClass& codV, const StructureClass& domV,
                          bool inverse) {
    CycMorphism out;
    out.cod = cod;
    out.dom = dom;
    Cyclo scale = inverse ? Cyclo(tinv) : Cyclo(RatFunc(1));
    for (size_t j = 0; j < cod.parts.size(); ++j)
      for (size_t i = 0; i < dom.parts.size(); ++i) {
        const auto& hb = hom_basis(cod.parts[j], dom.parts[i], q);
        const auto& labels = hom_labels(cod.parts[j], dom.parts[i], q);
        for (size_t oi = 0; oi < hb.size(); ++oi) {
          Cyclo c = scale;
          if (cod.parts[j].dim() == 1 && dom.parts[i].dim() == 1) {
            int a = cross_of(codV, domV, hb[oi]);
            long k = exp_of(a);
            c = scale * Cyclo::zeta(p, inverse ? -k : k);
          }
          out.terms.emplace(MorKey{static_cast<int>(j), static_cast<int>(i), labels[oi]}, c);
        }
      }
    return out;
  };
  CycMorphism Fwd = build_kernel(V1, V0, vec1, vec0, false);
  CycMorphism Bwd = build_kernel(V0, V1, vec0, vec1, true);

  rep.labels = static_cast<long>(Fwd.terms.size() + Bwd.terms.size());

  CycMorphism idV0, idV1;
  {
    Morphism i0 = identity_morphism(V0, q), i1 = identity_morphism(V1, q);
    idV0.cod = idV0.dom = V0;
    idV1.cod = idV1.dom = V1;
    for (const auto& [k, c] : i0.terms) idV0.terms.emplace(k, Cyclo(c));
    for (const auto& [k, c] : i1.terms) idV1.terms.emplace(k, Cyclo(c));
  }
  add_line("inverse", "F' after F is the identity on the degree-0 space",
           same_terms(compose(Bwd, Fwd, spec), idV0));
  add_line("inverse", "F after F' is the identity on the degree-1 space",
           same_terms(compose(Fwd, Bwd, spec), idV1));

  RatFunc mu0 = object_dimension(V0, spec), mu1 = object_dimension(V1, spec);
  add_line("measures", "both full-space objects have measure t",
           mu0 == RatFunc(UniPoly::t()) && mu0 == mu1);

  // the vanishing character sum: fix a nonzero vector x of degree 0; the
  // fibers of y over the pairing value, weighted by zeta^<x,y>, cancel
  {
    Cyclo total(RatFunc(1));  // the zero vector contributes 1
    const auto& hb = hom_basis(vec1, vec0, q);
    bool fibers_ok = true;
    for (const AmalgamOrbit& o : hb) {
      // fiber measure of y over fixed x inside this orbit
      FormedSpace Qo = amalgam_quotient_space(o);
      FormedSpace canJ = canonical_model(o.cls, q);
      auto iso = find_first_embedding(Qo, canJ);
      if (!iso.has_value()) {
        fibers_ok = false;
        continue;
      }
      Mat embX = mat_mul(*Qo.F, o.part_map(1), *iso);
      FiberMeasure fm = fiber_measure(spec, vec0, o.cls, embX);
      long k = exp_of(cross_of(vec1, vec0, o));
      total += Cyclo(RatFunc(fm.law)) * Cyclo::zeta(p, k);
    }
    add_line("character sum", "sum over y of zeta^<x,y> vanishes for x != 0",
             fibers_ok && total.is_zero());
  }

  // classical discrete Fourier transform on the rank-2 model at t = q^2
  {
    Rat t2(q * q);
    FormedSpace M = canonical_model(gl_class(2, 0, 0), q);
    // all degree-0 and degree-1 vectors of the model
    std::vector<Vec> pts0, pts1;
    {
      std::vector<int> digits(2, 0);
      long total = q * q;
      for (long it = 0; it < total; ++it) {
        Vec v0(static_cast<size_t>(M.dim), 0), v1(static_cast<size_t>(M.dim), 0);
        long tmp = it;
        for (int i = 0; i < 2; ++i) {
          int e = static_cast<int>(tmp % q);
          tmp /= q;
          v0[static_cast<size_t>(i)] = e;
          v1[static_cast<size_t>(M.dim0 + i)] = e;
        }
        pts0.push_back(std::move(v0));
        pts1.push_back(std::move(v1));
      }
    }
    auto pairing = [&](const Vec& a, const Vec& b) { return exp_of(M.form(a, b)); };
    size_t n = pts0.size();
    // D[w][v] = zeta^<v, w>, D'[v][w] = (1/n) zeta^(-<v, w>)
    std::vector<std::vector<Cyclo>> D(n, std::vector<Cyclo>(n)), Di(n, std::vector<Cyclo>(n));
    Rat ninv = Rat(1) / Rat(static_cast<long>(n));
    for (size_t w = 0; w < n; ++w)
      for (size_t v = 0; v < n; ++v) {
        long k = pairing(pts0[v], pts1[w]);
        D[w][v] = Cyclo::zeta(p, k);
        Di[v][w] = Cyclo(RatFunc(ninv)) * Cyclo::zeta(p, -k);
      }
    bool dft_ok = true;
    for (size_t a = 0; a < n && dft_ok; ++a)
      for (size_t b = 0; b < n && dft_ok; ++b) {
        Cyclo acc1, acc2;
        for (size_t w = 0; w < n; ++w) {
          acc1 += Di[a][w] * D[w][b];
          acc2 += D[a][w] * Di[w][b];
        }
        Cyclo want = a == b ? Cyclo(RatFunc(1)) : Cyclo();
        if (!(acc1 == want) || !(acc2 == want)) dft_ok = false;
      }
    add_line("dft", "inverse transform identities on the rank-2 model", dft_ok);

    // group the classical composite by orbit labels and compare with the
    // interpolated composite evaluated at t = q^2
    CycMorphism comp = compose(Bwd, Fwd, spec);
    auto eval_at = [&](const Cyclo& c) {
      // evaluate the rational-function coordinates at t2
      Cyclo out = c - c;  // zero of the same order
      (void)out;
      return c;
    };
    (void)eval_at;
    bool grouped_ok = true;
    // embeddings of the one-vector classes are the nonzero vectors
    auto label_of = [&](const Vec& a, const Vec& b) {
      Mat ea{a}, eb{b};
      return amalgam_pair_label(vec0, ea, vec0, eb, M);
    };
    auto is_zero_vec = [](const Vec& v) {
      return std::all_of(v.begin(), v.end(), [](int e) { return e == 0; });
    };
    auto coeff_at = [&](int cp, int dpp, const std::string& label) {
      Cyclo c = comp.coeff(MorKey{cp, dpp, label});
      // evaluate coordinates at t2
      std::vector<RatFunc> coords;
      Cyclo outc;
      if (c.prime() == 0) {
        auto rp = c.rational_part();
        return Cyclo(RatFunc(rp->eval(t2)));
      }
      Cyclo acc;
      for (int k = 0; k < p - 1; ++k) {
        // extract coordinate k by subtracting
        (void)k;
        break;
      }
      (void)acc;
      (void)outc;
      return c;  // replaced below by coordinate evaluation helper
    };
    (void)coeff_at;
    // coordinate evaluation helper for cyclotomic values
    auto cy_eval = [&](const Cyclo& c) {
      if (c.prime() == 0) {
        auto rp = c.rational_part();
        return Cyclo(RatFunc(rp->eval(t2)));
      }
      Cyclo out;
      for (int k = 0; k <= c.prime() - 2; ++k) {
        // rebuild from coordinates: evaluate each coordinate polynomial
        // (access via subtraction of basis multiples is clumsy; rebuild
        // through the public interface instead)
        (void)k;
      }
      return out;
    };
    (void)cy_eval;
    // Compare entry by entry through the orbit labels.
    std::string diagLabel = diagonal_label(vec0, q);
    (void)diagLabel;
    for (size_t a = 0; a < n && grouped_ok; ++a)
      for (size_t b = 0; b < n && grouped_ok; ++b) {
        Cyclo classical;
        for (size_t w = 0; w < n; ++w) classical += Di[a][w] * D[w][b];
        bool za = is_zero_vec(pts0[a]), zb = is_zero_vec(pts0[b]);
        int cp = za ? 0 : 1;
        int dpp = zb ? 0 : 1;
        std::string label;
        if (za && zb)
          label = diagonal_label(empty_class(fam), q);
        else if (za)
          label = hom_labels(empty_class(fam), vec0, q)[0];
        else if (zb)
          label = hom_labels(vec0, empty_class(fam), q)[0];
        else
          label = label_of(pts0[a], pts0[b]);
        Cyclo interp = comp.coeff(MorKey{cp, dpp, label});
        // evaluate the interpolated coefficient at t2 via its coordinates
        Cyclo evaluated = evaluate_cyclo_at(interp, t2);
        if (!(evaluated == classical)) grouped_ok = false;
      }
    add_line("dft", "interpolated composite matches the grouped transform at t = q^2",
             grouped_ok);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Character polynomials
// ---------------------------------------------------------------------------

WindowIsometry transvection_window(long q) {
  (void)q;
  WindowIsometry w;
  w.cls = gl_class(2, 0, 0);
  w.g = Mat{{1, 1, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, -1 + 0, 1}};
  return w;
}

namespace {

// Place the window at the leading coordinates of the model (per grade block
// for GL) and extend by the identity; empty when the model is too small or
// the extension fails to be an isometry.
std::optional<Mat> window_in_model(const WindowIsometry& w, const FormedSpace& wm,
                                   const FormedSpace& M) {
  if (wm.dim > M.dim) return std::nullopt;
  if (wm.family == Family::GL && (wm.dim0 > M.dim0 || wm.dim - wm.dim0 > M.dim - M.dim0))
    return std::nullopt;
  const Fq& F = *M.F;
  std::vector<int> place(static_cast<size_t>(wm.dim));
  for (int i = 0; i < wm.dim; ++i)
    place[static_cast<size_t>(i)] =
        (wm.family == Family::GL && i >= wm.dim0) ? M.dim0 + (i - wm.dim0) : i;
  Mat g;
  for (int i = 0; i < M.dim; ++i) g.push_back(unit_vec(M.dim, i));
  for (int i = 0; i < wm.dim; ++i) {
    Vec row(static_cast<size_t>(M.dim), 0);
    for (int j = 0; j < wm.dim; ++j) {
      int val = w.g[static_cast<size_t>(i)][static_cast<size_t>(j)];
      // entries of the window matrix are given over the integers; reduce
      int e = 0;
      int one = 1;
      if (val >= 0)
        for (int kk = 0; kk < val; ++kk) e = F.add(e, one);
      else
        for (int kk = 0; kk < -val; ++kk) e = F.sub(e, one);
      row[static_cast<size_t>(place[static_cast<size_t>(j)])] = e;
    }
    g[static_cast<size_t>(place[static_cast<size_t>(i)])] = std::move(row);
  }
  // verify the extension is an isometry of the model
  for (int i = 0; i < M.dim; ++i)
    for (int j = 0; j < M.dim; ++j)
      if (M.form(g[static_cast<size_t>(i)], g[static_cast<size_t>(j)]) !=
          M.form(unit_vec(M.dim, i), unit_vec(M.dim, j)))
        return std::nullopt;
  return g;
}

UniPoly character_law(const StructureClass& a, const WindowIsometry& w,
                      const std::vector<std::pair<int, int>>& rowScale, Family fam,
                      std::optional<Branch> br, long q) {
  FormedSpace am = canonical_model(a, q);
  FormedSpace wm = canonical_model(w.cls, q);
  Mat h;
  for (int i = 0; i < am.dim; ++i) h.push_back(unit_vec(am.dim, i));
  int bound = a.level();
  std::vector<std::pair<Rat, Rat>> samples;
  for_each_ambient_model(fam, br, q, [&](const StructureClass& mc, const Rat& t) {
    FormedSpace M = canonical_model(mc, q);
    auto g = window_in_model(w, wm, M);
    if (!g.has_value()) return true;
    const Fq& F = *M.F;
    for (auto [grade, factor] : rowScale)
      for (int i = 0; i < M.dim; ++i) {
        bool isG0 = i < M.dim0;
        if ((grade == 0) != isG0) continue;
        for (int c = 0; c < M.dim; ++c)
          (*g)[static_cast<size_t>(i)][static_cast<size_t>(c)] =
              F.mul(factor, (*g)[static_cast<size_t>(i)][static_cast<size_t>(c)]);
      }
    Int n = twisted_fixed_count(am, h, M, *g);
    std::ostringstream os;
    os << n;
    samples.emplace_back(t, Rat(os.str()));
    return static_cast<int>(samples.size()) < bound + 3;
  });
  require(static_cast<int>(samples.size()) >= bound + 3, ErrorKind::internal_consistency,
          "not enough ambient models for the character fit");
  return fit_polynomial(samples, bound);
}

}  // namespace

RatFunc character_polynomial(const CatObject& x, const WindowIsometry& w,
                             const MeasureSpec& spec) {
  require(x.family == spec.family, ErrorKind::input,
          "object family does not match the measure");
  require(spec.family != Family::O, ErrorKind::input,
          "orthogonal windows lack a branch-stable leading placement");
  require(w.cls.family == spec.family, ErrorKind::input, "window family mismatch");
  require(w.cls.n == 0 && (spec.family != Family::GL || w.cls.m == 0), ErrorKind::input,
          "window class must be nondegenerate");
  RatFunc total;
  for (const StructureClass& a : x.parts)
    total += parameter_fold(spec, character_law(a, w, {}, spec.family, spec.branch, spec.q));
  return total;
}

RatFunc scalar_isotypic_character(const CatObject& x, const WindowIsometry& w,
                                  int omega_power, const MeasureSpec& spec) {
  require(spec.family == Family::GL, ErrorKind::input,
          "the scalar action decomposition is a paired-space operation");
  require(omega_power == 0 || (omega_power == 1 && spec.q == 3), ErrorKind::input,
          "only the trivial character (any q) and the sign character (q = 3) stay rational");
  const Fq& F = coefficient_field(Family::GL, spec.q);
  RatFunc total;
  long m = spec.q - 1;
  int aElem = 1;
  for (long i = 0; i < m; ++i) {
    // omega(a)^{-1}: for the sign character at q = 3 the element 2 = -1
    Rat wgt(1);
    if (omega_power == 1 && aElem != 1) wgt = Rat(-1);
    int ainv = F.inv(aElem);
    RatFunc chi;
    for (const StructureClass& a : x.parts)
      chi += parameter_fold(
          spec, character_law(a, w, {{0, aElem}, {1, ainv}}, spec.family, spec.branch,
                              spec.q));
    total += RatFunc(wgt) * chi;
    aElem = F.add(aElem, 1);
    if (aElem == 0) aElem = F.add(aElem, 1);
  }
  return total / RatFunc(Rat(m));
}

// ---------------------------------------------------------------------------
// Explicit template instantiations
// ---------------------------------------------------------------------------

template struct MorphismT<RatFunc>;
template struct MorphismT<Cyclo>;
template bool same_terms(const MorphismT<RatFunc>&, const MorphismT<RatFunc>&);
template bool same_terms(const MorphismT<Cyclo>&, const MorphismT<Cyclo>&);
template MorphismT<RatFunc> compose(const MorphismT<RatFunc>&, const MorphismT<RatFunc>&,
                                    const MeasureSpec&);
template MorphismT<Cyclo> compose(const MorphismT<Cyclo>&, const MorphismT<Cyclo>&,
                                  const MeasureSpec&);
template RatFunc trace(const MorphismT<RatFunc>&, const MeasureSpec&);
template Cyclo trace(const MorphismT<Cyclo>&, const MeasureSpec&);
template RatFunc trace_of_composite(const MorphismT<RatFunc>&, const MorphismT<RatFunc>&,
                                    const MeasureSpec&);
template Cyclo trace_of_composite(const MorphismT<Cyclo>&, const MorphismT<Cyclo>&,
                                  const MeasureSpec&);

}  // namespace fqcat
