#include "fqcat/burnside.hpp"

#include <algorithm>
#include <mutex>
#include <sstream>
#include <tuple>

#include "fqcat/enumerate.hpp"

namespace fqcat {

namespace {

StructureClass empty_class(Family fam) {
  switch (fam) {
    case Family::GL: return gl_class(0, 0, 0);
    case Family::Sp: return sp_class(0, 0);
    case Family::O: return o_class(0, SquareClass::square, 0);
    case Family::U: return u_class(0, 0);
  }
  fail(ErrorKind::input, "unknown family");
}

// The fixed summand whose pointwise stabilizer defines the restriction map.
StructureClass first_summand(Family fam) {
  switch (fam) {
    case Family::GL: return gl_class(1, 0, 0);
    case Family::Sp: return sp_class(1, 0);
    case Family::O: return o_class(2, SquareClass::square, 0);
    case Family::U: return u_class(1, 0);
  }
  fail(ErrorKind::input, "unknown family");
}

}  // namespace

// ---------------------------------------------------------------------------
// BurnsideElem

BurnsideElem BurnsideElem::basis(const StructureClass& c) {
  BurnsideElem e(c.family);
  e.terms_[c] = 1;
  return e;
}

BurnsideElem BurnsideElem::one(Family fam) { return basis(empty_class(fam)); }

Rat BurnsideElem::coeff(const StructureClass& c) const {
  auto it = terms_.find(c);
  return it == terms_.end() ? Rat(0) : it->second;
}

int BurnsideElem::level() const {
  int l = 0;
  for (const auto& [c, co] : terms_) l = std::max(l, c.dim());
  return l;
}

void BurnsideElem::add_term(const StructureClass& c, const Rat& coef) {
  require(c.family == family_, ErrorKind::input, "class from the wrong family");
  if (coef == 0) return;
  auto [it, fresh] = terms_.emplace(c, coef);
  if (!fresh) {
    it->second += coef;
    if (it->second == 0) terms_.erase(it);
  }
}

BurnsideElem& BurnsideElem::operator+=(const BurnsideElem& o) {
  require(family_ == o.family_, ErrorKind::input, "family mismatch");
  for (const auto& [c, co] : o.terms_) add_term(c, co);
  return *this;
}

BurnsideElem& BurnsideElem::operator-=(const BurnsideElem& o) {
  require(family_ == o.family_, ErrorKind::input, "family mismatch");
  for (const auto& [c, co] : o.terms_) add_term(c, -co);
  return *this;
}

BurnsideElem BurnsideElem::operator*(const Rat& c) const {
  BurnsideElem r(family_);
  if (c == 0) return r;
  for (const auto& [cls, co] : terms_) r.terms_[cls] = co * c;
  return r;
}

BurnsideElem BurnsideElem::operator-() const {
  BurnsideElem r(family_);
  for (const auto& [cls, co] : terms_) r.terms_[cls] = -co;
  return r;
}

std::string BurnsideElem::str() const {
  if (terms_.empty()) return "0";
  std::ostringstream out;
  bool first = true;
  // Highest class first, scalar term last.
  for (auto it = terms_.rbegin(); it != terms_.rend(); ++it) {
    const auto& [cls, co] = *it;
    Rat a = co;
    if (first) {
      if (a < 0) { out << "-"; a = -a; }
    } else {
      out << (a < 0 ? " - " : " + ");
      if (a < 0) a = -a;
    }
    first = false;
    bool scalar = cls.dim() == 0;
    if (a != 1 || scalar) out << a.get_str();
    if (!scalar) {
      if (a != 1) out << "*";
      out << "x" << cls.str();
    }
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Class enumeration and arithmetic

std::vector<StructureClass> classes_up_to(Family fam, int dim_bound) {
  require(dim_bound >= 0, ErrorKind::input, "negative dimension bound");
  std::vector<StructureClass> out;
  switch (fam) {
    case Family::GL:
      for (int l = 0; 2 * l <= dim_bound; ++l)
        for (int m = 0; 2 * l + m <= dim_bound; ++m)
          for (int n = 0; 2 * l + m + n <= dim_bound; ++n) out.push_back(gl_class(l, m, n));
      break;
    case Family::Sp:
      for (int m = 0; 2 * m <= dim_bound; ++m)
        for (int n = 0; 2 * m + n <= dim_bound; ++n) out.push_back(sp_class(m, n));
      break;
    case Family::O:
      for (int m = 0; m <= dim_bound; ++m)
        for (int n = 0; m + n <= dim_bound; ++n) {
          out.push_back(o_class(m, SquareClass::square, n));
          if (m > 0) out.push_back(o_class(m, SquareClass::nonsquare, n));
        }
      break;
    case Family::U:
      for (int m = 0; m <= dim_bound; ++m)
        for (int n = 0; m + n <= dim_bound; ++n) out.push_back(u_class(m, n));
      break;
  }
  std::sort(out.begin(), out.end());
  return out;
}

StructureClass class_direct_sum(const StructureClass& a, const StructureClass& b, long q) {
  require(a.family == b.family, ErrorKind::input, "family mismatch");
  return classify(direct_sum(canonical_model(a, q), canonical_model(b, q)));
}

// ---------------------------------------------------------------------------
// Ring structure

BurnsideElem multiply(const BurnsideElem& x, const BurnsideElem& y, long q) {
  require(x.family() == y.family(), ErrorKind::input, "family mismatch");
  BurnsideElem r(x.family());
  for (const auto& [cx, cox] : x.terms())
    for (const auto& [cy, coy] : y.terms()) {
      auto dec = amalgam_decompose(cx, cy, q);
      for (const auto& [cls, mult] : dec) r.add_term(cls, cox * coy * Rat(mult));
    }
  return r;
}

Rat marks(const BurnsideElem& x, const StructureClass& c, long q) {
  require(x.family() == c.family, ErrorKind::input, "family mismatch");
  Rat r = 0;
  for (const auto& [b, co] : x.terms()) r += co * Rat(count_embeddings(b, c, q));
  return r;
}

namespace {

std::map<std::pair<std::string, long>, BurnsideElem> g_delta_memo;
std::mutex g_delta_mu;

BurnsideElem delta_basis(const StructureClass& a, long q) {
  {
    std::lock_guard lock(g_delta_mu);
    auto it = g_delta_memo.find({a.str(), q});
    if (it != g_delta_memo.end()) return it->second;
  }
  Family fam = a.family;
  StructureClass h = first_summand(fam);
  auto classes = classes_up_to(fam, a.dim());
  BurnsideElem result(fam);
  // Forward substitution: classes are sorted by dimension, embeddings only go
  // up in dimension, and distinct classes of equal dimension never embed into
  // one another, so the marks matrix is triangular with |Aut(C)| diagonal.
  for (const StructureClass& c : classes) {
    Int rhs = count_embeddings(a, class_direct_sum(h, c, q), q);
    Rat residual = Rat(rhs) - marks(result, c, q);
    if (residual == 0) continue;
    Int aut = count_embeddings(c, c, q);
    result.add_term(c, residual / Rat(aut));
  }
  // Surplus consistency: one extra dimension layer of marks equations.
  for (const StructureClass& c : classes_up_to(fam, a.dim() + 1)) {
    Int rhs = count_embeddings(a, class_direct_sum(h, c, q), q);
    require(marks(result, c, q) == Rat(rhs), ErrorKind::internal_consistency,
            "restriction solve fails surplus marks equation at " + c.str());
  }
  std::lock_guard lock(g_delta_mu);
  return g_delta_memo.emplace(std::make_pair(a.str(), q), std::move(result)).first->second;
}

}  // namespace

BurnsideElem delta(const BurnsideElem& x, long q) {
  BurnsideElem r(x.family());
  for (const auto& [c, co] : x.terms()) r += delta_basis(c, q) * co;
  return r;
}

std::vector<Eigenvector> grading_eigenvectors(Family fam, long q) {
  Rat qr(q);
  BurnsideElem unit = BurnsideElem::one(fam);
  std::vector<Eigenvector> out;
  switch (fam) {
    case Family::GL: {
      BurnsideElem w2 = BurnsideElem::basis(gl_class(0, 1, 0)) + unit;
      BurnsideElem w3 = BurnsideElem::basis(gl_class(0, 0, 1)) + unit;
      BurnsideElem w1 =
          BurnsideElem::basis(gl_class(1, 0, 0)) - multiply(w2, w3, q) * (1 / qr);
      out = {{"w1", w1, qr}, {"w2", w2, qr}, {"w3", w3, qr}};
      break;
    }
    case Family::Sp: {
      BurnsideElem y = BurnsideElem::basis(sp_class(0, 1));
      BurnsideElem w1 =
          BurnsideElem::basis(sp_class(1, 0)) - multiply(y, y + unit, q) * (1 / qr);
      out = {{"w1", w1, qr * qr}, {"w2", y + unit, qr * qr}};
      break;
    }
    case Family::O: {
      BurnsideElem xs = BurnsideElem::basis(o_class(1, SquareClass::square, 0));
      BurnsideElem xn = BurnsideElem::basis(o_class(1, SquareClass::nonsquare, 0));
      BurnsideElem z = unit + BurnsideElem::basis(o_class(0, SquareClass::square, 1)) +
                       (xs + xn) * ((qr - 1) / 2);
      out = {{"w1", xs - z * (1 / qr), qr},
             {"w2", xn - z * (1 / qr), qr},
             {"z", z, qr * qr}};
      break;
    }
    case Family::U: {
      BurnsideElem xa = BurnsideElem::basis(u_class(1, 0));
      BurnsideElem xb = BurnsideElem::basis(u_class(0, 1));
      out = {{"w1", unit + xb - xa, -qr}, {"w2", unit + xb + xa * (qr - 1), qr * qr}};
      break;
    }
  }
  for (const Eigenvector& ev : out)
    require(delta(ev.elem, q) == ev.elem * ev.eigenvalue, ErrorKind::internal_consistency,
            "grading eigenvector " + ev.name + " is not an eigenvector");
  return out;
}

// ---------------------------------------------------------------------------
// Presentation check

namespace {

// Exact rank of a rational matrix (rows destroyed).
int rational_rank(std::vector<std::vector<Rat>>& rows) {
  size_t cols = rows.empty() ? 0 : rows[0].size();
  int rank = 0;
  size_t row = 0;
  for (size_t col = 0; col < cols && row < rows.size(); ++col) {
    size_t pivot = row;
    while (pivot < rows.size() && rows[pivot][col] == 0) ++pivot;
    if (pivot == rows.size()) continue;
    std::swap(rows[row], rows[pivot]);
    for (size_t i = row + 1; i < rows.size(); ++i) {
      if (rows[i][col] == 0) continue;
      Rat f = rows[i][col] / rows[row][col];
      for (size_t j = col; j < cols; ++j) rows[i][j] -= f * rows[row][j];
    }
    ++row;
    ++rank;
  }
  return rank;
}

std::vector<BurnsideElem> presentation_generators(Family fam) {
  switch (fam) {
    case Family::GL:
      return {BurnsideElem::basis(gl_class(1, 0, 0)), BurnsideElem::basis(gl_class(0, 1, 0)),
              BurnsideElem::basis(gl_class(0, 0, 1))};
    case Family::Sp:
      return {BurnsideElem::basis(sp_class(1, 0)), BurnsideElem::basis(sp_class(0, 1))};
    case Family::O:
      return {BurnsideElem::basis(o_class(1, SquareClass::square, 0)),
              BurnsideElem::basis(o_class(1, SquareClass::nonsquare, 0)),
              BurnsideElem::basis(o_class(0, SquareClass::square, 1))};
    case Family::U:
      return {BurnsideElem::basis(u_class(1, 0)), BurnsideElem::basis(u_class(0, 1))};
  }
  fail(ErrorKind::input, "unknown family");
}

// Filtration weight of one generator exponent step.
std::vector<int> generator_weights(Family fam) {
  switch (fam) {
    case Family::GL: return {2, 1, 1};
    case Family::Sp: return {2, 1};
    case Family::O: return {1, 1, 1};
    case Family::U: return {1, 1};
  }
  fail(ErrorKind::input, "unknown family");
}

}  // namespace

PresentationReport presentation_check(Family fam, long q, int level_bound) {
  require(level_bound >= 0 && level_bound <= 5, ErrorKind::input,
          "presentation level bound out of range");
  PresentationReport rep;
  rep.family = fam;
  rep.q = q;
  rep.level_bound = level_bound;

  auto gens = presentation_generators(fam);
  auto weights = generator_weights(fam);
  size_t ng = gens.size();

  // Enumerate admissible exponent vectors and expand monomials reusing
  // lower monomials (exponents descend lexicographically to a computed one).
  std::map<std::vector<int>, BurnsideElem> monomials;
  monomials.emplace(std::vector<int>(ng, 0), BurnsideElem::one(fam));
  std::vector<std::vector<int>> todo;
  {
    std::vector<int> e(ng, 0);
    // Odometer over exponents within the weighted level bound.
    while (true) {
      int w = 0;
      for (size_t i = 0; i < ng; ++i) w += e[i] * weights[i];
      bool admissible = w <= level_bound && (fam != Family::O || e[0] <= 1);
      if (admissible && w > 0) todo.push_back(e);
      size_t i = 0;
      while (i < ng) {
        ++e[i];
        int w2 = 0;
        for (size_t j = 0; j < ng; ++j) w2 += e[j] * weights[j];
        if (w2 <= level_bound) break;
        e[i] = 0;
        ++i;
      }
      if (i == ng) break;
    }
  }
  std::sort(todo.begin(), todo.end(), [&](const auto& x, const auto& y) {
    int wx = 0, wy = 0;
    for (size_t i = 0; i < ng; ++i) {
      wx += x[i] * weights[i];
      wy += y[i] * weights[i];
    }
    return std::tuple(wx, x) < std::tuple(wy, y);
  });
  for (const auto& e : todo) {
    size_t i = 0;
    while (e[i] == 0) ++i;
    std::vector<int> prev = e;
    --prev[i];
    monomials.emplace(e, multiply(monomials.at(prev), gens[i], q));
  }

  auto classes = classes_up_to(fam, level_bound);
  std::map<StructureClass, size_t> col;
  for (size_t i = 0; i < classes.size(); ++i) col[classes[i]] = i;

  rep.monomial_count = static_cast<int>(monomials.size());
  rep.class_count = static_cast<int>(classes.size());
  rep.filtration_respected = true;
  std::vector<std::vector<Rat>> matrix;
  for (const auto& [e, elem] : monomials) {
    std::vector<Rat> row(classes.size(), Rat(0));
    for (const auto& [cls, co] : elem.terms()) {
      auto it = col.find(cls);
      if (it == col.end()) {
        rep.filtration_respected = false;
        continue;
      }
      row[it->second] = co;
    }
    matrix.push_back(std::move(row));
  }
  rep.rank = rational_rank(matrix);
  rep.independent = rep.rank == rep.monomial_count;
  rep.spanning = rep.rank == rep.class_count;

  rep.o_relation_zero = true;
  if (fam == Family::O) {
    // (1 - X/2 - Y/2 + Z)(X - Y) with X, Y the two one-dimensional
    // nondegenerate classes and Z the one-dimensional radical class.
    BurnsideElem x = gens[0], y = gens[1], z = gens[2];
    BurnsideElem left = BurnsideElem::one(fam) - x * Rat(1, 2) - y * Rat(1, 2) + z;
    rep.o_relation_zero = multiply(left, x - y, q).is_zero();
  }
  return rep;
}

}  // namespace fqcat
