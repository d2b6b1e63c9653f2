#include "fqcat/space.hpp"

#include <algorithm>

namespace fqcat {

std::string to_string(Family f) {
  switch (f) {
    case Family::GL: return "gl";
    case Family::Sp: return "sp";
    case Family::O: return "o";
    case Family::U: return "u";
  }
  return "?";
}

std::string to_string(Branch b) { return b == Branch::even ? "even" : "odd"; }

Family family_from_string(const std::string& s) {
  if (s == "gl") return Family::GL;
  if (s == "sp") return Family::Sp;
  if (s == "o") return Family::O;
  if (s == "u") return Family::U;
  fail(ErrorKind::input, "unknown family '" + s + "'");
}

int StructureClass::level() const {
  switch (family) {
    case Family::GL: return 2 * l + m + n;
    case Family::Sp: return 2 * m + n;
    case Family::O:
    case Family::U: return m + n;
  }
  return 0;
}

std::string StructureClass::str() const {
  switch (family) {
    case Family::GL:
      return "gl(" + std::to_string(l) + "," + std::to_string(m) + "," + std::to_string(n) + ")";
    case Family::Sp:
      return "sp(" + std::to_string(m) + "," + std::to_string(n) + ")";
    case Family::O:
      return "o(" + std::to_string(m) + "," + (delta == SquareClass::square ? "1" : "pi") + "," +
             std::to_string(n) + ")";
    case Family::U:
      return "u(" + std::to_string(m) + "," + std::to_string(n) + ")";
  }
  return "?";
}

StructureClass gl_class(int l, int m, int n) {
  require(l >= 0 && m >= 0 && n >= 0, ErrorKind::input, "negative class parameter");
  StructureClass c;
  c.family = Family::GL;
  c.l = l;
  c.m = m;
  c.n = n;
  return c;
}

StructureClass sp_class(int m, int n) {
  require(m >= 0 && n >= 0, ErrorKind::input, "negative class parameter");
  StructureClass c;
  c.family = Family::Sp;
  c.m = m;
  c.n = n;
  return c;
}

StructureClass o_class(int m, SquareClass delta, int n) {
  require(m >= 0 && n >= 0, ErrorKind::input, "negative class parameter");
  require(delta != SquareClass::zero, ErrorKind::input, "discriminant class must be nonzero");
  StructureClass c;
  c.family = Family::O;
  c.m = m;
  c.n = n;
  c.delta = m == 0 ? SquareClass::square : delta;
  return c;
}

StructureClass u_class(int m, int n) {
  require(m >= 0 && n >= 0, ErrorKind::input, "negative class parameter");
  StructureClass c;
  c.family = Family::U;
  c.m = m;
  c.n = n;
  return c;
}

std::vector<StructureClass> classes_up_to_level(Family fam, int max_level) {
  require(max_level >= 0, ErrorKind::input, "negative level bound");
  std::vector<StructureClass> out;
  switch (fam) {
    case Family::GL:
      for (int l = 0; 2 * l <= max_level; ++l)
        for (int m = 0; 2 * l + m <= max_level; ++m)
          for (int n = 0; 2 * l + m + n <= max_level; ++n) out.push_back(gl_class(l, m, n));
      break;
    case Family::Sp:
      for (int m = 0; 2 * m <= max_level; ++m)
        for (int n = 0; 2 * m + n <= max_level; ++n) out.push_back(sp_class(m, n));
      break;
    case Family::O:
      for (int m = 0; m <= max_level; ++m)
        for (int n = 0; m + n <= max_level; ++n) {
          out.push_back(o_class(m, SquareClass::square, n));
          if (m > 0) out.push_back(o_class(m, SquareClass::nonsquare, n));
        }
      break;
    case Family::U:
      for (int m = 0; m <= max_level; ++m)
        for (int n = 0; m + n <= max_level; ++n) out.push_back(u_class(m, n));
      break;
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace lin {

Mat rref(const Fq& F, Mat rows) {
  size_t cols = rows.empty() ? 0 : rows[0].size();
  size_t r = 0;
  for (size_t c = 0; c < cols && r < rows.size(); ++c) {
    size_t piv = r;
    while (piv < rows.size() && rows[piv][c] == 0) ++piv;
    if (piv == rows.size()) continue;
    std::swap(rows[r], rows[piv]);
    int s = F.inv(rows[r][c]);
    for (auto& x : rows[r]) x = F.mul(x, s);
    for (size_t i = 0; i < rows.size(); ++i) {
      if (i == r || rows[i][c] == 0) continue;
      int f = rows[i][c];
      for (size_t j = 0; j < cols; ++j) rows[i][j] = F.sub(rows[i][j], F.mul(f, rows[r][j]));
    }
    ++r;
  }
  rows.resize(r);
  return rows;
}

int rank(const Fq& F, const Mat& rows) { return static_cast<int>(rref(F, rows).size()); }

Mat kernel_basis(const Fq& F, const Mat& m) {
  if (m.empty()) return {};
  size_t cols = m[0].size();
  Mat e = rref(F, m);
  std::vector<int> pivot_col(e.size());
  std::vector<bool> is_pivot(cols, false);
  for (size_t i = 0; i < e.size(); ++i) {
    size_t c = 0;
    while (c < cols && e[i][c] == 0) ++c;
    pivot_col[i] = static_cast<int>(c);
    is_pivot[c] = true;
  }
  Mat basis;
  for (size_t fc = 0; fc < cols; ++fc) {
    if (is_pivot[fc]) continue;
    Vec v(cols, 0);
    v[fc] = 1;
    for (size_t i = 0; i < e.size(); ++i) v[pivot_col[i]] = F.neg(e[i][fc]);
    basis.push_back(std::move(v));
  }
  return rref(F, basis);
}

std::optional<Vec> solve(const Fq& F, const Mat& a, const Vec& b) {
  size_t nr = a.size();
  size_t nc = nr == 0 ? 0 : a[0].size();
  Mat aug(nr, Vec(nc + 1));
  for (size_t i = 0; i < nr; ++i) {
    std::copy(a[i].begin(), a[i].end(), aug[i].begin());
    aug[i][nc] = b[i];
  }
  Mat e = rref(F, aug);
  Vec x(nc, 0);
  for (const auto& row : e) {
    size_t c = 0;
    while (c <= nc && row[c] == 0) ++c;
    if (c == nc) return std::nullopt;  // 0 = nonzero
    if (c > nc) continue;
    x[c] = row[nc];
  }
  return x;
}

bool in_span(const Fq& F, const Mat& echelon_rows, const Vec& v) {
  Vec w = v;
  size_t cols = v.size();
  for (const auto& row : echelon_rows) {
    size_t c = 0;
    while (c < cols && row[c] == 0) ++c;
    if (c == cols) continue;
    if (w[c] != 0) {
      int f = F.mul(w[c], F.inv(row[c]));
      for (size_t j = 0; j < cols; ++j) w[j] = F.sub(w[j], F.mul(f, row[j]));
    }
  }
  return std::all_of(w.begin(), w.end(), [](int x) { return x == 0; });
}

Vec mat_vec(const Fq& F, const Mat& m, const Vec& x) {
  Vec r(m.size(), 0);
  for (size_t i = 0; i < m.size(); ++i)
    for (size_t j = 0; j < x.size(); ++j) r[i] = F.add(r[i], F.mul(m[i][j], x[j]));
  return r;
}

int dot(const Fq& F, const Vec& x, const Vec& y) {
  int s = 0;
  for (size_t i = 0; i < x.size(); ++i) s = F.add(s, F.mul(x[i], y[i]));
  return s;
}

}  // namespace lin

int FormedSpace::form(const Vec& x, const Vec& y) const {
  const Fq& f = *F;
  int s = 0;
  if (family == Family::GL) {
    for (int i = 0; i < dim0; ++i) {
      if (x[i] == 0) continue;
      for (int j = dim0; j < dim; ++j)
        s = f.add(s, f.mul(x[i], f.mul(at(i, j), y[j])));
    }
    return s;
  }
  for (int i = 0; i < dim; ++i) {
    int xi = family == Family::U ? norm_and_conjugate(f, x[i]).conj : x[i];
    if (xi == 0) continue;
    for (int j = 0; j < dim; ++j) s = f.add(s, f.mul(xi, f.mul(at(i, j), y[j])));
  }
  return s;
}

std::pair<int, int> factor_prime_power(long q) {
  require(q >= 2, ErrorKind::input, "q must be at least 2");
  int p = 2;
  while (q % p != 0) ++p;
  long t = q;
  int k = 0;
  while (t % p == 0) {
    t /= p;
    ++k;
  }
  require(t == 1, ErrorKind::input, "q = " + std::to_string(q) + " is not a prime power");
  return {p, k};
}

const Fq& coefficient_field(Family fam, long q) {
  auto [p, k] = factor_prime_power(q);
  if (fam != Family::GL)
    require(p != 2, ErrorKind::unsupported_field,
            "family " + to_string(fam) + " requires odd q");
  return fam == Family::U ? Fq::get(p, 2 * k) : Fq::get(p, k);
}

FormedSpace canonical_model(const StructureClass& c, long q) {
  const Fq& F = coefficient_field(c.family, q);
  FormedSpace v;
  v.family = c.family;
  v.F = &F;
  v.q0 = q;
  v.dim = c.dim();
  v.dim0 = c.family == Family::GL ? c.l + c.m : v.dim;
  v.gram.assign(static_cast<size_t>(v.dim) * v.dim, 0);
  switch (c.family) {
    case Family::GL:
      for (int i = 0; i < c.l; ++i) v.at(i, v.dim0 + i) = 1;
      break;
    case Family::Sp:
      for (int i = 0; i < c.m; ++i) {
        v.at(2 * i, 2 * i + 1) = 1;
        v.at(2 * i + 1, 2 * i) = F.neg(1);
      }
      break;
    case Family::O: {
      int r = c.m / 2;
      bool even = c.m % 2 == 0;
      int planes = even ? (c.delta == SquareClass::square ? r : r - 1) : r;
      require(planes >= 0, ErrorKind::internal_consistency, "bad orthogonal class");
      for (int i = 0; i < planes; ++i) {
        v.at(2 * i, 2 * i + 1) = 1;
        v.at(2 * i + 1, 2 * i) = 1;
      }
      int pos = 2 * planes;
      if (even && c.delta == SquareClass::nonsquare) {
        v.at(pos, pos) = 1;
        v.at(pos + 1, pos + 1) = F.neg(pick_nonsquare(F));
      } else if (!even) {
        v.at(pos, pos) = c.delta == SquareClass::square ? 1 : pick_nonsquare(F);
      }
      break;
    }
    case Family::U:
      for (int i = 0; i < c.m; ++i) v.at(i, i) = 1;
      break;
  }
  return v;
}

namespace {

// Right kernel of the Gram as a map (radical of the form). For hermitian Grams
// G y = 0 already characterizes the radical on either side.
Mat gram_matrix_rows(const FormedSpace& v) {
  Mat g(v.dim, Vec(v.dim));
  for (int i = 0; i < v.dim; ++i)
    for (int j = 0; j < v.dim; ++j) g[i][j] = v.at(i, j);
  return g;
}

void validate_symmetry(const FormedSpace& v) {
  const Fq& F = *v.F;
  for (int i = 0; i < v.dim; ++i)
    for (int j = 0; j < v.dim; ++j) {
      int a = v.at(i, j);
      require(a >= 0 && a < F.q(), ErrorKind::malformed_space, "Gram entry out of range");
      switch (v.family) {
        case Family::Sp:
          require(v.at(j, i) == F.neg(a), ErrorKind::malformed_space, "Gram not alternating");
          require(i != j || a == 0, ErrorKind::malformed_space, "nonzero diagonal");
          break;
        case Family::O:
          require(v.at(j, i) == a, ErrorKind::malformed_space, "Gram not symmetric");
          break;
        case Family::U:
          require(v.at(j, i) == norm_and_conjugate(F, a).conj, ErrorKind::malformed_space,
                  "Gram not hermitian");
          break;
        case Family::GL:
          require((i < v.dim0 && j >= v.dim0) || a == 0, ErrorKind::malformed_space,
                  "pairing entries outside the degree-0 x degree-1 block");
          break;
      }
    }
}

}  // namespace

StructureClass classify(const FormedSpace& v) {
  const Fq& F = *v.F;
  require(v.dim >= 0 && static_cast<size_t>(v.dim) * v.dim == v.gram.size(),
          ErrorKind::malformed_space, "Gram size mismatch");
  if (v.family != Family::GL)
    require(F.odd(), ErrorKind::unsupported_field, "odd characteristic required");
  if (v.family == Family::U)
    require(F.k() % 2 == 0, ErrorKind::malformed_space,
            "unitary Gram must live over a quadratic extension");
  require(v.family == Family::GL ? (v.dim0 >= 0 && v.dim0 <= v.dim) : v.dim0 == v.dim,
          ErrorKind::malformed_space, "bad grading split");
  validate_symmetry(v);

  if (v.family == Family::GL) {
    Mat block(v.dim0, Vec(v.dim1()));
    for (int i = 0; i < v.dim0; ++i)
      for (int j = 0; j < v.dim1(); ++j) block[i][j] = v.at(i, v.dim0 + j);
    int l = lin::rank(F, block);
    return gl_class(l, v.dim0 - l, v.dim1() - l);
  }

  Mat g = gram_matrix_rows(v);
  Mat rad = lin::kernel_basis(F, g);
  int n = static_cast<int>(rad.size());
  int m = v.dim - n;
  switch (v.family) {
    case Family::Sp:
      require(m % 2 == 0, ErrorKind::internal_consistency, "odd symplectic rank");
      return sp_class(m / 2, n);
    case Family::U:
      return u_class(m, n);
    case Family::O: {
      if (m == 0) return o_class(0, SquareClass::square, n);
      // Any complement of the radical restricts to the nondegenerate quotient
      // form; extend the radical basis greedily by standard vectors.
      Mat span = rad;
      Mat comp;
      for (int i = 0; i < v.dim && static_cast<int>(comp.size()) < m; ++i) {
        Vec e(v.dim, 0);
        e[i] = 1;
        Mat trial = span;
        trial.push_back(e);
        if (lin::rank(F, trial) > static_cast<int>(lin::rref(F, span).size())) {
          span.push_back(e);
          comp.push_back(e);
        }
      }
      // Determinant of the restricted Gram via fraction-free elimination is
      // overkill at these sizes; expand by elimination over F.
      Mat r(m, Vec(m));
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
          Vec gy = lin::mat_vec(F, g, comp[j]);
          r[i][j] = lin::dot(F, comp[i], gy);
        }
      int det = 1;
      for (int c = 0; c < m; ++c) {
        int piv = c;
        while (piv < m && r[piv][c] == 0) ++piv;
        require(piv < m, ErrorKind::internal_consistency, "degenerate complement");
        if (piv != c) {
          std::swap(r[piv], r[c]);
          det = F.neg(det);
        }
        det = F.mul(det, r[c][c]);
        int s = F.inv(r[c][c]);
        for (int i = c + 1; i < m; ++i) {
          int f = F.mul(r[i][c], s);
          for (int j = c; j < m; ++j) r[i][j] = F.sub(r[i][j], F.mul(f, r[c][j]));
        }
      }
      // Modified discriminant: (-1)^(m/2 rounded down) times the determinant,
      // as a square class; makes hyperbolic spaces have square class.
      int sign = (m / 2) % 2 == 0 ? 1 : F.neg(1);
      SquareClass delta = quadratic_character(F, F.mul(sign, det));
      require(delta != SquareClass::zero, ErrorKind::internal_consistency, "zero discriminant");
      return o_class(m, delta, n);
    }
    default:
      fail(ErrorKind::internal_consistency, "unreachable");
  }
}

FormedSpace direct_sum(const FormedSpace& a, const FormedSpace& b) {
  require(a.family == b.family && a.F == b.F, ErrorKind::input,
          "direct sum of incompatible spaces");
  FormedSpace s;
  s.family = a.family;
  s.F = a.F;
  s.q0 = a.q0;
  s.dim = a.dim + b.dim;
  s.dim0 = a.family == Family::GL ? a.dim0 + b.dim0 : s.dim;
  s.gram.assign(static_cast<size_t>(s.dim) * s.dim, 0);
  // Index of a's (resp. b's) basis vector inside the sum, grouping degree-0
  // coordinates of both summands first.
  auto a_ix = [&](int i) {
    if (a.family != Family::GL) return i;
    return i < a.dim0 ? i : b.dim0 + i;
  };
  auto b_ix = [&](int i) {
    if (a.family != Family::GL) return a.dim + i;
    return i < b.dim0 ? a.dim0 + i : a.dim + i;
  };
  for (int i = 0; i < a.dim; ++i)
    for (int j = 0; j < a.dim; ++j) s.at(a_ix(i), a_ix(j)) = a.at(i, j);
  for (int i = 0; i < b.dim; ++i)
    for (int j = 0; j < b.dim; ++j) s.at(b_ix(i), b_ix(j)) = b.at(i, j);
  return s;
}

bool is_isometric(const FormedSpace& a, const FormedSpace& b) {
  return a.family == b.family && a.q0 == b.q0 && classify(a) == classify(b);
}

ClosureBasis definable_closure(const FormedSpace& v, const Mat& vectors) {
  const Fq& F = *v.F;
  if (v.family != Family::GL) {
    Mat rows = lin::rref(F, vectors);
    return {rows, static_cast<int>(rows.size())};
  }
  Mat deg0, deg1;
  for (const auto& x : vectors) {
    Vec x0(v.dim, 0), x1(v.dim, 0);
    for (int i = 0; i < v.dim; ++i) (i < v.dim0 ? x0 : x1)[i] = x[i];
    deg0.push_back(std::move(x0));
    deg1.push_back(std::move(x1));
  }
  ClosureBasis out;
  out.rows = lin::rref(F, deg0);
  out.rows0 = static_cast<int>(out.rows.size());
  for (auto& r : lin::rref(F, deg1)) out.rows.push_back(std::move(r));
  return out;
}

Mat orthogonal_complement(const FormedSpace& v, const Mat& vectors) {
  const Fq& F = *v.F;
  StructureClass c = classify(v);
  require(c.n == 0 && (v.family != Family::GL || c.m == 0),
          ErrorKind::input, "orthogonal complement needs a nondegenerate ambient space");
  // Constraint rows: y is in the complement iff <x, y> = 0 for each given x
  // (for GL, per grade against the opposite grade).
  Mat constraints;
  for (const auto& x : vectors) {
    Vec row(v.dim, 0);
    if (v.family == Family::GL) {
      // Degree-0 part of x constrains degree-1 ys and vice versa.
      Vec row0(v.dim, 0), row1(v.dim, 0);
      for (int j = 0; j < v.dim; ++j) {
        for (int i = 0; i < v.dim0; ++i) row1[j] = F.add(row1[j], F.mul(x[i], v.at(i, j)));
        for (int i = v.dim0; i < v.dim; ++i) row0[j] = F.add(row0[j], F.mul(x[i], v.at(j, i)));
      }
      constraints.push_back(std::move(row0));
      constraints.push_back(std::move(row1));
      continue;
    }
    for (int j = 0; j < v.dim; ++j) {
      int s = 0;
      for (int i = 0; i < v.dim; ++i) {
        int xi = v.family == Family::U ? norm_and_conjugate(F, x[i]).conj : x[i];
        s = F.add(s, F.mul(xi, v.at(i, j)));
      }
      row[j] = s;
    }
    constraints.push_back(std::move(row));
  }
  if (constraints.empty()) {
    Mat full(v.dim, Vec(v.dim, 0));
    for (int i = 0; i < v.dim; ++i) full[i][i] = 1;
    return full;
  }
  return lin::kernel_basis(F, constraints);
}

bool is_embedding(const FormedSpace& a, const FormedSpace& m, const Mat& images) {
  if (static_cast<int>(images.size()) != a.dim) return false;
  for (const auto& w : images)
    if (static_cast<int>(w.size()) != m.dim) return false;
  if (a.family != m.family || a.F != m.F) return false;
  if (a.family == Family::GL) {
    for (int i = 0; i < a.dim; ++i)
      for (int j = 0; j < m.dim; ++j) {
        bool a0 = i < a.dim0, m0 = j < m.dim0;
        if (a0 != m0 && images[i][j] != 0) return false;
      }
    Mat g0(images.begin(), images.begin() + a.dim0);
    Mat g1(images.begin() + a.dim0, images.end());
    if (lin::rank(*a.F, g0) != a.dim0 || lin::rank(*a.F, g1) != a.dim1()) return false;
  } else {
    if (lin::rank(*a.F, images) != a.dim) return false;
  }
  for (int i = 0; i < a.dim; ++i)
    for (int j = 0; j < a.dim; ++j)
      if (m.form(images[i], images[j]) != a.at(i, j)) return false;
  return true;
}

}  // namespace fqcat
