#include "fqcat/enumerate.hpp"

#include <algorithm>
#include <mutex>
#include <sstream>

namespace fqcat {

namespace {

std::mutex g_hist_mu;
std::mutex g_ext_mu;

int conj_of(const FormedSpace& v, int a) {
  return v.family == Family::U ? norm_and_conjugate(*v.F, a).conj : a;
}

// ---------------------------------------------------------------------------
// Norm histograms.

using Hist = std::map<int, Int>;

// Depth-first over coordinates with partial accumulation; visits every vector
// once. Counts fit in 64 bits for dim <= 6, q_K <= 25.
Hist scan_histogram(const FormedSpace& v) {
  const Fq& F = *v.F;
  std::vector<uint64_t> counts(F.q(), 0);
  Vec x(v.dim, 0);
  std::function<void(int, int)> rec = [&](int j, int acc) {
    if (j == v.dim) {
      ++counts[acc];
      return;
    }
    for (int c = 0; c < F.q(); ++c) {
      x[j] = c;
      int a = acc;
      if (c != 0) {
        int cc = conj_of(v, c);
        a = F.add(a, F.mul(cc, F.mul(v.at(j, j), c)));
        for (int i = 0; i < j; ++i) {
          if (x[i] == 0) continue;
          a = F.add(a, F.mul(conj_of(v, x[i]), F.mul(v.at(i, j), c)));
          a = F.add(a, F.mul(cc, F.mul(v.at(j, i), x[i])));
        }
      }
      rec(j + 1, a);
    }
    x[j] = 0;
  };
  rec(0, 0);
  Hist h;
  for (int a = 0; a < F.q(); ++a)
    if (counts[a]) h[a] = Int(static_cast<unsigned long>(counts[a]));
  return h;
}

Hist convolve(const Fq& F, const Hist& a, const Hist& b) {
  Hist r;
  for (const auto& [va, ca] : a)
    for (const auto& [vb, cb] : b) r[F.add(va, vb)] += ca * cb;
  return r;
}

FormedSpace subblock(const FormedSpace& v, int start, int len) {
  FormedSpace piece;
  piece.family = v.family;
  piece.F = v.F;
  piece.q0 = v.q0;
  piece.dim = len;
  piece.dim0 = len;
  piece.gram.assign(static_cast<size_t>(len) * len, 0);
  for (int r = 0; r < len; ++r)
    for (int c = 0; c < len; ++c) piece.at(r, c) = v.at(start + r, start + c);
  return piece;
}

// Histogram of a nondegenerate canonical model by convolving its diagonal and
// hyperbolic blocks (norms add over orthogonal direct sums).
Hist conv_histogram(const StructureClass& nd, long q) {
  FormedSpace model = canonical_model(nd, q);
  Hist h;
  h[0] = 1;
  int i = 0;
  while (i < model.dim) {
    int block = (i + 1 < model.dim && model.at(i, i + 1) != 0) ? 2 : 1;
    h = convolve(*model.F, h, scan_histogram(subblock(model, i, block)));
    i += block;
  }
  return h;
}

}  // namespace

long coefficient_field_size(Family fam, long q) { return fam == Family::U ? q * q : q; }

StructureClass radical_reduced(const StructureClass& c, int s0, int s1) {
  switch (c.family) {
    case Family::GL: return gl_class(c.l, c.m - s0, c.n - s1);
    case Family::Sp: return sp_class(c.m, c.n - s0);
    case Family::O: return o_class(c.m, c.delta, c.n - s0);
    case Family::U: return u_class(c.m, c.n - s0);
  }
  fail(ErrorKind::internal_consistency, "unreachable");
}

StructureClass nondegenerate_part(const StructureClass& c) {
  switch (c.family) {
    case Family::GL: return gl_class(c.l, 0, 0);
    case Family::Sp: return sp_class(c.m, 0);
    case Family::O: return o_class(c.m, c.delta, 0);
    case Family::U: return u_class(c.m, 0);
  }
  fail(ErrorKind::internal_consistency, "unreachable");
}

const std::map<int, Int>& norm_histogram(const StructureClass& m, long q) {
  require(m.family == Family::O || m.family == Family::U, ErrorKind::input,
          "norm histograms are defined for the orthogonal and unitary families");
  static std::map<std::string, Hist> cache;
  std::string key = m.str() + "#" + std::to_string(q);
  std::lock_guard<std::mutex> lock(g_hist_mu);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  StructureClass nd = nondegenerate_part(m);
  Hist h = nd.dim() <= 6 ? scan_histogram(canonical_model(nd, q)) : conv_histogram(nd, q);
  if (m.n > 0) {
    // Radical coordinates contribute nothing to the norm.
    Int factor =
        int_pow(Int(coefficient_field_size(m.family, q)), static_cast<unsigned long>(m.n));
    for (auto& [v, c] : h) c *= factor;
  }
  return cache.emplace(key, std::move(h)).first->second;
}

Int count_norm_vectors(const StructureClass& m, long q, int value) {
  const auto& h = norm_histogram(m, q);
  auto it = h.find(value);
  return it == h.end() ? Int(0) : it->second;
}

namespace {

// ---------------------------------------------------------------------------
// Closed-form count over an affine slice:
//   #{ w = w0 + sum lambda_i h_i : <w, w> = tau_target }
// in an orthogonal/unitary ambient. Expanding against the slice directions
// gives a (possibly degenerate) restricted form plus a linear part; the
// radical of that form either makes the count uniform (nonzero functional) or
// factors out, and the nondegenerate rest is handled by completing the square
// and reading a cached norm histogram of its isomorphism class.
Int affine_norm_count(const FormedSpace& ambient, const Mat& dirs, const Vec& w0,
                      int tau_target) {
  const Fq& F = *ambient.F;
  Family fam = ambient.family;
  long q = ambient.q0;
  long qK = F.q();
  int d = static_cast<int>(dirs.size());
  Mat S(d, Vec(d));
  Vec c(d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) S[i][j] = ambient.form(dirs[i], dirs[j]);
    c[i] = ambient.form(w0, dirs[i]);
  }
  int tau = F.sub(tau_target, ambient.form(w0, w0));

  Mat rad = lin::kernel_basis(F, S);
  int dr = static_cast<int>(rad.size());
  int dw = d - dr;
  // If the linear functional mu -> Tr(mu . c) is nonzero on the radical, every
  // value is hit equally often.
  for (const auto& r : rad) {
    int dotc = 0;
    for (int i = 0; i < d; ++i) dotc = F.add(dotc, F.mul(r[i], c[i]));
    if (dotc != 0) {
      Int total = int_pow(Int(qK), static_cast<unsigned long>(d));
      Int qq(q);
      Int res = total / qq;
      require(res * qq == total, ErrorKind::internal_consistency, "uniform count not exact");
      return res;
    }
  }
  Int rad_factor = int_pow(Int(qK), static_cast<unsigned long>(dr));
  if (dw == 0) return tau == 0 ? rad_factor : Int(0);

  // Complement of the radical inside coefficient space.
  Mat comp;
  {
    Mat span = rad;
    int have = dr;
    for (int i = 0; i < d && static_cast<int>(comp.size()) < dw; ++i) {
      Vec e(d, 0);
      e[i] = 1;
      Mat trial = span;
      trial.push_back(e);
      if (lin::rank(F, trial) > have) {
        span.push_back(e);
        comp.push_back(e);
        ++have;
      }
    }
  }
  auto conj = [&](int a) { return fam == Family::U ? norm_and_conjugate(F, a).conj : a; };
  Mat Sp(dw, Vec(dw));
  Vec cp(dw);
  for (int i = 0; i < dw; ++i) {
    for (int j = 0; j < dw; ++j) {
      int s = 0;
      for (int a = 0; a < d; ++a) {
        int ca = conj(comp[i][a]);
        if (ca == 0) continue;
        for (int b = 0; b < d; ++b) s = F.add(s, F.mul(ca, F.mul(S[a][b], comp[j][b])));
      }
      Sp[i][j] = s;
    }
    int s = 0;
    for (int a = 0; a < d; ++a) s = F.add(s, F.mul(comp[i][a], c[a]));
    cp[i] = s;
  }
  // Shift v0 with conj(v0)^T S' = c'^T kills the linear part:
  // Q(mu + v0) = Q(mu) + Tr(mu . c') + Q(v0).
  Mat SpT(dw, Vec(dw));
  for (int i = 0; i < dw; ++i)
    for (int j = 0; j < dw; ++j) SpT[i][j] = Sp[j][i];
  auto x = lin::solve(F, SpT, cp);
  require(x.has_value(), ErrorKind::internal_consistency, "nondegenerate solve failed");
  Vec v0(dw);
  for (int i = 0; i < dw; ++i) v0[i] = conj((*x)[i]);
  int qv0 = 0;
  for (int i = 0; i < dw; ++i) {
    int vi = conj(v0[i]);
    if (vi == 0) continue;
    for (int j = 0; j < dw; ++j) qv0 = F.add(qv0, F.mul(vi, F.mul(Sp[i][j], v0[j])));
  }
  int target = F.add(tau, qv0);

  FormedSpace restr;
  restr.family = fam;
  restr.F = &F;
  restr.q0 = q;
  restr.dim = dw;
  restr.dim0 = dw;
  restr.gram.assign(static_cast<size_t>(dw) * dw, 0);
  for (int i = 0; i < dw; ++i)
    for (int j = 0; j < dw; ++j) restr.at(i, j) = Sp[i][j];
  const Hist& h = norm_histogram(classify(restr), q);
  auto it = h.find(target);
  return (it == h.end() ? Int(0) : it->second) * rad_factor;
}

// ---------------------------------------------------------------------------
// Per-depth extension machinery over a nondegenerate canonical ambient.

// Affine candidate set for the image of the j-th prescribed vector: solutions
// of the pairing constraints against the placed prefix, inside the grade
// block for GL.
struct AffineSet {
  Vec w0;                   // packed into `coords`
  Mat basis;                // null-space directions, packed into `coords`
  std::vector<int> coords;  // ambient coordinates in play
};

Vec expand_coords(const FormedSpace& m, const std::vector<int>& coords, const Vec& packed) {
  Vec full(m.dim, 0);
  for (size_t s = 0; s < coords.size(); ++s) full[coords[s]] = packed[s];
  return full;
}

bool constraint_set(const FormedSpace& m, const Mat& gram, const std::vector<int>& grades,
                    const Mat& placed, int j, AffineSet& out) {
  const Fq& F = *m.F;
  int D = m.dim;
  std::vector<int> coords;
  if (m.family == Family::GL) {
    int lo = grades[j] == 0 ? 0 : m.dim0;
    int hi = grades[j] == 0 ? m.dim0 : D;
    for (int t = lo; t < hi; ++t) coords.push_back(t);
  } else {
    for (int t = 0; t < D; ++t) coords.push_back(t);
  }
  Mat rows;
  Vec rhs;
  for (int i = 0; i < static_cast<int>(placed.size()); ++i) {
    Vec row(coords.size(), 0);
    if (m.family == Family::GL) {
      if (grades[i] == grades[j]) continue;
      if (grades[j] == 0) {
        // <w, placed_i> = gram[j][i], placed_i of degree 1.
        for (size_t s = 0; s < coords.size(); ++s) {
          int acc = 0;
          for (int t = m.dim0; t < D; ++t)
            acc = F.add(acc, F.mul(m.at(coords[s], t), placed[i][t]));
          row[s] = acc;
        }
        rhs.push_back(gram[j][i]);
      } else {
        // <placed_i, w> = gram[i][j], placed_i of degree 0.
        for (size_t s = 0; s < coords.size(); ++s) {
          int acc = 0;
          for (int t = 0; t < m.dim0; ++t)
            acc = F.add(acc, F.mul(placed[i][t], m.at(t, coords[s])));
          row[s] = acc;
        }
        rhs.push_back(gram[i][j]);
      }
    } else {
      // <placed_i, w> = gram[i][j]; the mirrored constraint is forced by the
      // form's symmetry.
      for (size_t s = 0; s < coords.size(); ++s) {
        int acc = 0;
        for (int t = 0; t < D; ++t)
          acc = F.add(acc, F.mul(conj_of(m, placed[i][t]), m.at(t, coords[s])));
        row[s] = acc;
      }
      rhs.push_back(gram[i][j]);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) {
    out.w0.assign(coords.size(), 0);
    Mat id(coords.size(), Vec(coords.size(), 0));
    for (size_t s = 0; s < coords.size(); ++s) id[s][s] = 1;
    out.basis = std::move(id);
    out.coords = std::move(coords);
    return true;
  }
  auto sol = lin::solve(F, rows, rhs);
  if (!sol) return false;
  out.w0 = *sol;
  out.basis = lin::kernel_basis(F, rows);
  out.coords = std::move(coords);
  return true;
}

// Pairing constraints against the placed prefix plus (O/U) the norm condition;
// no injectivity test.
bool satisfies_constraints(const FormedSpace& m, const Mat& gram, const std::vector<int>& grades,
                           const Mat& placed, int j, const Vec& v) {
  for (int i = 0; i < static_cast<int>(placed.size()); ++i) {
    if (m.family == Family::GL) {
      if (grades[i] == grades[j]) continue;
      int got = grades[j] == 0 ? m.form(v, placed[i]) : m.form(placed[i], v);
      int want = grades[j] == 0 ? gram[j][i] : gram[i][j];
      if (got != want) return false;
    } else {
      if (m.form(placed[i], v) != gram[i][j]) return false;
    }
  }
  if (m.family == Family::O || m.family == Family::U)
    if (m.form(v, v) != gram[j][j]) return false;
  return true;
}

bool candidate_valid(const FormedSpace& m, const Mat& gram, const std::vector<int>& grades,
                     const Mat& placed, int j, const Vec& v, const Mat& span_rref) {
  if (!satisfies_constraints(m, gram, grades, placed, j, v)) return false;
  return !lin::in_span(*m.F, span_rref, v);
}

Mat same_grade_span(const FormedSpace& m, const std::vector<int>& grades, const Mat& placed,
                    int j) {
  Mat gens;
  for (int i = 0; i < static_cast<int>(placed.size()); ++i) {
    if (m.family == Family::GL && grades[i] != grades[j]) continue;
    gens.push_back(placed[i]);
  }
  return lin::rref(*m.F, gens);
}

// Vectors inside the span of the (same-grade) placed prefix that still match
// constraints and norm: the affine-set points that fail injectivity. The zero
// vector counts whenever it satisfies the constraints.
Int bad_span_count(const FormedSpace& m, const Mat& gram, const std::vector<int>& grades,
                   const Mat& placed, int j) {
  const Fq& F = *m.F;
  Mat gens;
  for (int i = 0; i < static_cast<int>(placed.size()); ++i) {
    if (m.family == Family::GL && grades[i] != grades[j]) continue;
    gens.push_back(placed[i]);
  }
  long qK = F.q();
  int g = static_cast<int>(gens.size());
  Int bad = 0;
  std::vector<int> coef(g, 0);
  std::function<void(int)> rec = [&](int i) {
    if (i == g) {
      Vec v(m.dim, 0);
      for (int s = 0; s < g; ++s) {
        if (coef[s] == 0) continue;
        for (int t = 0; t < m.dim; ++t) v[t] = F.add(v[t], F.mul(coef[s], gens[s][t]));
      }
      if (satisfies_constraints(m, gram, grades, placed, j, v)) bad += 1;
      return;
    }
    for (int c = 0; c < qK; ++c) {
      coef[i] = c;
      rec(i + 1);
    }
    coef[i] = 0;
  };
  rec(0);
  return bad;
}

std::optional<Vec> find_representative(const FormedSpace& m, const Mat& gram,
                                       const std::vector<int>& grades, const Mat& placed,
                                       int j, const AffineSet& aff) {
  const Fq& F = *m.F;
  long qK = F.q();
  int d = static_cast<int>(aff.basis.size());
  Mat span = same_grade_span(m, grades, placed, j);
  std::vector<int> coef(d, 0);
  std::optional<Vec> found;
  std::function<bool(int)> rec = [&](int i) -> bool {
    if (i == d) {
      Vec packed = aff.w0;
      for (int s = 0; s < d; ++s)
        if (coef[s] != 0)
          for (size_t t = 0; t < packed.size(); ++t)
            packed[t] = F.add(packed[t], F.mul(coef[s], aff.basis[s][t]));
      Vec v = expand_coords(m, aff.coords, packed);
      if (!candidate_valid(m, gram, grades, placed, j, v, span)) return false;
      found = std::move(v);
      return true;
    }
    for (int c = 0; c < qK; ++c) {
      coef[i] = c;
      if (rec(i + 1)) return true;
    }
    coef[i] = 0;
    return false;
  };
  rec(0);
  return found;
}

struct DepthResult {
  Int count;
  Mat placed;  // representative prefix (length depth+1); empty when count == 0
};

std::map<std::string, DepthResult>& ext_memo() {
  static std::map<std::string, DepthResult> memo;
  return memo;
}

std::string prefix_key(const StructureClass& mcls, long q, const Mat& gram,
                       const std::vector<int>& grades, int j) {
  std::ostringstream os;
  os << mcls.str() << "#q" << q << '#';
  for (int t = 0; t <= j; ++t) os << (grades.empty() ? 0 : grades[t]);
  os << '#';
  for (int r = 0; r <= j; ++r)
    for (int c = 0; c <= j; ++c) os << gram[r][c] << ',';
  return os.str();
}

// Product of per-depth extension counts. Soundness rests on the ambient being
// nondegenerate and canonical: the isometry group acts transitively on tuples
// with equal Gram data, so every branch of the placement tree has the same
// number of extensions and one representative branch suffices. Entries are
// memoized by the Gram prefix; a seeded prefix with the same Gram reads the
// same entries.
Int nondeg_extension_count(const FormedSpace& m, const StructureClass& mcls, const Mat& gram,
                           const std::vector<int>& grades, int fixed, const Mat& seed) {
  int k = static_cast<int>(gram.size());
  Mat placed = seed;
  Int total = 1;
  for (int j = fixed; j < k; ++j) {
    std::string key = prefix_key(mcls, m.q0, gram, grades, j);
    bool hit = false;
    {
      std::lock_guard<std::mutex> lock(g_ext_mu);
      auto it = ext_memo().find(key);
      if (it != ext_memo().end()) {
        if (it->second.count == 0) return 0;
        total *= it->second.count;
        placed = it->second.placed;
        hit = true;
      }
    }
    if (hit) continue;
    AffineSet aff;
    Int count_j = 0;
    if (constraint_set(m, gram, grades, placed, j, aff)) {
      Int raw;
      if (m.family == Family::O || m.family == Family::U) {
        Mat dirs;
        dirs.reserve(aff.basis.size());
        for (const auto& b : aff.basis) dirs.push_back(expand_coords(m, aff.coords, b));
        raw = affine_norm_count(m, dirs, expand_coords(m, aff.coords, aff.w0), gram[j][j]);
      } else {
        raw = int_pow(Int(m.F->q()), aff.basis.size());
      }
      count_j = raw - bad_span_count(m, gram, grades, placed, j);
    }
    DepthResult res;
    res.count = count_j;
    if (count_j > 0) {
      auto rep = find_representative(m, gram, grades, placed, j, aff);
      require(rep.has_value(), ErrorKind::internal_consistency,
              "positive count but no representative");
      placed.push_back(*rep);
      res.placed = placed;
    }
    {
      std::lock_guard<std::mutex> lock(g_ext_mu);
      ext_memo().emplace(key, res);
    }
    if (count_j == 0) return 0;
    total *= count_j;
  }
  return total;
}

// Gram matrix and grade vector of a class's canonical model, rows/columns
// rearranged into placement order.
std::vector<int> placement_order(const StructureClass& c) {
  std::vector<int> order;
  int d = c.dim();
  if (c.family != Family::GL) {
    order.resize(d);
    for (int i = 0; i < d; ++i) order[i] = i;
    return order;
  }
  int dim0 = c.l + c.m;
  for (int i = 0; i < c.l; ++i) {
    order.push_back(i);
    order.push_back(dim0 + i);
  }
  for (int i = 0; i < c.m; ++i) order.push_back(c.l + i);
  for (int i = 0; i < c.n; ++i) order.push_back(dim0 + c.l + i);
  return order;
}

void placement_gram(const StructureClass& a, long q, Mat& gram, std::vector<int>& grades) {
  FormedSpace model = canonical_model(a, q);
  std::vector<int> order = placement_order(a);
  int k = model.dim;
  gram.assign(k, Vec(k, 0));
  grades.assign(k, 0);
  for (int i = 0; i < k; ++i) {
    grades[i] = a.family == Family::GL && order[i] >= model.dim0 ? 1 : 0;
    for (int j = 0; j < k; ++j) gram[i][j] = model.at(order[i], order[j]);
  }
}

Int injective_map_count(long qK, int s, int rho) {
  // Injective linear maps from an s-dimensional space into a rho-dimensional one.
  Int total = 1;
  Int qr = int_pow(Int(qK), static_cast<unsigned long>(rho));
  for (int i = 0; i < s; ++i) total *= qr - int_pow(Int(qK), static_cast<unsigned long>(i));
  return total;
}

}  // namespace

Int count_embeddings(const StructureClass& a, const StructureClass& m, long q) {
  require(a.family == m.family, ErrorKind::input, "family mismatch");
  coefficient_field(a.family, q);  // validates q for the family
  long qK = coefficient_field_size(a.family, q);

  // Split off A's radical: an embedding projects to the nondegenerate part of
  // M with some kernel K inside A's radical, extended by a map to M's radical
  // that is injective on K. Sum over the dimension(s) of K.
  int alpha0, alpha1, rho0, rho1, a_side0, a_side1;
  if (a.family == Family::GL) {
    alpha0 = a.m;
    alpha1 = a.n;
    rho0 = m.m;
    rho1 = m.n;
    a_side0 = a.l + a.m;
    a_side1 = a.l + a.n;
  } else {
    alpha0 = a.n;
    alpha1 = 0;
    rho0 = m.n;
    rho1 = 0;
    a_side0 = a.dim();
    a_side1 = 0;
  }
  StructureClass m_nd = nondegenerate_part(m);
  FormedSpace m_model = canonical_model(m_nd, q);

  Int total = 0;
  for (int s0 = 0; s0 <= alpha0; ++s0) {
    for (int s1 = 0; s1 <= (a.family == Family::GL ? alpha1 : 0); ++s1) {
      StructureClass a_red = radical_reduced(a, s0, s1);
      Mat gram;
      std::vector<int> grades;
      placement_gram(a_red, q, gram, grades);
      Int core = nondeg_extension_count(m_model, m_nd, gram, grades, 0, {});
      if (core == 0) continue;
      Int term = gauss_binom(alpha0, s0, Int(qK)) * core * injective_map_count(qK, s0, rho0) *
                 int_pow(Int(qK), static_cast<unsigned long>(rho0) * (a_side0 - s0));
      if (a.family == Family::GL)
        term *= gauss_binom(alpha1, s1, Int(qK)) * injective_map_count(qK, s1, rho1) *
                int_pow(Int(qK), static_cast<unsigned long>(rho1) * (a_side1 - s1));
      total += term;
    }
  }
  return total;
}

Int count_embeddings(const FormedSpace& a, const FormedSpace& m) {
  require(a.family == m.family && a.q0 == m.q0, ErrorKind::input, "family/field mismatch");
  return count_embeddings(classify(a), classify(m), a.q0);
}

Int count_embeddings_extending(const FormedSpace& b, const Mat& prefix_vectors,
                               const Mat& prefix_images, const FormedSpace& m) {
  require(b.family == m.family && b.F == m.F, ErrorKind::input, "family/field mismatch");
  require(prefix_vectors.size() == prefix_images.size(), ErrorKind::input,
          "prefix size mismatch");
  const Fq& F = *m.F;
  StructureClass mcls = classify(m);
  bool nondeg = m.family == Family::GL ? (mcls.m == 0 && mcls.n == 0) : mcls.n == 0;
  require(nondeg, ErrorKind::input, "ambient must be nondegenerate");
  {
    FormedSpace canon = canonical_model(mcls, m.q0);
    require(canon.gram == m.gram && canon.dim0 == m.dim0, ErrorKind::input,
            "ambient must be the canonical model of its class");
  }
  // Adapted basis of b: the prefix rows first (pure grade for GL), then a
  // greedy completion by standard vectors per grade.
  int grade_of = 0;
  Mat adapted;
  std::vector<int> grades;
  auto row_grade = [&](const Vec& v) {
    bool g0 = false, g1 = false;
    for (int c = 0; c < b.dim; ++c)
      if (v[c] != 0) (c < b.dim0 ? g0 : g1) = true;
    require(!(g0 && g1), ErrorKind::input, "prefix vector mixes grades");
    return g1 ? 1 : 0;
  };
  for (const auto& v : prefix_vectors) {
    require(static_cast<int>(v.size()) == b.dim, ErrorKind::input, "prefix vector size");
    grade_of = b.family == Family::GL ? row_grade(v) : 0;
    adapted.push_back(v);
    grades.push_back(grade_of);
  }
  auto complete_grade = [&](int lo, int hi, int grade) {
    Mat span;
    for (size_t i = 0; i < adapted.size(); ++i)
      if (grades[i] == grade) span.push_back(adapted[i]);
    int have = lin::rank(F, span);
    for (int c = lo; c < hi; ++c) {
      Vec e(b.dim, 0);
      e[c] = 1;
      Mat trial = span;
      trial.push_back(e);
      if (lin::rank(F, trial) > have) {
        span.push_back(e);
        adapted.push_back(e);
        grades.push_back(grade);
        ++have;
      }
    }
  };
  if (b.family == Family::GL) {
    complete_grade(0, b.dim0, 0);
    complete_grade(b.dim0, b.dim, 1);
  } else {
    complete_grade(0, b.dim, 0);
  }
  require(static_cast<int>(adapted.size()) == b.dim, ErrorKind::input,
          "prefix vectors are dependent");
  int k = b.dim;
  Mat gram(k, Vec(k));
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) gram[i][j] = b.form(adapted[i], adapted[j]);
  int fixed = static_cast<int>(prefix_vectors.size());
  for (int i = 0; i < fixed; ++i)
    for (int j = 0; j < fixed; ++j)
      require(m.form(prefix_images[i], prefix_images[j]) == gram[i][j], ErrorKind::input,
              "prescribed images do not match the prefix Gram");
  // Independence of the seed images (per grade for GL), and grade matching.
  if (b.family == Family::GL) {
    Mat s0, s1;
    for (int i = 0; i < fixed; ++i) {
      for (int c = 0; c < m.dim; ++c)
        require(prefix_images[i][c] == 0 || (c < m.dim0) == (grades[i] == 0),
                ErrorKind::input, "prescribed image in the wrong grade block");
      (grades[i] == 0 ? s0 : s1).push_back(prefix_images[i]);
    }
    require(lin::rank(F, s0) == static_cast<int>(s0.size()) &&
                lin::rank(F, s1) == static_cast<int>(s1.size()),
            ErrorKind::input, "prescribed images are dependent");
  } else {
    require(lin::rank(F, prefix_images) == fixed, ErrorKind::input,
            "prescribed images are dependent");
  }
  return nondeg_extension_count(m, mcls, gram, grades, fixed, prefix_images);
}

// ---------------------------------------------------------------------------
// Reference backtracking (no homogeneity assumption). Places images in basis
// order; candidates come from the affine constraint sets.

namespace {

void backtrack(const FormedSpace& m, Mat& placed, const std::vector<int>& grades,
               const Mat& gram, const std::function<void(const Mat&)>& emit) {
  int k = static_cast<int>(gram.size());
  int j = static_cast<int>(placed.size());
  if (j == k) {
    emit(placed);
    return;
  }
  AffineSet aff;
  if (!constraint_set(m, gram, grades, placed, j, aff)) return;
  const Fq& F = *m.F;
  long qK = F.q();
  int d = static_cast<int>(aff.basis.size());
  Mat span = same_grade_span(m, grades, placed, j);
  std::vector<int> coef(d, 0);
  std::function<void(int)> rec = [&](int i) {
    if (i == d) {
      Vec packed = aff.w0;
      for (int s = 0; s < d; ++s)
        if (coef[s] != 0)
          for (size_t t = 0; t < packed.size(); ++t)
            packed[t] = F.add(packed[t], F.mul(coef[s], aff.basis[s][t]));
      Vec v = expand_coords(m, aff.coords, packed);
      if (!candidate_valid(m, gram, grades, placed, j, v, span)) return;
      placed.push_back(std::move(v));
      backtrack(m, placed, grades, gram, emit);
      placed.pop_back();
      return;
    }
    for (int c = 0; c < qK; ++c) {
      coef[i] = c;
      rec(i + 1);
    }
    coef[i] = 0;
  };
  rec(0);
}

void basis_gram(const FormedSpace& a, Mat& gram, std::vector<int>& grades) {
  gram.assign(a.dim, Vec(a.dim, 0));
  grades.assign(a.dim, 0);
  for (int i = 0; i < a.dim; ++i) {
    grades[i] = a.family == Family::GL && i >= a.dim0 ? 1 : 0;
    for (int j = 0; j < a.dim; ++j) gram[i][j] = a.at(i, j);
  }
}

}  // namespace

void enumerate_embeddings(const FormedSpace& a, const FormedSpace& m,
                          const std::function<void(const Mat&)>& visit) {
  require(a.family == m.family && a.F == m.F, ErrorKind::input, "family/field mismatch");
  Mat gram;
  std::vector<int> grades;
  basis_gram(a, gram, grades);
  Mat placed;
  backtrack(m, placed, grades, gram, visit);
}

Int count_embeddings_naive(const FormedSpace& a, const FormedSpace& m) {
  Int n = 0;
  enumerate_embeddings(a, m, [&](const Mat&) { n += 1; });
  return n;
}

std::optional<Mat> find_first_embedding(const FormedSpace& a, const FormedSpace& m) {
  // Same traversal as enumerate_embeddings, stopping at the first hit. The
  // traversal order is deterministic (affine sets are scanned in coefficient
  // odometer order).
  require(a.family == m.family && a.F == m.F, ErrorKind::input, "family/field mismatch");
  Mat gram;
  std::vector<int> grades;
  basis_gram(a, gram, grades);
  std::optional<Mat> out;
  struct Stop {};
  Mat placed;
  try {
    backtrack(m, placed, grades, gram, [&](const Mat& rows) {
      out = rows;
      throw Stop{};
    });
  } catch (const Stop&) {
  }
  return out;
}

Int twisted_fixed_count(const FormedSpace& a, const Mat& h, const FormedSpace& m,
                        const Mat& g) {
  require(static_cast<int>(h.size()) == a.dim && static_cast<int>(g.size()) == m.dim,
          ErrorKind::input, "isometry size mismatch");
  const Fq& F = *m.F;
  Mat gram;
  std::vector<int> grades;
  basis_gram(a, gram, grades);
  Int n = 0;
  // Backtracking with the intertwining constraint g(i(x)) = i(h(x)) checked as
  // soon as every basis vector in the support of h(x) has been placed.
  std::function<void(Mat&)> step = [&](Mat& placed) {
    int j = static_cast<int>(placed.size());
    if (j == a.dim) {
      n += 1;
      return;
    }
    AffineSet aff;
    if (!constraint_set(m, gram, grades, placed, j, aff)) return;
    long qK = F.q();
    int d = static_cast<int>(aff.basis.size());
    Mat span = same_grade_span(m, grades, placed, j);
    std::vector<int> coef(d, 0);
    std::function<void(int)> rec = [&](int i) {
      if (i == d) {
        Vec packed = aff.w0;
        for (int s = 0; s < d; ++s)
          if (coef[s] != 0)
            for (size_t t = 0; t < packed.size(); ++t)
              packed[t] = F.add(packed[t], F.mul(coef[s], aff.basis[s][t]));
        Vec v = expand_coords(m, aff.coords, packed);
        if (!candidate_valid(m, gram, grades, placed, j, v, span)) return;
        placed.push_back(std::move(v));
        bool ok = true;
        for (int t = 0; t < a.dim && ok; ++t) {
          bool supported = true;
          for (int s = 0; s < a.dim; ++s)
            if (h[t][s] != 0 && s >= static_cast<int>(placed.size())) supported = false;
          if (!supported || t >= static_cast<int>(placed.size())) continue;
          // g applied to the placed image of basis t:
          Vec lhs(m.dim, 0);
          for (int r = 0; r < m.dim; ++r)
            for (int s2 = 0; s2 < m.dim; ++s2)
              lhs[r] = F.add(lhs[r], F.mul(g[r][s2], placed[t][s2]));
          Vec rhs(m.dim, 0);
          for (int s = 0; s < a.dim; ++s) {
            if (h[t][s] == 0) continue;
            for (int r = 0; r < m.dim; ++r)
              rhs[r] = F.add(rhs[r], F.mul(h[t][s], placed[s][r]));
          }
          ok = lhs == rhs;
        }
        if (ok) step(placed);
        placed.pop_back();
      } else {
        for (int c = 0; c < qK; ++c) {
          coef[i] = c;
          rec(i + 1);
        }
        coef[i] = 0;
      }
    };
    rec(0);
  };
  Mat placed;
  step(placed);
  return n;
}

// ---------------------------------------------------------------------------
// Amalgam orbits.

namespace {

struct SumLayout {
  FormedSpace sum;                     // block diagonal, cross entries zero
  std::vector<std::vector<int>> pos;   // pos[t][i]: coordinate of part t, basis i
  std::vector<FormedSpace> models;
};

SumLayout make_sum(const std::vector<StructureClass>& parts, long q) {
  SumLayout L;
  require(!parts.empty(), ErrorKind::input, "no parts");
  Family fam = parts[0].family;
  for (const auto& p : parts)
    require(p.family == fam, ErrorKind::input, "mixed families in amalgam");
  const Fq& F = coefficient_field(fam, q);
  int dim = 0, dim0 = 0;
  for (const auto& p : parts) {
    L.models.push_back(canonical_model(p, q));
    dim += L.models.back().dim;
    dim0 += L.models.back().dim0;
  }
  L.sum.family = fam;
  L.sum.F = &F;
  L.sum.q0 = q;
  L.sum.dim = dim;
  L.sum.dim0 = fam == Family::GL ? dim0 : dim;
  L.sum.gram.assign(static_cast<size_t>(dim) * dim, 0);
  // Degree-0 coordinates of all parts first (GL); plain concatenation else.
  int cursor0 = 0, cursor1 = L.sum.dim0;
  for (const auto& model : L.models) {
    std::vector<int> p(model.dim);
    for (int i = 0; i < model.dim; ++i) {
      if (fam == Family::GL && i >= model.dim0)
        p[i] = cursor1++;
      else
        p[i] = cursor0++;
    }
    L.pos.push_back(std::move(p));
  }
  for (size_t t = 0; t < L.models.size(); ++t)
    for (int i = 0; i < L.models[t].dim; ++i)
      for (int j = 0; j < L.models[t].dim; ++j)
        L.sum.at(L.pos[t][i], L.pos[t][j]) = L.models[t].at(i, j);
  return L;
}

struct Slot {
  int s, t;    // part indices, s < t
  int i, j;    // basis indices within the parts
  int r, c;    // sum coordinates (row in part s, column in part t)
};

std::vector<Slot> cross_slots(const SumLayout& L) {
  std::vector<Slot> slots;
  int P = static_cast<int>(L.models.size());
  for (int t = 1; t < P; ++t)
    for (int s = 0; s < t; ++s)
      for (int i = 0; i < L.models[s].dim; ++i)
        for (int j = 0; j < L.models[t].dim; ++j) {
          if (L.sum.family == Family::GL) {
            bool i0 = i < L.models[s].dim0, j0 = j < L.models[t].dim0;
            if (i0 == j0) continue;
            // Store with the degree-0 index as the row.
            if (i0)
              slots.push_back({s, t, i, j, L.pos[s][i], L.pos[t][j]});
            else
              slots.push_back({s, t, i, j, L.pos[t][j], L.pos[s][i]});
          } else {
            slots.push_back({s, t, i, j, L.pos[s][i], L.pos[t][j]});
          }
        }
  // Deterministic order: by the later part, then lexicographically.
  std::sort(slots.begin(), slots.end(), [](const Slot& a, const Slot& b) {
    return std::tuple(a.t, a.j, a.s, a.i) < std::tuple(b.t, b.j, b.s, b.i);
  });
  return slots;
}

void set_slot(FormedSpace& sum, const Slot& sl, int v) {
  sum.at(sl.r, sl.c) = v;
  if (sum.family == Family::GL) return;
  const Fq& F = *sum.F;
  int mirror = v;
  if (sum.family == Family::Sp) mirror = F.neg(v);
  if (sum.family == Family::U) mirror = norm_and_conjugate(F, v).conj;
  sum.at(sl.c, sl.r) = mirror;
}

// Radical of the (possibly graded) combined form, as full-coordinate rows.
Mat sum_radical(const FormedSpace& sum) {
  const Fq& F = *sum.F;
  if (sum.family != Family::GL) {
    Mat g(sum.dim, Vec(sum.dim));
    for (int i = 0; i < sum.dim; ++i)
      for (int j = 0; j < sum.dim; ++j) g[i][j] = sum.at(i, j);
    return lin::kernel_basis(F, g);
  }
  // Graded radical: rad0 = {x in V0 : <x, V1> = 0}, rad1 likewise. With no
  // opposite-grade coordinates the whole grade is radical (kernel of a map
  // with zero constraints).
  Mat rad;
  int d0 = sum.dim0, d1 = sum.dim1();
  auto grade_kernel = [&](int rows, int cols, auto entry) {
    if (rows == 0) {
      Mat full(cols, Vec(cols, 0));
      for (int i = 0; i < cols; ++i) full[i][i] = 1;
      return full;
    }
    Mat m(rows, Vec(cols));
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) m[r][c] = entry(r, c);
    return lin::kernel_basis(F, m);
  };
  for (const auto& x : grade_kernel(d1, d0, [&](int t, int s) { return sum.at(s, d0 + t); })) {
    Vec full(sum.dim, 0);
    for (int s = 0; s < d0; ++s) full[s] = x[s];
    rad.push_back(std::move(full));
  }
  for (const auto& y : grade_kernel(d0, d1, [&](int s, int t) { return sum.at(s, d0 + t); })) {
    Vec full(sum.dim, 0);
    for (int t = 0; t < d1; ++t) full[d0 + t] = y[t];
    rad.push_back(std::move(full));
  }
  return rad;
}

// All reduced-echelon s x d matrices over F (bases of s-dimensional
// subspaces of F^d), in deterministic order.
void foreach_rref(const Fq& F, int d, int s, const std::function<void(const Mat&)>& cb) {
  if (s == 0) {
    cb(Mat{});
    return;
  }
  if (s > d) return;
  std::vector<int> pivots(s);
  std::function<void(int, int)> choose = [&](int idx, int from) {
    if (idx == s) {
      // Free entries: row i, column c with c > pivots[i] and c not a pivot.
      std::vector<std::pair<int, int>> free_pos;
      std::vector<bool> is_pivot(d, false);
      for (int i = 0; i < s; ++i) is_pivot[pivots[i]] = true;
      for (int i = 0; i < s; ++i)
        for (int c = pivots[i] + 1; c < d; ++c)
          if (!is_pivot[c]) free_pos.push_back({i, c});
      Mat rows(s, Vec(d, 0));
      for (int i = 0; i < s; ++i) rows[i][pivots[i]] = 1;
      std::function<void(size_t)> fill = [&](size_t fp) {
        if (fp == free_pos.size()) {
          cb(rows);
          return;
        }
        auto [ri, ci] = free_pos[fp];
        for (int v = 0; v < F.q(); ++v) {
          rows[ri][ci] = v;
          fill(fp + 1);
        }
        rows[ri][ci] = 0;
      };
      fill(0);
      return;
    }
    for (int c = from; c <= d - (s - idx); ++c) {
      pivots[idx] = c;
      choose(idx + 1, c + 1);
    }
  };
  choose(0, 0);
  }

// K (rows in sum coordinates) meets part t trivially iff no nonzero
// combination of the rows is supported inside part t's coordinates alone,
// i.e. the rows restricted to the complementary coordinates keep full rank.
bool meets_part_trivially(const Fq& F, const Mat& k_rows, const SumLayout& L, int t) {
  if (k_rows.empty()) return true;
  std::vector<bool> in_part(L.sum.dim, false);
  for (int i : L.pos[t]) in_part[i] = true;
  Mat outside;
  for (const auto& row : k_rows) {
    Vec r;
    for (int c = 0; c < L.sum.dim; ++c)
      if (!in_part[c]) r.push_back(row[c]);
    outside.push_back(std::move(r));
  }
  return lin::rank(F, outside) == static_cast<int>(k_rows.size());
}

// Quotient form of the filled sum on a complement of the kernel rows
// (complement chosen per grade for GL), with the complement coordinates.
struct QuotientData {
  FormedSpace qt;
  std::vector<int> comp_idx;
};

QuotientData quotient_space(const FormedSpace& filled, const Mat& kernel_rref) {
  const Fq& F = *filled.F;
  int D = filled.dim;
  int s = static_cast<int>(kernel_rref.size());
  Mat span = kernel_rref;
  std::vector<int> comp_idx;
  int have = s;
  auto try_extend = [&](int i) {
    Vec e(D, 0);
    e[i] = 1;
    Mat trial = span;
    trial.push_back(e);
    if (lin::rank(F, trial) > have) {
      span.push_back(e);
      comp_idx.push_back(i);
      ++have;
    }
  };
  int split = 0;
  if (filled.family == Family::GL) {
    for (int i = 0; i < filled.dim0; ++i) try_extend(i);
    split = static_cast<int>(comp_idx.size());
    for (int i = filled.dim0; i < D; ++i) try_extend(i);
  } else {
    for (int i = 0; i < D; ++i) try_extend(i);
  }
  FormedSpace qt;
  qt.family = filled.family;
  qt.F = filled.F;
  qt.q0 = filled.q0;
  qt.dim = D - s;
  qt.dim0 = filled.family == Family::GL ? split : qt.dim;
  qt.gram.assign(static_cast<size_t>(qt.dim) * qt.dim, 0);
  for (int i = 0; i < qt.dim; ++i)
    for (int j = 0; j < qt.dim; ++j) {
      Vec ei(D, 0), ej(D, 0);
      ei[comp_idx[i]] = 1;
      ej[comp_idx[j]] = 1;
      qt.at(i, j) = filled.form(ei, ej);
    }
  return QuotientData{std::move(qt), std::move(comp_idx)};
}

// Quotient of the filled sum by the kernel rows, together with the images of
// each part's basis vectors in the quotient coordinates.
AmalgamOrbit build_orbit(const SumLayout& L, const FormedSpace& filled, const Mat& kernel,
                         const std::vector<StructureClass>& parts) {
  const Fq& F = *filled.F;
  AmalgamOrbit orb;
  orb.parts = parts;
  orb.joint = filled;
  orb.kernel = lin::rref(F, kernel);
  int D = filled.dim;
  int s = static_cast<int>(orb.kernel.size());
  QuotientData qd = quotient_space(filled, orb.kernel);
  const std::vector<int>& comp_idx = qd.comp_idx;
  orb.cls = classify(qd.qt);
  // Express each part's basis vectors through (kernel + complement) and keep
  // the complement coordinates.
  Mat basis = orb.kernel;
  for (int i : comp_idx) {
    Vec e(D, 0);
    e[i] = 1;
    basis.push_back(std::move(e));
  }
  // Solve x * basis = e_coordinate for each needed vector: transpose solve.
  Mat bt(D, Vec(basis.size()));
  for (size_t r = 0; r < basis.size(); ++r)
    for (int c = 0; c < D; ++c) bt[c][r] = basis[r][c];
  orb.part_offsets.assign(parts.size() + 1, 0);
  for (size_t t = 0; t < parts.size(); ++t) {
    orb.part_offsets[t + 1] = orb.part_offsets[t] + L.models[t].dim;
    for (int i = 0; i < L.models[t].dim; ++i) {
      Vec e(D, 0);
      e[L.pos[t][i]] = 1;
      auto sol = lin::solve(F, bt, e);
      require(sol.has_value(), ErrorKind::internal_consistency, "basis solve failed");
      Vec img(sol->begin() + s, sol->end());
      orb.quotient_maps_cat.push_back(std::move(img));
    }
  }
  return orb;
}

// Kernel stage shared by the amalgam paths without prescribed pairwise
// kernels: enumerates the kernels K with k_min <= K <= rad(filled) that meet
// every part trivially (graded for GL). The orbit path builds one orbit per
// kernel; the counting path only tallies quotient classes. Because K lies in
// the radical, the quotient class is the k_min-quotient's class with its
// radical shrunk by dim(K/k_min) (per grade for GL), so the counting path
// classifies once per fill instead of once per kernel.
void orbit_kernel_stage(const SumLayout& L, const FormedSpace& filled, const Mat& k_min_r,
                        const std::vector<StructureClass>& parts,
                        std::vector<AmalgamOrbit>& out) {
  const Fq& F = *filled.F;
  Mat rad = sum_radical(filled);
  Mat rad_r = lin::rref(F, rad);
  for (const auto& krow : k_min_r)
    if (!lin::in_span(F, rad_r, krow)) return;
  Mat quot_dirs;
  {
    Mat span = k_min_r;
    int have = static_cast<int>(k_min_r.size());
    for (const auto& r : rad) {
      Mat trial = span;
      trial.push_back(r);
      if (lin::rank(F, trial) > have) {
        span.push_back(r);
        quot_dirs.push_back(r);
        ++have;
      }
    }
  }
  int dq = static_cast<int>(quot_dirs.size());
  for (int s = 0; s <= dq; ++s) {
    foreach_rref(F, dq, s, [&](const Mat& coeffs) {
      Mat k_rows = k_min_r;
      for (const auto& co : coeffs) {
        Vec lift(L.sum.dim, 0);
        for (int i = 0; i < dq; ++i) {
          if (co[i] == 0) continue;
          for (int c = 0; c < L.sum.dim; ++c)
            lift[c] = F.add(lift[c], F.mul(co[i], quot_dirs[i][c]));
        }
        k_rows.push_back(std::move(lift));
      }
      if (filled.family == Family::GL) {
        Mat graded;
        for (const auto& row : lin::rref(F, k_rows)) {
          Vec r0(L.sum.dim, 0), r1(L.sum.dim, 0);
          bool has0 = false, has1 = false;
          for (int c = 0; c < L.sum.dim; ++c) {
            if (row[c] == 0) continue;
            (c < L.sum.dim0 ? r0 : r1)[c] = row[c];
            (c < L.sum.dim0 ? has0 : has1) = true;
          }
          if (has0 && has1) return;  // not graded: such a kernel never arises
          graded.push_back(has0 ? r0 : r1);
        }
        k_rows = graded;
      }
      Mat k_r = lin::rref(F, k_rows);
      for (size_t t = 0; t < parts.size(); ++t)
        if (!meets_part_trivially(F, k_r, L, static_cast<int>(t))) return;
      out.push_back(build_orbit(L, filled, k_r, parts));
    });
  }
}

void count_kernel_stage(const SumLayout& L, const FormedSpace& filled, const Mat& k_min_r,
                        std::map<StructureClass, Int>& counts) {
  const Fq& F = *filled.F;
  Mat rad = sum_radical(filled);
  Mat rad_r = lin::rref(F, rad);
  for (const auto& krow : k_min_r)
    if (!lin::in_span(F, rad_r, krow)) return;
  Mat quot_dirs;
  {
    Mat span = k_min_r;
    int have = static_cast<int>(k_min_r.size());
    for (const auto& r : rad) {
      Mat trial = span;
      trial.push_back(r);
      if (lin::rank(F, trial) > have) {
        span.push_back(r);
        quot_dirs.push_back(r);
        ++have;
      }
    }
  }
  int parts_n = static_cast<int>(L.models.size());
  for (int t = 0; t < parts_n; ++t)
    require(meets_part_trivially(F, k_min_r, L, t), ErrorKind::internal_consistency,
            "minimal amalgam kernel meets a part");
  StructureClass base = classify(quotient_space(filled, k_min_r).qt);
  int m0 = 0, m1 = 0;  // per-grade row counts of k_min (its rref rows are pure)
  if (filled.family == Family::GL) {
    for (const auto& row : k_min_r) {
      bool g1 = false;
      for (int c = filled.dim0; c < filled.dim; ++c)
        if (row[c] != 0) g1 = true;
      (g1 ? m1 : m0) += 1;
    }
  }
  int dq = static_cast<int>(quot_dirs.size());
  for (int s = 0; s <= dq; ++s) {
    foreach_rref(F, dq, s, [&](const Mat& coeffs) {
      Mat k_rows = k_min_r;
      for (const auto& co : coeffs) {
        Vec lift(L.sum.dim, 0);
        for (int i = 0; i < dq; ++i) {
          if (co[i] == 0) continue;
          for (int c = 0; c < L.sum.dim; ++c)
            lift[c] = F.add(lift[c], F.mul(co[i], quot_dirs[i][c]));
        }
        k_rows.push_back(std::move(lift));
      }
      int reduce0 = s, reduce1 = 0;
      if (filled.family == Family::GL) {
        int k0 = 0, k1 = 0;
        for (const auto& row : lin::rref(F, k_rows)) {
          bool has0 = false, has1 = false;
          for (int c = 0; c < L.sum.dim; ++c) {
            if (row[c] == 0) continue;
            (c < L.sum.dim0 ? has0 : has1) = true;
          }
          if (has0 && has1) return;  // not graded: such a kernel never arises
          (has0 ? k0 : k1) += 1;
        }
        reduce0 = k0 - m0;
        reduce1 = k1 - m1;
      }
      for (int t = 0; t < parts_n; ++t)
        if (!meets_part_trivially(F, k_rows, L, t)) return;
      counts[radical_reduced(base, reduce0, reduce1)] += 1;
    });
  }
}

// Shared cross-block enumeration for amalgams over a fixed base: fixes the
// first embeddings of a into b and into c, then enumerates the cross entries
// whose combined form pairs the antidiagonal copy of a to zero, pruning each
// constraint as soon as the last slot touching its coordinate is set. Calls
// leaf(L, filled, delta_r) for every surviving fill.
void relative_fill_enumerate(const StructureClass& a, const StructureClass& b,
                             const StructureClass& c, long q,
                             const std::function<void(const SumLayout&, const FormedSpace&,
                                                      const Mat&)>& leaf) {
  FormedSpace am = canonical_model(a, q);
  FormedSpace bm = canonical_model(b, q);
  FormedSpace cm = canonical_model(c, q);
  auto eb = find_first_embedding(am, bm);
  auto ec = find_first_embedding(am, cm);
  require(eb.has_value() && ec.has_value(), ErrorKind::input,
          "base class does not embed into both factors");
  SumLayout L = make_sum({b, c}, q);
  const Fq& F = *L.sum.F;
  Mat delta;
  for (int i = 0; i < am.dim; ++i) {
    Vec row(L.sum.dim, 0);
    for (int j = 0; j < bm.dim; ++j) row[L.pos[0][j]] = (*eb)[i][j];
    for (int j = 0; j < cm.dim; ++j) row[L.pos[1][j]] = F.neg((*ec)[i][j]);
    delta.push_back(std::move(row));
  }
  Mat delta_r = lin::rref(F, delta);

  std::vector<Slot> slots = cross_slots(L);
  FormedSpace filled = L.sum;
  std::vector<std::vector<int>> check_after(slots.size());
  std::vector<int> check_upfront;
  {
    std::map<int, int> last_touch;
    for (size_t si = 0; si < slots.size(); ++si) {
      last_touch[slots[si].r] = static_cast<int>(si);
      last_touch[slots[si].c] = static_cast<int>(si);
    }
    for (int w = 0; w < L.sum.dim; ++w) {
      auto it = last_touch.find(w);
      if (it == last_touch.end())
        check_upfront.push_back(w);
      else
        check_after[it->second].push_back(w);
    }
  }
  auto delta_pairing_ok = [&](int w_coord) {
    Vec e(L.sum.dim, 0);
    e[w_coord] = 1;
    for (const auto& drow : delta)
      if (filled.family == Family::GL) {
        if (filled.form(drow, e) != 0 || filled.form(e, drow) != 0) return false;
      } else {
        if (filled.form(drow, e) != 0) return false;
      }
    return true;
  };
  for (int w : check_upfront)
    if (!delta_pairing_ok(w)) return;
  std::function<void(size_t)> rec = [&](size_t si) {
    if (si == slots.size()) {
      leaf(L, filled, delta_r);
      return;
    }
    for (int v = 0; v < F.q(); ++v) {
      set_slot(filled, slots[si], v);
      bool ok = true;
      for (int w : check_after[si])
        if (!delta_pairing_ok(w)) {
          ok = false;
          break;
        }
      if (ok) rec(si + 1);
    }
    set_slot(filled, slots[si], 0);
  };
  rec(0);
}

}  // namespace

std::string AmalgamOrbit::label() const {
  std::ostringstream os;
  os << "[";
  for (size_t t = 0; t < parts.size(); ++t) os << (t ? "," : "") << parts[t].str();
  os << "];cross=";
  for (int i = 0; i < joint.dim; ++i)
    for (int j = 0; j < joint.dim; ++j) os << joint.at(i, j) << (j + 1 < joint.dim ? "," : ";");
  os << "ker=";
  for (const auto& row : kernel) {
    for (int x : row) os << x << ',';
    os << '|';
  }
  return os.str();
}

Mat AmalgamOrbit::part_map(int t) const {
  Mat rows;
  for (int i = part_offsets[t]; i < part_offsets[t + 1]; ++i)
    rows.push_back(quotient_maps_cat[i]);
  return rows;
}

std::vector<AmalgamOrbit> constrained_amalgam_orbits(const std::vector<StructureClass>& parts,
                                                     const std::vector<PrescribedPair>& pairs,
                                                     long q) {
  SumLayout L = make_sum(parts, q);
  const Fq& F = *L.sum.F;
  std::vector<Slot> slots = cross_slots(L);

  // Fill prescribed cross entries; collect the remaining free slots.
  std::vector<int> fixed_value(slots.size(), -1);
  for (const auto& pp : pairs) {
    for (size_t si = 0; si < slots.size(); ++si) {
      const Slot& sl = slots[si];
      if (sl.s == pp.s && sl.t == pp.t && !pp.cross.empty())
        fixed_value[si] = pp.cross[sl.i][sl.j];
    }
  }
  std::vector<size_t> free_slots;
  for (size_t si = 0; si < slots.size(); ++si)
    if (fixed_value[si] < 0) free_slots.push_back(si);

  // Prescribed pairwise kernels, lifted to sum coordinates.
  Mat k_min;
  struct PairKernel {
    int s, t;
    Mat rows;  // sum coordinates
  };
  std::vector<PairKernel> pair_kernels;
  for (const auto& pp : pairs) {
    PairKernel pk{pp.s, pp.t, {}};
    int ds = L.models[pp.s].dim;
    for (const auto& krow : pp.kernel) {
      Vec full(L.sum.dim, 0);
      for (int i = 0; i < ds; ++i) full[L.pos[pp.s][i]] = krow[i];
      for (int j = 0; j < L.models[pp.t].dim; ++j) full[L.pos[pp.t][j]] = krow[ds + j];
      k_min.push_back(full);
      pk.rows.push_back(full);
    }
    pk.rows = lin::rref(F, pk.rows);
    pair_kernels.push_back(std::move(pk));
  }
  k_min = lin::rref(F, k_min);

  std::vector<AmalgamOrbit> out;
  FormedSpace filled = L.sum;
  for (size_t si = 0; si < slots.size(); ++si)
    if (fixed_value[si] >= 0) set_slot(filled, slots[si], fixed_value[si]);

  std::function<void(size_t)> enumerate_free = [&](size_t fi) {
    if (fi < free_slots.size()) {
      for (int v = 0; v < F.q(); ++v) {
        set_slot(filled, slots[free_slots[fi]], v);
        enumerate_free(fi + 1);
      }
      set_slot(filled, slots[free_slots[fi]], 0);
      return;
    }
    // Cross data fixed; prescribed kernels must sit inside the radical.
    Mat rad = sum_radical(filled);
    Mat rad_r = lin::rref(F, rad);
    for (const auto& krow : k_min)
      if (!lin::in_span(F, rad_r, krow)) return;
    // Enumerate kernels K with k_min <= K <= rad via subspaces of rad / k_min:
    // extend k_min's span by directions of rad modulo k_min.
    Mat quot_dirs;
    {
      Mat span = k_min;
      int have = static_cast<int>(k_min.size());
      for (const auto& r : rad) {
        Mat trial = span;
        trial.push_back(r);
        if (lin::rank(F, trial) > have) {
          span.push_back(r);
          quot_dirs.push_back(r);
          ++have;
        }
      }
    }
    int dq = static_cast<int>(quot_dirs.size());
    for (int s = 0; s <= dq; ++s) {
      foreach_rref(F, dq, s, [&](const Mat& coeffs) {
        Mat k_rows = k_min;
        for (const auto& co : coeffs) {
          Vec lift(L.sum.dim, 0);
          for (int i = 0; i < dq; ++i) {
            if (co[i] == 0) continue;
            for (int c = 0; c < L.sum.dim; ++c)
              lift[c] = F.add(lift[c], F.mul(co[i], quot_dirs[i][c]));
          }
          k_rows.push_back(std::move(lift));
        }
        // GL: kernels of graded maps are graded.
        if (filled.family == Family::GL) {
          Mat graded;
          for (const auto& row : lin::rref(F, k_rows)) {
            Vec r0(L.sum.dim, 0), r1(L.sum.dim, 0);
            bool has0 = false, has1 = false;
            for (int c = 0; c < L.sum.dim; ++c) {
              if (row[c] == 0) continue;
              if (c < L.sum.dim0) {
                r0[c] = row[c];
                has0 = true;
              } else {
                r1[c] = row[c];
                has1 = true;
              }
            }
            if (has0 && has1) return;  // not graded: such a kernel never arises
            graded.push_back(has0 ? r0 : r1);
          }
          k_rows = graded;
        }
        Mat k_r = lin::rref(F, k_rows);
        // Exact pairwise-kernel match: K intersected with (part s + part t)
        // must equal the prescribed pair kernel.
        for (const auto& pk : pair_kernels) {
          Mat inter;
          if (!k_r.empty()) {
            std::vector<bool> in_pair(L.sum.dim, false);
            for (int i : L.pos[pk.s]) in_pair[i] = true;
            for (int i : L.pos[pk.t]) in_pair[i] = true;
            // Combinations of K's rows supported inside the pair's coordinates:
            // left kernel of the outside-restriction, i.e. right kernel of its
            // transpose.
            Mat outside_t(L.sum.dim, Vec(k_r.size()));
            int n_outside = 0;
            for (int c = 0; c < L.sum.dim; ++c) {
              if (in_pair[c]) continue;
              for (size_t r = 0; r < k_r.size(); ++r) outside_t[n_outside][r] = k_r[r][c];
              ++n_outside;
            }
            outside_t.resize(n_outside);
            Mat lambdas;
            if (n_outside == 0) {
              lambdas.assign(k_r.size(), Vec(k_r.size(), 0));
              for (size_t r = 0; r < k_r.size(); ++r) lambdas[r][r] = 1;
            } else {
              lambdas = lin::kernel_basis(F, outside_t);
            }
            for (const auto& lam : lambdas) {
              Vec v(L.sum.dim, 0);
              for (size_t r = 0; r < k_r.size(); ++r) {
                if (lam[r] == 0) continue;
                for (int c = 0; c < L.sum.dim; ++c)
                  v[c] = F.add(v[c], F.mul(lam[r], k_r[r][c]));
              }
              inter.push_back(std::move(v));
            }
          }
          if (lin::rref(F, inter) != pk.rows) return;
        }
        // Kernel must miss every part.
        for (size_t t = 0; t < parts.size(); ++t)
          if (!meets_part_trivially(F, k_r, L, static_cast<int>(t))) return;
        out.push_back(build_orbit(L, filled, k_r, parts));
      });
    }
  };
  enumerate_free(0);
  return out;
}

std::vector<AmalgamOrbit> amalgam_orbits(const StructureClass& a, const StructureClass& b,
                                         long q) {
  return constrained_amalgam_orbits({a, b}, {}, q);
}

std::map<StructureClass, Int> amalgam_decompose(const StructureClass& a,
                                                const StructureClass& b, long q) {
  // Counting path: same cross-entry enumeration as amalgam_orbits, with the
  // per-kernel orbit construction replaced by class tallying.
  SumLayout L = make_sum({a, b}, q);
  const Fq& F = *L.sum.F;
  std::vector<Slot> slots = cross_slots(L);
  std::map<StructureClass, Int> out;
  FormedSpace filled = L.sum;
  std::function<void(size_t)> rec = [&](size_t si) {
    if (si == slots.size()) {
      count_kernel_stage(L, filled, Mat{}, out);
      return;
    }
    for (int v = 0; v < F.q(); ++v) {
      set_slot(filled, slots[si], v);
      rec(si + 1);
    }
    set_slot(filled, slots[si], 0);
  };
  rec(0);
  return out;
}

std::vector<AmalgamOrbit> relative_amalgam_orbits(const StructureClass& a,
                                                  const StructureClass& b,
                                                  const StructureClass& c, long q) {
  // Orbits of pairs agreeing on a are the amalgams over a: the identification
  // kernel must contain the antidiagonal copy of a, and the cross block must
  // make that copy isotropic for the combined form.
  std::vector<AmalgamOrbit> out;
  relative_fill_enumerate(
      a, b, c, q,
      [&](const SumLayout& L, const FormedSpace& filled, const Mat& delta_r) {
        orbit_kernel_stage(L, filled, delta_r, {b, c}, out);
      });
  return out;
}

std::map<StructureClass, Int> relative_amalgam_decompose(const StructureClass& a,
                                                         const StructureClass& b,
                                                         const StructureClass& c, long q) {
  std::map<StructureClass, Int> out;
  relative_fill_enumerate(
      a, b, c, q,
      [&](const SumLayout& L, const FormedSpace& filled, const Mat& delta_r) {
        count_kernel_stage(L, filled, delta_r, out);
      });
  return out;
}

namespace {

// Cross data and identification kernel of a concretely embedded pair.
struct EmbeddedPair {
  SumLayout L;
  FormedSpace filled;
  Mat kernel;  // rref, sum coordinates
};

EmbeddedPair embedded_pair_data(const StructureClass& a, const Mat& ea, const StructureClass& b,
                                const Mat& eb, const FormedSpace& m) {
  require(a.family == m.family && b.family == m.family, ErrorKind::input,
          "family mismatch in pair classification");
  EmbeddedPair P{make_sum({a, b}, m.q0), {}, {}};
  SumLayout& L = P.L;
  const Fq& F = *L.sum.F;
  require(m.F == L.sum.F, ErrorKind::input, "field mismatch in pair classification");
  require(static_cast<int>(ea.size()) == L.models[0].dim &&
              static_cast<int>(eb.size()) == L.models[1].dim,
          ErrorKind::input, "row counts do not match the classes");
  Mat img(L.sum.dim);
  for (int i = 0; i < L.models[0].dim; ++i) img[L.pos[0][i]] = ea[i];
  for (int j = 0; j < L.models[1].dim; ++j) img[L.pos[1][j]] = eb[j];
  for (const auto& row : img)
    require(static_cast<int>(row.size()) == m.dim, ErrorKind::input, "row size mismatch");
  if (m.family == Family::GL) {
    for (int r = 0; r < L.sum.dim; ++r)
      for (int c = 0; c < m.dim; ++c)
        require(img[r][c] == 0 || ((c < m.dim0) == (r < L.sum.dim0)), ErrorKind::input,
                "image rows must respect the grade blocks");
  }
  P.filled = L.sum;
  for (const Slot& sl : cross_slots(L)) set_slot(P.filled, sl, m.form(img[sl.r], img[sl.c]));
  // The rows must carry the canonical models isometrically: every pairing of
  // sum basis vectors has to match the pairing of their images.
  for (int r = 0; r < L.sum.dim; ++r)
    for (int c = 0; c < L.sum.dim; ++c) {
      Vec er(L.sum.dim, 0), ec(L.sum.dim, 0);
      er[r] = 1;
      ec[c] = 1;
      require(P.filled.form(er, ec) == m.form(img[r], img[c]), ErrorKind::input,
              "rows are not isometric embeddings of the canonical models");
    }
  Mat img_t(m.dim, Vec(L.sum.dim));
  for (int r = 0; r < L.sum.dim; ++r)
    for (int c = 0; c < m.dim; ++c) img_t[c][r] = img[r][c];
  P.kernel = lin::rref(F, lin::kernel_basis(F, img_t));
  for (int t = 0; t < 2; ++t)
    require(meets_part_trivially(F, P.kernel, L, t), ErrorKind::input,
            "the rows of a part are dependent (not embeddings)");
  return P;
}

}  // namespace

std::vector<std::vector<int>> amalgam_positions(const std::vector<StructureClass>& parts,
                                                long q) {
  return make_sum(parts, q).pos;
}

void for_each_subspace(const Fq& F, int d, int s, const std::function<void(const Mat&)>& cb) {
  foreach_rref(F, d, s, cb);
}

FormedSpace amalgam_quotient_space(const AmalgamOrbit& orb) {
  return quotient_space(orb.joint, orb.kernel).qt;
}

AmalgamOrbit classify_amalgam_pair(const StructureClass& a, const Mat& ea,
                                   const StructureClass& b, const Mat& eb,
                                   const FormedSpace& m) {
  EmbeddedPair P = embedded_pair_data(a, ea, b, eb, m);
  return build_orbit(P.L, P.filled, P.kernel, {a, b});
}

std::string amalgam_pair_label(const StructureClass& a, const Mat& ea, const StructureClass& b,
                               const Mat& eb, const FormedSpace& m) {
  EmbeddedPair P = embedded_pair_data(a, ea, b, eb, m);
  AmalgamOrbit orb;
  orb.parts = {a, b};
  orb.joint = std::move(P.filled);
  orb.kernel = std::move(P.kernel);
  return orb.label();
}

}  // namespace fqcat
