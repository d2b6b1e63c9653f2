#include "fqcat/measure.hpp"

#include <functional>
#include <mutex>
#include <sstream>
#include <tuple>

#include "fqcat/burnside.hpp"
#include "fqcat/enumerate.hpp"

namespace fqcat {

namespace {

// t -> c * t on a dense polynomial.
UniPoly scale_t(const UniPoly& p, const Rat& c) {
  std::vector<Rat> out(p.coeffs());
  Rat pw(1);
  for (size_t i = 0; i < out.size(); ++i) {
    out[i] *= pw;
    pw *= c;
  }
  return UniPoly(std::move(out));
}

UniPoly poly_mod(const UniPoly& p, const UniPoly& h) { return UniPoly::divmod(p, h).second; }

StructureClass empty_class(Family fam) {
  switch (fam) {
    case Family::GL: return gl_class(0, 0, 0);
    case Family::Sp: return sp_class(0, 0);
    case Family::O: return o_class(0, SquareClass::square, 0);
    case Family::U: return u_class(0, 0);
  }
  fail(ErrorKind::input, "unknown family");
}

struct FiberLaw {
  RatFunc ratio;
  UniPoly law;
};

std::mutex g_law_mu;
std::map<std::tuple<int, int, long, std::string, std::string>, FiberLaw> g_law_memo;

std::mutex g_rel_mu;
std::map<std::tuple<std::string, std::string, std::string, long>, std::map<StructureClass, Int>>
    g_rel_memo;

const std::map<StructureClass, Int>& relative_decompose_memo(const StructureClass& a,
                                                             const StructureClass& b,
                                                             const StructureClass& c, long q) {
  auto key = std::tuple(a.str(), b.str(), c.str(), q);
  {
    std::lock_guard<std::mutex> lock(g_rel_mu);
    auto it = g_rel_memo.find(key);
    if (it != g_rel_memo.end()) return it->second;
  }
  std::map<StructureClass, Int> value = a.dim() == 0 ? amalgam_decompose(b, c, q)
                                                     : relative_amalgam_decompose(a, b, c, q);
  std::lock_guard<std::mutex> lock(g_rel_mu);
  return g_rel_memo.emplace(std::move(key), std::move(value)).first->second;
}

// Both routes to the fiber law of A -> B along `embedding` (rows of A's
// canonical basis images in B's canonical model; null = first in scan order).
FiberLaw compute_fiber_law(Family fam, std::optional<Branch> br, long q, const StructureClass& a,
                           const StructureClass& b, const Mat* embedding) {
  FormedSpace am = canonical_model(a, q);
  FormedSpace bm = canonical_model(b, q);
  Mat alpha;
  if (embedding != nullptr) {
    alpha = *embedding;
    require(is_embedding(am, bm, alpha), ErrorKind::input,
            "the given matrix is not an embedding of " + a.str() + " into " + b.str());
  } else if (a.dim() == 0) {
    alpha = Mat{};
  } else {
    auto first = find_first_embedding(am, bm);
    require(first.has_value(), ErrorKind::input,
            "no embedding of " + a.str() + " into " + b.str());
    alpha = *first;
  }

  UniPoly pa = class_P(a, q, br);
  UniPoly pb = class_P(b, q, br);
  RatFunc ratio = RatFunc(pb, pa);
  if (!ratio.is_polynomial()) {
    fail(ErrorKind::non_polynomial_law,
         "fiber law of " + a.str() + " -> " + b.str() + " is not polynomial");
  }
  UniPoly expected = ratio.num();

  int bound = expected.degree() < 0 ? 0 : expected.degree();
  std::vector<std::pair<Rat, Rat>> samples;
  for_each_ambient_model(fam, br, q, [&](const StructureClass& mc, const Rat& t) {
    FormedSpace model = canonical_model(mc, q);
    std::optional<Mat> fixed;
    if (a.dim() == 0) {
      fixed = Mat{};
    } else {
      fixed = find_first_embedding(am, model);
      if (!fixed.has_value()) return true;  // A does not embed at this size yet
    }
    Int count = count_embeddings_extending(bm, alpha, *fixed, model);
    samples.emplace_back(t, Rat(count));
    return static_cast<int>(samples.size()) < bound + 3;
  });
  UniPoly law = fit_polynomial(samples, bound);
  if (law != expected) {
    fail(ErrorKind::internal_consistency,
         "fiber law of " + a.str() + " -> " + b.str() +
             " disagrees with the counting-polynomial ratio: fitted " + law.str() +
             ", ratio " + expected.str());
  }
  return FiberLaw{ratio, law};
}

FiberLaw fiber_law(Family fam, std::optional<Branch> br, long q, const StructureClass& a,
                   const StructureClass& b, const Mat* embedding) {
  if (embedding != nullptr) return compute_fiber_law(fam, br, q, a, b, embedding);
  auto key = std::tuple(static_cast<int>(fam), br ? static_cast<int>(*br) : -1, q, a.str(),
                        b.str());
  {
    std::lock_guard<std::mutex> lock(g_law_mu);
    auto it = g_law_memo.find(key);
    if (it != g_law_memo.end()) return it->second;
  }
  FiberLaw value = compute_fiber_law(fam, br, q, a, b, nullptr);
  std::lock_guard<std::mutex> lock(g_law_mu);
  return g_law_memo.emplace(std::move(key), std::move(value)).first->second;
}

// The law evaluated in the parameter's domain; division-domain error when
// the base class A has measure zero at a numeric parameter.
MeasureValue law_value_at(const MeasureSpec& spec, const UniPoly& law, const StructureClass& a) {
  UniPoly pa = class_P(a, spec.q, spec.branch);
  switch (spec.kind) {
    case ParamKind::symbolic:
      return MeasureValue(scale_t(law, spec.scale));
    case ParamKind::rational: {
      if (pa.eval(spec.rational_value) == 0) {
        fail(ErrorKind::division_domain,
             "fiber measure over " + a.str() + " at a parameter where its measure vanishes; "
             "use a symbolic parameter");
      }
      return MeasureValue(law.eval(spec.rational_value));
    }
    case ParamKind::algebraic: {
      UniPoly ra = poly_mod(pa, spec.minpoly);
      if (UniPoly::gcd(ra, spec.minpoly).degree() > 0) {
        fail(ErrorKind::division_domain,
             "fiber measure over " + a.str() + " at an algebraic parameter where its measure "
             "is not invertible; use a symbolic parameter");
      }
      return MeasureValue(Algebraic{poly_mod(law, spec.minpoly), spec.minpoly});
    }
  }
  fail(ErrorKind::input, "unknown parameter kind");
}

void check_line(std::vector<AxiomCheckLine>& failures, long& counter, const std::string& kind,
                const std::string& detail, bool pass) {
  ++counter;
  if (!pass) failures.push_back(AxiomCheckLine{kind, detail, false});
}

}  // namespace

void for_each_ambient_model(
    Family fam, std::optional<Branch> br, long q,
    const std::function<bool(const StructureClass&, const Rat&)>& visit) {
  if (fam == Family::O) {
    require(br.has_value(), ErrorKind::input, "orthogonal family requires a branch");
  }
  for (int idx = 0; idx < 64; ++idx) {
    switch (fam) {
      case Family::GL: {
        if (!visit(gl_class(idx, 0, 0), Rat(int_pow(q, idx)))) return;
        break;
      }
      case Family::Sp: {
        if (!visit(sp_class(idx, 0), Rat(int_pow(q, 2 * idx)))) return;
        break;
      }
      case Family::U: {
        Rat t(int_pow(q, idx));
        if (idx % 2 == 1) t = -t;
        if (!visit(u_class(idx, 0), t)) return;
        break;
      }
      case Family::O: {
        int dim = (*br == Branch::even) ? 2 * idx : 2 * idx + 1;
        Rat t(int_pow(q, idx));
        if (!visit(o_class(dim, SquareClass::square, 0), t)) return;
        if (dim > 0) {
          if (!visit(o_class(dim, SquareClass::nonsquare, 0), -t)) return;
        }
        break;
      }
    }
  }
  fail(ErrorKind::internal_consistency, "ambient model iteration exhausted");
}

std::string Algebraic::str() const {
  return "(" + residue.str() + ") mod (" + minpoly.str() + ")";
}

std::string measure_value_str(const MeasureValue& v) {
  if (std::holds_alternative<UniPoly>(v)) return std::get<UniPoly>(v).str();
  if (std::holds_alternative<Rat>(v)) {
    std::ostringstream os;
    os << std::get<Rat>(v);
    return os.str();
  }
  return std::get<Algebraic>(v).str();
}

MeasureSpec MeasureSpec::symbolic(Family fam, long q, std::optional<Branch> br) {
  MeasureSpec s;
  s.family = fam;
  s.q = q;
  s.branch = br;
  s.kind = ParamKind::symbolic;
  s.scale = Rat(1);
  if (fam == Family::O) {
    require(br.has_value(), ErrorKind::input, "orthogonal family requires a branch");
  } else {
    require(!br.has_value(), ErrorKind::input, "branch is only meaningful for the orthogonal family");
  }
  return s;
}

MeasureSpec MeasureSpec::rational(Family fam, long q, const Rat& value,
                                  std::optional<Branch> br) {
  MeasureSpec s = symbolic(fam, q, br);
  s.kind = ParamKind::rational;
  s.rational_value = value;
  return s;
}

MeasureSpec MeasureSpec::algebraic(Family fam, long q, const UniPoly& minpoly,
                                   std::optional<Branch> br) {
  MeasureSpec s = symbolic(fam, q, br);
  s.kind = ParamKind::algebraic;
  require(minpoly.degree() >= 1 && minpoly.leading() == 1, ErrorKind::input,
          "an algebraic parameter needs a monic minimal polynomial of degree >= 1");
  s.minpoly = minpoly;
  return s;
}

std::string MeasureSpec::param_str() const {
  std::ostringstream os;
  switch (kind) {
    case ParamKind::symbolic:
      if (scale == 1) {
        os << "t";
      } else {
        os << "(" << scale << ")*t";
      }
      break;
    case ParamKind::rational:
      os << rational_value;
      break;
    case ParamKind::algebraic:
      os << "root of " << minpoly.str();
      break;
  }
  return os.str();
}

std::string MeasureSpec::str() const {
  std::string s = "measure[" + to_string(family) + ", q=" + std::to_string(q);
  if (branch) s += ", branch=" + to_string(*branch);
  s += ", param=" + param_str() + "]";
  return s;
}

UniPoly measure_polynomial(const MeasureSpec& spec, const StructureClass& a) {
  UniPoly p = class_P(a, spec.q, spec.branch);
  if (spec.kind == ParamKind::symbolic && spec.scale != 1) p = scale_t(p, spec.scale);
  return p;
}

MeasureValue measure_of_class(const MeasureSpec& spec, const StructureClass& a) {
  require(a.family == spec.family, ErrorKind::input, "class family does not match the measure");
  switch (spec.kind) {
    case ParamKind::symbolic:
      return MeasureValue(measure_polynomial(spec, a));
    case ParamKind::rational:
      return MeasureValue(class_P(a, spec.q, spec.branch).eval(spec.rational_value));
    case ParamKind::algebraic:
      return MeasureValue(
          Algebraic{poly_mod(class_P(a, spec.q, spec.branch), spec.minpoly), spec.minpoly});
  }
  fail(ErrorKind::input, "unknown parameter kind");
}

FiberMeasure fiber_measure(const MeasureSpec& spec, const StructureClass& a,
                           const StructureClass& b) {
  require(a.family == spec.family && b.family == spec.family, ErrorKind::input,
          "class family does not match the measure");
  FiberLaw fl = fiber_law(spec.family, spec.branch, spec.q, a, b, nullptr);
  return FiberMeasure{a, b, fl.ratio, fl.law, law_value_at(spec, fl.law, a)};
}

FiberMeasure fiber_measure(const MeasureSpec& spec, const StructureClass& a,
                           const StructureClass& b, const Mat& embedding) {
  require(a.family == spec.family && b.family == spec.family, ErrorKind::input,
          "class family does not match the measure");
  FiberLaw fl = fiber_law(spec.family, spec.branch, spec.q, a, b, &embedding);
  return FiberMeasure{a, b, fl.ratio, fl.law, law_value_at(spec, fl.law, a)};
}

AxiomsReport axioms_check(const MeasureSpec& spec, int bound) {
  require(bound >= 0 && bound <= 3, ErrorKind::input, "axiom check bound must be 0..3");
  Family fam = spec.family;
  std::optional<Branch> br = spec.branch;
  long q = spec.q;

  AxiomsReport rep;
  rep.family = fam;
  rep.branch = br;
  rep.q = q;
  rep.bound = bound;

  std::vector<StructureClass> classes = classes_up_to(fam, bound);
  auto law_of = [&](const StructureClass& x, const StructureClass& y) {
    return fiber_law(fam, br, q, x, y, nullptr).law;
  };
  std::map<std::pair<StructureClass, StructureClass>, bool> embeds_memo;
  auto embeds = [&](const StructureClass& x, const StructureClass& y) {
    auto key = std::pair(x, y);
    auto it = embeds_memo.find(key);
    if (it != embeds_memo.end()) return it->second;
    bool ok = count_embeddings(x, y, q) != 0;
    embeds_memo.emplace(key, ok);
    return ok;
  };

  StructureClass empty = empty_class(fam);

  // Normalization: identity embeddings have measure one, and the fiber over
  // the empty class is the class's own counting polynomial.
  for (const StructureClass& a : classes) {
    check_line(rep.failures, rep.normalization_checked, "normalization",
               a.str() + " == " + a.str(), law_of(a, a) == UniPoly(1));
    check_line(rep.failures, rep.normalization_checked, "normalization",
               "{} -> " + a.str(), law_of(empty, a) == class_P(a, q, br));
  }

  // Invariance: the law does not depend on the choice of embedding.
  for (const StructureClass& a : classes) {
    if (a.dim() == 0) continue;
    for (const StructureClass& b : classes) {
      if (b.dim() <= a.dim() || !embeds(a, b)) continue;
      FormedSpace am = canonical_model(a, q);
      FormedSpace bm = canonical_model(b, q);
      std::vector<Mat> all;
      enumerate_embeddings(am, bm, [&](const Mat& e) { all.push_back(e); });
      std::vector<size_t> picks{0};
      if (all.size() > 2) picks.push_back(all.size() / 2);
      if (all.size() > 1) picks.push_back(all.size() - 1);
      UniPoly reference = law_of(a, b);
      for (size_t idx : picks) {
        UniPoly other = fiber_law(fam, br, q, a, b, &all[idx]).law;
        check_line(rep.failures, rep.invariance_checked, "invariance",
                   a.str() + " -> " + b.str() + " embedding #" + std::to_string(idx),
                   other == reference);
      }
    }
  }

  // Multiplicativity over chains A -> B -> C.
  for (const StructureClass& a : classes) {
    for (const StructureClass& b : classes) {
      if (!embeds(a, b)) continue;
      for (const StructureClass& c : classes) {
        if (!embeds(b, c)) continue;
        check_line(rep.failures, rep.multiplicativity_checked, "multiplicativity",
                   a.str() + " -> " + b.str() + " -> " + c.str(),
                   law_of(a, c) == law_of(a, b) * law_of(b, c));
      }
    }
  }

  // Base change of X(B) -> X(A) along X(A') -> X(A): the law equals the sum
  // of the laws over the orbit decomposition of the pullback. Over the empty
  // base the pullback is the plain product, whose orbit count grows like
  // q^(dim B * dim A'); those configurations are capped at joint dimension
  // bound+1, the range the Burnside-ring product identities already cover.
  for (const StructureClass& a : classes) {
    for (const StructureClass& b : classes) {
      if (!embeds(a, b)) continue;
      for (const StructureClass& aprime : classes) {
        if (!embeds(a, aprime)) continue;
        if (a.dim() == 0 && b.dim() + aprime.dim() > bound + 1) continue;
        const auto& orbits = relative_decompose_memo(a, b, aprime, q);
        UniPoly sum;
        for (const auto& [d, mult] : orbits) sum += UniPoly(Rat(mult)) * law_of(aprime, d);
        check_line(rep.failures, rep.base_change_checked, "base-change",
                   a.str() + " -> " + b.str() + " along " + a.str() + " -> " + aprime.str(),
                   sum == law_of(a, b));
      }
    }
  }

  return rep;
}

std::string to_string(Regularity r) {
  switch (r) {
    case Regularity::regular: return "regular";
    case Regularity::quasi_regular_only: return "quasi_regular_only";
    case Regularity::irregular: return "irregular";
  }
  return "?";
}

namespace {

// Nonzero singular parameter values of the family/branch with absolute value
// at most `cap`.
std::vector<Rat> singular_values_up_to(Family fam, std::optional<Branch> br, long q,
                                       const Rat& cap) {
  std::vector<Rat> out;
  auto below = [&](const Rat& x) { return abs(x) <= cap; };
  switch (fam) {
    case Family::GL:
      for (Rat p(1); below(p); p *= q) out.push_back(p);
      break;
    case Family::Sp:
      for (Rat p(1); below(p); p *= q * q) out.push_back(p);
      break;
    case Family::U:
      for (Rat p(1); below(p); p *= -q) out.push_back(p);
      break;
    case Family::O: {
      require(br.has_value(), ErrorKind::input, "orthogonal family requires a branch");
      if (*br == Branch::even) {
        if (below(Rat(1))) out.push_back(Rat(1));
        for (Rat p(q); below(p); p *= q) {
          out.push_back(p);
          out.push_back(-p);
        }
      } else {
        for (Rat p(1); below(p); p *= q) {
          out.push_back(p);
          out.push_back(-p);
        }
      }
      break;
    }
  }
  return out;
}

}  // namespace

Regularity regularity(const MeasureSpec& spec) {
  switch (spec.kind) {
    case ParamKind::symbolic:
      fail(ErrorKind::undecidable_at_symbolic,
           "regularity of a symbolic parameter is not decidable");
    case ParamKind::rational: {
      const Rat& t = spec.rational_value;
      if (t == 0) return Regularity::irregular;
      for (const Rat& s : singular_values_up_to(spec.family, spec.branch, spec.q, abs(t))) {
        if (t == s) return Regularity::quasi_regular_only;
      }
      return Regularity::regular;
    }
    case ParamKind::algebraic: {
      const UniPoly& h = spec.minpoly;
      if (h.eval(Rat(0)) == 0) return Regularity::irregular;
      // Cauchy bound on the roots of a monic polynomial.
      Rat cap(1);
      for (int i = 0; i < h.degree(); ++i) {
        Rat c = abs(h.coeff(i));
        if (c > cap) cap = c;
      }
      cap += 1;
      for (const Rat& s : singular_values_up_to(spec.family, spec.branch, spec.q, cap)) {
        if (h.eval(s) == 0) return Regularity::quasi_regular_only;
      }
      return Regularity::regular;
    }
  }
  fail(ErrorKind::input, "unknown parameter kind");
}

MeasureSpec restrict_parameter(const MeasureSpec& spec, int n) {
  require(n >= 0, ErrorKind::input, "restriction depth must be >= 0");
  Rat factor(1);
  switch (spec.family) {
    case Family::GL:
    case Family::O:
      factor = Rat(1) / Rat(int_pow(spec.q, n));
      break;
    case Family::Sp:
      factor = Rat(1) / Rat(int_pow(spec.q, 2 * n));
      break;
    case Family::U:
      factor = Rat(n % 2 == 0 ? 1 : -1) / Rat(int_pow(spec.q, n));
      break;
  }
  MeasureSpec out = spec;
  switch (spec.kind) {
    case ParamKind::symbolic:
      out.scale *= factor;
      break;
    case ParamKind::rational:
      out.rational_value *= factor;
      break;
    case ParamKind::algebraic: {
      // Minimal polynomial of factor * root: h'(x) = factor^d h(x / factor).
      int d = spec.minpoly.degree();
      std::vector<Rat> coeffs(static_cast<size_t>(d) + 1);
      for (int i = 0; i <= d; ++i) coeffs[i] = spec.minpoly.coeff(i) * rat_pow(factor, d - i);
      out.minpoly = UniPoly(std::move(coeffs));
      break;
    }
  }
  return out;
}

bool CountingReport::pass() const {
  for (const auto& row : rows) {
    if (!row.pass) return false;
  }
  return true;
}

CountingReport counting_measure_consistency(Family fam, std::optional<Branch> br,
                                            const StructureClass& a,
                                            const std::vector<int>& indices, long q) {
  require(a.family == fam, ErrorKind::input, "class family mismatch");
  CountingReport rep;
  rep.family = fam;
  rep.branch = br;
  rep.cls = a;
  rep.q = q;
  UniPoly p = class_P(a, q, br);
  auto add_row = [&](const StructureClass& model, const Rat& t) {
    CountingRow row;
    row.model = model;
    row.parameter = t;
    row.oracle = count_embeddings(a, model, q);
    row.measure = p.eval(t);
    row.pass = Rat(row.oracle) == row.measure;
    rep.rows.push_back(std::move(row));
  };
  for (int idx : indices) {
    require(idx >= 0, ErrorKind::input, "model index must be >= 0");
    switch (fam) {
      case Family::GL:
        add_row(gl_class(idx, 0, 0), Rat(int_pow(q, idx)));
        break;
      case Family::Sp:
        add_row(sp_class(idx, 0), Rat(int_pow(q, 2 * idx)));
        break;
      case Family::U: {
        Rat t(int_pow(q, idx));
        if (idx % 2 == 1) t = -t;
        add_row(u_class(idx, 0), t);
        break;
      }
      case Family::O: {
        require(br.has_value(), ErrorKind::input, "orthogonal family requires a branch");
        int dim = (*br == Branch::even) ? 2 * idx : 2 * idx + 1;
        Rat t(int_pow(q, idx));
        add_row(o_class(dim, SquareClass::square, 0), t);
        if (dim > 0) add_row(o_class(dim, SquareClass::nonsquare, 0), -t);
        break;
      }
    }
  }
  return rep;
}

bool measure_matches_count_fit(Family fam, std::optional<Branch> br, const StructureClass& a,
                               long q) {
  require(a.family == fam, ErrorKind::input, "class family mismatch");
  UniPoly p = class_P(a, q, br);
  int bound = p.degree() < 0 ? 0 : p.degree();
  std::vector<std::pair<Rat, Rat>> samples;
  for_each_ambient_model(fam, br, q, [&](const StructureClass& mc, const Rat& t) {
    samples.emplace_back(t, Rat(count_embeddings(a, mc, q)));
    return static_cast<int>(samples.size()) < bound + 3;
  });
  return fit_polynomial(samples, bound) == p;
}

bool ThetaReport::pass() const {
  for (const auto& line : lines) {
    if (!line.pass) return false;
  }
  return true;
}

ThetaReport theta_relations_check(Family fam, long q) {
  ThetaReport rep;
  rep.family = fam;
  rep.q = q;
  auto add = [&](const std::string& detail, bool pass) {
    rep.lines.push_back(AxiomCheckLine{"theta-relation", detail, pass});
  };
  UniPoly t = UniPoly::t();
  Rat half(1, 2);
  switch (fam) {
    case Family::GL: {
      UniPoly a = gl_P(1, 0, 0, q), b = gl_P(0, 1, 0, q), c = gl_P(0, 0, 1, q);
      add("b = c", b == c);
      add("q a = b (c + 1)", UniPoly(q) * a == b * (c + UniPoly(1)));
      add("one-vector class has measure t - 1", b == t - UniPoly(1));
      add("full degree-0 space has measure t", b + UniPoly(1) == t);
      break;
    }
    case Family::Sp: {
      UniPoly a = sp_P(1, 0, q), b = sp_P(0, 1, q);
      add("q a = b (b + 1)", UniPoly(q) * a == b * (b + UniPoly(1)));
      add("one-vector class has measure t - 1", b == t - UniPoly(1));
      add("full space has measure t", b + UniPoly(1) == t);
      break;
    }
    case Family::U: {
      UniPoly a = u_P(1, 0, q), b = u_P(0, 1, q);
      UniPoly c = UniPoly(1) + b - a;
      add("1 + b - a = t", c == t);
      add("(a - b)^2 = (q + 1) a - b",
          (a - b) * (a - b) == UniPoly(q + 1) * a - b);
      add("q a = c (c - 1)", UniPoly(q) * a == c * (c - UniPoly(1)));
      add("q b = (c - 1)(c + q)", UniPoly(q) * b == (c - UniPoly(1)) * (c + UniPoly(q)));
      add("full space has measure t^2", UniPoly(1) + b + UniPoly(q - 1) * a == t * t);
      break;
    }
    case Family::O: {
      for (Branch brv : {Branch::even, Branch::odd}) {
        std::string tag = to_string(brv) + ": ";
        UniPoly a = o_P(brv, 1, SquareClass::square, 0, q);
        UniPoly b = o_P(brv, 1, SquareClass::nonsquare, 0, q);
        UniPoly c = o_P(brv, 0, SquareClass::square, 1, q);
        UniPoly u = c + UniPoly(1) - UniPoly(half) * (a + b);
        UniPoly v = UniPoly(half) * (a - b);
        if (brv == Branch::even) {
          add(tag + "u = t", u == t);
          add(tag + "v = 0", v.is_zero());
        } else {
          add(tag + "u = 0", u.is_zero());
          add(tag + "v = t", v == t);
        }
        add(tag + "u v = 0", (u * v).is_zero());
        add(tag + "q (c + 1 - v^2) = u (u + q - 1)",
            UniPoly(q) * (c + UniPoly(1) - v * v) == u * (u + UniPoly(q - 1)));
        UniPoly lhs =
            (UniPoly(q + 1) * (c + UniPoly(1)) - UniPoly(Rat(q + 1) * half) * a +
             UniPoly(Rat(q - 1) * half) * b) *
            a;
        UniPoly rhs = (c + UniPoly(1) + UniPoly(Rat(q - 1) * half) * (a + b)) * c;
        add(tag + "quadratic relation in a, b, c", lhs == rhs);
        add(tag + "full space has measure t^2",
            UniPoly(1) + c + UniPoly(Rat(q - 1) * half) * (a + b) == t * t);
      }
      break;
    }
  }
  return rep;
}

}  // namespace fqcat
