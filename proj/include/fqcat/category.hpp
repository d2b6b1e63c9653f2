#pragma once

#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "fqcat/enumerate.hpp"
#include "fqcat/measure.hpp"
#include "fqcat/poly.hpp"
#include "fqcat/space.hpp"

namespace fqcat {

// ---------------------------------------------------------------------------
// Coefficients in the cyclotomic extension Q(zeta_p)(t).
//
// Elements are stored on the power basis 1, zeta, ..., zeta^(p-2) with
// rational-function coordinates, reduced modulo the p-th cyclotomic
// polynomial (p prime). A plain scalar (no root of unity attached) is the
// degenerate case p == 0 with a single coordinate; it promotes on contact
// with a genuine cyclotomic value. Mixing two different primes is an input
// error.
// ---------------------------------------------------------------------------
class Cyclo {
 public:
  Cyclo() : p_(0), coords_(1) {}
  Cyclo(const RatFunc& c) : p_(0), coords_{c} {}
  Cyclo(const Rat& c) : p_(0), coords_{RatFunc(c)} {}
  Cyclo(long c) : p_(0), coords_{RatFunc(c)} {}

  // zeta_p^k (p prime, k reduced mod p).
  static Cyclo zeta(int p, long k);

  int prime() const { return p_; }
  bool is_zero() const;
  // The scalar coordinate if the value lies in Q(t) (zero zeta-coordinates);
  // nullopt otherwise.
  std::optional<RatFunc> rational_part() const;

  Cyclo operator+(const Cyclo& o) const;
  Cyclo operator-(const Cyclo& o) const;
  Cyclo operator*(const Cyclo& o) const;
  Cyclo operator-() const;
  Cyclo& operator+=(const Cyclo& o) { return *this = *this + o; }
  Cyclo& operator-=(const Cyclo& o) { return *this = *this - o; }
  Cyclo& operator*=(const Cyclo& o) { return *this = *this * o; }
  bool operator==(const Cyclo& o) const;
  bool operator!=(const Cyclo& o) const { return !(*this == o); }

  // Galois conjugation zeta -> zeta^(-1) (identity on scalars).
  Cyclo conj() const;

  std::string str() const;

 private:
  int p_;                       // 0 for plain scalars, else the prime
  std::vector<RatFunc> coords_; // size 1 (p_ == 0) or p_ - 1
  static void align(Cyclo& a, Cyclo& b);
  void normalize();
};

// ---------------------------------------------------------------------------
// Objects: formal finite direct sums of transitive pieces C(A), recorded by
// the classes A of the defining configurations. Parts are positional (no
// reordering); two objects are equal when their part lists agree entrywise.
// ---------------------------------------------------------------------------
struct CatObject {
  Family family{Family::GL};
  std::vector<StructureClass> parts;

  bool operator==(const CatObject& o) const {
    return family == o.family && parts == o.parts;
  }
  bool operator!=(const CatObject& o) const { return !(*this == o); }
  std::string str() const;
};

CatObject single_object(const StructureClass& a);
// The monoidal unit: the one-point configuration space (empty class).
CatObject point_object(Family fam);
// The full ambient space as a configuration space, zero vector included:
// the point piece plus the one-vector pieces (one per orbit of nonzero
// vectors, so one piece per norm value class where the family has several).
// For GL, grade selects the degree-0 or degree-1 space; other families
// ignore it.
CatObject full_space_object(Family fam, long q, int grade = 0);

// ---------------------------------------------------------------------------
// Hom spaces: Hom(C(A), C(B)) has a basis of orbit indicator kernels, one per
// orbit of pairs (b, a) of B- and A-configurations. Orbits are the amalgam
// orbits of the class pair (B, A), in their enumeration order.
// ---------------------------------------------------------------------------
const std::vector<AmalgamOrbit>& hom_basis(const StructureClass& cod,
                                           const StructureClass& dom, long q);
// The labels of hom_basis, in the same order.
const std::vector<std::string>& hom_labels(const StructureClass& cod,
                                           const StructureClass& dom, long q);
// Index of a label in hom_basis order (input error when absent).
int hom_label_index(const StructureClass& cod, const StructureClass& dom, long q,
                    const std::string& label);
// Label of the diagonal orbit {(a, a)} inside hom_basis(a, a).
std::string diagonal_label(const StructureClass& a, long q);

// A basis element of Hom(C(X), C(Y)) for multi-part X, Y: which parts it
// connects and the orbit label between them.
struct MorKey {
  int cod_part{0};
  int dom_part{0};
  std::string orbit;

  auto key() const { return std::tie(cod_part, dom_part, orbit); }
  bool operator==(const MorKey& o) const { return key() == o.key(); }
  bool operator<(const MorKey& o) const { return key() < o.key(); }
};

// A morphism: a finite K-linear combination of orbit basis elements.
// Instantiated with K = RatFunc and K = Cyclo.
template <class K>
struct MorphismT {
  CatObject cod, dom;
  std::map<MorKey, K> terms;  // zero coefficients may be present; compare with same_terms

  void add_term(const MorKey& k, const K& c);
  K coeff(const MorKey& k) const;
};
using Morphism = MorphismT<RatFunc>;
using CycMorphism = MorphismT<Cyclo>;

// Coefficientwise equality ignoring explicitly stored zeros.
template <class K>
bool same_terms(const MorphismT<K>& a, const MorphismT<K>& b);

Morphism zero_morphism(const CatObject& cod, const CatObject& dom);
Morphism identity_morphism(const CatObject& x, long q);
// The all-ones kernel J (coefficient 1 on every orbit of every part pair).
Morphism ones_morphism(const CatObject& cod, const CatObject& dom, long q);
Morphism basis_morphism(const CatObject& cod, const CatObject& dom, int cod_part,
                        int dom_part, const std::string& orbit);

// ---------------------------------------------------------------------------
// Composition. The structure constant of o1 in Hom(C(Y), C(Z)) and o2 in
// Hom(C(X), C(Y)) on a target orbit of (Z, X) is the measure of the set of
// Y-configurations in orbit position o1 from z and o2 to x, evaluated at a
// representative (z, x) of the target; it is a polynomial law in the measure
// parameter of degree at most level(Y). Laws are memoized per label triple.
// ---------------------------------------------------------------------------
// All target constants at once, aligned with hom_basis(z, x) order.
const std::vector<UniPoly>& composition_constant_laws(
    Family fam, std::optional<Branch> br, long q, const StructureClass& z,
    const StructureClass& y, const StructureClass& x, const std::string& o1,
    const std::string& o2);
// One target constant, folded with the spec's parameter (symbolic: law at the
// scaled variable; rational: the value; algebraic parameters are not
// supported here and raise an input error).
RatFunc composition_constant(const MeasureSpec& spec, const StructureClass& z,
                             const StructureClass& y, const StructureClass& x,
                             const std::string& o1, const std::string& o2,
                             const std::string& target);

template <class K>
MorphismT<K> compose(const MorphismT<K>& f, const MorphismT<K>& g,
                     const MeasureSpec& spec);

// ---------------------------------------------------------------------------
// Trace, dimension, transpose, Gram matrices.
// ---------------------------------------------------------------------------
template <class K>
K trace(const MorphismT<K>& f, const MeasureSpec& spec);
// trace(f . g) computed from diagonal structure constants only.
template <class K>
K trace_of_composite(const MorphismT<K>& f, const MorphismT<K>& g,
                     const MeasureSpec& spec);
// Categorical dimension = trace of the identity = measure of the object.
RatFunc object_dimension(const CatObject& x, const MeasureSpec& spec);

// The orbit of swapped pairs: transpose_label of an orbit of (B, A) is the
// label of the corresponding orbit of (A, B).
std::string transpose_label(const StructureClass& cod, const StructureClass& dom,
                            long q, const std::string& orbit);
Morphism transpose(const Morphism& f, long q);

// Gram matrix of the pairing <f, g> = tr(f . g^T) on Hom(C(X), C(Y)), with a
// fraction-free exact determinant. Symbolic and rational parameters only.
struct GramReport {
  std::vector<MorKey> basis;                 // hom basis in enumeration order
  std::vector<std::vector<RatFunc>> entries; // entries[i][j] = tr(f_i . f_j^T)
  RatFunc det;
};
GramReport gram_matrix(const CatObject& x, const CatObject& y, const MeasureSpec& spec);

// ---------------------------------------------------------------------------
// Tensor structure: C(X) (x) C(Y) decomposes into transitive pieces indexed
// by the orbits of pairs; the tensor product of kernels acts factorwise.
// ---------------------------------------------------------------------------
struct TensorPiece {
  int left_part{0};   // part index in the left factor
  int right_part{0};  // part index in the right factor
  int orbit_index{0}; // index into hom_basis(left class, right class)
  std::string orbit;  // its label
};
struct TensorObject {
  CatObject object;                // one part per orbit, in enumeration order
  std::vector<TensorPiece> pieces; // aligned with object.parts
};
TensorObject tensor_object(const CatObject& x, const CatObject& y, long q);
// Tensor product of morphisms f : X -> Z and g : Y -> W as a morphism
// tensor_object(X, Y) -> tensor_object(Z, W).
Morphism tensor_morphism(const Morphism& f, const Morphism& g, long q);

// ---------------------------------------------------------------------------
// Check suites (exact; every line records one verified identity).
// ---------------------------------------------------------------------------
struct CatCheckLine {
  std::string law;     // which identity
  std::string detail;  // instance data
  bool pass{true};
};

struct CategoryReport {
  Family family{Family::GL};
  std::optional<Branch> branch;
  long q{0};
  int level_bound{0};
  long objects{0};
  long identity_checked{0};
  long identity_sampled{0};
  long assoc_checked{0};
  long assoc_sampled{0};
  long cyclicity_checked{0};
  long cyclicity_sampled{0};
  long tensor_dim_checked{0};
  long trace_id_checked{0};
  std::vector<CatCheckLine> failures;
  bool pass() const { return failures.empty(); }
  std::string summary() const;
};
// Category laws on all transitive objects of level <= level_bound with the
// symbolic parameter: identity, associativity, trace cyclicity, tensor
// multiplicativity of dimension, trace(id) = dimension. Large hom spaces are
// covered by deterministic samples; the report says how many of each.
CategoryReport category_laws_check(Family fam, std::optional<Branch> br, long q,
                                   int level_bound);

struct SpecializeReport {
  Family family{Family::GL};
  std::optional<Branch> branch;
  long q{0};
  StructureClass model_class;
  Rat t_value;
  long constants_checked{0};  // structure constants compared with finite counts
  long zero_checked{0};       // of which forced-zero targets
  long empty_checked{0};      // nil-piece lines (classes that do not embed)
  std::vector<CatCheckLine> failures;
  bool pass() const { return failures.empty(); }
  std::string summary() const;
};
// Compare every structure constant on hom spaces of level <= level_bound with
// the brute-force count of intermediate configurations in the finite model
// selected by model_index (GL: ambient dimension; Sp: number of hyperbolic
// pairs; O: ambient dimension offset within the branch; U: ambient
// dimension), i.e. the specialization of the interpolated composition to the
// honest permutation category of the finite group.
SpecializeReport specialize_check(Family fam, std::optional<Branch> br, long q,
                                  int model_index, int level_bound);

struct FourierReport {
  long q{0};
  long labels{0};
  std::vector<CatCheckLine> lines;
  std::vector<CatCheckLine> failures;
  bool pass() const { return failures.empty(); }
  std::string summary() const;
};
// GL Fourier kernel between the degree-0 and degree-1 full-space objects at
// prime q: F has coefficient zeta^<x,y> on vector pairs and 1 against the
// zero piece, F' the inverse kernel with coefficients (1/t) zeta^(-<x,y>).
// Checks F'F = FF' = id symbolically over Q(zeta_q)(t), equality of the two
// object measures, the vanishing character sum behind the inverse, and the
// agreement with the classical discrete Fourier transform on the rank-2
// finite model at t = q^2.
FourierReport fourier_check(long q);

// ---------------------------------------------------------------------------
// Character polynomials: the trace of a group element g acting on C(A),
// interpolated in t. The element is given as an isometry of a window: a
// nondegenerate class W placed at the leading coordinates of every large
// enough ambient model, extended by the identity. Supported for GL, Sp, U
// (an orthogonal window would need a branch-stable placement; input error).
// ---------------------------------------------------------------------------
struct WindowIsometry {
  StructureClass cls;  // nondegenerate window class
  Mat g;               // images of the window's canonical basis, in window coords
};
// The transvection window: the rank-2 paired GL space with the elementary
// transvection e1 -> e1 + e2 on the degree-0 plane and the compensating dual
// map on the degree-1 plane.
WindowIsometry transvection_window(long q);
RatFunc character_polynomial(const CatObject& x, const WindowIsometry& w,
                             const MeasureSpec& spec);
// Isotypic component of the character under the central scalar action
// (GL only): (q-1)^{-1} sum_a omega(a)^{-1} chi(s_a g) where s_a scales the
// degree-0 space by a and the degree-1 space by a^{-1}. omega_power = 0 is
// the trivial character; omega_power = 1 the quadratic sign character
// (q = 3 only, where it is rational). Other characters need cyclotomic
// coefficients and are not exposed here.
RatFunc scalar_isotypic_character(const CatObject& x, const WindowIsometry& w,
                                  int omega_power, const MeasureSpec& spec);

}  // namespace fqcat
