#pragma once

#include <compare>
#include <optional>
#include <string>
#include <vector>

#include "fqcat/common.hpp"
#include "fqcat/field.hpp"

namespace fqcat {

enum class Family { GL, Sp, O, U };
enum class Branch { even, odd };  // orthogonal family: parity of the nondegenerate dimension

std::string to_string(Family f);
std::string to_string(Branch b);
Family family_from_string(const std::string& s);

// Isomorphism class of a formed space.
//   GL: (l, m, n) = dual pairs, extra degree-0 nulls, extra degree-1 nulls.
//   Sp: (m, n) = hyperbolic pairs, radical dimension.
//   O:  (m, delta, n) = nondegenerate dimension, modified discriminant, radical.
//   U:  (m, n) = nondegenerate dimension, radical dimension.
// Field l is used by GL only; delta by O only (canonically square when m == 0).
struct StructureClass {
  Family family{Family::GL};
  int l{0}, m{0}, n{0};
  SquareClass delta{SquareClass::square};

  int level() const;  // total dimension; also the filtration level in every family
  int dim() const { return level(); }

  auto key() const { return std::tuple(family, level(), l, m, n, delta); }
  bool operator==(const StructureClass& o) const { return key() == o.key(); }
  bool operator<(const StructureClass& o) const { return key() < o.key(); }

  std::string str() const;
};

StructureClass gl_class(int l, int m, int n);
StructureClass sp_class(int m, int n);
StructureClass o_class(int m, SquareClass delta, int n);
StructureClass u_class(int m, int n);

// Every class of the family with level <= max_level, in key order (level
// first). Includes the level-0 empty class.
std::vector<StructureClass> classes_up_to_level(Family fam, int max_level);

using Vec = std::vector<int>;
using Mat = std::vector<Vec>;

// Small exact linear algebra over Fq (row-major matrices).
namespace lin {
Mat rref(const Fq& F, Mat rows);           // reduced echelon, zero rows dropped
int rank(const Fq& F, const Mat& rows);
Mat kernel_basis(const Fq& F, const Mat& m);  // right kernel {x : m x = 0}, echelonized
std::optional<Vec> solve(const Fq& F, const Mat& a, const Vec& b);  // one solution of a x = b
bool in_span(const Fq& F, const Mat& echelon_rows, const Vec& v);
Vec mat_vec(const Fq& F, const Mat& m, const Vec& x);
int dot(const Fq& F, const Vec& x, const Vec& y);
}  // namespace lin

// A concrete formed space over a finite field: a dimension, a Gram (or graded
// pairing) matrix, and for GL a grading split. For the unitary family the
// coefficient field is the quadratic extension of the base field.
struct FormedSpace {
  Family family{Family::GL};
  const Fq* F{nullptr};
  long q0{0};   // base field size (== F->q() except for U, where F has q0^2 elements)
  int dim{0};
  int dim0{0};  // GL: degree-0 block size (basis 0..dim0-1); otherwise == dim
  std::vector<int> gram;  // dim*dim entries of F

  int at(int i, int j) const { return gram[static_cast<size_t>(i) * dim + j]; }
  int& at(int i, int j) { return gram[static_cast<size_t>(i) * dim + j]; }
  int dim1() const { return dim - dim0; }

  // Family-dependent sesquilinear/bilinear pairing of coordinate vectors.
  int form(const Vec& x, const Vec& y) const;
};

// Decompose a prime power (input error if q is not one).
std::pair<int, int> factor_prime_power(long q);

// The coefficient field used for Grams of this family at base size q.
const Fq& coefficient_field(Family fam, long q);

// Fixed representative model of a class. Basis conventions:
//   Sp: hyperbolic pairs (e_i, f_i) with <e_i,f_i> = 1 interleaved, radical last.
//   O:  hyperbolic planes [[0,1],[1,0]] first, then the diagonal tail
//       (even, nonsquare disc: diag(1, -pi); odd: diag(delta)), radical last.
//   U:  identity block, radical last.
//   GL: degree-0 basis = paired vectors then nulls; degree-1 likewise; the
//       pairing block is the identity on the paired part.
// Odd characteristic is required outside GL (unsupported-field error).
FormedSpace canonical_model(const StructureClass& c, long q);

// Isomorphism class of an arbitrary formed space (malformed-space error if the
// Gram does not have the family's symmetry).
StructureClass classify(const FormedSpace& v);

FormedSpace direct_sum(const FormedSpace& a, const FormedSpace& b);

bool is_isometric(const FormedSpace& a, const FormedSpace& b);

// Span closure of a set of vectors in the structure's definable sense: the
// plain echelonized span, except for GL where the span is taken per grade
// (a definable subspace of a graded space is graded). rows0 counts the
// degree-0 rows; for ungraded families rows0 == rows.size().
struct ClosureBasis {
  Mat rows;
  int rows0{0};
};
ClosureBasis definable_closure(const FormedSpace& v, const Mat& vectors);

// Orthogonal complement of the span of the given vectors. Defined only for
// nondegenerate ambient spaces (input error otherwise). For GL the complement
// is taken per grade against the opposite grade's pairing.
Mat orthogonal_complement(const FormedSpace& v, const Mat& vectors);

// A linear map A -> M recorded by the images of A's canonical basis vectors.
// Checks form preservation, injectivity, and (GL) grading preservation.
bool is_embedding(const FormedSpace& a, const FormedSpace& m, const Mat& images);

}  // namespace fqcat
