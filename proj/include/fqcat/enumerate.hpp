#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "fqcat/space.hpp"

namespace fqcat {

// Exact embedding counts. The production path splits off radicals exactly
// (binomial-weighted sum over the kernel of the projection to the
// nondegenerate part) and, on nondegenerate canonical ambients, multiplies
// per-depth extension counts; transitivity of the isometry group on
// configurations with equal Gram data makes the per-depth count independent
// of the branch, and each per-depth count is evaluated in closed form by
// completing the square against the restricted form. Memo tables are shared
// and mutex-guarded.
Int count_embeddings(const StructureClass& a, const StructureClass& m, long q);
Int count_embeddings(const FormedSpace& a, const FormedSpace& m);

// Plain backtracking without the homogeneity shortcut (reference path for
// cross-checks at small sizes).
Int count_embeddings_naive(const FormedSpace& a, const FormedSpace& m);

// Embeddings of b into a nondegenerate canonical-model ambient m that extend
// a fixed partial placement: prefix_vectors (rows in b's coordinates, pure
// grade for GL, independent per grade) already map to prefix_images (rows in
// m's coordinates). Input error if the prescribed images do not match the
// prefix's Gram data.
Int count_embeddings_extending(const FormedSpace& b, const Mat& prefix_vectors,
                               const Mat& prefix_images, const FormedSpace& m);

// Visit every embedding of a into m (small sizes only).
void enumerate_embeddings(const FormedSpace& a, const FormedSpace& m,
                          const std::function<void(const Mat&)>& visit);

// The first embedding in deterministic scan order, if any.
std::optional<Mat> find_first_embedding(const FormedSpace& a, const FormedSpace& m);

// Histogram of the norm map v -> <v,v> over a canonical model: value index ->
// count. Full (recursive) enumeration for dim <= 6, cached; orthogonal-sum
// convolution beyond. Norm values are field indices (for U they land in the
// conjugation-fixed subfield).
const std::map<int, Int>& norm_histogram(const StructureClass& m, long q);
Int count_norm_vectors(const StructureClass& m, long q, int value);

// Embeddings i of a into m intertwining the given isometries: g . i = i . h.
Int twisted_fixed_count(const FormedSpace& a, const Mat& h, const FormedSpace& m, const Mat& g);

// Orbit of a tuple of embeddings of the parts into a common ambient space,
// recorded by its complete invariant: the combined Gram (diagonal blocks are
// the parts' Grams, cross blocks are free) together with the identification
// kernel inside its radical, meeting each part trivially (per grade for GL).
// `cls` is the class of the joint image, i.e. of the quotient by the kernel.
struct AmalgamOrbit {
  std::vector<StructureClass> parts;
  FormedSpace joint;     // direct-sum layout with cross entries filled
  Mat kernel;            // echelonized, in joint coordinates
  StructureClass cls;    // class of (sum of parts)/kernel
  Mat quotient_maps_cat; // concatenated images of each part's basis in the quotient
  std::vector<int> part_offsets;  // row offsets into quotient_maps_cat per part
  std::string label() const;
  Mat part_map(int t) const;  // images of part t's basis vectors in the quotient
};

// All orbits of pairs of embeddings of a and b into the universal ambient
// space; summing classes with multiplicity gives the product decomposition.
std::vector<AmalgamOrbit> amalgam_orbits(const StructureClass& a, const StructureClass& b,
                                         long q);
std::map<StructureClass, Int> amalgam_decompose(const StructureClass& a,
                                                const StructureClass& b, long q);

// Orbits of pairs (i_b, i_c) whose restrictions along fixed embeddings of a
// into b and into c agree (the pullback of the two restriction maps). The
// fixed embeddings are the first ones in scan order.
std::vector<AmalgamOrbit> relative_amalgam_orbits(const StructureClass& a,
                                                  const StructureClass& b,
                                                  const StructureClass& c, long q);
std::map<StructureClass, Int> relative_amalgam_decompose(const StructureClass& a,
                                                         const StructureClass& b,
                                                         const StructureClass& c, long q);

// Orbits of r-tuples with all pairwise cross blocks and pairwise kernels
// prescribed; only the joint kernel varies. Used for composition fibers.
struct PrescribedPair {
  int s, t;        // part indices, s < t
  Mat cross;       // dim(part s) x dim(part t) entries of the coefficient field
  Mat kernel;      // echelon basis inside part s + part t coordinates (local)
};
std::vector<AmalgamOrbit> constrained_amalgam_orbits(
    const std::vector<StructureClass>& parts, const std::vector<PrescribedPair>& pairs, long q);

// Coordinate layout of the direct sum of the parts' canonical models:
// pos[t][i] is the sum coordinate of part t's basis vector i. Degree-0
// coordinates of all parts come first for GL; plain concatenation otherwise.
std::vector<std::vector<int>> amalgam_positions(const std::vector<StructureClass>& parts,
                                                long q);

// The concrete quotient space an orbit's part maps refer to: the combined
// form restricted to a complement of the kernel (chosen per grade for GL).
FormedSpace amalgam_quotient_space(const AmalgamOrbit& orb);

// Classify a concrete pair of embeddings of a and b into m as an amalgam
// orbit: the cross data is read off m's form and the identification kernel is
// the joint left kernel of the rows. Input error when the rows are not
// isometric embeddings of the canonical models (or mix grade blocks for GL).
AmalgamOrbit classify_amalgam_pair(const StructureClass& a, const Mat& ea,
                                   const StructureClass& b, const Mat& eb,
                                   const FormedSpace& m);

// Label-only fast path of classify_amalgam_pair (skips the quotient record).
std::string amalgam_pair_label(const StructureClass& a, const Mat& ea, const StructureClass& b,
                               const Mat& eb, const FormedSpace& m);

// Every s-dimensional subspace of F^d exactly once, presented by its reduced
// echelon basis, in deterministic order.
void for_each_subspace(const Fq& F, int d, int s, const std::function<void(const Mat&)>& cb);

// Class arithmetic helpers shared by the oracle and downstream modules.
StructureClass radical_reduced(const StructureClass& c, int s0, int s1);  // shrink radical
StructureClass nondegenerate_part(const StructureClass& c);
long coefficient_field_size(Family fam, long q);

}  // namespace fqcat
