#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace fqcat {

using Int = mpz_class;
using Rat = mpq_class;

// Error taxonomy. Exit-code mapping for the CLI: input-like kinds (bad flags,
// unsupported fields, malformed spaces, out-of-domain parameters, questions that
// are undecidable symbolically) map to exit 2; consistency and verification
// failures map to exit 1.
enum class ErrorKind {
  input,
  unsupported_field,
  malformed_space,
  internal_consistency,
  non_polynomial_law,
  division_domain,
  undecidable_at_symbolic,
  verification,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(label(kind) + ": " + msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }
  int exit_code() const {
    switch (kind_) {
      case ErrorKind::internal_consistency:
      case ErrorKind::non_polynomial_law:
      case ErrorKind::verification:
        return 1;
      default:
        return 2;
    }
  }
  static std::string label(ErrorKind k) {
    switch (k) {
      case ErrorKind::input: return "input";
      case ErrorKind::unsupported_field: return "unsupported-field";
      case ErrorKind::malformed_space: return "malformed-space";
      case ErrorKind::internal_consistency: return "internal-consistency";
      case ErrorKind::non_polynomial_law: return "non-polynomial-law";
      case ErrorKind::division_domain: return "division-domain";
      case ErrorKind::undecidable_at_symbolic: return "undecidable-at-symbolic";
      case ErrorKind::verification: return "verification";
    }
    return "error";
  }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) {
  throw Error(kind, msg);
}

inline void require(bool cond, ErrorKind kind, const std::string& msg) {
  if (!cond) fail(kind, msg);
}

// Number of k-dimensional subspaces of an n-dimensional space over a field
// with q elements.
inline Int gauss_binom(int n, int k, const Int& q) {
  if (k < 0 || k > n) return 0;
  Int num = 1, den = 1;
  for (int i = 0; i < k; ++i) {
    Int qn, qk;
    mpz_pow_ui(qn.get_mpz_t(), q.get_mpz_t(), static_cast<unsigned long>(n - i));
    mpz_pow_ui(qk.get_mpz_t(), q.get_mpz_t(), static_cast<unsigned long>(k - i));
    num *= qn - 1;
    den *= qk - 1;
  }
  Int r = num / den;
  if (r * den != num) fail(ErrorKind::internal_consistency, "gauss_binom not exact");
  return r;
}

inline Int int_pow(const Int& b, unsigned long e) {
  Int r;
  mpz_pow_ui(r.get_mpz_t(), b.get_mpz_t(), e);
  return r;
}

inline Rat rat_pow(const Rat& b, long e) {
  if (e >= 0) {
    Rat r;
    mpq_class bb = b;
    mpz_pow_ui(r.get_num_mpz_t(), bb.get_num_mpz_t(), static_cast<unsigned long>(e));
    mpz_pow_ui(r.get_den_mpz_t(), bb.get_den_mpz_t(), static_cast<unsigned long>(e));
    r.canonicalize();
    return r;
  }
  if (b == 0) fail(ErrorKind::division_domain, "0^negative");
  return rat_pow(Rat(1) / b, -e);
}

}  // namespace fqcat
