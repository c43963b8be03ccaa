#pragma once

#include <stdexcept>
#include <string>

namespace phigamma {

// Two values from incompatible contexts (p, m, f, variable set or mode) met
// in one operation. Always a caller bug, never a data condition.
struct context_mismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// The inputs' windows cannot certify a single exact coefficient of the result.
struct insufficient_window : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Operation not defined for the series mode (integral vs perfect) it was given.
struct mode_mismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Inversion of an element with positive valuation.
struct not_a_unit : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed or out-of-contract input document (JSON/TOML/series text).
struct schema_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// An exact-integer character value was supplied with too little p-adic
// precision for the requested expansion depth.
struct precision_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A Frobenius matrix is provably non-invertible (its reduction mod p is
// singular), so the module is not etale.
struct not_etale : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A semilinear commutation relation failed; the message names the offending
// operator pair and a witness monomial.
struct commutation_failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A windowed computation did not agree between two nested windows, so its
// value cannot be reported as exact.
struct not_stabilized : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A round-trip equivalence check could not produce an explicit isomorphism.
struct isomorphism_not_found : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace phigamma
