#pragma once

#include <stdexcept>
#include <string>

namespace qhp {

// Base class for all toolkit errors.
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// An argument lies outside the mathematical domain of an operation
// (negative radius, non-positive smearing length, invalid parameters, ...).
struct domain_error : error {
  using error::error;
};

// Two measures were combined across incompatible grids.
struct dimension_error : error {
  using error::error;
};

// relative_entropy(mu, nu) with mu carrying mass where nu vanishes.
struct singular_support_error : error {
  using error::error;
};

// An iterative solver exhausted its iteration budget.  The message embeds
// the tail of the residual history for post-mortem inspection.
struct convergence_error : error {
  using error::error;
};

// A computation would exceed an explicit resource budget (e.g. a dense
// eigenproblem beyond the configured dimension limit).
struct resource_error : error {
  using error::error;
};

// An internal consistency check failed (energy-cache drift, density above
// its decay envelope, checkpoint corruption).  Indicates unreliable data.
struct integrity_error : error {
  using error::error;
};

// A request is structurally unsupported (e.g. direct free-energy quadrature
// beyond three particles).
struct unsupported_error : error {
  using error::error;
};

// Invalid user-facing configuration (CLI / config file).  Maps to exit
// status 2 in the command-line driver.
struct config_error : error {
  using error::error;
};

}  // namespace qhp
