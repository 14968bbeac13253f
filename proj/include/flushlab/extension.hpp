#pragma once

#include "flushlab/field.hpp"
#include "flushlab/smooth.hpp"

namespace flushlab::field {

struct ExtensionOptions {
  double mean_tolerance = 1e-8;  // relative to |Omega| * max|u1|
};

struct Extension {
  Field2D u;           // divergence-free extension on the band
  Field2D psi;         // its stream function
  double tail = 0.0;   // L2 norm outside [-L, 2L]
  double ratio = 0.0;  // tail / ||u_star||_{L2(Omega)}
};

// Smooth continuation of the stream function of u_star on Omega, cut off outside [-L, 2L].
Extension extend_initial_data(const Field2D& u_star, double tail_bound, const ExtensionOptions& opt = {});

// Extension of a given stream function (restricted to Omega) by the same continuation and cutoff.
Field2D extend_stream_function(const Field2D& psi_on_omega);

}  // namespace flushlab::field
