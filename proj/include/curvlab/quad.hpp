#pragma once

#include <boost/multiprecision/float128.hpp>

namespace curvlab {

/// IEEE binary128 scalar used by the finite-difference pipeline. Nested
/// order-4 stencils at h ~ 1e-3 lose about twelve digits to cancellation,
/// which leaves nothing of a double result.
using Quad = boost::multiprecision::float128;

}  // namespace curvlab
