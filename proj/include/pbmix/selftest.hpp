#pragma once

#include <string>
#include <vector>

namespace pbmix {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;  // worst observed value vs bound
};

// Fast end-to-end invariant battery (quadrature exactness, interpolation and
// projection identities, weight constraints, operator identities, pipeline
// exactness, determinism). Each check is independent; failures don't stop
// the rest.
std::vector<CheckResult> run_selftest();

}  // namespace pbmix
