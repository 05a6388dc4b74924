#pragma once

#include <string>
#include <vector>

#include "rfmp/types.hpp"

namespace rfmp {

struct PropertyResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Runs every module-level invariant as a seeded, self-contained check and
/// reports one named result per property. Sized to finish in seconds; the
/// acceptance suite re-runs the expensive ones at full scale.
std::vector<PropertyResult> run_property_suite();

}  // namespace rfmp
