#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace pulse_cli {

struct Property {
  std::string name;
  // returns a failure description, or nothing on success
  std::function<std::optional<std::string>(uint64_t seed)> run;
};

std::vector<Property> all_properties();

// 0 on success, 1 on any property failure. inject_fault adds a property that
// always fails (harness self-test).
int run_verify(uint64_t seed, bool inject_fault);

}  // namespace pulse_cli
