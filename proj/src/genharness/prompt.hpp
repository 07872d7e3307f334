#pragma once

#include <span>
#include <string>
#include <vector>

namespace gbias::genharness {

// Character-profile request prompt with the names inserted, comma separated,
// in the given order.
std::string build_prompt(std::span<const std::string> names);

// Inverse of build_prompt's substitution; empty when `prompt` does not have
// the expected shape.
std::vector<std::string> names_in_prompt(const std::string& prompt);

}  // namespace gbias::genharness
