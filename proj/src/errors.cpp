#include "stickybm/errors.hpp"

namespace stickybm {
namespace {

std::string join_issues(const std::vector<std::string>& issues) {
  std::string out;
  for (const auto& issue : issues) {
    if (!out.empty()) out += "; ";
    out += issue;
  }
  return out;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> issues)
    : Error(join_issues(issues)), issues_(std::move(issues)) {}

int exit_code_for(const std::exception& e) {
  if (const auto* c = dynamic_cast<const CommandError*>(&e)) return c->exit_code();
  if (dynamic_cast<const ConfigError*>(&e) != nullptr) return 2;
  if (dynamic_cast<const PreconditionError*>(&e) != nullptr) return 2;
  if (dynamic_cast<const DomainError*>(&e) != nullptr) return 2;
  return 3;
}

}  // namespace stickybm
