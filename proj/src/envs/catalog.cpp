#include <string>

#include "qtransfer/envs.hpp"
#include "qtransfer/errors.hpp"

namespace qtransfer {

const std::vector<std::string>& env_names() {
  static const std::vector<std::string> names{"brick", "shooter6", "shooter7",
                                              "shooter6_holdout"};
  return names;
}

std::unique_ptr<Environment> make_env(std::string_view name, EnvOptions options) {
  if (name == "brick") return make_brick(options);
  if (name == "shooter6") return make_shooter6(options);
  if (name == "shooter7") return make_shooter7(options);
  if (name == "shooter6_holdout") return make_shooter6_holdout(options);
  throw ConfigError("unknown environment '" + std::string(name) + "'");
}

int env_action_count(std::string_view name) {
  return make_env(name)->action_space();
}

}  // namespace qtransfer
