#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dpglm {

// Exit codes: 0 ok, 1 configuration or validation failure, 2 runtime
// failure. Messages go to `err`; tables and stdout-bound CSV to `out`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dpglm
