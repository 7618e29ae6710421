#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace defamekit {

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kValidation = 1;
inline constexpr int kIo = 2;
inline constexpr int kUsage = 64;
}  // namespace exit_code

// args excludes the program name.
int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cli_main(int argc, char** argv);

}  // namespace defamekit
