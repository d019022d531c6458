#ifndef MBANDIT_CLI_H_
#define MBANDIT_CLI_H_

#include <ostream>
#include <string>
#include <vector>

namespace mbandit {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

// Entry point behind the missing_bandits binary. `args` excludes the program
// name. Returns the process exit code.
int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err);

}  // namespace mbandit

#endif  // MBANDIT_CLI_H_
