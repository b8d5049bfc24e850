#ifndef VISIM_TOOLS_CLI_H
#define VISIM_TOOLS_CLI_H

#include <iosfwd>
#include <string>
#include <vector>

namespace visim::cli
{

/// Process exit codes.
enum ExitCode : int
{
    kOk = 0,
    kUsage = 2,
    kIo = 3,
    kSimulation = 4,
};

/**
 * Entry point of the visim command. `args` excludes the program name.
 * Normal output goes to `out`, diagnostics to `err`.
 */
int Main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace visim::cli

#endif // VISIM_TOOLS_CLI_H
