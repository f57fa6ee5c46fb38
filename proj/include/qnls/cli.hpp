#pragma once

#include <iosfwd>

namespace qnls {

// Entry point of the `qnls` tool. Exit codes: 0 success, 1 failed criteria in a
// report, 2 config or input error, 3 numerical abort.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace qnls
