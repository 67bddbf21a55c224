#pragma once

#include <ostream>

namespace hybridcal {

// Entry point behind the hybridcal-cli binary. Returns 0 on success, 2 for
// malformed input and 3 when estimation fails; the error name goes to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err);

}  // namespace hybridcal
