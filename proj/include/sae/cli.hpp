#pragma once

#include <iosfwd>

namespace sae {

/// Entry point of the `sae-mspe` tool. Returns 0 on success, 1 on usage
/// errors and 2 on data or numeric errors.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sae
