#include "psbed/common/error.hpp"

#include <sstream>

namespace psbed::detail {

void CheckFailed(const char* expr, const char* file, int line,
                 const std::string& msg) {
  std::ostringstream os;
  os << "invariant failed: " << expr << " at " << file << ":" << line;
  if (!msg.empty()) os << " — " << msg;
  throw InvariantError(os.str());
}

}  // namespace psbed::detail
