#include "repdiv/parallel.hpp"

#include <cstdlib>
#include <string>

namespace repdiv {

unsigned resolve_threads(unsigned requested)
{
    unsigned n = requested;
    if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("REPDIV_THREADS"); env != nullptr && *env != '\0') {
        try {
            const long cap = std::stol(env);
            if (cap >= 1) n = std::min(n, static_cast<unsigned>(cap));
        } catch (...) {
            // unparsable cap is ignored
        }
    }
    return std::max(1u, n);
}

}  // namespace repdiv
