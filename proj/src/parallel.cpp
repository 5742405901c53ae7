#include "talfuse/parallel.hpp"

#include <cstdlib>
#include <string>

namespace talfuse {

std::size_t worker_threads() {
  if (const char* env = std::getenv("TALFUSE_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return static_cast<std::size_t>(v);
    } catch (...) {
      // Fall through to the default on malformed values.
    }
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

}  // namespace talfuse
