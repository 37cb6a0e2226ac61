#include "bubblelab/parallel.hpp"

#include <cstdlib>
#include <string>

namespace bubblelab {

int configured_threads() {
  const char* env = std::getenv("BUBBLELAB_THREADS");
  if (!env || !*env) return 1;
  try {
    return std::clamp(std::stoi(env), 1, 64);
  } catch (const std::exception&) {
    return 1;
  }
}

}  // namespace bubblelab
