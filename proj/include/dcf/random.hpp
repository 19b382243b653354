#pragma once

#include <random>

namespace dcf {

// Every seeded component draws from this engine; its textual state is what
// checkpoints persist.
using Rng = std::mt19937_64;

}  // namespace dcf
