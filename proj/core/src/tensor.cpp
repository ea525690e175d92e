#include "ballnet/tensor.hpp"

// Tensor is header-only; this TU pins the header into the library build.
