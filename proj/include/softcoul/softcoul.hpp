#pragma once

#include "softcoul/error.hpp"
#include "softcoul/fourier.hpp"
#include "softcoul/io.hpp"
#include "softcoul/potentials.hpp"
#include "softcoul/propagator.hpp"
#include "softcoul/selftest.hpp"
#include "softcoul/specfun.hpp"
#include "softcoul/spectral.hpp"

namespace softcoul {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace softcoul
