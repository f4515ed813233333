#pragma once

#include "dmsim/kernel.hpp"
#include "dmsim/net.hpp"
#include "dmsim/trace.hpp"

namespace dmsim {

/// Shared services handed to every simulated device.
struct SimContext {
  Kernel& kernel;
  Network& net;
  TraceLog& trace;
};

}  // namespace dmsim
