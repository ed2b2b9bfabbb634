#pragma once

namespace simmc {

// Routes library logging to stderr at the level named by SIMMC_LOG_LEVEL
// (trace, debug, info, warn, error, off; default warn).
void init_logging();

}  // namespace simmc
