#pragma once

namespace retroclass {

// Reads RETROCLASS_LOG (error|warn|info|debug) and configures the default
// stderr logger. Unset or unknown values fall back to "warn".
void init_logging_from_env();

}  // namespace retroclass
