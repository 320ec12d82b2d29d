#include "retroclass/log.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <string_view>

namespace retroclass {

void init_logging_from_env() {
  auto logger = spdlog::stderr_color_mt("retroclass");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");

  auto level = spdlog::level::warn;
  if (const char* env = std::getenv("RETROCLASS_LOG")) {
    std::string_view v(env);
    if (v == "error") level = spdlog::level::err;
    else if (v == "warn") level = spdlog::level::warn;
    else if (v == "info") level = spdlog::level::info;
    else if (v == "debug") level = spdlog::level::debug;
  }
  spdlog::set_level(level);
}

}  // namespace retroclass
