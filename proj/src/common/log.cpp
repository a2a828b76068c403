#include "common/log.hpp"

#include <spdlog/sinks/stdout_sinks.h>

#include <mutex>

namespace n2sky {

namespace {

std::mutex g_mutex;
spdlog::level::level_enum g_level = spdlog::level::warn;

}  // namespace

std::shared_ptr<spdlog::logger> logger(const std::string& name) {
  std::lock_guard lock(g_mutex);
  if (auto existing = spdlog::get(name)) return existing;
  auto log = spdlog::stderr_logger_mt(name);
  log->set_pattern("ts=%Y-%m-%dT%H:%M:%S.%e level=%l component=%n %v");
  log->set_level(g_level);
  return log;
}

void set_log_level(const std::string& level) {
  std::lock_guard lock(g_mutex);
  g_level = spdlog::level::from_str(level);
  spdlog::apply_all([](const std::shared_ptr<spdlog::logger>& l) {
    l->set_level(g_level);
  });
}

}  // namespace n2sky
