#pragma once

#include <spdlog/spdlog.h>

#include <memory>
#include <string>

namespace n2sky {

// Line-oriented structured logger ("ts level logger key=value ...").
std::shared_ptr<spdlog::logger> logger(const std::string& name);

void set_log_level(const std::string& level);

}  // namespace n2sky
