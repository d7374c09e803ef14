#include "hdrgan/log.hpp"

#include <iostream>
#include <mutex>

namespace hdrgan {

namespace {

std::mutex g_mutex;
WarningHandler g_handler = [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };

}  // namespace

WarningHandler set_warning_handler(WarningHandler handler) {
    std::lock_guard lock(g_mutex);
    auto previous = std::move(g_handler);
    g_handler = std::move(handler);
    return previous;
}

void warn(const std::string& message) {
    std::lock_guard lock(g_mutex);
    if (g_handler) g_handler(message);
}

}  // namespace hdrgan
