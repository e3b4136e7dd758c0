#include "a3rl/log.hpp"

#include <iostream>
#include <mutex>

namespace a3rl::log {

namespace {

std::mutex g_mutex;
Sink g_sink = [](const std::string& m) { std::cerr << "warning: " << m << '\n'; };

}  // namespace

Sink set_warning_sink(Sink sink) {
    std::lock_guard lock(g_mutex);
    Sink old = std::move(g_sink);
    g_sink = std::move(sink);
    return old;
}

void warn(const std::string& message) {
    std::lock_guard lock(g_mutex);
    if (g_sink) g_sink(message);
}

}  // namespace a3rl::log
