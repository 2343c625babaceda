#include "kinreg/error.hpp"

#include <cstdio>
#include <mutex>

namespace kinreg {

namespace {
std::mutex g_sink_mutex;
void (*g_sink)(const char*, void*) = nullptr;
void* g_sink_user = nullptr;
}  // namespace

void set_warning_sink(void (*sink)(const char*, void*), void* user) {
  std::lock_guard<std::mutex> lock(g_sink_mutex);
  g_sink = sink;
  g_sink_user = user;
}

void warn(const std::string& message) {
  std::lock_guard<std::mutex> lock(g_sink_mutex);
  if (g_sink) {
    g_sink(message.c_str(), g_sink_user);
  } else {
    std::fprintf(stderr, "kinreg warning: %s\n", message.c_str());
  }
}

}  // namespace kinreg
