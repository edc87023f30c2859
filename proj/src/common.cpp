#include "sata/common.hpp"

#include <cstdio>

namespace sata {

namespace {
WarnFn g_warn = [](const std::string& msg) {
  std::fprintf(stderr, "warning: %s\n", msg.c_str());
};
}  // namespace

void set_warning_handler(WarnFn fn) { g_warn = std::move(fn); }

void warn(const std::string& msg) {
  if (g_warn) g_warn(msg);
}

}  // namespace sata
