#include "disc/common/log.hpp"

#include <iostream>
#include <mutex>

namespace disc {

namespace {

std::mutex sink_mutex;

WarningSink &sink() {
  static WarningSink s = [](const std::string &m) { std::cerr << "warning: " << m << "\n"; };
  return s;
}

} // namespace

WarningSink set_warning_sink(WarningSink next) {
  std::lock_guard lock(sink_mutex);
  auto previous = std::move(sink());
  sink() = std::move(next);
  return previous;
}

void warn(const std::string &message) {
  std::lock_guard lock(sink_mutex);
  if (sink())
    sink()(message);
}

} // namespace disc
