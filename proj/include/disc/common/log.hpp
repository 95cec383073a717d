#pragma once

#include <functional>
#include <string>

namespace disc {

using WarningSink = std::function<void(const std::string &)>;

/// Replaces the warning sink (default writes "warning: ..." to stderr) and
/// returns the previous one.
WarningSink set_warning_sink(WarningSink sink);
void warn(const std::string &message);

} // namespace disc
