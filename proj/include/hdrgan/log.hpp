#pragma once

#include <functional>
#include <string>

namespace hdrgan {

using WarningHandler = std::function<void(const std::string&)>;

// Defaults to printing "warning: <msg>" on stderr. Returns the previous handler.
WarningHandler set_warning_handler(WarningHandler handler);
void warn(const std::string& message);

}  // namespace hdrgan
