#pragma once

#include <string>
#include <vector>

namespace densebox {

// Runs one toolkit command (merge | nms | eval | synth | bench) given the
// argument list without the program name. Returns the process exit status:
// 0 success, 1 usage error, 2 malformed data, 3 I/O failure.
int run_command(const std::vector<std::string>& args);

}  // namespace densebox
