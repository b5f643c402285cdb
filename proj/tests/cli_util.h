/*
 * Copyright 2026 The biasaudit Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


// Runs the biasaudit executable as a subprocess.
#ifndef BIASAUDIT_TESTS_CLI_UTIL_H_
#define BIASAUDIT_TESTS_CLI_UTIL_H_

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "nlohmann/json.hpp"

#ifndef BIASAUDIT_CLI
#error "BIASAUDIT_CLI must name the biasaudit executable"
#endif

namespace biasaudit::testing {

struct CliRun {
  int exit_code = -1;
  std::string out;
  std::string err;
};

inline std::string ShellQuote(const std::string& arg) {
  std::string quoted = "'";
  for (char c : arg) {
    if (c == '\'') {
      quoted += "'\\''";
    } else {
      quoted += c;
    }
  }
  return quoted + "'";
}

inline std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

inline CliRun RunCli(const std::vector<std::string>& args) {
  static int counter = 0;
  const std::string err_path = (std::filesystem::temp_directory_path() /
                                ("biasaudit_stderr_" + std::to_string(::getpid()) + "_" +
                                 std::to_string(counter++)))
                                   .string();
  std::string command = ShellQuote(BIASAUDIT_CLI);
  for (const auto& arg : args) command += " " + ShellQuote(arg);
  command += " 2>" + ShellQuote(err_path);
  CliRun run;
  FILE* pipe = ::popen(command.c_str(), "r");
  if (pipe == nullptr) return run;
  std::array<char, 4096> buffer;
  size_t n;
  while ((n = std::fread(buffer.data(), 1, buffer.size(), pipe)) > 0) run.out.append(buffer.data(), n);
  const int status = ::pclose(pipe);
  run.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  run.err = ReadFile(err_path);
  std::filesystem::remove(err_path);
  return run;
}

// Report text with the timing block removed, for run-to-run comparison.
inline std::string WithoutTiming(const std::string& report) {
  auto json = nlohmann::json::parse(report, nullptr, false);
  if (json.is_discarded()) return report;
  json.erase("timing");
  return json.dump();
}

}  // namespace biasaudit::testing

#endif  // BIASAUDIT_TESTS_CLI_UTIL_H_
