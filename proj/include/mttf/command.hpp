#pragma once

// Shell command templates with {name} placeholders, used by the external
// key-frame codec and metric adapters.

#include <filesystem>
#include <map>
#include <string>

namespace mttf {

// Replaces every {key} with its value; unknown placeholders are left intact.
std::string expand_template(const std::string& pattern, const std::map<std::string, std::string>& values);

struct CommandResult {
  int exit_code = 0;
  std::string output;  // stdout and stderr, interleaved
};

// Runs through /bin/sh and captures combined output.
CommandResult run_command(const std::string& command);

// Single-quotes a path for the shell.
std::string shell_quote(const std::string& text);

// Directory removed on destruction.
class ScratchDir {
 public:
  explicit ScratchDir(const std::string& prefix);
  ~ScratchDir();
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace mttf
