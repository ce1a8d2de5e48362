#pragma once

#include <unistd.h>

#include <iostream>
#include <string>

#include "favalon/session.hpp"

namespace favalon {

struct ReplOptions {
  std::string prompt = "fav> ";
  std::string continuation = "...> ";
};

/// Prompt, read, evaluate, print, repeat. `exit` and end-of-input leave the
/// loop; diagnostics keep the session environment intact. Returns the exit
/// status.
inline int repl_loop(Session& session, std::istream& in, const ReplOptions& opt = {}) {
  const bool interactive = ::isatty(0) && ::isatty(1);
  std::string line, pending;
  for (;;) {
    if (interactive) {
      std::fputs(pending.empty() ? opt.prompt.c_str() : opt.continuation.c_str(), stdout);
      std::fflush(stdout);
    }
    if (!std::getline(in, line)) break;
    pending += line;
    if (detail::unbalanced_parens(pending) > 0) {
      pending += "\n";
      continue;
    }
    std::string input = std::move(pending);
    pending.clear();
    std::string trimmed = input;
    trimmed.erase(0, trimmed.find_first_not_of(" \t"));
    trimmed.erase(trimmed.find_last_not_of(" \t\r") + 1);
    if (trimmed == "exit") return 0;
    session.eval_line(input);
  }
  return 0;
}

}  // namespace favalon
