#include <signal.h>
#include <unistd.h>

#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "favalon/favalon.hpp"

namespace {

favalon::Session* g_session = nullptr;

void on_interrupt(int) {
  if (g_session) g_session->cancel_flag().store(true);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"favalon - a typed lambda calculus shell"};
  std::string script;
  std::string rc;
  bool dump_ast = false, dump_rewritten = false, dump_types = false, no_prelude = false;
  app.add_option("script", script, "script file to run (omit for the REPL)");
  app.add_option("--rc", rc, "startup script (default: $FAVALON_RC)");
  app.add_flag("--dump-ast", dump_ast, "print the parse tree of each line instead of running it");
  app.add_flag("--dump-rewritten", dump_rewritten,
               "print each line after operator rewriting instead of running it");
  app.add_flag("--dump-types", dump_types, "print each line with its inferred type");
  app.add_flag("--no-prelude", no_prelude, "start with an empty environment");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc_code = app.exit(e);
    return rc_code == 0 ? 0 : 2;
  }

  ::signal(SIGPIPE, SIG_IGN);

  favalon::SessionOptions opt;
  opt.mode = script.empty() ? favalon::Mode::Repl : favalon::Mode::Script;
  opt.install_prelude = !no_prelude;
  opt.dump_ast = dump_ast;
  opt.dump_rewritten = dump_rewritten;
  opt.dump_types = dump_types;

  favalon::Session session(opt);
  g_session = &session;
  struct sigaction sa{};
  sa.sa_handler = on_interrupt;
  ::sigaction(SIGINT, &sa, nullptr);

  if (rc.empty()) {
    if (const char* env_rc = std::getenv("FAVALON_RC")) rc = env_rc;
  }
  if (!rc.empty()) session.run_rc(rc);

  if (!script.empty()) return session.run_script(script);
  return favalon::repl_loop(session, std::cin);
}
