#pragma once

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/stat.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "favalon/environment.hpp"
#include "favalon/types.hpp"

extern "C" char** environ;

namespace favalon {

struct EvalError;  // eval.hpp

struct SpawnError : FavalonError {
  int stage = 0;
  SpawnError(int stage_index, std::string msg, Span s = {})
      : FavalonError(std::move(msg), s), stage(stage_index) {}
};

/// Resolved external command: executable path plus fixed leading arguments.
struct CommandSpec {
  std::string path;
  std::vector<std::string> leading_args;
};

struct CommandResult {
  int exit_code = -1;
  std::string stderr_text;
};

namespace detail {

struct Fd {
  int fd = -1;
  Fd() = default;
  explicit Fd(int f) : fd(f) {}
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  Fd(Fd&& o) noexcept : fd(o.fd) { o.fd = -1; }
  Fd& operator=(Fd&& o) noexcept {
    reset();
    fd = o.fd;
    o.fd = -1;
    return *this;
  }
  ~Fd() { reset(); }
  void reset() {
    if (fd >= 0) ::close(fd);
    fd = -1;
  }
  int release() {
    int f = fd;
    fd = -1;
    return f;
  }
  explicit operator bool() const { return fd >= 0; }
};

inline void make_pipe(Fd& read_end, Fd& write_end) {
  int fds[2];
  if (::pipe2(fds, O_CLOEXEC) != 0)
    throw SpawnError(0, std::string("pipe: ") + std::strerror(errno));
  read_end = Fd(fds[0]);
  write_end = Fd(fds[1]);
}

inline void block_sigpipe_here() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGPIPE);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
}

/// Reads until EOF with cancellation polling; returns false when cancelled.
inline bool drain_fd(int fd, const std::function<void(const char*, std::size_t)>& sink,
                     const std::atomic<bool>* cancel) {
  char buf[8192];
  for (;;) {
    if (cancel && cancel->load()) return false;
    pollfd p{fd, POLLIN, 0};
    int r = ::poll(&p, 1, 50);
    if (r < 0 && errno != EINTR) return true;
    if (r <= 0) continue;
    ssize_t n = ::read(fd, buf, sizeof buf);
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      return true;
    }
    if (n == 0) return true;
    if (sink) sink(buf, static_cast<std::size_t>(n));
  }
}

}  // namespace detail

/// One spawned process: pid plus its stderr capture.
struct ProcessHandle {
  pid_t pid = -1;
  std::string name;
  std::thread stderr_thread;
  std::string stderr_text;
  std::thread stdin_thread;
  bool reaped = false;
  bool output_eof = false;  // stdout was drained to end of stream
  int exit_code = -1;

  int reap() {
    if (!reaped && pid > 0) {
      int status = 0;
      ::waitpid(pid, &status, 0);
      exit_code = decode(status);
      reaped = true;
    }
    join_threads();
    return exit_code;
  }

  /// Reaps without blocking; false while the process is still running.
  bool try_reap() {
    if (reaped) return true;
    if (pid <= 0) return true;
    int status = 0;
    pid_t r = ::waitpid(pid, &status, WNOHANG);
    if (r == 0) return false;
    exit_code = r < 0 ? -1 : decode(status);
    reaped = true;
    join_threads();
    return true;
  }

  void kill_now() {
    if (!reaped && pid > 0) ::kill(pid, SIGTERM);
  }

  ~ProcessHandle() {
    kill_now();
    reap();
  }

 private:
  static int decode(int status) {
    return WIFEXITED(status) ? WEXITSTATUS(status)
                             : 128 + (WIFSIGNALED(status) ? WTERMSIG(status) : 0);
  }
  void join_threads() {
    if (stdin_thread.joinable()) stdin_thread.join();
    if (stderr_thread.joinable()) stderr_thread.join();
  }
};

/// Session-level resolver with per-name memoization invalidated on mtime
/// changes of the resolved executable.
class CommandResolver {
 public:
  std::optional<CommandSpec> resolve(const std::string& name) {
    if (name.empty() || name.find('/') != std::string::npos) {
      // explicit paths bypass the search list
      if (is_executable(name)) return CommandSpec{name, {}};
      return std::nullopt;
    }
    auto it = cache_.find(name);
    if (it != cache_.end()) {
      if (it->second.path.empty()) return std::nullopt;
      struct stat st{};
      if (::stat(it->second.path.c_str(), &st) == 0 && st.st_mtime == it->second.mtime)
        return CommandSpec{it->second.path, {}};
      cache_.erase(it);
    }
    const char* path_env = ::getenv("PATH");
    std::string dirs = path_env ? path_env : "/usr/bin:/bin";
    std::size_t start = 0;
    while (start <= dirs.size()) {
      std::size_t colon = dirs.find(':', start);
      std::string dir = dirs.substr(start, colon == std::string::npos ? colon : colon - start);
      start = colon == std::string::npos ? dirs.size() + 1 : colon + 1;
      if (dir.empty()) dir = ".";
      std::string candidate = dir + "/" + name;
      if (is_executable(candidate)) {
        struct stat st{};
        ::stat(candidate.c_str(), &st);
        cache_[name] = {candidate, st.st_mtime};
        return CommandSpec{candidate, {}};
      }
    }
    cache_[name] = {"", 0};  // negative entry
    return std::nullopt;
  }

 private:
  static bool is_executable(const std::string& p) {
    struct stat st{};
    return ::stat(p.c_str(), &st) == 0 && S_ISREG(st.st_mode) && ::access(p.c_str(), X_OK) == 0;
  }
  struct Entry {
    std::string path;
    time_t mtime;
  };
  std::map<std::string, Entry> cache_;
};

namespace detail {

/// Launches one process. stdin_fd/stdout_fd < 0 mean "create a pipe";
/// the created ends are returned through the out parameters.
inline std::shared_ptr<ProcessHandle> spawn_one(const CommandSpec& spec,
                                                const std::vector<std::string>& argv_extra,
                                                int stdin_fd, Fd* stdin_writer, Fd* stdout_reader,
                                                int stage_index) {
  Fd in_read, in_write, out_read, out_write, err_read, err_write;
  if (stdin_fd < 0) {
    make_pipe(in_read, in_write);
    stdin_fd = in_read.fd;
  }
  make_pipe(out_read, out_write);
  make_pipe(err_read, err_write);

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, stdin_fd, 0);
  posix_spawn_file_actions_adddup2(&actions, out_write.fd, 1);
  posix_spawn_file_actions_adddup2(&actions, err_write.fd, 2);

  std::vector<std::string> args;
  args.push_back(spec.path);
  args.insert(args.end(), spec.leading_args.begin(), spec.leading_args.end());
  args.insert(args.end(), argv_extra.begin(), argv_extra.end());
  std::vector<char*> argv;
  argv.reserve(args.size() + 1);
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);

  pid_t pid = -1;
  int rc = ::posix_spawn(&pid, spec.path.c_str(), &actions, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  if (rc != 0)
    throw SpawnError(stage_index,
                     "cannot run '" + spec.path + "': " + std::strerror(rc));

  auto handle = std::make_shared<ProcessHandle>();
  handle->pid = pid;
  handle->name = spec.path;

  // capture stderr separately from any stdout wiring
  int err_fd = err_read.release();
  ProcessHandle* hp = handle.get();
  handle->stderr_thread = std::thread([err_fd, hp] {
    block_sigpipe_here();
    Fd owned(err_fd);
    drain_fd(owned.fd, [hp](const char* p, std::size_t n) { hp->stderr_text.append(p, n); },
             nullptr);
  });

  if (stdin_writer) *stdin_writer = std::move(in_write);
  if (stdout_reader) *stdout_reader = std::move(out_read);
  return handle;
}

}  // namespace detail

/// Pumps an engine-side byte source into a command's stdin on a dedicated
/// thread, tolerating downstream exit (EPIPE is shell semantics, not an
/// error).
inline void pump_into(std::shared_ptr<ProcessHandle> handle, detail::Fd writer,
                      std::function<std::size_t(char*, std::size_t)> source,
                      const std::atomic<bool>* cancel) {
  int wfd = writer.release();
  ProcessHandle* hp = handle.get();
  hp->stdin_thread = std::thread([wfd, source = std::move(source), cancel] {
    detail::block_sigpipe_here();
    detail::Fd owned(wfd);
    char buf[8192];
    for (;;) {
      if (cancel && cancel->load()) return;
      std::size_t n = source ? source(buf, sizeof buf) : 0;
      if (n == 0) return;
      std::size_t off = 0;
      while (off < n) {
        ssize_t w = ::write(owned.fd, buf + off, n - off);
        if (w < 0) {
          if (errno == EINTR) continue;
          return;  // EPIPE: downstream exited early
        }
        off += static_cast<std::size_t>(w);
      }
    }
  });
}

/// Wraps a command's stdout as a single-consumer byte channel; reaping
/// happens when the channel is drained or dropped.
inline std::shared_ptr<ByteChannel> channel_from_process(std::shared_ptr<ProcessHandle> handle,
                                                         detail::Fd stdout_reader,
                                                         const std::atomic<bool>* cancel) {
  auto chan = std::make_shared<ByteChannel>();
  auto fd = std::make_shared<detail::Fd>(std::move(stdout_reader));
  chan->raw_fd = fd->fd;
  chan->producer = handle;
  chan->read = [fd, handle, cancel](char* buf, std::size_t cap) -> std::size_t {
    for (;;) {
      if (cancel && cancel->load()) {
        handle->kill_now();
        return 0;
      }
      pollfd p{fd->fd, POLLIN, 0};
      int r = ::poll(&p, 1, 50);
      if (r < 0 && errno != EINTR) return 0;
      if (r <= 0) continue;
      ssize_t n = ::read(fd->fd, buf, cap);
      if (n < 0) {
        if (errno == EINTR || errno == EAGAIN) continue;
        return 0;
      }
      if (n == 0) handle->output_eof = true;
      return static_cast<std::size_t>(n);
    }
  };
  chan->on_close = [fd] { fd->reset(); };
  return chan;
}

inline std::shared_ptr<ByteChannel> channel_from_string(std::string data) {
  auto chan = std::make_shared<ByteChannel>();
  auto state = std::make_shared<std::pair<std::string, std::size_t>>(std::move(data), 0);
  chan->read = [state](char* buf, std::size_t cap) -> std::size_t {
    std::size_t left = state->first.size() - state->second;
    std::size_t n = left < cap ? left : cap;
    std::memcpy(buf, state->first.data() + state->second, n);
    state->second += n;
    return n;
  };
  return chan;
}

/// One pipeline stage: command plus extra argv strings.
struct PipelineStage {
  CommandSpec spec;
  std::vector<std::string> argv;
};

/// Spawns `stages` connected stdout->stdin by OS pipes. `source` (optional)
/// feeds stage 1; the final stdout comes back as a byte channel. Exit codes
/// are reported in stage order after the caller drains the channel and
/// reaps the handles.
struct PipelineRun {
  std::shared_ptr<ByteChannel> output;
  std::vector<std::shared_ptr<ProcessHandle>> handles;

  std::vector<CommandResult> finish() {
    std::vector<CommandResult> results;
    for (auto& h : handles) {
      CommandResult r;
      r.exit_code = h->reap();
      r.stderr_text = h->stderr_text;
      results.push_back(std::move(r));
    }
    return results;
  }
};

inline PipelineRun spawn_pipeline(const std::vector<PipelineStage>& stages,
                                  std::function<std::size_t(char*, std::size_t)> source,
                                  const std::atomic<bool>* cancel = nullptr) {
  if (stages.empty()) throw SpawnError(0, "pipeline needs at least one stage");
  PipelineRun run;
  detail::Fd upstream;  // read end feeding the next stage
  for (std::size_t i = 0; i < stages.size(); ++i) {
    detail::Fd writer, reader;
    int stdin_fd = upstream ? upstream.fd : -1;
    auto handle = detail::spawn_one(stages[i].spec, stages[i].argv, stdin_fd,
                                    stdin_fd < 0 ? &writer : nullptr, &reader,
                                    static_cast<int>(i));
    if (i == 0 && stdin_fd < 0) {
      if (source)
        pump_into(handle, std::move(writer), std::move(source), cancel);
      else
        writer.reset();  // immediate EOF on stdin
    }
    upstream = std::move(reader);
    run.handles.push_back(std::move(handle));
  }
  run.output = channel_from_process(run.handles.back(), std::move(upstream), cancel);
  // the channel must keep every stage alive, not just the last
  auto all = std::make_shared<std::vector<std::shared_ptr<ProcessHandle>>>(run.handles);
  run.output->producer = all;
  return run;
}

inline std::optional<CommandSpec> resolve_command(const std::string& name) {
  CommandResolver r;
  return r.resolve(name);
}

}  // namespace favalon
