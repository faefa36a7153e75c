#pragma once

#include <cerrno>
#include <chrono>
#include <cstring>
#include <filesystem>
#include <string>
#include <thread>
#include <utility>
#include <vector>

extern "C" {
#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>
}

#include "hdlscale/core/error.hpp"

extern char** environ;

namespace hdlscale {

inline constexpr std::size_t kCaptureLimit = 64 * 1024;

struct ProcessResult {
  int exit_code = -1;  // valid when !signaled && !timed_out
  bool signaled = false;
  int term_signal = 0;
  bool timed_out = false;
  std::string out;
  std::string err;
  bool out_truncated = false;
  bool err_truncated = false;
  std::chrono::milliseconds elapsed{0};

  bool success() const { return !timed_out && !signaled && exit_code == 0; }
};

namespace detail {

class Fd {
 public:
  Fd() = default;
  explicit Fd(int fd) : fd_(fd) {}
  Fd(Fd&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Fd& operator=(Fd&& o) noexcept {
    if (this != &o) {
      reset();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  ~Fd() { reset(); }
  int get() const { return fd_; }
  void reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_ = -1;
};

inline std::pair<Fd, Fd> make_pipe() {
  int fds[2];
  if (::pipe2(fds, O_CLOEXEC) != 0)
    throw Error(Errc::Io, std::string("pipe2: ") + std::strerror(errno));
  return {Fd(fds[0]), Fd(fds[1])};
}

inline void append_capped(std::string& dst, const char* data, std::size_t n, std::size_t limit,
                          bool& truncated) {
  if (dst.size() >= limit) {
    truncated = truncated || n > 0;
    return;
  }
  std::size_t take = std::min(n, limit - dst.size());
  dst.append(data, take);
  truncated = truncated || take < n;
}

}  // namespace detail

// Runs argv[0] (PATH lookup) in `cwd` inside a fresh process group. On
// timeout the whole group is killed. stdout/stderr are captured separately,
// each capped at `capture_limit` bytes. Throws Error(ToolNotFound) when the
// executable cannot be found.
inline ProcessResult run_process(const std::vector<std::string>& argv,
                                 const std::filesystem::path& cwd,
                                 std::chrono::milliseconds timeout,
                                 std::size_t capture_limit = kCaptureLimit) {
  using clock = std::chrono::steady_clock;
  if (argv.empty()) throw Error(Errc::InvalidConfig, "empty command");

  auto [out_r, out_w] = detail::make_pipe();
  auto [err_r, err_w] = detail::make_pipe();

  std::vector<char*> cargv;
  cargv.reserve(argv.size() + 1);
  for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
  cargv.push_back(nullptr);

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_addopen(&actions, STDIN_FILENO, "/dev/null", O_RDONLY, 0);
  posix_spawn_file_actions_adddup2(&actions, out_w.get(), STDOUT_FILENO);
  posix_spawn_file_actions_adddup2(&actions, err_w.get(), STDERR_FILENO);
  const std::string cwd_str = cwd.string();
  if (!cwd_str.empty()) posix_spawn_file_actions_addchdir_np(&actions, cwd_str.c_str());

  posix_spawnattr_t attr;
  posix_spawnattr_init(&attr);
  posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP | POSIX_SPAWN_SETSIGMASK |
                                      POSIX_SPAWN_SETSIGDEF);
  posix_spawnattr_setpgroup(&attr, 0);
  sigset_t mask;
  sigemptyset(&mask);
  posix_spawnattr_setsigmask(&attr, &mask);
  sigset_t defaults;
  sigemptyset(&defaults);
  sigaddset(&defaults, SIGPIPE);
  sigaddset(&defaults, SIGINT);
  sigaddset(&defaults, SIGTERM);
  posix_spawnattr_setsigdefault(&attr, &defaults);

  const auto start = clock::now();
  pid_t pid = -1;
  int rc = ::posix_spawnp(&pid, cargv[0], &actions, &attr, cargv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  posix_spawnattr_destroy(&attr);
  if (rc == ENOENT) throw Error(Errc::ToolNotFound, "executable not found: " + argv[0]);
  if (rc != 0) throw Error(Errc::Io, "cannot start " + argv[0] + ": " + std::strerror(rc));

  out_w.reset();
  err_w.reset();

  ProcessResult result;
  const auto deadline = start + timeout;
  bool out_open = true, err_open = true, exited = false;
  int status = 0;
  std::chrono::steady_clock::time_point exited_at{};
  char buf[8192];

  auto reap = [&](int flags) {
    if (exited) return;
    pid_t r = ::waitpid(pid, &status, flags);
    if (r == pid) {
      exited = true;
      exited_at = clock::now();
    }
  };

  while (out_open || err_open) {
    auto now = clock::now();
    if (now >= deadline) {
      result.timed_out = !exited;
      break;
    }
    // A finished child whose helpers still hold the pipes gets a short grace.
    if (exited && now - exited_at > std::chrono::milliseconds(200)) break;

    pollfd fds[2];
    nfds_t n = 0;
    if (out_open) fds[n++] = {out_r.get(), POLLIN, 0};
    if (err_open) fds[n++] = {err_r.get(), POLLIN, 0};
    auto wait_ms = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count();
    int ready = ::poll(fds, n, static_cast<int>(std::clamp<long long>(wait_ms, 1, 50)));
    if (ready < 0 && errno != EINTR) break;
    for (nfds_t i = 0; i < n && ready > 0; ++i) {
      if (!(fds[i].revents & (POLLIN | POLLHUP | POLLERR))) continue;
      bool is_out = fds[i].fd == out_r.get();
      ssize_t got = ::read(fds[i].fd, buf, sizeof buf);
      if (got > 0) {
        if (is_out)
          detail::append_capped(result.out, buf, static_cast<std::size_t>(got), capture_limit,
                                result.out_truncated);
        else
          detail::append_capped(result.err, buf, static_cast<std::size_t>(got), capture_limit,
                                result.err_truncated);
      } else if (got == 0 || errno != EINTR) {
        (is_out ? out_open : err_open) = false;
      }
    }
    reap(WNOHANG);
  }

  // Output closed but the child is still running.
  while (!exited && !result.timed_out) {
    reap(WNOHANG);
    if (exited) break;
    if (clock::now() >= deadline) {
      result.timed_out = true;
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }

  // Take down the group: on timeout this stops the run, otherwise it clears
  // stragglers that outlived the child.
  ::kill(-pid, SIGKILL);
  while (!exited) {
    pid_t r = ::waitpid(pid, &status, 0);
    if (r == pid || (r < 0 && errno != EINTR)) exited = true;
  }

  result.elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(clock::now() - start);
  if (!result.timed_out) {
    if (WIFEXITED(status)) {
      result.exit_code = WEXITSTATUS(status);
    } else if (WIFSIGNALED(status)) {
      result.signaled = true;
      result.term_signal = WTERMSIG(status);
    }
  }
  return result;
}

}  // namespace hdlscale
