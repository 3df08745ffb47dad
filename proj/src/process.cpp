#include "forge/process.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <cstring>

#include "forge/error.hpp"

namespace forge::process {

std::string shell_quote(const std::string& arg) {
  std::string out = "'";
  for (char c : arg) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  return out + "'";
}

Result run_shell(const std::string& command, const std::filesystem::path& workdir,
                 std::chrono::duration<double> timeout) {
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  int pipefd[2];
  if (pipe(pipefd) != 0) throw Error(std::string("pipe failed: ") + std::strerror(errno));

  const pid_t pid = fork();
  if (pid < 0) {
    close(pipefd[0]);
    close(pipefd[1]);
    throw Error(std::string("fork failed: ") + std::strerror(errno));
  }
  if (pid == 0) {
    setpgid(0, 0);
    dup2(pipefd[1], STDOUT_FILENO);
    dup2(pipefd[1], STDERR_FILENO);
    close(pipefd[0]);
    close(pipefd[1]);
    if (!workdir.empty() && chdir(workdir.c_str()) != 0) _exit(126);
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  setpgid(pid, pid);
  close(pipefd[1]);
  fcntl(pipefd[0], F_SETFL, fcntl(pipefd[0], F_GETFL) | O_NONBLOCK);

  Result result;
  std::array<char, 4096> buf{};
  bool open = true;
  while (open) {
    const auto elapsed = std::chrono::duration<double>(clock::now() - start);
    if (elapsed >= timeout) {
      result.timed_out = true;
      kill(-pid, SIGKILL);
      break;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(timeout - elapsed).count();
    pollfd p{pipefd[0], POLLIN, 0};
    const int ready = poll(&p, 1, static_cast<int>(std::min<long long>(left + 1, 200)));
    if (ready < 0 && errno != EINTR) break;
    if (ready > 0) {
      while (true) {
        const ssize_t n = read(pipefd[0], buf.data(), buf.size());
        if (n > 0) {
          result.output.append(buf.data(), static_cast<std::size_t>(n));
        } else if (n == 0) {
          open = false;
          break;
        } else {
          break;  // EAGAIN
        }
      }
    }
  }
  close(pipefd[0]);

  int status = 0;
  if (!result.timed_out) {
    // Output closed; the shell may still be running with stdout redirected.
    while (true) {
      const pid_t r = waitpid(pid, &status, WNOHANG);
      if (r == pid) {
        result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        break;
      }
      if (r < 0 && errno != EINTR) break;
      if (std::chrono::duration<double>(clock::now() - start) >= timeout) {
        result.timed_out = true;
        kill(-pid, SIGKILL);
        break;
      }
      usleep(2000);
    }
  }
  if (result.timed_out) waitpid(pid, &status, 0);
  result.duration_s = std::chrono::duration<double>(clock::now() - start).count();
  return result;
}

}  // namespace forge::process
