// Copyright (c) 2026 The Comix Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "comix/util/subprocess.h"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace comix {

namespace {

void CloseFd(int* fd) {
  if (*fd >= 0) {
    ::close(*fd);
    *fd = -1;
  }
}

}  // namespace

std::optional<std::vector<std::string>> RunLineProtocol(
    const std::string& command, const std::vector<std::string>& lines,
    std::chrono::milliseconds timeout) {
  int in_pipe[2];
  int out_pipe[2];
  if (::pipe(in_pipe) != 0) return std::nullopt;
  if (::pipe(out_pipe) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    return std::nullopt;
  }
  pid_t pid = ::fork();
  if (pid < 0) {
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) ::close(fd);
    return std::nullopt;
  }
  if (pid == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    int devnull = ::open("/dev/null", O_WRONLY);
    if (devnull >= 0) ::dup2(devnull, STDERR_FILENO);
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) ::close(fd);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  int write_fd = in_pipe[1];
  int read_fd = out_pipe[0];
  ::fcntl(write_fd, F_SETFL, O_NONBLOCK);
  ::fcntl(read_fd, F_SETFL, O_NONBLOCK);

  std::string payload;
  for (const auto& l : lines) {
    payload += l;
    payload += '\n';
  }
  size_t written = 0;
  if (payload.empty()) CloseFd(&write_fd);
  std::string received;
  auto deadline = std::chrono::steady_clock::now() + timeout;
  bool timed_out = false;
  // SIGPIPE from a child that exits early must not kill us.
  struct sigaction ignore {}, old {};
  ignore.sa_handler = SIG_IGN;
  ::sigaction(SIGPIPE, &ignore, &old);

  while (read_fd >= 0) {
    auto now = std::chrono::steady_clock::now();
    if (now >= deadline) {
      timed_out = true;
      break;
    }
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now);
    pollfd fds[2];
    int n = 0;
    fds[n++] = {read_fd, POLLIN, 0};
    if (write_fd >= 0) fds[n++] = {write_fd, POLLOUT, 0};
    int rc = ::poll(fds, n, static_cast<int>(left.count()) + 1);
    if (rc < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (write_fd >= 0 && (fds[1].revents & (POLLOUT | POLLERR | POLLHUP))) {
      ssize_t w = ::write(write_fd, payload.data() + written, payload.size() - written);
      if (w > 0) written += static_cast<size_t>(w);
      if (w < 0 && errno != EAGAIN) CloseFd(&write_fd);
      if (written == payload.size()) CloseFd(&write_fd);
    }
    if (fds[0].revents & (POLLIN | POLLHUP | POLLERR)) {
      char buf[4096];
      ssize_t r = ::read(read_fd, buf, sizeof(buf));
      if (r > 0) {
        received.append(buf, static_cast<size_t>(r));
      } else if (r == 0 || errno != EAGAIN) {
        CloseFd(&read_fd);
      }
    }
  }
  CloseFd(&write_fd);
  CloseFd(&read_fd);
  ::sigaction(SIGPIPE, &old, nullptr);
  if (timed_out) ::kill(pid, SIGKILL);
  int status = 0;
  ::waitpid(pid, &status, 0);
  if (timed_out || !WIFEXITED(status) || WEXITSTATUS(status) != 0) return std::nullopt;

  std::vector<std::string> out;
  size_t start = 0;
  while (start < received.size()) {
    size_t nl = received.find('\n', start);
    if (nl == std::string::npos) nl = received.size();
    std::string line = received.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(std::move(line));
    start = nl + 1;
  }
  return out;
}

}  // namespace comix
