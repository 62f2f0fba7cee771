#include "aad/process.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <tuple>

#include "aad/error.hpp"

namespace aad {

namespace {

void close_fd(int& fd) {
    if (fd >= 0) ::close(fd);
    fd = -1;
}

}  // namespace

ProcessResult run_process(const std::string& command, const std::string& input, int timeout_ms,
                          const std::string& cwd) {
    static const bool sigpipe_ignored = (::signal(SIGPIPE, SIG_IGN), true);
    (void)sigpipe_ignored;
    int in_pipe[2], out_pipe[2], err_pipe[2];
    if (::pipe2(in_pipe, O_CLOEXEC) != 0) throw Error("ExternalFailed", "pipe failed");
    if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
        ::close(in_pipe[0]);
        ::close(in_pipe[1]);
        throw Error("ExternalFailed", "pipe failed");
    }
    if (::pipe2(err_pipe, O_CLOEXEC) != 0) {
        for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) ::close(fd);
        throw Error("ExternalFailed", "pipe failed");
    }

    pid_t pid = ::fork();
    if (pid < 0) {
        for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1], err_pipe[0], err_pipe[1]}) ::close(fd);
        throw Error("ExternalFailed", "fork failed");
    }
    if (pid == 0) {
        ::setpgid(0, 0);
        ::dup2(in_pipe[0], 0);
        ::dup2(out_pipe[1], 1);
        ::dup2(err_pipe[1], 2);
        if (!cwd.empty() && ::chdir(cwd.c_str()) != 0) ::_exit(126);
        ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        ::_exit(127);
    }

    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    ::close(err_pipe[1]);
    int fd_in = in_pipe[1], fd_out = out_pipe[0], fd_err = err_pipe[0];
    ::fcntl(fd_in, F_SETFL, O_NONBLOCK);

    ProcessResult result;
    std::size_t written = 0;
    if (input.empty()) close_fd(fd_in);
    auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
    char buf[65536];

    while (fd_out >= 0 || fd_err >= 0) {
        auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0) {
            result.timed_out = true;
            break;
        }
        pollfd fds[3];
        int n = 0;
        int idx_in = -1, idx_out = -1, idx_err = -1;
        if (fd_in >= 0) {
            idx_in = n;
            fds[n++] = {fd_in, POLLOUT, 0};
        }
        if (fd_out >= 0) {
            idx_out = n;
            fds[n++] = {fd_out, POLLIN, 0};
        }
        if (fd_err >= 0) {
            idx_err = n;
            fds[n++] = {fd_err, POLLIN, 0};
        }
        int rc = ::poll(fds, static_cast<nfds_t>(n), static_cast<int>(left.count()));
        if (rc < 0) {
            if (errno == EINTR) continue;
            break;
        }
        if (idx_in >= 0 && fds[idx_in].revents) {
            ssize_t w = ::write(fd_in, input.data() + written, input.size() - written);
            if (w > 0) written += static_cast<std::size_t>(w);
            if (w < 0 && errno != EAGAIN) close_fd(fd_in);
            if (written == input.size()) close_fd(fd_in);
        }
        for (auto [idx, fd, sink] : {std::tuple{idx_out, &fd_out, &result.out}, std::tuple{idx_err, &fd_err, &result.err}}) {
            if (idx < 0 || !fds[idx].revents) continue;
            ssize_t r = ::read(*fd, buf, sizeof buf);
            if (r > 0) {
                sink->append(buf, static_cast<std::size_t>(r));
            } else if (r == 0 || errno != EAGAIN) {
                close_fd(*fd);
            }
        }
    }
    close_fd(fd_in);
    close_fd(fd_out);
    close_fd(fd_err);

    int status = 0;
    if (result.timed_out) {
        ::kill(-pid, SIGKILL);
        ::kill(pid, SIGKILL);
        ::waitpid(pid, &status, 0);
        return result;
    }
    while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
    if (WIFEXITED(status)) {
        result.exit_code = WEXITSTATUS(status);
    } else if (WIFSIGNALED(status)) {
        result.exit_code = 128 + WTERMSIG(status);
    }
    return result;
}

}  // namespace aad
