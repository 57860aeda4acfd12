/**
 * Child-process supervision for the experiment rig: spawn a component
 * with its stdout on a pipe, read its READY line, wait with a deadline,
 * or take it down. stderr stays inherited so component logs remain
 * visible.
 */
#pragma once

#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ccsim/core/time.hpp"

namespace ccsim {

class Subprocess {
public:
    Subprocess() = default;

    Subprocess(Subprocess&& o) noexcept
        : pid_(std::exchange(o.pid_, -1)),
          out_fd_(std::exchange(o.out_fd_, -1)),
          line_buf_(std::move(o.line_buf_)),
          exit_code_(o.exit_code_) {}
    Subprocess& operator=(Subprocess&& o) noexcept {
        if (this != &o) {
            reset();
            pid_ = std::exchange(o.pid_, -1);
            out_fd_ = std::exchange(o.out_fd_, -1);
            line_buf_ = std::move(o.line_buf_);
            exit_code_ = o.exit_code_;
        }
        return *this;
    }
    Subprocess(const Subprocess&) = delete;
    Subprocess& operator=(const Subprocess&) = delete;
    ~Subprocess() { reset(); }

    static std::optional<Subprocess> spawn(const std::vector<std::string>& argv) {
        int pipefd[2];
        if (pipe(pipefd) != 0) return std::nullopt;
        const pid_t pid = fork();
        if (pid < 0) {
            close(pipefd[0]);
            close(pipefd[1]);
            return std::nullopt;
        }
        if (pid == 0) {
            dup2(pipefd[1], STDOUT_FILENO);
            close(pipefd[0]);
            close(pipefd[1]);
            std::vector<char*> args;
            args.reserve(argv.size() + 1);
            for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
            args.push_back(nullptr);
            execv(args[0], args.data());
            _exit(127);
        }
        close(pipefd[1]);
        Subprocess p;
        p.pid_ = pid;
        p.out_fd_ = pipefd[0];
        return p;
    }

    pid_t pid() const { return pid_; }
    bool valid() const { return pid_ > 0; }

    // Next stdout line within the deadline, or nullopt.
    std::optional<std::string> read_line(int timeout_ms) {
        const std::uint64_t deadline = mono_now_us() + static_cast<std::uint64_t>(timeout_ms) * 1000;
        for (;;) {
            if (auto line = take_buffered_line()) return line;
            const std::uint64_t now = mono_now_us();
            if (now >= deadline || out_fd_ < 0) return std::nullopt;
            pollfd pfd{out_fd_, POLLIN, 0};
            const int pr = ::poll(&pfd, 1, static_cast<int>((deadline - now) / 1000) + 1);
            if (pr <= 0) continue;
            char buf[4096];
            const ssize_t n = ::read(out_fd_, buf, sizeof(buf));
            if (n <= 0) {
                close(out_fd_);
                out_fd_ = -1;
                return take_buffered_line();
            }
            line_buf_.append(buf, static_cast<size_t>(n));
        }
    }

    bool running() {
        if (pid_ <= 0) return false;
        int status = 0;
        const pid_t r = waitpid(pid_, &status, WNOHANG);
        if (r == pid_) {
            record_exit(status);
            return false;
        }
        return r == 0;
    }

    // Waits up to timeout_ms; returns the exit code if the child ended.
    std::optional<int> wait(int timeout_ms) {
        if (pid_ <= 0) return exit_code_;
        const std::uint64_t deadline = mono_now_us() + static_cast<std::uint64_t>(timeout_ms) * 1000;
        for (;;) {
            int status = 0;
            const pid_t r = waitpid(pid_, &status, WNOHANG);
            if (r == pid_) {
                record_exit(status);
                return exit_code_;
            }
            if (mono_now_us() >= deadline) return std::nullopt;
            sleep_for_us(5000);
        }
    }

    void signal(int sig) {
        if (pid_ > 0) ::kill(pid_, sig);
    }

    // SIGTERM with a grace period, then SIGKILL.
    int terminate(int grace_ms = 3000) {
        if (pid_ <= 0) return exit_code_.value_or(-1);
        signal(SIGTERM);
        if (auto code = wait(grace_ms)) return *code;
        signal(SIGKILL);
        wait(2000);
        return exit_code_.value_or(-1);
    }

    std::optional<int> exit_code() const { return exit_code_; }

private:
    std::optional<std::string> take_buffered_line() {
        const auto nl = line_buf_.find('\n');
        if (nl == std::string::npos) return std::nullopt;
        std::string line = line_buf_.substr(0, nl);
        line_buf_.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
    }

    void record_exit(int status) {
        exit_code_ = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
        pid_ = -1;
    }

    void reset() {
        if (pid_ > 0) terminate(500);
        if (out_fd_ >= 0) {
            close(out_fd_);
            out_fd_ = -1;
        }
    }

    pid_t pid_ = -1;
    int out_fd_ = -1;
    std::string line_buf_;
    std::optional<int> exit_code_;
};

} // namespace ccsim
