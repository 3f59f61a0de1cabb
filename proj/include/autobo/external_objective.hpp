#ifndef AUTOBO_EXTERNAL_OBJECTIVE_HPP
#define AUTOBO_EXTERNAL_OBJECTIVE_HPP
#pragma once

#include <cerrno>
#include <chrono>
#include <cstring>
#include <memory>
#include <string>
#include <thread>

#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <Eigen/Dense>

#include "json.hpp"

#include "autobo/errors.hpp"
#include "autobo/objective.hpp"

namespace autobo {

/// A long-lived child speaking line-delimited JSON: one `{"x": [...]}` line
/// in, one `{"y": value}` line out.
class ExternalProcess {
public:
    ExternalProcess(const std::string& command, double timeout_seconds)
        : command_(command), timeout_ms_(static_cast<int>(timeout_seconds * 1000.0)) {
        if (command.empty()) throw ArgumentError("external objective command is empty");
        if (!(timeout_seconds > 0.0)) throw ArgumentError("external objective timeout must be positive");
        int to_child[2];
        int from_child[2];
        if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, to_child) != 0)
            throw EvaluationError(std::string("socketpair failed: ") + std::strerror(errno));
        if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, from_child) != 0) {
            ::close(to_child[0]);
            ::close(to_child[1]);
            throw EvaluationError(std::string("socketpair failed: ") + std::strerror(errno));
        }
        pid_ = ::fork();
        if (pid_ < 0) {
            for (int fd : {to_child[0], to_child[1], from_child[0], from_child[1]}) ::close(fd);
            throw EvaluationError(std::string("fork failed: ") + std::strerror(errno));
        }
        if (pid_ == 0) {
            ::dup2(to_child[1], STDIN_FILENO);
            ::dup2(from_child[1], STDOUT_FILENO);
            ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
            ::_exit(127);
        }
        ::close(to_child[1]);
        ::close(from_child[1]);
        write_fd_ = to_child[0];
        read_fd_ = from_child[0];
    }

    ExternalProcess(const ExternalProcess&) = delete;
    ExternalProcess& operator=(const ExternalProcess&) = delete;

    ~ExternalProcess() { shutdown(); }

    /// Sends one point in original units and returns the reported value.
    double evaluate(const Eigen::VectorXd& x) {
        if (dead_) throw EvaluationError("external objective '" + command_ + "' is no longer running");
        nlohmann::json request{{"x", std::vector<double>(x.data(), x.data() + x.size())}};
        send_line(request.dump() + "\n");
        const std::string line = read_line();
        nlohmann::json reply;
        try {
            reply = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception&) {
            throw ProtocolError("external objective sent a non-JSON line: '" + line + "'");
        }
        if (!reply.is_object() || !reply.contains("y") || !reply.at("y").is_number())
            throw ProtocolError("external objective reply lacks a numeric \"y\": '" + line + "'");
        return reply.at("y").get<double>();
    }

private:
    void send_line(const std::string& line) {
        std::size_t sent = 0;
        while (sent < line.size()) {
            const auto n = ::send(write_fd_, line.data() + sent, line.size() - sent, MSG_NOSIGNAL);
            if (n < 0) {
                if (errno == EINTR) continue;
                mark_dead();
                throw EvaluationError("external objective '" + command_ + "' exited (write failed: " +
                                      std::strerror(errno) + ")");
            }
            sent += static_cast<std::size_t>(n);
        }
    }

    std::string read_line() {
        const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms_);
        for (;;) {
            if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
                std::string line = buffer_.substr(0, nl);
                buffer_.erase(0, nl + 1);
                if (!line.empty() && line.back() == '\r') line.pop_back();
                return line;
            }
            const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
            if (left.count() <= 0) {
                mark_dead();
                throw EvaluationError("external objective '" + command_ + "' timed out");
            }
            pollfd pfd{read_fd_, POLLIN, 0};
            const int ready = ::poll(&pfd, 1, static_cast<int>(left.count()));
            if (ready < 0 && errno == EINTR) continue;
            if (ready <= 0) continue;
            char chunk[4096];
            const auto n = ::read(read_fd_, chunk, sizeof chunk);
            if (n < 0 && errno == EINTR) continue;
            if (n <= 0) {
                mark_dead();
                throw EvaluationError("external objective '" + command_ + "' exited before replying");
            }
            buffer_.append(chunk, static_cast<std::size_t>(n));
        }
    }

    void mark_dead() {
        dead_ = true;
        if (pid_ > 0) ::kill(pid_, SIGKILL);
    }

    void shutdown() {
        if (write_fd_ >= 0) ::close(write_fd_);
        if (read_fd_ >= 0) ::close(read_fd_);
        write_fd_ = read_fd_ = -1;
        if (pid_ <= 0) return;
        for (int i = 0; i < 100; ++i) {
            if (::waitpid(pid_, nullptr, WNOHANG) != 0) {
                pid_ = -1;
                return;
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(10));
        }
        ::kill(pid_, SIGKILL);
        ::waitpid(pid_, nullptr, 0);
        pid_ = -1;
    }

    std::string command_;
    int timeout_ms_;
    pid_t pid_ = -1;
    int write_fd_ = -1;
    int read_fd_ = -1;
    std::string buffer_;
    bool dead_ = false;
};

/// Spawns `command` once; every evaluation is serial over its stdio.
inline Objective external_objective(const std::string& command, int dim, const Bounds& bounds,
                                    double timeout_seconds = 600.0) {
    validate_bounds(bounds);
    if (static_cast<std::size_t>(dim) != bounds.size()) throw ArgumentError("external objective: dim does not match bounds");
    auto process = std::make_shared<ExternalProcess>(command, timeout_seconds);
    Objective o;
    o.dim = dim;
    o.bounds = bounds;
    o.concurrent_safe = false;
    o.eval = [process, bounds](const Eigen::VectorXd& unit) { return process->evaluate(to_original(unit, bounds)); };
    return o;
}

} // namespace autobo

#endif // AUTOBO_EXTERNAL_OBJECTIVE_HPP
