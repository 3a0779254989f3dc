#include "udiff/evaluator.hpp"

#include "json.hpp"

#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <stdexcept>

namespace udiff {

namespace {

[[noreturn]] void fail(const std::string& what) {
    throw std::runtime_error("subprocess scorer: " + what + " (" + std::strerror(errno) + ")");
}

}  // namespace

SubprocessScorer::SubprocessScorer(std::vector<std::string> argv) {
    if (argv.empty()) throw std::invalid_argument("subprocess scorer needs a command");
    int sv[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) != 0) fail("socketpair failed");
    const pid_t pid = ::fork();
    if (pid < 0) {
        ::close(sv[0]);
        ::close(sv[1]);
        fail("fork failed");
    }
    if (pid == 0) {
        ::dup2(sv[1], STDIN_FILENO);
        ::dup2(sv[1], STDOUT_FILENO);
        std::vector<char*> args;
        for (auto& a : argv) args.push_back(a.data());
        args.push_back(nullptr);
        ::execvp(args[0], args.data());
        ::_exit(127);
    }
    ::close(sv[1]);
    pid_ = pid;
    to_child_ = from_child_ = sv[0];
}

SubprocessScorer::~SubprocessScorer() {
    if (to_child_ >= 0) {
        ::shutdown(to_child_, SHUT_WR);
        ::close(to_child_);
    }
    if (pid_ > 0) {
        int status = 0;
        ::waitpid(pid_, &status, 0);
    }
}

std::vector<double> SubprocessScorer::token_logprobs(std::span<const Token> tokens) const {
    const std::string request = nlohmann::json{{"tokens", std::vector<Token>(tokens.begin(), tokens.end())}}.dump() + "\n";
    std::size_t sent = 0;
    while (sent < request.size()) {
        const auto n = ::send(to_child_, request.data() + sent, request.size() - sent, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            fail("write to scorer failed");
        }
        sent += static_cast<std::size_t>(n);
    }

    std::size_t eol;
    while ((eol = buffer_.find('\n')) == std::string::npos) {
        char chunk[4096];
        const auto n = ::read(from_child_, chunk, sizeof chunk);
        if (n < 0 && errno == EINTR) continue;
        if (n < 0) fail("read from scorer failed");
        if (n == 0) throw std::runtime_error("subprocess scorer exited before replying");
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
    const std::string line = buffer_.substr(0, eol);
    buffer_.erase(0, eol + 1);

    double total;
    try {
        total = nlohmann::json::parse(line).at("logprob").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("subprocess scorer sent a malformed reply: ") + e.what());
    }
    if (tokens.empty()) return {};
    return std::vector<double>(tokens.size(), total / static_cast<double>(tokens.size()));
}

}  // namespace udiff
