#include "tipline/sandbox.hpp"

#include <array>
#include <atomic>
#include <cerrno>
#include <csignal>
#include <cstring>
#include <random>
#include <thread>
#include <vector>

#include <fcntl.h>
#include <poll.h>
#include <sched.h>
#include <sys/wait.h>
#include <unistd.h>

#include "tipline/error.hpp"

namespace tipline::sandbox {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;
using std::chrono::milliseconds;

std::string_view to_string(ExecutionResult::Status s) {
    switch (s) {
        case ExecutionResult::Status::ok: return "ok";
        case ExecutionResult::Status::exception: return "exception";
        case ExecutionResult::Status::timeout: return "timeout";
    }
    return "ok";
}

std::string render_for_model(const ExecutionResult& r) {
    std::string out = "status: " + std::string(to_string(r.status)) + "\n";
    if (!r.stdout_text.empty()) out += "stdout:\n" + r.stdout_text + "\n";
    if (!r.stderr_text.empty()) out += "stderr:\n" + r.stderr_text + "\n";
    if (r.stdout_text.empty() && r.stderr_text.empty()) out += "(no output)\n";
    return out;
}

void truncate_output(ExecutionResult& r, std::size_t limit) {
    if (r.stdout_text.size() + r.stderr_text.size() <= limit) return;
    r.truncated = true;
    if (r.stdout_text.size() >= limit) {
        r.stdout_text.resize(limit);
        r.stdout_text += kTruncationMarker;
        r.stderr_text.clear();
        return;
    }
    r.stderr_text.resize(limit - r.stdout_text.size());
    r.stderr_text += kTruncationMarker;
}

namespace {

std::atomic<std::uint64_t> g_session_counter{0};

std::string make_session_id() {
    static thread_local std::mt19937_64 rng{std::random_device{}()};
    char buf[32];
    std::snprintf(buf, sizeof buf, "sbx-%llx-%llu", static_cast<unsigned long long>(rng() & 0xffffffULL),
                  static_cast<unsigned long long>(++g_session_counter));
    return buf;
}

void close_fd(int& fd) {
    if (fd >= 0) ::close(fd);
    fd = -1;
}

bool write_all(int fd, std::string_view data) {
    while (!data.empty()) {
        ssize_t n = ::write(fd, data.data(), data.size());
        if (n < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        data.remove_prefix(static_cast<std::size_t>(n));
    }
    return true;
}

}  // namespace

SandboxSession::SandboxSession(DatasetBundle bundle, SandboxOptions options)
    : bundle_(std::move(bundle)), options_(std::move(options)), session_id_(make_session_id()) {}

std::unique_ptr<SandboxSession> SandboxSession::start(const DatasetBundle& bundle, SandboxOptions options) {
    // A runner that dies mid-write must surface as an error, not kill us.
    static const bool sigpipe_ignored = [] { return std::signal(SIGPIPE, SIG_IGN) != SIG_ERR; }();
    (void)sigpipe_ignored;
    if (options.runner_script.empty()) throw SandboxError("no sandbox runner script configured");
    if (!std::filesystem::is_regular_file(options.runner_script))
        throw SandboxError("sandbox runner not found: " + options.runner_script.string());
    options.runner_script = std::filesystem::absolute(options.runner_script);

    std::unique_ptr<SandboxSession> s(new SandboxSession(bundle, std::move(options)));
    std::string tmpl = (std::filesystem::temp_directory_path() / "tipline-sandbox-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) throw SandboxError("cannot create scratch directory: " + std::string(strerror(errno)));
    s->scratch_ = tmpl;
    s->dataset_copy_ = s->scratch_ / bundle.csv_path.filename();
    try {
        std::filesystem::copy_file(bundle.csv_path, s->dataset_copy_);
        s->spawn();
        s->handshake();
    } catch (...) {
        s->shutdown();
        throw;
    }
    return s;
}

SandboxSession::~SandboxSession() { shutdown(); }

void SandboxSession::spawn() {
    int in_pipe[2], out_pipe[2], err_pipe[2], exec_pipe[2];
    if (::pipe2(in_pipe, O_CLOEXEC) || ::pipe2(out_pipe, O_CLOEXEC) || ::pipe2(err_pipe, O_CLOEXEC) ||
        ::pipe2(exec_pipe, O_CLOEXEC))
        throw SandboxError("pipe: " + std::string(strerror(errno)));

    const std::string interpreter = options_.interpreter;
    const std::string script = options_.runner_script.string();
    const std::string workdir = scratch_.string();
    const bool isolate = options_.isolate_network;

    pid_t pid = ::fork();
    if (pid < 0) throw SandboxError("fork: " + std::string(strerror(errno)));
    if (pid == 0) {
        ::setpgid(0, 0);
        // Status byte on the exec pipe: 0 = no network namespace obtained.
        char net_ok = 1;
        if (isolate && ::unshare(CLONE_NEWNET) != 0 && ::unshare(CLONE_NEWUSER | CLONE_NEWNET) != 0) {
            net_ok = 0;
            ::setenv("TIPLINE_SANDBOX_NO_NETWORK", "1", 1);
        }
        ::dup2(in_pipe[0], STDIN_FILENO);
        ::dup2(out_pipe[1], STDOUT_FILENO);
        ::dup2(err_pipe[1], STDERR_FILENO);
        if (::chdir(workdir.c_str()) != 0) _exit(126);
        ::setenv("TIPLINE_SANDBOX", "1", 1);
        ::setenv("PYTHONUNBUFFERED", "1", 1);
        [[maybe_unused]] auto w = ::write(exec_pipe[1], &net_ok, 1);
        std::array<char*, 3> argv{const_cast<char*>(interpreter.c_str()), const_cast<char*>(script.c_str()), nullptr};
        ::execvp(argv[0], argv.data());
        int err = errno;
        w = ::write(exec_pipe[1], &err, sizeof err);
        _exit(127);
    }

    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    ::close(err_pipe[1]);
    ::close(exec_pipe[1]);
    pid_ = pid;
    stdin_fd_ = in_pipe[1];
    stdout_fd_ = out_pipe[0];
    stderr_fd_ = err_pipe[0];
    pending_.clear();
    proc_stderr_.clear();

    char net_ok = 0;
    ssize_t n = ::read(exec_pipe[0], &net_ok, 1);
    net_isolated_ = (n == 1 && net_ok == 1 && isolate);
    int exec_errno = 0;
    n = ::read(exec_pipe[0], &exec_errno, sizeof exec_errno);
    ::close(exec_pipe[0]);
    if (n == static_cast<ssize_t>(sizeof exec_errno)) {
        kill_process();
        throw SandboxError("cannot launch interpreter '" + interpreter + "': " + strerror(exec_errno));
    }
    ::fcntl(stdout_fd_, F_SETFL, ::fcntl(stdout_fd_, F_GETFL) | O_NONBLOCK);
    ::fcntl(stderr_fd_, F_SETFL, ::fcntl(stderr_fd_, F_GETFL) | O_NONBLOCK);
}

void SandboxSession::handshake() {
    const milliseconds budget = std::max<milliseconds>(options_.timeout, std::chrono::seconds(30));
    bool timed_out = false;
    json pong = request({{"op", "ping"}}, budget, timed_out);
    if (timed_out || pong.value("status", "") != "ok")
        throw SandboxError("sandbox runner did not answer ping" + (proc_stderr_.empty() ? "" : ": " + proc_stderr_));

    json loaded = request({{"op", "load"}, {"csv_path", dataset_copy_.filename().string()}}, budget, timed_out);
    if (timed_out) throw SandboxError("loading the dataset timed out");
    if (loaded.value("status", "") != "ok")
        throw SandboxError("dataset load failed: " + loaded.value("stderr", std::string{}));
    const std::string shape = loaded.value("stdout", std::string{});
    unsigned long r = 0, c = 0;
    if (std::sscanf(shape.c_str(), "rows=%lu cols=%lu", &r, &c) == 2) {
        rows_ = r;
        cols_ = c;
    }
    state_ = State::ready;
}

json SandboxSession::request(json req, milliseconds timeout, bool& timed_out) {
    timed_out = false;
    const std::int64_t id = next_id_++;
    req["id"] = id;
    if (!write_all(stdin_fd_, req.dump() + "\n")) {
        state_ = State::dead;
        throw SandboxError("sandbox process is not accepting input" +
                           (proc_stderr_.empty() ? "" : ": " + proc_stderr_));
    }

    const auto deadline = Clock::now() + timeout;
    std::array<char, 8192> buf;
    for (;;) {
        if (auto nl = pending_.find('\n'); nl != std::string::npos) {
            std::string line = pending_.substr(0, nl);
            pending_.erase(0, nl + 1);
            json resp = json::parse(line, nullptr, false);
            if (resp.is_discarded()) throw SandboxError("sandbox sent a non-JSON line: " + line.substr(0, 200));
            if (resp.value("id", std::int64_t{-1}) != id)
                throw SandboxError("sandbox response id mismatch (expected " + std::to_string(id) + ")");
            return resp;
        }
        auto left = std::chrono::duration_cast<milliseconds>(deadline - Clock::now());
        if (left.count() <= 0) {
            timed_out = true;
            return json::object();
        }
        std::array<pollfd, 2> fds{pollfd{stdout_fd_, POLLIN, 0}, pollfd{stderr_fd_, POLLIN, 0}};
        int rc = ::poll(fds.data(), fds.size(), static_cast<int>(left.count()));
        if (rc < 0 && errno == EINTR) continue;
        if (fds[1].revents & POLLIN) {
            ssize_t n = ::read(stderr_fd_, buf.data(), buf.size());
            if (n > 0 && proc_stderr_.size() < 65536) proc_stderr_.append(buf.data(), static_cast<std::size_t>(n));
        }
        if (fds[0].revents & (POLLIN | POLLHUP)) {
            ssize_t n = ::read(stdout_fd_, buf.data(), buf.size());
            if (n > 0) {
                pending_.append(buf.data(), static_cast<std::size_t>(n));
            } else if (n == 0) {
                state_ = State::dead;
                // Pick up any last words before reporting.
                ssize_t m;
                while ((m = ::read(stderr_fd_, buf.data(), buf.size())) > 0)
                    proc_stderr_.append(buf.data(), static_cast<std::size_t>(m));
                throw SandboxError("sandbox process exited" + (proc_stderr_.empty() ? "" : ": " + proc_stderr_));
            }
        }
    }
}

ExecutionResult SandboxSession::execute(std::string_view code) {
    if (state_ == State::dead) throw SandboxError("sandbox session " + session_id_ + " is dead");
    if (state_ != State::ready) throw SandboxError("sandbox session " + session_id_ + " is not ready");
    state_ = State::busy;
    const auto started = Clock::now();
    bool timed_out = false;
    json resp;
    try {
        resp = request({{"op", "exec"}, {"code", std::string(code)}}, options_.timeout, timed_out);
    } catch (...) {
        state_ = State::dead;
        throw;
    }

    ExecutionResult r;
    if (timed_out) {
        kill_process();
        r.status = ExecutionResult::Status::timeout;
        r.stderr_text = "execution exceeded " + std::to_string(options_.timeout.count()) +
                        " s and was stopped; the session was restarted (variables cleared, df reloaded)";
        r.duration = std::chrono::duration_cast<milliseconds>(Clock::now() - started);
        try {
            spawn();
            handshake();
        } catch (...) {
            state_ = State::dead;
            throw;
        }
        return r;
    }
    state_ = State::ready;
    const std::string status = resp.value("status", "exception");
    r.status = status == "ok" ? ExecutionResult::Status::ok
               : status == "timeout" ? ExecutionResult::Status::timeout
                                     : ExecutionResult::Status::exception;
    r.stdout_text = resp.value("stdout", std::string{});
    r.stderr_text = resp.value("stderr", std::string{});
    r.duration = std::chrono::duration_cast<milliseconds>(Clock::now() - started);
    truncate_output(r, options_.output_truncation);
    return r;
}

void SandboxSession::kill_process() {
    close_fd(stdin_fd_);
    if (pid_ > 0) {
        ::kill(-pid_, SIGKILL);
        ::kill(pid_, SIGKILL);
        while (::waitpid(pid_, nullptr, 0) < 0 && errno == EINTR) {
        }
        pid_ = -1;
    }
    close_fd(stdout_fd_);
    close_fd(stderr_fd_);
    pending_.clear();
}

void SandboxSession::shutdown() {
    if (pid_ > 0) {
        // EOF asks the runner to exit; anything still alive shortly after is killed.
        close_fd(stdin_fd_);
        const auto deadline = Clock::now() + milliseconds(300);
        while (Clock::now() < deadline) {
            pid_t r = ::waitpid(pid_, nullptr, WNOHANG);
            if (r == pid_ || (r < 0 && errno == ECHILD)) {
                ::kill(-pid_, SIGKILL);
                pid_ = -1;
                break;
            }
            std::this_thread::sleep_for(milliseconds(10));
        }
    }
    kill_process();
    if (!scratch_.empty()) {
        std::error_code ec;
        std::filesystem::remove_all(scratch_, ec);
        scratch_.clear();
    }
    state_ = State::dead;
}

LazySandbox::LazySandbox(DatasetBundle bundle, SandboxOptions options)
    : bundle_(std::move(bundle)), options_(std::move(options)) {}

ExecutionResult LazySandbox::execute(std::string_view code) {
    if (!session_) session_ = SandboxSession::start(bundle_, options_);
    return session_->execute(code);
}

}  // namespace tipline::sandbox
